use ordercomplete::{Expr, ExprError, Interval, MultiIndexSet, Signature};
use proptest::prelude::*;

fn set() -> MultiIndexSet {
    MultiIndexSet::new(Signature::new(2, 1, 1))
}

const CORPUS: &[&str] = &[
    "1",
    "-2.5",
    "x1",
    "x1 + x2",
    "x1 - x2 - 3",
    "x1 - (x2 - 3)",
    "2 * x1 * x2",
    "x1 / (x2 + 4)",
    "x1 / x2 / 3",
    "x1 / (x2 / 3)",
    "-x1^2",
    "(-x1)^2",
    "x1^-2 + x2^3",
    "sin(x1) * cos(x2)",
    "exp(-x1^2) + log(2 + x2^2)",
    "sqrt(1 + abs(x1))",
    "u[1,(0,0)]",
    "u[1,(1,0)] + u[1,(0,1)]",
    "u[1,(1,0)] + u[1,(0,0)]^3 - cos(x1)",
    "u[1,(0,1)] * exp(u[1,(0,0)]) / (1 + x2^2)",
    "--x1",
    "1e-3 * x1 + 2.5e10",
    "sin(cos(exp(u[1,(1,0)])))",
    "(x1 + x2) * (x1 - x2)",
];

#[test]
fn corpus_round_trips() {
    let s = set();
    for src in CORPUS {
        let e = Expr::parse(src, &s).unwrap_or_else(|err| panic!("{src}: {err}"));
        let text = e.to_string();
        let again = Expr::parse(&text, &s).unwrap_or_else(|err| panic!("{text}: {err}"));
        assert_eq!(again, e, "{src} rendered as {text}");
        assert_eq!(again.to_string(), text);
    }
}

#[test]
fn parse_errors_carry_positions() {
    let s = set();
    match Expr::parse("x1 +\n  * 2", &s) {
        Err(ExprError::Syntax { line, col, .. }) => assert_eq!((line, col), (2, 3)),
        other => panic!("{other:?}"),
    }
    assert!(matches!(
        Expr::parse("tan(x1)", &s),
        Err(ExprError::UnknownIdentifier { .. })
    ));
    assert!(matches!(
        Expr::parse("u[1,(2,0)]", &s),
        Err(ExprError::Signature { .. })
    ));
    assert!(matches!(
        Expr::parse("u[2,(0,0)]", &s),
        Err(ExprError::Signature { .. })
    ));
    assert!(matches!(
        Expr::parse("x3", &s),
        Err(ExprError::Signature { .. })
    ));
}

fn leaf() -> impl Strategy<Value = String> {
    prop_oneof![
        (-5.0f64..5.0).prop_map(|v| format!("{v}")),
        Just("x1".to_string()),
        Just("x2".to_string()),
        Just("u[1,(0,0)]".to_string()),
        Just("u[1,(1,0)]".to_string()),
        Just("u[1,(0,1)]".to_string()),
    ]
}

fn smooth_expr() -> impl Strategy<Value = String> {
    leaf().prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a}) + ({b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a}) - ({b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a}) * ({b})")),
            (inner.clone(), 0i32..4).prop_map(|(a, k)| format!("({a})^{k}")),
            inner.clone().prop_map(|a| format!("-({a})")),
            inner.clone().prop_map(|a| format!("sin({a})")),
            inner.clone().prop_map(|a| format!("cos({a})")),
            inner.clone().prop_map(|a| format!("exp(({a}) / 8)")),
        ]
    })
}

fn any_expr() -> impl Strategy<Value = String> {
    smooth_expr().prop_recursive(2, 32, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a}) / ({b})")),
            inner.clone().prop_map(|a| format!("abs({a})")),
            inner.clone().prop_map(|a| format!("sqrt({a})")),
            inner.clone().prop_map(|a| format!("log({a})")),
            (inner.clone(), -3i32..0).prop_map(|(a, k)| format!("({a})^{k}")),
        ]
    })
}

fn point(x: [f64; 2], j: [f64; 3]) -> (Vec<f64>, Vec<f64>) {
    (x.to_vec(), j.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn random_expressions_round_trip(src in any_expr()) {
        let s = set();
        let e = Expr::parse(&src, &s).unwrap();
        let text = e.to_string();
        let again = Expr::parse(&text, &s).unwrap();
        prop_assert_eq!(&again, &e);
        prop_assert_eq!(again.to_string(), text);
    }

    #[test]
    fn interval_evaluation_encloses_points(
        src in any_expr(),
        lo in prop::array::uniform5(-3.0f64..3.0),
        w in prop::array::uniform5(0.0f64..2.0),
        t in prop::collection::vec(prop::array::uniform5(0.0f64..=1.0), 16),
    ) {
        let e = Expr::parse(&src, &set()).unwrap();
        let boxes: Vec<Interval> = (0..5).map(|i| Interval::new(lo[i], lo[i] + w[i]).unwrap()).collect();
        let Ok(enc) = e.eval_interval(&boxes[..2], &boxes[2..]) else { return Ok(()) };
        for ti in &t {
            let v: Vec<f64> = (0..5).map(|i| lo[i] + ti[i] * w[i]).collect();
            if let Ok(y) = e.eval_point(&v[..2], &v[2..]) {
                prop_assert!(enc.contains(y), "{} = {} not in {:?} at {:?}", src, y, enc, v);
            }
        }
    }

    #[test]
    fn jet_derivative_matches_central_difference(
        src in smooth_expr(),
        x in prop::array::uniform2(-1.0f64..1.0),
        j in prop::array::uniform3(-1.0f64..1.0),
        slot in 0usize..3,
    ) {
        let e = Expr::parse(&src, &set()).unwrap();
        let d = e.diff_jet(slot);
        let (x, jet) = point(x, j);
        let Ok(exact) = d.eval_point(&x, &jet) else { return Ok(()) };
        let h = 1e-5;
        let mut jp = jet.clone();
        let mut jm = jet.clone();
        jp[slot] += h;
        jm[slot] -= h;
        let (Ok(a), Ok(b)) = (e.eval_point(&x, &jp), e.eval_point(&x, &jm)) else { return Ok(()) };
        let fd = (a - b) / (2.0 * h);
        let scale = 1.0 + exact.abs().max(a.abs()).max(b.abs());
        prop_assert!((fd - exact).abs() <= 1e-4 * scale, "{}: d/d slot {} = {} vs fd {}", src, slot, exact, fd);
    }
}
