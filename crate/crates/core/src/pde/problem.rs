//! Problem files: `key = value` lines, `#` starts a comment.
//!
//! ```text
//! n = 1
//! K = 1
//! m = 1
//! box.lo = 0
//! box.hi = 3
//! grid = 512
//! F1 = u[1,(1)] + u[1,(0)]^3
//! f1 = cos(x1) + sin(x1)^3
//! exact1 = sin(x1)
//! ```
//!
//! `box.lo` / `box.hi` take comma-separated lists when `n > 1`; `grid` and
//! the `exact*` keys are optional.

use std::collections::BTreeMap;

use super::{ExactSolution, PdeError, PdeSystem};
use crate::jets::Signature;

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub signature: Signature,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub grid: Option<usize>,
    pub ops: Vec<String>,
    pub rhs: Vec<String>,
    pub exact: Option<Vec<String>>,
}

fn key_err(key: &str, msg: impl Into<String>) -> PdeError {
    PdeError::SpecKey {
        key: key.into(),
        msg: msg.into(),
    }
}

fn take<'a>(map: &mut BTreeMap<String, (usize, &'a str)>, key: &str) -> Result<&'a str, PdeError> {
    map.remove(key)
        .map(|(_, v)| v)
        .ok_or_else(|| key_err(key, "missing"))
}

fn uint(map: &mut BTreeMap<String, (usize, &str)>, key: &str) -> Result<usize, PdeError> {
    let v = take(map, key)?;
    v.parse()
        .map_err(|_| key_err(key, format!("expected a non-negative integer, found {v:?}")))
}

fn floats(v: &str, key: &str) -> Result<Vec<f64>, PdeError> {
    v.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| key_err(key, format!("expected a number, found {:?}", t.trim())))
        })
        .collect()
}

impl ProblemSpec {
    pub fn parse(text: &str) -> Result<Self, PdeError> {
        let mut map: BTreeMap<String, (usize, &str)> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(PdeError::Spec {
                    line: i + 1,
                    msg: "expected `key = value`".into(),
                });
            };
            let k = k.trim();
            if map.insert(k.to_string(), (i + 1, v.trim())).is_some() {
                return Err(PdeError::Spec {
                    line: i + 1,
                    msg: format!("duplicate key {k}"),
                });
            }
        }
        let n = uint(&mut map, "n")?;
        let k = uint(&mut map, "K")?;
        let m = uint(&mut map, "m")?;
        if n == 0 || k == 0 {
            return Err(key_err(
                if n == 0 { "n" } else { "K" },
                "must be at least 1",
            ));
        }
        let m = u32::try_from(m).map_err(|_| key_err("m", "too large"))?;
        let lo = floats(take(&mut map, "box.lo")?, "box.lo")?;
        let hi = floats(take(&mut map, "box.hi")?, "box.hi")?;
        for (key, v) in [("box.lo", &lo), ("box.hi", &hi)] {
            if v.len() != n {
                return Err(key_err(
                    key,
                    format!("expected {n} values, found {}", v.len()),
                ));
            }
        }
        let grid = if map.contains_key("grid") {
            Some(uint(&mut map, "grid")?)
        } else {
            None
        };
        let mut list = |prefix: &str, required: bool| -> Result<Option<Vec<String>>, PdeError> {
            if !required && !map.contains_key(&format!("{prefix}1")) {
                return Ok(None);
            }
            (1..=k)
                .map(|j| take(&mut map, &format!("{prefix}{j}")).map(str::to_string))
                .collect::<Result<Vec<_>, _>>()
                .map(Some)
        };
        let ops = list("F", true)?.unwrap_or_default();
        let rhs = list("f", true)?.unwrap_or_default();
        let exact = list("exact", false)?;
        if let Some((key, (line, _))) = map.into_iter().next() {
            return Err(PdeError::Spec {
                line,
                msg: format!("unknown or surplus key {key}"),
            });
        }
        let spec = Self {
            signature: Signature::new(n, k, m),
            lo,
            hi,
            grid,
            ops,
            rhs,
            exact,
        };
        spec.system()?;
        spec.exact_solution()?;
        Ok(spec)
    }

    pub fn system(&self) -> Result<PdeSystem, PdeError> {
        let ops: Vec<&str> = self.ops.iter().map(String::as_str).collect();
        let rhs: Vec<&str> = self.rhs.iter().map(String::as_str).collect();
        PdeSystem::new(self.signature, &ops, &rhs, self.lo.clone(), self.hi.clone())
    }

    pub fn exact_solution(&self) -> Result<Option<ExactSolution>, PdeError> {
        let Some(exact) = &self.exact else {
            return Ok(None);
        };
        let set = std::sync::Arc::new(crate::jets::MultiIndexSet::new(self.signature));
        let srcs: Vec<&str> = exact.iter().map(String::as_str).collect();
        ExactSolution::new(set, &srcs).map(Some)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::ExprError;

    const MANUFACTURED: &str = "\
# manufactured
n = 1
K = 1
m = 1
box.lo = 0
box.hi = 3
grid = 512
F1 = u[1,(1)] + u[1,(0)]^3
f1 = cos(x1) + sin(x1)^3   # rhs
exact1 = sin(x1)
";

    #[test]
    fn loads_manufactured_problem() {
        let s = ProblemSpec::parse(MANUFACTURED).unwrap();
        assert_eq!(s.signature, Signature::new(1, 1, 1));
        assert_eq!(
            (s.lo.clone(), s.hi.clone(), s.grid),
            (vec![0.0], vec![3.0], Some(512))
        );
        assert!(s.exact_solution().unwrap().is_some());
    }

    #[test]
    fn names_missing_key() {
        let text = MANUFACTURED.replace("f1 = cos(x1) + sin(x1)^3   # rhs\n", "");
        let e = ProblemSpec::parse(&text).unwrap_err();
        assert_eq!(
            e,
            PdeError::SpecKey {
                key: "f1".into(),
                msg: "missing".into()
            }
        );
    }

    #[test]
    fn signature_violation_is_reported_for_its_key() {
        let text = MANUFACTURED.replace("m = 1", "m = 0");
        match ProblemSpec::parse(&text).unwrap_err() {
            PdeError::Expr {
                key,
                source: ExprError::Signature { .. },
            } => assert_eq!(key, "F1"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_unknown_keys_and_garbage() {
        assert!(matches!(
            ProblemSpec::parse(&format!("{MANUFACTURED}F2 = 1\n")),
            Err(PdeError::Spec { line: 11, .. })
        ));
        assert!(matches!(
            ProblemSpec::parse("n 1"),
            Err(PdeError::Spec { line: 1, .. })
        ));
    }
}
