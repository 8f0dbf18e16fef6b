//! Expressions `F_j(x, ξ)` and `f_j(x)` over space variables `x1..xn` and
//! jet variables `u[i,(α)]`.
//!
//! Grammar:
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := atom ('^' integer)?
//! atom   := number | 'x'index | 'u[' index ',(' index {',' index} ')]'
//!         | func '(' expr ')' | '(' expr ')' | '-' atom
//! ```
//!
//! with `func` one of `sin cos exp log abs sqrt` and signed integer
//! exponents. [`Display`](std::fmt::Display) renders a canonical form that
//! parses back to the same tree.

mod interval;
mod parse;

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::jets::{MultiIndex, MultiIndexSet};
pub use interval::Interval;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("{line}:{col}: syntax error: {msg}")]
    Syntax {
        line: usize,
        col: usize,
        msg: String,
    },
    #[error("{line}:{col}: unknown identifier {name:?}")]
    UnknownIdentifier {
        line: usize,
        col: usize,
        name: String,
    },
    #[error("{line}:{col}: {msg}")]
    Signature {
        line: usize,
        col: usize,
        msg: String,
    },
    #[error("unbound variable {0}")]
    Unbound(String),
    #[error("domain error: {0}")]
    Domain(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Abs,
    Sqrt,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "abs" => Func::Abs,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    /// Space variable, 0-based (`x1` is `Var(0)`).
    Var(usize),
    /// Jet variable with 0-based component and its precomputed flat slot.
    Jet {
        component: usize,
        alpha: MultiIndex,
        slot: usize,
    },
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Func(Func, Box<Expr>),
}

fn domain(msg: String) -> ExprError {
    ExprError::Domain(msg)
}

impl Expr {
    pub fn parse(text: &str, set: &MultiIndexSet) -> Result<Expr, ExprError> {
        parse::parse(text, set)
    }

    /// Flat jet slots referenced by the expression.
    pub fn jet_slots(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        self.visit(&mut |e| {
            if let Expr::Jet { slot, .. } = e {
                out.insert(*slot);
            }
        });
        out
    }

    pub fn uses_space(&self) -> bool {
        let mut any = false;
        self.visit(&mut |e| any |= matches!(e, Expr::Var(_)));
        any
    }

    fn visit(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Num(_) | Expr::Var(_) | Expr::Jet { .. } => {}
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Func(_, a) => a.visit(f),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.visit(f);
                b.visit(f);
            }
        }
    }

    /// Floating-point evaluation; `jet` holds values in slot order.
    pub fn eval_point(&self, x: &[f64], jet: &[f64]) -> Result<f64, ExprError> {
        let v = match self {
            Expr::Num(c) => *c,
            Expr::Var(i) => *x
                .get(*i)
                .ok_or_else(|| ExprError::Unbound(format!("x{}", i + 1)))?,
            Expr::Jet { slot, .. } => *jet
                .get(*slot)
                .ok_or_else(|| ExprError::Unbound(self.to_string()))?,
            Expr::Neg(a) => -a.eval_point(x, jet)?,
            Expr::Add(a, b) => a.eval_point(x, jet)? + b.eval_point(x, jet)?,
            Expr::Sub(a, b) => a.eval_point(x, jet)? - b.eval_point(x, jet)?,
            Expr::Mul(a, b) => a.eval_point(x, jet)? * b.eval_point(x, jet)?,
            Expr::Div(a, b) => {
                let d = b.eval_point(x, jet)?;
                if d == 0.0 {
                    return Err(domain(format!("division by zero in {self}")));
                }
                a.eval_point(x, jet)? / d
            }
            Expr::Pow(a, n) => {
                let v = a.eval_point(x, jet)?;
                if v == 0.0 && *n < 0 {
                    return Err(domain(format!("negative power of zero in {self}")));
                }
                interval::powi_point(v, *n)
            }
            Expr::Func(f, a) => {
                let v = a.eval_point(x, jet)?;
                match f {
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Exp => v.exp(),
                    Func::Abs => v.abs(),
                    Func::Log if v <= 0.0 => return Err(domain(format!("log of {v}"))),
                    Func::Log => v.ln(),
                    Func::Sqrt if v < 0.0 => return Err(domain(format!("sqrt of {v}"))),
                    Func::Sqrt => v.sqrt(),
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(domain(format!("non-finite value in {self}")))
        }
    }

    /// Outward-rounded natural interval extension. The result contains
    /// every `eval_point` over the boxes.
    pub fn eval_interval(&self, x: &[Interval], jet: &[Interval]) -> Result<Interval, ExprError> {
        Ok(match self {
            Expr::Num(c) => Interval::point(*c),
            Expr::Var(i) => *x
                .get(*i)
                .ok_or_else(|| ExprError::Unbound(format!("x{}", i + 1)))?,
            Expr::Jet { slot, .. } => *jet
                .get(*slot)
                .ok_or_else(|| ExprError::Unbound(self.to_string()))?,
            Expr::Neg(a) => a.eval_interval(x, jet)?.neg(),
            Expr::Add(a, b) => a.eval_interval(x, jet)?.add(&b.eval_interval(x, jet)?),
            Expr::Sub(a, b) => a.eval_interval(x, jet)?.sub(&b.eval_interval(x, jet)?),
            Expr::Mul(a, b) => a.eval_interval(x, jet)?.mul(&b.eval_interval(x, jet)?),
            Expr::Div(a, b) => a.eval_interval(x, jet)?.div(&b.eval_interval(x, jet)?)?,
            Expr::Pow(a, n) => a.eval_interval(x, jet)?.powi(*n)?,
            Expr::Func(f, a) => {
                let v = a.eval_interval(x, jet)?;
                match f {
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Exp => v.exp(),
                    Func::Abs => v.abs(),
                    Func::Log => v.log()?,
                    Func::Sqrt => v.sqrt()?,
                }
            }
        })
    }

    /// Symbolic partial derivative with respect to the jet variable in
    /// `slot`, with trivial 0/1 folding.
    pub fn diff_jet(&self, slot: usize) -> Expr {
        use Expr::*;
        match self {
            Num(_) | Var(_) => zero(),
            Jet { slot: s, .. } => Num(if *s == slot { 1.0 } else { 0.0 }),
            Neg(a) => neg(a.diff_jet(slot)),
            Add(a, b) => add(a.diff_jet(slot), b.diff_jet(slot)),
            Sub(a, b) => sub(a.diff_jet(slot), b.diff_jet(slot)),
            Mul(a, b) => add(
                mul(a.diff_jet(slot), (**b).clone()),
                mul((**a).clone(), b.diff_jet(slot)),
            ),
            Div(a, b) => {
                let (da, db) = (a.diff_jet(slot), b.diff_jet(slot));
                if is_zero(&db) {
                    div(da, (**b).clone())
                } else {
                    let num = sub(mul(da, (**b).clone()), mul((**a).clone(), db));
                    div(num, Pow(b.clone(), 2))
                }
            }
            Pow(a, n) => {
                let da = a.diff_jet(slot);
                if is_zero(&da) {
                    return zero();
                }
                let inner = match n - 1 {
                    0 => Num(1.0),
                    1 => (**a).clone(),
                    k => Pow(a.clone(), k),
                };
                mul(mul(Num(*n as f64), inner), da)
            }
            Func(f, a) => {
                let da = a.diff_jet(slot);
                if is_zero(&da) {
                    return zero();
                }
                let a = (**a).clone();
                let outer = match f {
                    self::Func::Sin => Func(self::Func::Cos, Box::new(a)),
                    self::Func::Cos => neg(Func(self::Func::Sin, Box::new(a))),
                    self::Func::Exp => Func(self::Func::Exp, Box::new(a)),
                    self::Func::Log => return div(da, a),
                    self::Func::Sqrt => {
                        return div(da, mul(Num(2.0), Func(self::Func::Sqrt, Box::new(a))));
                    }
                    self::Func::Abs => div(a.clone(), Func(self::Func::Abs, Box::new(a))),
                };
                mul(outer, da)
            }
        }
    }
}

fn zero() -> Expr {
    Expr::Num(0.0)
}

fn is_zero(e: &Expr) -> bool {
    matches!(e, Expr::Num(c) if *c == 0.0)
}

fn is_one(e: &Expr) -> bool {
    matches!(e, Expr::Num(c) if *c == 1.0)
}

fn neg(a: Expr) -> Expr {
    if is_zero(&a) {
        a
    } else {
        Expr::Neg(Box::new(a))
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    if is_zero(&a) {
        b
    } else if is_zero(&b) {
        a
    } else {
        Expr::Add(Box::new(a), Box::new(b))
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    if is_zero(&b) {
        a
    } else if is_zero(&a) {
        neg(b)
    } else {
        Expr::Sub(Box::new(a), Box::new(b))
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    if is_zero(&a) || is_zero(&b) {
        zero()
    } else if is_one(&a) {
        b
    } else if is_one(&b) {
        a
    } else {
        Expr::Mul(Box::new(a), Box::new(b))
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    if is_zero(&a) {
        zero()
    } else if is_one(&b) {
        a
    } else {
        Expr::Div(Box::new(a), Box::new(b))
    }
}

fn is_sum(e: &Expr) -> bool {
    matches!(e, Expr::Add(..) | Expr::Sub(..))
}

fn is_binary(e: &Expr) -> bool {
    matches!(
        e,
        Expr::Add(..) | Expr::Sub(..) | Expr::Mul(..) | Expr::Div(..)
    )
}

struct Wrap<'a>(&'a Expr, bool);

impl fmt::Display for Wrap<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.1 {
            write!(f, "({})", self.0)
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(c) => write!(f, "{c}"),
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Jet {
                component, alpha, ..
            } => write!(f, "u[{},{alpha}]", component + 1),
            Expr::Neg(a) => {
                let bare = matches!(
                    **a,
                    Expr::Num(_) | Expr::Var(_) | Expr::Jet { .. } | Expr::Func(..) | Expr::Neg(_)
                );
                write!(f, "-{}", Wrap(a, !bare))
            }
            Expr::Add(a, b) => write!(f, "{} + {}", a, Wrap(b, is_sum(b))),
            Expr::Sub(a, b) => write!(f, "{} - {}", a, Wrap(b, is_sum(b))),
            Expr::Mul(a, b) => write!(f, "{} * {}", Wrap(a, is_sum(a)), Wrap(b, is_binary(b))),
            Expr::Div(a, b) => write!(f, "{} / {}", Wrap(a, is_sum(a)), Wrap(b, is_binary(b))),
            Expr::Pow(a, n) => {
                let paren = is_binary(a) || matches!(**a, Expr::Pow(..));
                write!(f, "{}^{n}", Wrap(a, paren))
            }
            Expr::Func(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}
