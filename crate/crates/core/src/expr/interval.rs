use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::ExprError;

/// Closed interval of extended reals with outward-rounded arithmetic.
///
/// Never empty: `lo <= hi`, `lo < +∞`, `hi > -∞`. Operations that could
/// produce an empty set return `Option` or an error instead.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

fn down(v: f64) -> f64 {
    if v.is_finite() {
        v.next_down()
    } else {
        v
    }
}

fn up(v: f64) -> f64 {
    if v.is_finite() {
        v.next_up()
    } else {
        v
    }
}

// library transcendental functions are not guaranteed correctly rounded
fn down2(v: f64) -> f64 {
    down(down(v))
}

fn up2(v: f64) -> f64 {
    up(up(v))
}

/// Product with `0 * ∞ = 0`, the right convention for enclosures of
/// finite values.
fn mul0(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        0.0
    } else {
        a * b
    }
}

impl Interval {
    pub const ENTIRE: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub fn new(lo: f64, hi: f64) -> Option<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
            None
        } else {
            Some(Self { lo, hi })
        }
    }

    pub fn point(v: f64) -> Self {
        Self::new(v, v).expect("finite point")
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        if self.lo.is_finite() && self.hi.is_finite() {
            0.5 * self.lo + 0.5 * self.hi
        } else if self.lo.is_finite() {
            self.lo
        } else if self.hi.is_finite() {
            self.hi
        } else {
            0.0
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn contains_zero(&self) -> bool {
        self.contains(0.0)
    }

    pub fn is_subset(&self, other: &Interval) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        Interval::new(self.lo.max(other.lo), self.hi.min(other.hi))
    }

    fn rounded(lo: f64, hi: f64) -> Interval {
        Interval {
            lo: down(lo),
            hi: up(hi),
        }
    }

    pub fn neg(&self) -> Interval {
        Interval {
            lo: -self.hi,
            hi: -self.lo,
        }
    }

    pub fn add(&self, o: &Interval) -> Interval {
        Self::rounded(self.lo + o.lo, self.hi + o.hi)
    }

    pub fn sub(&self, o: &Interval) -> Interval {
        Self::rounded(self.lo - o.hi, self.hi - o.lo)
    }

    pub fn mul(&self, o: &Interval) -> Interval {
        let p = [
            mul0(self.lo, o.lo),
            mul0(self.lo, o.hi),
            mul0(self.hi, o.lo),
            mul0(self.hi, o.hi),
        ];
        let lo = p.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self::rounded(lo, hi)
    }

    pub fn div(&self, o: &Interval) -> Result<Interval, ExprError> {
        if o.lo == 0.0 && o.hi == 0.0 {
            return Err(ExprError::Domain("division by the zero interval".into()));
        }
        if o.contains_zero() {
            return Ok(Interval::ENTIRE);
        }
        let q = [
            self.lo / o.lo,
            self.lo / o.hi,
            self.hi / o.lo,
            self.hi / o.hi,
        ];
        if q.iter().any(|v| v.is_nan()) {
            return Ok(Interval::ENTIRE);
        }
        let lo = q.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self::rounded(lo, hi))
    }

    /// Integer power. Even exponents give the tight image of the square
    /// (e.g. `[-1,2]^2 = [0,4]`).
    pub fn powi(&self, n: i32) -> Result<Interval, ExprError> {
        if n == 0 {
            return Ok(Interval::point(1.0));
        }
        let k = n.unsigned_abs();
        // magnitude range of |x| over the interval
        let (mag_lo, mag_hi) = if self.lo >= 0.0 {
            (self.lo, self.hi)
        } else if self.hi <= 0.0 {
            (-self.hi, -self.lo)
        } else {
            (0.0, self.hi.max(-self.lo))
        };
        let (plo, phi) = (pow_chain_down(mag_lo, k), pow_chain_up(mag_hi, k));
        let pos = if k.is_multiple_of(2) || self.lo >= 0.0 {
            Interval { lo: plo, hi: phi }
        } else if self.hi <= 0.0 {
            Interval { lo: -phi, hi: -plo }
        } else {
            Interval {
                lo: -pow_chain_up(-self.lo, k),
                hi: pow_chain_up(self.hi, k),
            }
        };
        if n > 0 {
            Ok(pos)
        } else {
            Interval::point(1.0).div(&pos)
        }
    }

    pub fn sqrt(&self) -> Result<Interval, ExprError> {
        if self.hi < 0.0 {
            return Err(ExprError::Domain(format!("sqrt of {self}")));
        }
        let lo = self.lo.max(0.0);
        Ok(Interval {
            lo: down(lo.sqrt()).max(0.0),
            hi: up(self.hi.sqrt()),
        })
    }

    pub fn log(&self) -> Result<Interval, ExprError> {
        if self.hi <= 0.0 {
            return Err(ExprError::Domain(format!("log of {self}")));
        }
        let lo = if self.lo <= 0.0 {
            f64::NEG_INFINITY
        } else {
            down2(self.lo.ln())
        };
        Ok(Interval {
            lo,
            hi: up2(self.hi.ln()),
        })
    }

    pub fn exp(&self) -> Interval {
        Interval {
            lo: down2(self.lo.exp()).max(0.0),
            hi: up2(self.hi.exp()),
        }
    }

    pub fn abs(&self) -> Interval {
        if self.lo >= 0.0 {
            *self
        } else if self.hi <= 0.0 {
            self.neg()
        } else {
            Interval {
                lo: 0.0,
                hi: self.hi.max(-self.lo),
            }
        }
    }

    pub fn sin(&self) -> Interval {
        self.periodic(f64::sin, FRAC_PI_2)
    }

    pub fn cos(&self) -> Interval {
        self.periodic(f64::cos, 0.0)
    }

    /// Range of a 2π-periodic function with maximum at `peak + 2kπ` and
    /// minimum at `peak + π + 2kπ`, monotone in between.
    fn periodic(&self, f: fn(f64) -> f64, peak: f64) -> Interval {
        let unit = Interval { lo: -1.0, hi: 1.0 };
        if !(self.lo.is_finite() && self.hi.is_finite()) || self.width() >= 2.0 * PI {
            return unit;
        }
        // slack absorbs rounding in locating the critical points
        let slack = 1e-9 * (1.0 + self.lo.abs().max(self.hi.abs()));
        let hits = |c: f64| {
            let k = ((self.lo - slack - c) / (2.0 * PI)).ceil();
            c + 2.0 * PI * k <= self.hi + slack
        };
        let (a, b) = (f(self.lo), f(self.hi));
        let lo = if hits(peak + PI) {
            -1.0
        } else {
            down2(a.min(b)).max(-1.0)
        };
        let hi = if hits(peak) {
            1.0
        } else {
            up2(a.max(b)).min(1.0)
        };
        Interval { lo, hi }
    }
}

/// `|x|^k` by repeated squaring, the same operation sequence as point
/// evaluation, rounded down (`x >= 0`).
fn pow_chain_down(x: f64, k: u32) -> f64 {
    pow_chain(x, k, down).max(0.0)
}

fn pow_chain_up(x: f64, k: u32) -> f64 {
    pow_chain(x, k, up)
}

fn pow_chain(x: f64, mut k: u32, round: fn(f64) -> f64) -> f64 {
    let mut base = x;
    let mut acc = 1.0;
    let mut first = true;
    loop {
        if k & 1 == 1 {
            acc = if first { base } else { round(acc * base) };
            first = false;
        }
        k >>= 1;
        if k == 0 {
            return acc;
        }
        base = round(base * base);
    }
}

/// Point evaluation of `x^n` through the squaring chain used by
/// [`Interval::powi`].
pub(crate) fn powi_point(x: f64, n: i32) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let k = n.unsigned_abs();
    let mag = pow_chain(x.abs(), k, |v| v);
    let signed = if x < 0.0 && k % 2 == 1 { -mag } else { mag };
    if n > 0 {
        signed
    } else {
        1.0 / signed
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(lo: f64, hi: f64) -> Interval {
        Interval::new(lo, hi).unwrap()
    }

    #[test]
    fn even_power_is_tight() {
        let sq = iv(-1.0, 2.0).powi(2).unwrap();
        assert_eq!((sq.lo(), sq.hi()), (0.0, 4.0_f64.next_up()));
        let cube = iv(-1.0, 2.0).powi(3).unwrap();
        assert!(cube.contains(-1.0) && cube.contains(8.0) && cube.lo() < -0.99 && cube.hi() < 8.01);
    }

    #[test]
    fn negative_powers() {
        let r = iv(2.0, 4.0).powi(-1).unwrap();
        assert!(r.contains(0.25) && r.contains(0.5));
        assert_eq!(iv(-1.0, 1.0).powi(-2).unwrap(), Interval::ENTIRE);
        assert!(iv(0.0, 0.0).powi(-1).is_err());
    }

    #[test]
    fn division_through_zero() {
        assert_eq!(iv(1.0, 2.0).div(&iv(-1.0, 1.0)).unwrap(), Interval::ENTIRE);
        assert!(iv(1.0, 2.0).div(&iv(0.0, 0.0)).is_err());
    }

    #[test]
    fn domains_of_log_and_sqrt() {
        assert!(iv(-2.0, -1.0).sqrt().is_err());
        assert_eq!(iv(-1.0, 4.0).sqrt().unwrap().lo(), 0.0);
        assert!(iv(-2.0, 0.0).log().is_err());
        assert_eq!(iv(-1.0, 1.0).log().unwrap().lo(), f64::NEG_INFINITY);
    }

    #[test]
    fn trig_ranges() {
        let s = iv(0.0, PI).sin();
        assert_eq!(s.hi(), 1.0);
        assert!(s.lo() <= 0.0 && s.lo() > -1e-15);
        let c = iv(0.5, 1.0).cos();
        assert!(c.contains(0.5f64.cos()) && c.contains(1.0f64.cos()) && c.hi() < 0.88);
        assert_eq!(iv(-10.0, 10.0).cos(), iv(-1.0, 1.0));
        let c2 = iv(3.0, 3.5).cos();
        assert_eq!(c2.lo(), -1.0);
    }

    #[test]
    fn point_power_inside_interval_power() {
        for &x in &[-3.7, -1.0, -0.3, 0.0, 0.7, 1.9, 12.5] {
            for n in -5..=7 {
                if x == 0.0 && n < 0 {
                    continue;
                }
                let v = powi_point(x, n);
                let i = Interval::point(x).powi(n).unwrap();
                assert!(i.contains(v), "{x}^{n} = {v} not in {i}");
            }
        }
    }
}
