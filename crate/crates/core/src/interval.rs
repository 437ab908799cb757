//! Closed real intervals with possibly infinite endpoints.
//!
//! Endpoints are computed with the same floating-point operations a point
//! evaluation would use. Round-to-nearest is monotone, so for every point
//! `x` in `a` and `y` in `b` the rounded result of `x op y` lies inside the
//! interval computed for `a op b`; no outward rounding is needed for the
//! bounds to contain every evaluated value.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

/// The sign of every value in an interval, when one can be certified.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Zero,
    NonNegative,
    NonPositive,
    Unknown,
}

impl Interval {
    pub const ENTIRE: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "empty interval [{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub fn point(v: f64) -> Self {
        Interval { lo: v, hi: v }
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn contains_zero(&self) -> bool {
        self.contains(0.0)
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    pub fn sign(&self) -> Sign {
        if self.lo == 0.0 && self.hi == 0.0 {
            Sign::Zero
        } else if self.lo >= 0.0 {
            Sign::NonNegative
        } else if self.hi <= 0.0 {
            Sign::NonPositive
        } else {
            Sign::Unknown
        }
    }

    pub fn neg(self) -> Interval {
        Interval {
            lo: -self.hi,
            hi: -self.lo,
        }
    }

    pub fn add(self, o: Interval) -> Interval {
        fix(self.lo + o.lo, self.hi + o.hi)
    }

    pub fn sub(self, o: Interval) -> Interval {
        fix(self.lo - o.hi, self.hi - o.lo)
    }

    pub fn mul(self, o: Interval) -> Interval {
        // Point products are exact corner products, which keeps fully
        // assigned expressions bit-identical to point evaluation.
        if self.is_point() && o.is_point() {
            let v = self.lo * o.lo;
            return if v.is_nan() {
                Interval::ENTIRE
            } else {
                Interval::point(v)
            };
        }
        corners([
            self.lo * o.lo,
            self.lo * o.hi,
            self.hi * o.lo,
            self.hi * o.hi,
        ])
    }

    /// Interval quotient. `None` when the divisor contains zero.
    pub fn div(self, o: Interval) -> Option<Interval> {
        if o.contains_zero() {
            return None;
        }
        if self.is_point() && o.is_point() {
            return Some(Interval::point(self.lo / o.lo));
        }
        Some(corners([
            self.lo / o.lo,
            self.lo / o.hi,
            self.hi / o.lo,
            self.hi / o.hi,
        ]))
    }

    pub fn min(self, o: Interval) -> Interval {
        Interval {
            lo: self.lo.min(o.lo),
            hi: self.hi.min(o.hi),
        }
    }

    pub fn max(self, o: Interval) -> Interval {
        Interval {
            lo: self.lo.max(o.lo),
            hi: self.hi.max(o.hi),
        }
    }
}

fn fix(lo: f64, hi: f64) -> Interval {
    // inf - inf style cancellations
    if lo.is_nan() || hi.is_nan() {
        Interval::ENTIRE
    } else {
        Interval { lo, hi }
    }
}

fn corners(c: [f64; 4]) -> Interval {
    if c.iter().any(|v| v.is_nan()) {
        return Interval::ENTIRE;
    }
    let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Interval { lo, hi }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn basic_ops() {
        let a = Interval::new(2.0, 2.0);
        let b = Interval::new(3.0, 5.0);
        assert_eq!(a.mul(b), Interval::new(6.0, 10.0));
        assert_eq!(b.sub(b), Interval::new(-2.0, 2.0));
        assert_eq!(Interval::new(-1.0, 1.0).mul(b), Interval::new(-5.0, 5.0));
        assert!(b.div(Interval::new(-1.0, 1.0)).is_none());
        assert_eq!(
            b.div(Interval::new(1.0, 2.0)).unwrap(),
            Interval::new(1.5, 5.0)
        );
    }

    #[test]
    fn signs() {
        assert_eq!(Interval::new(0.0, 0.0).sign(), Sign::Zero);
        assert_eq!(Interval::new(0.0, 3.0).sign(), Sign::NonNegative);
        assert_eq!(Interval::new(-3.0, 0.0).sign(), Sign::NonPositive);
        assert_eq!(Interval::new(-1.0, 1.0).sign(), Sign::Unknown);
    }

    fn iv() -> impl Strategy<Value = (Interval, f64)> {
        (-100.0f64..100.0, 0.0f64..50.0, 0.0f64..=1.0).prop_map(|(lo, w, t)| {
            let i = Interval::new(lo, lo + w);
            (i, (lo + t * w).clamp(i.lo, i.hi))
        })
    }

    proptest! {
        #[test]
        fn ops_contain_point_results((a, x) in iv(), (b, y) in iv()) {
            prop_assert!(a.add(b).contains(x + y));
            prop_assert!(a.sub(b).contains(x - y));
            prop_assert!(a.mul(b).contains(x * y));
            prop_assert!(a.min(b).contains(x.min(y)));
            prop_assert!(a.max(b).contains(x.max(y)));
            if let Some(q) = a.div(b) {
                prop_assert!(q.contains(x / y));
            }
        }
    }
}
