use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::scalar::Real;

/// A real number or negative infinity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ExtReal<S> {
    NegInf,
    Finite(S),
}

impl<S: Real> ExtReal<S> {
    /// Adds a real number; negative infinity absorbs.
    pub fn add(self, h: S) -> Self {
        match self {
            Self::NegInf => Self::NegInf,
            Self::Finite(x) => Self::Finite(x + h),
        }
    }

    pub fn finite(self) -> Option<S> {
        match self {
            Self::NegInf => None,
            Self::Finite(x) => Some(x),
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Self::Finite(_))
    }
}

impl<S: Real> fmt::Display for ExtReal<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NegInf => write!(f, "-inf"),
            Self::Finite(x) => write!(f, "{x}"),
        }
    }
}

/// Left/right linear slope corrections `(L, R)` with `L + R < 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopePair<S> {
    left: ExtReal<S>,
    right: ExtReal<S>,
}

impl<S: Real> SlopePair<S> {
    pub fn new(left: ExtReal<S>, right: ExtReal<S>) -> Result<Self> {
        if let (ExtReal::Finite(l), ExtReal::Finite(r)) = (left, right) {
            if !(l.is_finite() && r.is_finite()) {
                return Err(invalid("slopes", "finite slopes must be real numbers"));
            }
            if !(l + r < S::zero()) {
                return Err(invalid("slopes", format!("L + R must be negative, got {l} + {r}")));
            }
        }
        Ok(Self { left, right })
    }

    pub fn finite(l: S, r: S) -> Result<Self> {
        Self::new(ExtReal::Finite(l), ExtReal::Finite(r))
    }

    pub fn left(&self) -> ExtReal<S> {
        self.left
    }

    pub fn right(&self) -> ExtReal<S> {
        self.right
    }

    /// `L + R`, or `None` when either side is negative infinity.
    pub fn sum(&self) -> Option<S> {
        Some(self.left.finite()? + self.right.finite()?)
    }
}

/// Slopes of the time-shifted state: `(L + 2h, R - 2h)`.
pub fn shift_slopes<S: Real>(pair: SlopePair<S>, h: S) -> SlopePair<S> {
    let two = S::lit(2.0);
    SlopePair { left: pair.left.add(two * h), right: pair.right.add(-two * h) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn shift_examples() {
        let p = SlopePair::finite(-4.0, -2.0).unwrap();
        assert_eq!(shift_slopes(p, 0.0), p);
        assert_eq!(shift_slopes(p, 1.0), SlopePair::finite(-2.0, -4.0).unwrap());
        let q = SlopePair::new(ExtReal::NegInf, ExtReal::Finite(-2.0)).unwrap();
        assert_eq!(shift_slopes(q, 1.0), SlopePair::new(ExtReal::NegInf, ExtReal::Finite(-4.0)).unwrap());
    }

    #[test]
    fn validity() {
        assert!(SlopePair::finite(1.0, -1.0).is_err());
        assert!(SlopePair::finite(3.0, -4.0).is_ok());
        assert!(SlopePair::new(ExtReal::Finite(100.0), ExtReal::NegInf).is_ok());
    }

    proptest! {
        #[test]
        fn shift_group_action(l in -50.0f64..50.0, d in 0.01f64..50.0, h in -20.0f64..20.0) {
            let p = SlopePair::finite(l, -l - d).unwrap();
            let s = shift_slopes(p, h);
            prop_assert!((s.sum().unwrap() - p.sum().unwrap()).abs() < 1e-9);
            let back = shift_slopes(s, -h);
            prop_assert!((back.left().finite().unwrap() - l).abs() < 1e-9);
            prop_assert!((back.right().finite().unwrap() - (-l - d)).abs() < 1e-9);
        }

        #[test]
        fn neg_inf_absorbs(r in -50.0f64..50.0, h in -20.0f64..20.0) {
            let p = SlopePair::new(ExtReal::Finite(r), ExtReal::NegInf).unwrap();
            let s = shift_slopes(p, h);
            prop_assert_eq!(s.right(), ExtReal::NegInf);
            prop_assert!(s.sum().is_none());
        }
    }
}
