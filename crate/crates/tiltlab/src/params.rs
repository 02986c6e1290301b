use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::scalar::Real;

/// Tilt strength `a`, geometric ratio `λ` and line count `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TiltParams<S> {
    strength: S,
    ratio: S,
    lines: usize,
}

impl<S: Real> TiltParams<S> {
    pub fn new(strength: S, ratio: S, lines: usize) -> Result<Self> {
        if !(strength > S::zero() && strength.is_finite()) {
            return Err(invalid("strength", format!("must be positive, got {strength}")));
        }
        if !(ratio > S::one() && ratio.is_finite()) {
            return Err(invalid("ratio", format!("ratio must exceed 1, got {ratio}")));
        }
        if lines == 0 {
            return Err(invalid("lines", "need at least one line"));
        }
        Ok(Self { strength, ratio, lines })
    }

    pub fn strength(&self) -> S {
        self.strength
    }

    pub fn ratio(&self) -> S {
        self.ratio
    }

    pub fn lines(&self) -> usize {
        self.lines
    }

    /// Tilt coefficient `a λ^i` of line `i` (0-based, top line is 0).
    pub fn line_strength(&self, i: usize) -> S {
        self.strength * self.ratio.powi(i as i32)
    }

    pub fn line_strengths(&self) -> Vec<S> {
        (0..self.lines).map(|i| self.line_strength(i)).collect()
    }

    pub fn with_strength(&self, strength: S) -> Result<Self> {
        Self::new(strength, self.ratio, self.lines)
    }

    pub fn with_lines(&self, lines: usize) -> Result<Self> {
        Self::new(self.strength, self.ratio, lines)
    }
}
