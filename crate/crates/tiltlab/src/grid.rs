use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

/// Uniform discretization of `[left, right]` with `points` nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid<S> {
    left: S,
    right: S,
    points: usize,
}

impl<S: Real> TimeGrid<S> {
    pub fn new(left: S, right: S, points: usize) -> Result<Self> {
        if !(left.is_finite() && right.is_finite()) {
            return Err(invalid("grid", "endpoints must be finite"));
        }
        if !(left < right) {
            return Err(invalid("grid", format!("left {left} must be below right {right}")));
        }
        if points < 2 {
            return Err(invalid("points", format!("need at least 2 points, got {points}")));
        }
        Ok(Self { left, right, points })
    }

    /// Symmetric grid on `[-half_width, half_width]`.
    pub fn symmetric(half_width: S, points: usize) -> Result<Self> {
        Self::new(-half_width, half_width, points)
    }

    pub fn left(&self) -> S {
        self.left
    }

    pub fn right(&self) -> S {
        self.right
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn intervals(&self) -> usize {
        self.points - 1
    }

    pub fn length(&self) -> S {
        self.right - self.left
    }

    pub fn dt(&self) -> S {
        (self.right - self.left) / S::lit((self.points - 1) as f64)
    }

    /// Time of node `i`; the last node is exactly `right`.
    pub fn time(&self, i: usize) -> S {
        debug_assert!(i < self.points);
        if i + 1 == self.points {
            return self.right;
        }
        let frac = S::lit(i as f64) / S::lit((self.points - 1) as f64);
        self.left + (self.right - self.left) * frac
    }

    pub fn times(&self) -> Vec<S> {
        (0..self.points).map(|i| self.time(i)).collect()
    }

    /// Nearest node index to `t`.
    pub fn index_of(&self, t: S) -> Result<usize> {
        let x = ((t - self.left) / self.dt()).round();
        let tol = S::lit(1e-6);
        if !(x >= -tol) || x > S::lit((self.points - 1) as f64) + tol {
            return Err(Error::OutOfGrid(t.as_f64()));
        }
        Ok(x.to_usize().unwrap_or(0).min(self.points - 1))
    }

    /// Node index of `t`, requiring `t` to sit on a node up to a small relative tolerance.
    pub fn exact_index_of(&self, t: S) -> Result<usize> {
        let i = self.index_of(t)?;
        let off = ((self.time(i) - t) / self.dt()).abs();
        if off > S::lit(1e-6) {
            return Err(Error::OutOfGrid(t.as_f64()));
        }
        Ok(i)
    }

    /// Grid with the same span and `2m - 1` points.
    pub fn doubled(&self) -> Self {
        Self { left: self.left, right: self.right, points: 2 * self.points - 1 }
    }

    /// Sub-grid spanning nodes `lo..=hi`.
    pub fn slice(&self, lo: usize, hi: usize) -> Result<Self> {
        if hi >= self.points || lo >= hi {
            return Err(invalid("slice", format!("bad node range {lo}..={hi}")));
        }
        Ok(Self { left: self.time(lo), right: self.time(hi), points: hi - lo + 1 })
    }

    /// Affine image: times become `scale * t`.
    pub fn scaled(&self, scale: S) -> Result<Self> {
        Self::new(self.left * scale, self.right * scale, self.points)
    }

    pub fn same_as(&self, other: &Self) -> bool {
        self.points == other.points && self.left == other.left && self.right == other.right
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(TimeGrid::new(1.0, 1.0, 5).is_err());
        assert!(TimeGrid::new(0.0, 1.0, 1).is_err());
        assert!(TimeGrid::new(0.0, f64::NAN, 3).is_err());
    }

    #[test]
    fn endpoints_exact() {
        let g = TimeGrid::new(-0.3f64, 0.7, 11).unwrap();
        assert_eq!(g.time(0), -0.3);
        assert_eq!(g.time(10), 0.7);
        assert!((g.dt() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn slicing_and_doubling() {
        let g = TimeGrid::new(0.0, 4.0, 5).unwrap();
        let s = g.slice(1, 3).unwrap();
        assert_eq!((s.left(), s.right(), s.points()), (1.0, 3.0, 3));
        assert_eq!(g.doubled().points(), 9);
        assert_eq!(g.doubled().dt(), 0.5);
        assert!(g.slice(3, 3).is_err());
    }

    proptest! {
        #[test]
        fn index_round_trip(left in -100.0f64..100.0, len in 1e-3f64..50.0, m in 2usize..5000) {
            let g = TimeGrid::new(left, left + len, m).unwrap();
            for i in [0, m / 3, m / 2, m - 1] {
                prop_assert_eq!(g.index_of(g.time(i)).unwrap(), i);
                prop_assert_eq!(g.exact_index_of(g.time(i)).unwrap(), i);
            }
        }

        #[test]
        fn f32_round_trip(m in 2usize..2000) {
            let g = TimeGrid::<f32>::new(-8.0, 8.0, m).unwrap();
            for i in 0..m {
                prop_assert_eq!(g.index_of(g.time(i)).unwrap(), i);
            }
        }
    }
}
