use std::io::{BufRead, Write};

use crate::error::{invalid, Error, Result};
use crate::grid::TimeGrid;
use crate::scalar::Real;

/// A real-valued function sampled on a [`TimeGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Path<S> {
    grid: TimeGrid<S>,
    values: Vec<S>,
}

impl<S: Real> Path<S> {
    pub fn new(grid: TimeGrid<S>, values: Vec<S>) -> Result<Self> {
        if values.len() != grid.points() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.points()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid("values", format!("non-finite value at node {i}")));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: TimeGrid<S>, f: impl Fn(S) -> S) -> Result<Self> {
        let values = grid.times().into_iter().map(f).collect();
        Self::new(grid, values)
    }

    pub fn constant(grid: TimeGrid<S>, value: S) -> Self {
        Self { grid, values: vec![value; grid.points()] }
    }

    /// Linear interpolation between `x` at the left end and `y` at the right end.
    pub fn affine(grid: TimeGrid<S>, x: S, y: S) -> Self {
        let n = S::lit(grid.intervals() as f64);
        let values = (0..grid.points())
            .map(|i| {
                let w = S::lit(i as f64) / n;
                x + (y - x) * w
            })
            .collect();
        Self { grid, values }
    }

    pub(crate) fn from_raw(grid: TimeGrid<S>, values: Vec<S>) -> Self {
        debug_assert_eq!(values.len(), grid.points());
        Self { grid, values }
    }

    pub fn grid(&self) -> &TimeGrid<S> {
        &self.grid
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [S] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<S> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn first(&self) -> S {
        self.values[0]
    }

    pub fn last(&self) -> S {
        self.values[self.values.len() - 1]
    }

    /// Value at a time that lies on the grid.
    pub fn at(&self, t: S) -> Result<S> {
        Ok(self.values[self.grid.exact_index_of(t)?])
    }

    /// Restriction to nodes `lo..=hi`.
    pub fn restrict(&self, lo: usize, hi: usize) -> Result<Self> {
        let grid = self.grid.slice(lo, hi)?;
        Ok(Self { grid, values: self.values[lo..=hi].to_vec() })
    }

    pub fn max(&self) -> S {
        self.values.iter().copied().fold(S::neg_infinity(), S::max)
    }

    pub fn min(&self) -> S {
        self.values.iter().copied().fold(S::infinity(), S::min)
    }

    pub fn map(&self, f: impl Fn(S, S) -> S) -> Self {
        let values = self.values.iter().enumerate().map(|(i, &v)| f(self.grid.time(i), v)).collect();
        Self { grid: self.grid, values }
    }

    pub fn cast<T: Real>(&self) -> Path<T> {
        let grid = TimeGrid::new(T::lit(self.grid.left().as_f64()), T::lit(self.grid.right().as_f64()), self.grid.points())
            .expect("cast keeps a valid grid");
        Path { grid, values: self.values.iter().map(|v| T::lit(v.as_f64())).collect() }
    }
}

/// Trapezoidal approximation of the integral of the path over its grid.
pub fn trapezoid_area<S: Real>(path: &Path<S>) -> S {
    trapezoid_sum(path.values(), path.grid().dt())
}

pub(crate) fn trapezoid_sum<S: Real>(v: &[S], dt: S) -> S {
    if v.len() < 2 {
        return S::zero();
    }
    let half = S::lit(0.5);
    let inner: S = v[1..v.len() - 1].iter().copied().sum();
    dt * (inner + half * (v[0] + v[v.len() - 1]))
}

/// Ordered stack of paths on a shared grid; index 0 is the top line.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble<S> {
    grid: TimeGrid<S>,
    lines: Vec<Path<S>>,
}

impl<S: Real> Ensemble<S> {
    /// Builds an ensemble and checks the shared grid and the interior strict ordering.
    pub fn new(lines: Vec<Path<S>>) -> Result<Self> {
        let ens = Self::unchecked(lines)?;
        ens.check_ordering()?;
        Ok(ens)
    }

    /// Builds an ensemble checking only the shared grid.
    pub fn unchecked(lines: Vec<Path<S>>) -> Result<Self> {
        let first = lines.first().ok_or_else(|| invalid("lines", "an ensemble needs at least one line"))?;
        let grid = *first.grid();
        if let Some(i) = lines.iter().position(|l| !l.grid().same_as(&grid)) {
            return Err(Error::GridMismatch(format!("line {} has a different grid", i + 1)));
        }
        Ok(Self { grid, lines })
    }

    pub fn grid(&self) -> &TimeGrid<S> {
        &self.grid
    }

    pub fn lines(&self) -> &[Path<S>] {
        &self.lines
    }

    pub fn line(&self, i: usize) -> &Path<S> {
        &self.lines[i]
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    pub fn into_lines(self) -> Vec<Path<S>> {
        self.lines
    }

    /// Strict ordering at interior nodes, weak ordering at the two end nodes.
    pub fn check_ordering(&self) -> Result<()> {
        let m = self.grid.points();
        for (i, pair) in self.lines.windows(2).enumerate() {
            let (a, b) = (pair[0].values(), pair[1].values());
            for k in 0..m {
                let ok = if k == 0 || k + 1 == m { a[k] >= b[k] } else { a[k] > b[k] };
                if !ok {
                    return Err(Error::OrderingViolated(format!(
                        "line {} is not above line {} at node {k}",
                        i + 1,
                        i + 2
                    )));
                }
            }
        }
        Ok(())
    }

    /// Same as [`check_ordering`](Self::check_ordering) plus positivity of the bottom line inside.
    pub fn check_positive(&self) -> Result<()> {
        self.check_ordering()?;
        let bottom = self.lines[self.lines.len() - 1].values();
        let m = bottom.len();
        if let Some(k) = (1..m - 1).find(|&k| !(bottom[k] > S::zero())) {
            return Err(Error::OrderingViolated(format!("bottom line not positive at node {k}")));
        }
        Ok(())
    }

    /// Pointwise comparison `self >= other` on every line and node.
    pub fn dominates(&self, other: &Self) -> bool {
        self.lines.len() == other.lines.len()
            && self
                .lines
                .iter()
                .zip(&other.lines)
                .all(|(a, b)| a.values().iter().zip(b.values()).all(|(x, y)| x >= y))
    }

    /// CSV with header `t,x1,...,xn`, one row per node, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "t")?;
        for i in 1..=self.lines.len() {
            write!(w, ",x{i}")?;
        }
        writeln!(w)?;
        for k in 0..self.grid.points() {
            write!(w, "{}", fmt17(self.grid.time(k).as_f64()))?;
            for l in &self.lines {
                write!(w, ",{}", fmt17(l.values()[k].as_f64()))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut rows = r.lines();
        let header = rows
            .next()
            .ok_or_else(|| Error::Parse("missing header".into()))?
            .map_err(|e| Error::Parse(e.to_string()))?;
        let cols: Vec<&str> = header.trim().split(',').collect();
        if cols.first() != Some(&"t") || cols.len() < 2 {
            return Err(Error::Parse(format!("unexpected header `{header}`")));
        }
        let n = cols.len() - 1;
        let mut times = Vec::new();
        let mut vals = vec![Vec::new(); n];
        for (lineno, row) in rows.enumerate() {
            let row = row.map_err(|e| Error::Parse(e.to_string()))?;
            if row.trim().is_empty() {
                continue;
            }
            let fields: Vec<f64> = row
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse(format!("row {}: {e}", lineno + 2)))?;
            if fields.len() != n + 1 {
                return Err(Error::Parse(format!("row {} has {} fields", lineno + 2, fields.len())));
            }
            times.push(fields[0]);
            for (v, f) in vals.iter_mut().zip(&fields[1..]) {
                v.push(S::lit(*f));
            }
        }
        if times.len() < 2 {
            return Err(Error::Parse("need at least two rows".into()));
        }
        let grid = TimeGrid::new(S::lit(times[0]), S::lit(times[times.len() - 1]), times.len())?;
        let lines = vals.into_iter().map(|v| Path::new(grid, v)).collect::<Result<Vec<_>>>()?;
        Self::unchecked(lines)
    }
}

impl<S: Real> From<Path<S>> for Ensemble<S> {
    fn from(p: Path<S>) -> Self {
        Self { grid: p.grid, lines: vec![p] }
    }
}

/// Shortest decimal form that round-trips, capped at 17 significant digits.
fn fmt17(x: f64) -> String {
    let s = format!("{x:.16e}");
    let back: f64 = s.parse().unwrap_or(f64::NAN);
    if back == x {
        format!("{x:?}")
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(l: f64, r: f64, m: usize) -> TimeGrid<f64> {
        TimeGrid::new(l, r, m).unwrap()
    }

    #[test]
    fn area_examples() {
        assert_eq!(trapezoid_area(&Path::constant(grid(0.0, 2.0, 7), 1.0)), 2.0);
        for m in [2, 3, 10, 101] {
            let p = Path::affine(grid(0.0, 1.0, m), 0.0, 1.0);
            assert!((trapezoid_area(&p) - 0.5).abs() < 1e-15);
        }
        let sq = Path::from_fn(grid(0.0, 1.0, 101), |t| t * t).unwrap();
        assert!((trapezoid_area(&sq) - 1.0 / 3.0).abs() < 1e-4);
    }

    #[test]
    fn rejects_non_finite_and_length() {
        let g = grid(0.0, 1.0, 3);
        assert!(Path::new(g, vec![0.0, f64::INFINITY, 0.0]).is_err());
        assert!(Path::new(g, vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn ordering_rules() {
        let g = grid(0.0, 1.0, 3);
        let top = Path::new(g, vec![1.0, 2.0, 0.5]).unwrap();
        let tie_end = Path::new(g, vec![1.0, 1.0, 0.5]).unwrap();
        assert!(Ensemble::new(vec![top.clone(), tie_end]).is_ok());
        let tie_mid = Path::new(g, vec![0.0, 2.0, 0.0]).unwrap();
        assert!(Ensemble::new(vec![top.clone(), tie_mid]).is_err());
        let other = Path::new(grid(0.0, 2.0, 3), vec![0.0; 3]).unwrap();
        assert!(Ensemble::unchecked(vec![top, other]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let g = grid(-1.0, 1.0, 5);
        let a = Path::from_fn(g, |t| 3.0 + t.sin() / 7.0).unwrap();
        let b = Path::from_fn(g, |t| 1.0 + t / 3.0 - 1e-300).unwrap();
        let ens = Ensemble::new(vec![a, b]).unwrap();
        let mut buf = Vec::new();
        ens.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,x1,x2\n"));
        let back = Ensemble::<f64>::read_csv(&buf[..]).unwrap();
        assert_eq!(back.lines(), ens.lines());
    }

    proptest! {
        #[test]
        fn area_linear_and_monotone(v in prop::collection::vec(-10.0f64..10.0, 2..50), c in -3.0f64..3.0, bump in 0.0f64..1.0) {
            let g = grid(0.0, 3.0, v.len());
            let p = Path::new(g, v.clone()).unwrap();
            let q = Path::new(g, v.iter().map(|x| c * x).collect()).unwrap();
            let r = Path::new(g, v.iter().map(|x| x + bump).collect()).unwrap();
            let a = trapezoid_area(&p);
            prop_assert!((trapezoid_area(&q) - c * a).abs() < 1e-9);
            prop_assert!(trapezoid_area(&r) >= a);
        }
    }
}
