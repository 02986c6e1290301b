//! Brownian bridges: plain sampling, midpoint refinement, and rejection sampling
//! under barriers and area tilts.
//!
//! Barrier avoidance is enforced between grid nodes as well as at them: each
//! interval contributes the probability `1 - exp(-2 g0 g1 / (σ² dt))` that the
//! bridge between its two nodes stays clear of a straight barrier segment with
//! end gaps `g0`, `g1`. For fixed barriers `σ² = 1`; for two independent lines
//! the gap is a bridge of variance 2.

use crate::error::{invalid, Error, Result};
use crate::grid::TimeGrid;
use crate::path::Path;
use crate::rng::RngStream;
use crate::scalar::Real;

/// Result of a rejection sampler together with the number of attempts it used.
#[derive(Debug, Clone, PartialEq)]
pub struct Sampled<T> {
    pub value: T,
    pub attempts: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    StayAbove,
    StayBelow,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BarrierKind<S> {
    ZeroFloor,
    /// `shift + coefficient * t²`.
    Parabola { coefficient: S, shift: S },
    Explicit(Path<S>),
    /// `intercept + slope * t`.
    Line { slope: S, intercept: S },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarrierSpec<S> {
    pub kind: BarrierKind<S>,
    pub orientation: Orientation,
}

impl<S: Real> BarrierSpec<S> {
    pub fn zero_floor() -> Self {
        Self { kind: BarrierKind::ZeroFloor, orientation: Orientation::StayAbove }
    }

    pub fn above(kind: BarrierKind<S>) -> Self {
        Self { kind, orientation: Orientation::StayAbove }
    }

    pub fn below(kind: BarrierKind<S>) -> Self {
        Self { kind, orientation: Orientation::StayBelow }
    }

    pub fn value_at(&self, t: S) -> S {
        match &self.kind {
            BarrierKind::ZeroFloor => S::zero(),
            BarrierKind::Parabola { coefficient, shift } => *shift + *coefficient * t * t,
            BarrierKind::Line { slope, intercept } => *intercept + *slope * t,
            BarrierKind::Explicit(p) => p.at(t).unwrap_or(S::nan()),
        }
    }

    /// Barrier heights at every node of `grid`.
    pub fn values(&self, grid: &TimeGrid<S>) -> Result<Vec<S>> {
        match &self.kind {
            BarrierKind::Explicit(p) => {
                if !p.grid().same_as(grid) {
                    return Err(Error::GridMismatch("explicit barrier grid differs from the sampling grid".into()));
                }
                Ok(p.values().to_vec())
            }
            _ => Ok(grid.times().into_iter().map(|t| self.value_at(t)).collect()),
        }
    }

    /// Signed distance of `x` from the barrier `b` on the allowed side.
    #[inline]
    pub fn gap(&self, x: S, b: S) -> S {
        match self.orientation {
            Orientation::StayAbove => x - b,
            Orientation::StayBelow => b - x,
        }
    }
}

/// Probability that a bridge over one interval avoids a straight barrier segment.
#[inline]
pub(crate) fn clear_prob<S: Real>(g0: S, g1: S, inv_var_dt2: S) -> S {
    if !(g0 > S::zero() && g1 > S::zero()) {
        return S::zero();
    }
    let u = g0 * g1 * inv_var_dt2;
    if u > S::lit(40.0) {
        S::one()
    } else {
        -(-u).exp_m1()
    }
}

/// Brownian bridge from `x` at `grid.left()` to `y` at `grid.right()`.
pub fn sample_bridge<S: Real>(grid: &TimeGrid<S>, x: S, y: S, rng: &mut RngStream) -> Path<S> {
    let mut z = vec![S::zero(); grid.points()];
    levy_fill(&mut z, grid.dt(), rng);
    let aff = Path::affine(*grid, x, y);
    let values = aff.values().iter().zip(&z).map(|(a, b)| *a + *b).collect();
    Path::from_raw(*grid, values)
}

/// Fills `z` (endpoints untouched) with a zero-pinned bridge by breadth-first midpoint splitting.
/// Nodes are visited level by level, so a grid with `2^j + 1` nodes consumes its normals in
/// the same order as the coarser dyadic grids it refines.
pub(crate) fn levy_fill<S: Real>(z: &mut [S], dt: S, rng: &mut RngStream) {
    let n = z.len() - 1;
    z[0] = S::zero();
    z[n] = S::zero();
    let mut level = vec![(0usize, n)];
    let mut next = Vec::new();
    while !level.is_empty() {
        for &(lo, hi) in &level {
            if hi - lo < 2 {
                continue;
            }
            let mid = (lo + hi) / 2;
            let (a, b) = (S::lit((mid - lo) as f64), S::lit((hi - mid) as f64));
            let span = a + b;
            let mean = (z[lo] * b + z[hi] * a) / span;
            let var = dt * a * b / span;
            z[mid] = mean + var.sqrt() * rng.normal::<S>();
            next.push((lo, mid));
            next.push((mid, hi));
        }
        std::mem::swap(&mut level, &mut next);
        next.clear();
    }
}

/// Inserts a conditional bridge midpoint between every pair of neighbours.
pub fn refine_midpoint<S: Real>(path: &Path<S>, rng: &mut RngStream) -> Path<S> {
    let fine = path.grid().doubled();
    let sd = (fine.dt() * S::lit(0.5)).sqrt();
    let v = path.values();
    let mut out = Vec::with_capacity(fine.points());
    for k in 0..v.len() - 1 {
        out.push(v[k]);
        out.push((v[k] + v[k + 1]) * S::lit(0.5) + sd * rng.normal::<S>());
    }
    out.push(v[v.len() - 1]);
    Path::from_raw(fine, out)
}

/// Bridge conditioned to stay on the allowed side of `barrier`, by rejection.
pub fn sample_bridge_above<S: Real>(
    grid: &TimeGrid<S>,
    x: S,
    y: S,
    barrier: &BarrierSpec<S>,
    max_attempts: u64,
    rng: &mut RngStream,
) -> Result<Sampled<Path<S>>> {
    let b = barrier.values(grid)?;
    let (g0, g1) = (barrier.gap(x, b[0]), barrier.gap(y, b[b.len() - 1]));
    if !(g0 > S::zero() && g1 > S::zero()) {
        return Err(invalid("endpoints", "endpoints must lie strictly on the allowed side of the barrier"));
    }
    let side = Side { values: &b, var: S::one() };
    let (floor, ceiling) = match barrier.orientation {
        Orientation::StayAbove => (Some(side), None),
        Orientation::StayBelow => (None, Some(side)),
    };
    let block = Block { dt: grid.dt(), left: x, right: y, floor, ceiling, strength: S::zero(), proposal: Proposal::Primal };
    let mut out = vec![S::zero(); grid.points()];
    let attempts = block.sample_levy(&mut out, rng.next_u64(), max_attempts)?;
    Ok(Sampled { value: Path::from_raw(*grid, out), attempts })
}

/// Proposal law used by the block sampler.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Proposal {
    /// Plain bridge; the area tilt enters the acceptance weight.
    Primal,
    /// Bridge with the tilt absorbed into a parabolic mean; only barriers are rejected.
    Dual,
}

/// Barrier heights on the block nodes and the variance of the gap process.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Side<'a, S> {
    pub values: &'a [S],
    pub var: S,
}

/// One resampling problem: a bridge over `values.len()` nodes with fixed ends,
/// tilt `strength`, and optional floor and ceiling.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Block<'a, S> {
    pub dt: S,
    pub left: S,
    pub right: S,
    pub floor: Option<Side<'a, S>>,
    pub ceiling: Option<Side<'a, S>>,
    pub strength: S,
    pub proposal: Proposal,
}

impl<S: Real> Block<'_, S> {
    fn mean(&self, k: usize, n: usize) -> S {
        let w = S::lit(k as f64) / S::lit(n as f64);
        let aff = self.left + (self.right - self.left) * w;
        match self.proposal {
            Proposal::Primal => aff,
            Proposal::Dual => {
                let (kk, rr) = (S::lit(k as f64), S::lit(k as f64) - S::lit(n as f64));
                aff + S::lit(0.5) * self.strength * self.dt * self.dt * kk * rr
            }
        }
    }

    fn tilted_primal(&self) -> bool {
        self.proposal == Proposal::Primal && self.strength > S::zero()
    }

    fn check(&self) {
        debug_assert!(
            !self.tilted_primal() || self.floor.is_some(),
            "a tilted primal proposal needs a floor to bound its weight"
        );
    }

    /// Acceptance factor contributed by the interval `(j, k)` and, for the primal
    /// proposal, by the tilt at node `k` when it is interior.
    #[inline]
    fn step_factor(&self, x: &[S], j: usize, k: usize, interior_k: bool, inv_dt2: S) -> S {
        let mut f = S::one();
        if let Some(fl) = &self.floor {
            f *= clear_prob(x[j] - fl.values[j], x[k] - fl.values[k], inv_dt2 / fl.var);
            if self.tilted_primal() && interior_k {
                f *= (-(self.strength * self.dt * (x[k] - fl.values[k]))).exp();
            }
        }
        if let Some(c) = &self.ceiling {
            f *= clear_prob(c.values[j] - x[j], c.values[k] - x[k], inv_dt2 / c.var);
        }
        f
    }

    /// Rejection sampler with midpoint construction; attempt `j` draws its noise from
    /// the stream keyed by `(nonce, j)`, so refining the grid reuses the coarse noise.
    pub fn sample_levy(&self, out: &mut [S], nonce: u64, max_attempts: u64) -> Result<u64> {
        self.check();
        let n = out.len() - 1;
        let inv_dt2 = S::lit(2.0) / self.dt;
        let means: Vec<S> = (0..=n).map(|k| self.mean(k, n)).collect();
        for attempt in 1..=max_attempts {
            let mut rng = RngStream::keyed(nonce, attempt);
            let u = S::lit(rng.open_uniform());
            levy_fill(out, self.dt, &mut rng);
            for (o, m) in out.iter_mut().zip(&means) {
                *o += *m;
            }
            out[0] = self.left;
            out[n] = self.right;
            let mut w = S::one();
            for k in 1..=n {
                w *= self.step_factor(out, k - 1, k, k < n, inv_dt2);
                if !(w > u) {
                    break;
                }
            }
            if w > u {
                return Ok(attempt);
            }
        }
        Err(Error::AttemptsExhausted { attempts: max_attempts })
    }

    /// Rejection sampler generating the bridge node by node from the tighter end and
    /// abandoning an attempt as soon as the running weight drops below its uniform.
    /// On failure `out` holds garbage in its interior.
    pub fn sample_sequential(&self, out: &mut [S], rng: &mut RngStream, max_attempts: u64) -> Result<u64> {
        self.check();
        let n = out.len() - 1;
        let inv_dt2 = S::lit(2.0) / self.dt;
        out[0] = self.left;
        out[n] = self.right;
        let reverse = self.end_gap(n) < self.end_gap(0);
        let idx = |p: usize| if reverse { n - p } else { p };
        let coef: Vec<(S, S)> = (0..n)
            .map(|p| {
                let rem = S::lit((n - p) as f64);
                let r = (rem - S::one()) / rem;
                (r, (self.dt * r).sqrt())
            })
            .collect();
        for attempt in 1..=max_attempts {
            let u = S::lit(rng.open_uniform());
            let mut w = S::one();
            let mut b = S::zero();
            let mut ok = true;
            for p in 1..=n {
                let (r, sd) = coef[p - 1];
                b = if p == n { S::zero() } else { b * r + sd * rng.normal::<S>() };
                let (j, k) = (idx(p - 1), idx(p));
                if p < n {
                    out[k] = self.mean(k, n) + b;
                }
                w *= self.step_factor(out, j, k, p < n, inv_dt2);
                if !(w > u) {
                    ok = false;
                    break;
                }
            }
            if ok {
                return Ok(attempt);
            }
        }
        Err(Error::AttemptsExhausted { attempts: max_attempts })
    }

    fn end_gap(&self, k: usize) -> S {
        let x = if k == 0 { self.left } else { self.right };
        let mut g = S::infinity();
        if let Some(f) = &self.floor {
            g = g.min(x - f.values[k]);
        }
        if let Some(c) = &self.ceiling {
            g = g.min(c.values[k] - x);
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> TimeGrid<f64> {
        TimeGrid::new(0.0, 1.0, 3).unwrap()
    }

    #[test]
    fn endpoints_pinned() {
        let g = TimeGrid::new(0.0, 1.0, 17).unwrap();
        let mut rng = RngStream::new(1, 0);
        for _ in 0..100 {
            let p = sample_bridge(&g, 0.0, 0.0, &mut rng);
            assert_eq!(p.first(), 0.0);
            assert_eq!(p.last(), 0.0);
        }
    }

    #[test]
    fn midpoint_variance_and_mean() {
        let g = TimeGrid::new(0.0, 1.0, 3).unwrap();
        let mut rng = RngStream::new(2, 0);
        let n = 1_000_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let v = sample_bridge(&g, 0.0, 0.0, &mut rng).values()[1];
            s += v;
            s2 += v * v;
        }
        let var = s2 / n as f64 - (s / n as f64).powi(2);
        assert!((var - 0.25).abs() < 0.0025, "var {var}");

        let g2 = TimeGrid::new(0.0, 2.0, 3).unwrap();
        let mut m = 0.0f64;
        for _ in 0..20_000 {
            m += sample_bridge(&g2, 1.0, 3.0, &mut rng).values()[1];
        }
        m /= 20_000.0;
        assert!((m - 2.0).abs() < 4.0 * (0.5f64 / 20_000.0).sqrt());
    }

    #[test]
    fn affine_covariance_exact() {
        let g = TimeGrid::new(-1.0, 2.0, 33).unwrap();
        let p = sample_bridge(&g, 1.5, -0.5, &mut RngStream::new(9, 1));
        let z = sample_bridge(&g, 0.0, 0.0, &mut RngStream::new(9, 1));
        let aff = Path::affine(g, 1.5, -0.5);
        for k in 0..g.points() {
            assert_eq!(p.values()[k], aff.values()[k] + z.values()[k]);
        }
    }

    #[test]
    fn refine_keeps_coarse_nodes() {
        let g = TimeGrid::new(0.0, 4.0, 5).unwrap();
        let mut rng = RngStream::new(3, 0);
        let p = sample_bridge(&g, 1.0, 2.0, &mut rng);
        let f = refine_midpoint(&p, &mut rng);
        assert_eq!(f.len(), 9);
        for k in 0..5 {
            assert_eq!(f.values()[2 * k], p.values()[k]);
        }
    }

    #[test]
    fn refine_inserted_variance() {
        // coarse spacing 2, fine spacing 1: inserted node variance 1/2
        let g = TimeGrid::new(0.0, 2.0, 2).unwrap();
        let p = Path::new(g, vec![0.0f64, 0.0]).unwrap();
        let mut rng = RngStream::new(4, 0);
        let n = 1_000_000;
        let s2: f64 = (0..n).map(|_| refine_midpoint(&p, &mut rng).values()[1].powi(2)).sum();
        assert!((s2 / n as f64 - 0.5).abs() < 0.005);
    }

    #[test]
    fn positivity_acceptance_matches_closed_form() {
        // P(bridge from 0.5 to 0.5 over unit time stays positive) = 1 - exp(-2 xy / T)
        let g = TimeGrid::new(0.0, 1.0, 9).unwrap();
        let floor = [0.0; 9];
        let block = Block {
            dt: g.dt(),
            left: 0.5,
            right: 0.5,
            floor: Some(Side { values: &floor, var: 1.0 }),
            ceiling: None,
            strength: 0.0,
            proposal: Proposal::Primal,
        };
        let mut out = vec![0.0; 9];
        let mut rng = RngStream::new(5, 0);
        let draws = 1_000_000u64;
        let mut attempts = 0;
        let mut accepted = 0;
        while attempts < draws {
            let left = draws - attempts;
            match block.sample_sequential(&mut out, &mut rng, left) {
                Ok(a) => {
                    attempts += a;
                    accepted += 1;
                }
                Err(_) => attempts += left,
            }
        }
        let rate = accepted as f64 / attempts as f64;
        let exact = 1.0 - (-0.5f64).exp();
        assert!((rate / exact - 1.0).abs() < 0.01, "rate {rate} vs {exact}");
    }

    #[test]
    fn far_barrier_accepts_first_try() {
        let g = TimeGrid::new(-1.0, 1.0, 65).unwrap();
        let mut rng = RngStream::new(6, 0);
        let mut first = 0;
        for _ in 0..2000 {
            let s = sample_bridge_above(&g, 100.0, 100.0, &BarrierSpec::zero_floor(), 10, &mut rng).unwrap();
            first += (s.attempts == 1) as u32;
        }
        assert_eq!(first, 2000);
    }

    #[test]
    fn conditioned_output_replays_filtered_plain_draws() {
        let g = TimeGrid::new(0.0, 1.0, 9).unwrap();
        let barrier = BarrierSpec::zero_floor();
        let mut rng = RngStream::new(8, 0);
        let mut probe = rng.clone();
        let got = sample_bridge_above(&g, 0.3, 0.4, &barrier, 10_000, &mut rng).unwrap();
        let nonce = probe.next_u64();
        for j in 1..=got.attempts {
            let mut sub = RngStream::keyed(nonce, j);
            let u = sub.open_uniform();
            let mut z = vec![0.0; 9];
            levy_fill(&mut z, g.dt(), &mut sub);
            let plain: Vec<f64> = Path::affine(g, 0.3, 0.4).values().iter().zip(&z).map(|(a, b)| a + b).collect();
            let w: f64 = (1..9).map(|k| clear_prob(plain[k - 1], plain[k], 2.0 / g.dt())).product();
            if j < got.attempts {
                assert!(w <= u);
            } else {
                assert!(w > u);
                for k in 1..8 {
                    assert!((plain[k] - got.value.values()[k]).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn endpoints_on_wrong_side_rejected() {
        let e = sample_bridge_above(&unit(), -0.1, 1.0, &BarrierSpec::zero_floor(), 5, &mut RngStream::new(0, 0));
        assert!(e.is_err());
    }

    #[test]
    fn stay_below_line() {
        let g = TimeGrid::new(0.0, 2.0, 33).unwrap();
        let b = BarrierSpec::below(BarrierKind::Line { slope: 0.5, intercept: 1.0 });
        let mut rng = RngStream::new(10, 0);
        for _ in 0..200 {
            let p = sample_bridge_above(&g, 0.0, 0.0, &b, 10_000, &mut rng).unwrap().value;
            for (t, v) in g.times().into_iter().zip(p.values()) {
                assert!(*v < 1.0 + 0.5 * t);
            }
        }
    }

    #[test]
    fn parabola_barrier_rarely_rejects_for_large_shift() {
        let g = TimeGrid::new(0.0, 8.0, 257).unwrap();
        let b = BarrierSpec::below(BarrierKind::Parabola { coefficient: 1.0, shift: 4.0 });
        let mut rng = RngStream::new(11, 0);
        let total: u64 = (0..2000).map(|_| sample_bridge_above(&g, 0.0, 0.0, &b, 1000, &mut rng).unwrap().attempts).sum();
        assert!(total < 2000 + 20, "attempts {total}");
    }
}
