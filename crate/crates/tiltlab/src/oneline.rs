//! Single area-tilted excursion: exact rejection samplers in the tilted and
//! parabolic-barrier pictures, block Gibbs sampling, and the stationary sampler.

use crate::bridges::{sample_bridge_above, BarrierKind, BarrierSpec, Block, Orientation, Proposal, Sampled, Side};
use crate::chain::GibbsChain;
pub use crate::chain::{BlockKernel, McmcConfig};
use crate::error::{invalid, Result};
use crate::grid::TimeGrid;
use crate::path::Path;
use crate::rng::RngStream;
use crate::scalar::Real;

/// Default rejection budget of the exact samplers.
pub const DEFAULT_MAX_ATTEMPTS: u64 = 10_000;

/// Stand-in for a zero boundary value on a grid of spacing `dt`.
pub fn zero_boundary_epsilon<S: Real>(dt: S) -> S {
    S::lit(1e-3) * dt.sqrt()
}

/// Tilted excursion on `grid` from `x` to `y` with tilt `strength`, kept above `floor`.
#[derive(Debug, Clone, PartialEq)]
pub struct OneLineSpec<S> {
    pub grid: TimeGrid<S>,
    pub strength: S,
    pub x: S,
    pub y: S,
    pub floor: BarrierSpec<S>,
}

impl<S: Real> OneLineSpec<S> {
    pub fn new(grid: TimeGrid<S>, strength: S, x: S, y: S) -> Result<Self> {
        Self::with_floor(grid, strength, x, y, BarrierSpec::zero_floor())
    }

    pub fn with_floor(grid: TimeGrid<S>, strength: S, x: S, y: S, floor: BarrierSpec<S>) -> Result<Self> {
        let s = Self { grid, strength, x, y, floor };
        s.validate()?;
        Ok(s)
    }

    /// Zero boundary realized as `x = y = ε`.
    pub fn zero_boundary(grid: TimeGrid<S>, strength: S) -> Result<Self> {
        let e = zero_boundary_epsilon(grid.dt());
        Self::new(grid, strength, e, e)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.strength >= S::zero() && self.strength.is_finite()) {
            return Err(invalid("strength", "must be a finite non-negative number"));
        }
        if self.floor.orientation != Orientation::StayAbove {
            return Err(invalid("floor", "the floor must be a stay-above barrier"));
        }
        let f = self.floor_values()?;
        if !(self.x > f[0] && self.y > f[f.len() - 1]) {
            return Err(invalid("boundary", "end values must lie strictly above the floor"));
        }
        Ok(())
    }

    pub fn floor_values(&self) -> Result<Vec<S>> {
        self.floor.values(&self.grid)
    }
}

fn exact_block<S: Real>(spec: &OneLineSpec<S>, floor: &[S], proposal: Proposal, max_attempts: u64, rng: &mut RngStream) -> Result<Sampled<Path<S>>> {
    let block = Block {
        dt: spec.grid.dt(),
        left: spec.x,
        right: spec.y,
        floor: Some(Side { values: floor, var: S::one() }),
        ceiling: None,
        strength: spec.strength,
        proposal,
    };
    let mut out = vec![S::zero(); spec.grid.points()];
    let attempts = block.sample_levy(&mut out, rng.next_u64(), max_attempts)?;
    Ok(Sampled { value: Path::from_raw(spec.grid, out), attempts })
}

/// Exact draw by rejection from plain bridges, weighting by the area tilt.
pub fn sample_tilted_exact<S: Real>(spec: &OneLineSpec<S>, rng: &mut RngStream) -> Result<Sampled<Path<S>>> {
    sample_tilted_exact_with(spec, DEFAULT_MAX_ATTEMPTS, rng)
}

pub fn sample_tilted_exact_with<S: Real>(spec: &OneLineSpec<S>, max_attempts: u64, rng: &mut RngStream) -> Result<Sampled<Path<S>>> {
    spec.validate()?;
    let floor = spec.floor_values()?;
    exact_block(spec, &floor, Proposal::Primal, max_attempts, rng)
}

/// Exact draw through the parabolic barrier: a plain bridge kept above `floor - p`,
/// with `p(t) = (a/2) t²`, shifted back up by `p`.
pub fn sample_pbr_dual<S: Real>(spec: &OneLineSpec<S>, rng: &mut RngStream) -> Result<Sampled<Path<S>>> {
    sample_pbr_dual_with(spec, DEFAULT_MAX_ATTEMPTS, rng)
}

pub fn sample_pbr_dual_with<S: Real>(spec: &OneLineSpec<S>, max_attempts: u64, rng: &mut RngStream) -> Result<Sampled<Path<S>>> {
    spec.validate()?;
    let half_a = spec.strength * S::lit(0.5);
    let p = |t: S| half_a * t * t;
    let barrier = match &spec.floor.kind {
        BarrierKind::ZeroFloor => BarrierSpec::above(BarrierKind::Parabola { coefficient: -half_a, shift: S::zero() }),
        _ => {
            let f = spec.floor_values()?;
            let shifted = Path::new(spec.grid, f.iter().zip(spec.grid.times()).map(|(v, t)| *v - p(t)).collect())?;
            BarrierSpec::above(BarrierKind::Explicit(shifted))
        }
    };
    let (l, r) = (spec.grid.left(), spec.grid.right());
    let y = sample_bridge_above(&spec.grid, spec.x - p(l), spec.y - p(r), &barrier, max_attempts, rng)?;
    let mut out = y.value.map(|t, v| v + p(t));
    let n = out.len() - 1;
    out.values_mut()[0] = spec.x;
    out.values_mut()[n] = spec.y;
    Ok(Sampled { value: out, attempts: y.attempts })
}

/// Block Gibbs chain for a one-line spec.
pub fn one_line_chain<S: Real>(spec: &OneLineSpec<S>, cfg: McmcConfig) -> Result<GibbsChain<S>> {
    spec.validate()?;
    GibbsChain::new(spec.grid, &[(spec.x, spec.y)], vec![spec.strength], spec.floor_values()?, cfg)
}

/// State of the block Gibbs chain after `cfg.sweeps` sweeps.
pub fn sample_tilted_mcmc<S: Real>(spec: &OneLineSpec<S>, cfg: &McmcConfig, rng: &mut RngStream) -> Result<Path<S>> {
    let mut chain = one_line_chain(spec, *cfg)?;
    for _ in 0..cfg.sweeps {
        chain.sweep(rng);
    }
    Ok(chain.line(0))
}

/// Zero-boundary chain on `[-4h, 4h]` (h the window half-width) whose draws are
/// restricted to the window.
#[derive(Debug, Clone)]
pub struct FsSampler<S> {
    chain: GibbsChain<S>,
    lo: usize,
    hi: usize,
    window: TimeGrid<S>,
}

impl<S: Real> FsSampler<S> {
    pub fn new(a: S, window: TimeGrid<S>, cfg: McmcConfig) -> Result<Self> {
        let half = window.left().abs().max(window.right().abs());
        Self::with_domain(a, window, S::lit(4.0) * half, cfg)
    }

    /// Chain on `[-half_width, half_width]` with the spacing of `window`.
    pub fn with_domain(a: S, window: TimeGrid<S>, half_width: S, cfg: McmcConfig) -> Result<Self> {
        let dt = window.dt();
        let cells = (S::lit(2.0) * half_width / dt).round().to_usize().unwrap_or(0);
        if cells < 2 {
            return Err(invalid("window", "domain too small"));
        }
        let grid = TimeGrid::symmetric(half_width, cells + 1)?;
        let lo = grid.exact_index_of(window.left())?;
        let hi = grid.exact_index_of(window.right())?;
        if hi - lo + 1 != window.points() {
            return Err(invalid("window", "window must be aligned with the domain grid"));
        }
        let spec = OneLineSpec::zero_boundary(grid, a)?;
        Ok(Self { chain: one_line_chain(&spec, cfg)?, lo, hi, window })
    }

    pub fn chain(&self) -> &GibbsChain<S> {
        &self.chain
    }

    pub fn window_index(&self, t: S) -> Result<usize> {
        Ok(self.lo + self.window.exact_index_of(t)?)
    }

    pub fn sweep(&mut self, rng: &mut RngStream) {
        self.chain.sweep(rng);
    }

    pub fn burn_in(&mut self, rng: &mut RngStream) {
        for _ in 0..self.chain.config().burn_in {
            self.chain.sweep(rng);
        }
    }

    pub fn window_path(&self) -> Path<S> {
        Path::from_raw(self.window, self.chain.values(0)[self.lo..=self.hi].to_vec())
    }

    /// Burn-in followed by `draws` window paths, `thinning` sweeps apart.
    pub fn draws(&mut self, draws: usize, rng: &mut RngStream, mut observe: impl FnMut(&[S])) {
        let (lo, hi) = (self.lo, self.hi);
        self.chain.run(draws, rng, |c| observe(&c.values(0)[lo..=hi]));
    }
}

/// Window restriction of a zero-boundary chain on `[-4h, 4h]` after `cfg.sweeps` sweeps.
pub fn sample_fs<S: Real>(a: S, window: &TimeGrid<S>, cfg: &McmcConfig, rng: &mut RngStream) -> Result<Path<S>> {
    let mut s = FsSampler::new(a, *window, *cfg)?;
    for _ in 0..cfg.sweeps {
        s.sweep(rng);
    }
    Ok(s.window_path())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(a: f64, x: f64, t: f64, m: usize) -> OneLineSpec<f64> {
        OneLineSpec::new(TimeGrid::symmetric(t, m).unwrap(), a, x, x).unwrap()
    }

    #[test]
    fn zero_strength_is_conditioned_bridge() {
        let s = spec(0.0, 0.4, 1.0, 33);
        let a = sample_tilted_exact(&s, &mut RngStream::new(5, 0)).unwrap();
        let b = sample_bridge_above(&s.grid, 0.4, 0.4, &BarrierSpec::zero_floor(), DEFAULT_MAX_ATTEMPTS, &mut RngStream::new(5, 0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dual_endpoints_exact() {
        let s = OneLineSpec::new(TimeGrid::new(-0.7, 1.3, 41).unwrap(), 2.0, 0.3, 1.1).unwrap();
        let mut rng = RngStream::new(6, 0);
        for _ in 0..50 {
            let p = sample_pbr_dual(&s, &mut rng).unwrap().value;
            assert_eq!(p.first(), 0.3);
            assert_eq!(p.last(), 1.1);
            assert!(p.values()[1..40].iter().all(|v| *v > 0.0));
        }
    }

    #[test]
    fn full_block_chain_equals_exact_sampler() {
        let s = spec(2.0, 0.5, 1.0, 65);
        let cfg = McmcConfig { sweeps: 1, burn_in: 0, block_points: 65, attempts: DEFAULT_MAX_ATTEMPTS, kernel: BlockKernel::ExactPrimal, ..Default::default() };
        for seed in 0..20 {
            let a = sample_tilted_mcmc(&s, &cfg, &mut RngStream::new(seed, 3)).unwrap();
            let b = sample_tilted_exact(&s, &mut RngStream::new(seed, 3)).unwrap().value;
            assert_eq!(a, b);
        }
    }

    #[test]
    fn partition_function_positive() {
        let s = spec(2.0, 0.3, 1.0, 33);
        let mut rng = RngStream::new(7, 0);
        let n = 20_000;
        let mut z = 0.0;
        for _ in 0..n {
            let p = crate::bridges::sample_bridge(&s.grid, 0.3, 0.3, &mut rng);
            if p.values()[1..32].iter().all(|v| *v > 0.0) {
                z += (-2.0 * crate::path::trapezoid_area(&p)).exp();
            }
        }
        assert!(z / n as f64 > 0.0);
    }

    #[test]
    fn fs_window_alignment() {
        let w = TimeGrid::symmetric(2.0, 129).unwrap();
        let s = FsSampler::new(2.0, w, McmcConfig::default()).unwrap();
        assert_eq!(s.chain().grid().points(), 513);
        assert_eq!(s.window_index(0.0).unwrap(), 256);
        let bad = TimeGrid::new(-2.01, 2.0, 129).unwrap();
        assert!(FsSampler::new(2.0, bad, McmcConfig::default()).is_err());
    }

    #[test]
    fn rejects_stay_below_floor() {
        let g = TimeGrid::symmetric(1.0, 9).unwrap();
        let f = BarrierSpec::below(BarrierKind::ZeroFloor);
        assert!(OneLineSpec::with_floor(g, 1.0, 1.0, 1.0, f).is_err());
        assert!(OneLineSpec::new(g, 1.0, 0.0, 1.0).is_err());
    }

    fn chain_midpoints(spec: &OneLineSpec<f64>, draws: usize, stream: u64) -> Vec<f64> {
        let mut cfg = McmcConfig::for_points(spec.grid.points());
        cfg.thinning = 3;
        cfg.sweeps = cfg.burn_in + draws * cfg.thinning + 1;
        let mid = (spec.grid.points() - 1) / 2;
        let mut chain = one_line_chain(spec, cfg).unwrap();
        let mut out = Vec::with_capacity(draws);
        chain.run(draws, &mut RngStream::new(41, stream), |c| out.push(c.values(0)[mid]));
        out
    }

    #[test]
    fn halving_boundary_epsilon_leaves_marginal_unchanged() {
        let grid = TimeGrid::symmetric(4.0, 129).unwrap();
        let e = zero_boundary_epsilon(grid.dt());
        let full = chain_midpoints(&OneLineSpec::new(grid, 2.0, e, e).unwrap(), 3000, 0);
        let half = chain_midpoints(&OneLineSpec::new(grid, 2.0, e / 2.0, e / 2.0).unwrap(), 3000, 1);
        let r = crate::diagnostics::ks_two_sample(&full, &half, 1e-3).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn window_marginal_stable_in_domain_size() {
        let w = TimeGrid::symmetric(1.0, 17).unwrap();
        let draw = |half: f64, stream: u64| {
            let mut cfg = McmcConfig::for_points((16.0 * half) as usize + 1);
            cfg.thinning = 3;
            let mut s = FsSampler::with_domain(2.0, w, half, cfg).unwrap();
            let mid = s.window_index(0.0).unwrap() - s.window_index(-1.0).unwrap();
            let mut out = Vec::new();
            s.draws(3000, &mut RngStream::new(43, stream), |v| out.push(v[mid]));
            out
        };
        let r = crate::diagnostics::ks_two_sample(&draw(4.0, 0), &draw(8.0, 1), 1e-3).unwrap();
        assert!(r.pass, "{r:?}");
    }
}
