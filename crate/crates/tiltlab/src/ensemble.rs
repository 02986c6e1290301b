//! The n-line geometrically tilted ensemble: boundary schemes, block Gibbs
//! sampling, domain resampling, monotone coupling and Brownian rescaling.

use serde::{Deserialize, Serialize};

use crate::chain::{GibbsChain, McmcConfig};
use crate::site::site_law;
use crate::error::{invalid, Error, Result};
use crate::grid::TimeGrid;
use crate::oneline::zero_boundary_epsilon;
use crate::params::TiltParams;
use crate::path::{Ensemble, Path};
use crate::rng::RngStream;
use crate::scalar::Real;
use crate::slopes::SlopePair;

/// End values of every line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BoundaryScheme<S> {
    Zero,
    Flat(S),
    /// All lines at `T² + L T` on the left and `T² + R T` on the right, clipped at zero.
    NuSlopes(SlopePair<S>),
    /// Top line at `T² − 2KT − T^b`, the rest at zero.
    Rho { k: S, b: S },
    Explicit { left: Vec<S>, right: Vec<S> },
}

impl<S: Real> BoundaryScheme<S> {
    pub fn rho(k: S) -> Self {
        Self::Rho { k, b: S::lit(0.6) }
    }
}

/// Left and right end values per line for a domain `[-T, T]`.
pub fn boundary_vectors<S: Real>(scheme: &BoundaryScheme<S>, t: S, n: usize) -> Result<(Vec<S>, Vec<S>)> {
    if !(t > S::zero()) || n == 0 {
        return Err(invalid("boundary", "need T > 0 and at least one line"));
    }
    let (l, r) = match scheme {
        BoundaryScheme::Zero => (vec![S::zero(); n], vec![S::zero(); n]),
        BoundaryScheme::Flat(h) => (vec![*h; n], vec![*h; n]),
        BoundaryScheme::NuSlopes(pair) => {
            let (sl, sr) = match (pair.left().finite(), pair.right().finite()) {
                (Some(a), Some(b)) => (a, b),
                _ => return Err(Error::InvalidScheme("infinite slopes: use the zero or flat scheme".into())),
            };
            let h = |s: S| (t * t + s * t).max(S::zero());
            (vec![h(sl); n], vec![h(sr); n])
        }
        BoundaryScheme::Rho { k, b } => {
            let top = (t * t - S::lit(2.0) * *k * t - t.powf(*b)).max(S::zero());
            let mut v = vec![S::zero(); n];
            v[0] = top;
            (v.clone(), v)
        }
        BoundaryScheme::Explicit { left, right } => {
            if left.len() != n || right.len() != n {
                return Err(Error::InvalidScheme(format!("explicit vectors must have {n} entries")));
            }
            (left.clone(), right.clone())
        }
    };
    for v in [&l, &r] {
        if v.iter().any(|x| !(*x >= S::zero())) || v.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidScheme("end values must be non-negative and weakly decreasing".into()));
        }
    }
    Ok((l, r))
}

/// Separates tied end values by `eps`, working upward from the wall at zero.
pub fn separate_ends<S: Real>(left: &[S], right: &[S], eps: S) -> Vec<(S, S)> {
    let n = left.len();
    let mut out = vec![(S::zero(), S::zero()); n];
    let (mut bl, mut br) = (S::zero(), S::zero());
    for i in (0..n).rev() {
        let l = left[i].max(bl + eps);
        let r = right[i].max(br + eps);
        out[i] = (l, r);
        bl = l;
        br = r;
    }
    out
}

/// Block Gibbs chain for the ensemble on `grid` (assumed symmetric, `[-T, T]`).
pub fn ensemble_chain<S: Real>(grid: TimeGrid<S>, params: &TiltParams<S>, scheme: &BoundaryScheme<S>, cfg: McmcConfig) -> Result<GibbsChain<S>> {
    let t = grid.length() * S::lit(0.5);
    let (l, r) = boundary_vectors(scheme, t, params.lines())?;
    let ends = separate_ends(&l, &r, zero_boundary_epsilon(grid.dt()));
    GibbsChain::new(grid, &ends, params.line_strengths(), vec![S::zero(); grid.points()], cfg)
}

/// State of the ensemble chain after `cfg.sweeps` sweeps.
pub fn sample_lambda_le<S: Real>(
    grid: &TimeGrid<S>,
    params: &TiltParams<S>,
    scheme: &BoundaryScheme<S>,
    cfg: &McmcConfig,
    rng: &mut RngStream,
) -> Result<Ensemble<S>> {
    let mut c = ensemble_chain(*grid, params, scheme, *cfg)?;
    for _ in 0..cfg.sweeps {
        c.sweep(rng);
    }
    Ok(c.ensemble())
}

/// Node range of a resampling domain; needs at least one interior node.
pub fn domain_nodes<S: Real>(grid: &TimeGrid<S>, left: S, right: S) -> Result<(usize, usize)> {
    let a = grid.index_of(left)?;
    let b = grid.index_of(right)?;
    if b < a + 2 {
        return Err(Error::DomainTooSmall(b.saturating_sub(a) + 1));
    }
    Ok((a, b))
}

/// Redraws the top `n_top` lines of `chain` on nodes `a..=b` with `sweeps` restricted sweeps.
pub fn resample_domain<S: Real>(chain: &mut GibbsChain<S>, n_top: usize, a: usize, b: usize, sweeps: usize, rng: &mut RngStream) {
    let n_top = n_top.min(chain.line_count());
    if n_top == 0 {
        return;
    }
    for _ in 0..sweeps {
        chain.sweep_range(0..n_top, a, b, rng);
    }
}

/// Redraws the top `n_top` lines on `[left, right]` given everything else, using
/// `cfg.sweeps` sweeps restricted to the domain.
pub fn resample_stopping_domain<S: Real>(
    ens: &Ensemble<S>,
    params: &TiltParams<S>,
    n_top: usize,
    left: S,
    right: S,
    cfg: &McmcConfig,
    rng: &mut RngStream,
) -> Result<Ensemble<S>> {
    if params.lines() != ens.len() {
        return Err(invalid("params", "line count differs from the ensemble"));
    }
    let (a, b) = domain_nodes(ens.grid(), left, right)?;
    let mut c = GibbsChain::from_state(ens, params.line_strengths(), vec![S::zero(); ens.grid().points()], *cfg)?;
    resample_domain(&mut c, n_top, a, b, cfg.sweeps, rng);
    Ok(c.ensemble())
}

/// Rescaled ensemble `λ^{-1/3} X(λ^{2/3} t)`.
pub fn scaling_transform<S: Real>(ens: &Ensemble<S>, lambda: S) -> Result<Ensemble<S>> {
    if !(lambda > S::zero()) {
        return Err(invalid("lambda", "must be positive"));
    }
    if lambda == S::one() {
        return Ok(ens.clone());
    }
    let vs = lambda.cbrt().recip();
    let grid = ens.grid().scaled(vs * vs)?;
    let lines = ens.lines().iter().map(|l| Path::new(grid, l.values().iter().map(|v| *v * vs).collect())).collect::<Result<Vec<_>>>()?;
    Ensemble::unchecked(lines)
}

/// Relative quadrature resolution of the node quantiles, in units of the node's standard deviation.
pub const QUANTILE_RESOLUTION: f64 = 1e-9;

/// Two chains advanced with shared uniforms through single-node inverse-CDF updates.
#[derive(Debug, Clone)]
pub struct CoupledPair<S> {
    pub upper: GibbsChain<S>,
    pub lower: GibbsChain<S>,
    pub rng: RngStream,
    /// Updates where the two quantiles crossed by less than the quadrature resolution
    /// (the chains had merged at that node) and were set equal.
    pub snapped: u64,
}

impl<S: Real> CoupledPair<S> {
    pub fn new(upper: GibbsChain<S>, lower: GibbsChain<S>, rng: RngStream) -> Result<Self> {
        if !upper.grid().same_as(lower.grid()) || upper.line_count() != lower.line_count() {
            return Err(invalid("pair", "chains must share grid and line count"));
        }
        let p = Self { upper, lower, rng, snapped: 0 };
        p.check()?;
        Ok(p)
    }

    pub fn check(&self) -> Result<()> {
        for i in 0..self.upper.line_count() {
            let (u, l) = (self.upper.values(i), self.lower.values(i));
            if let Some(k) = (0..u.len()).find(|&k| u[k] < l[k]) {
                return Err(Error::OrderingViolated(format!("line {} node {k}: {} < {}", i + 1, u[k], l[k])));
            }
        }
        Ok(())
    }

    /// One heat-bath sweep (lines top to bottom, nodes left to right) of both chains.
    pub fn sweep(&mut self) -> Result<()> {
        let n = self.upper.line_count();
        let m = self.upper.grid().points();
        let sd = (0.5 * self.upper.grid().dt().as_f64()).sqrt();
        for i in 0..n {
            for k in 1..m - 1 {
                let u = self.rng.open_uniform();
                let mut xu = site_law(&self.upper, i, k).quantile(u);
                let xl = site_law(&self.lower, i, k).quantile(u);
                if xu < xl {
                    if xl - xu > QUANTILE_RESOLUTION * sd {
                        return Err(Error::OrderingViolated(format!("line {} node {k}: {xu} < {xl}", i + 1)));
                    }
                    xu = xl;
                    self.snapped += 1;
                }
                self.upper.values_mut(i)[k] = S::lit(xu);
                self.lower.values_mut(i)[k] = S::lit(xl);
            }
        }
        Ok(())
    }
}

/// Advances a coupled pair by one sweep; fails if the ordering is ever broken.
pub fn monotone_coupled_sweep<S: Real>(pair: &mut CoupledPair<S>) -> Result<()> {
    pair.sweep()
}
