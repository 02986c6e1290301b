//! Block Gibbs sampler shared by the one-line and multi-line models.

use serde::{Deserialize, Serialize};

use crate::bridges::{Block, Proposal, Side};
use crate::error::{invalid, Result};
use crate::grid::TimeGrid;
use crate::path::{Ensemble, Path};
use crate::rng::RngStream;
use crate::site::site_law;
use crate::scalar::Real;

/// How a block is redrawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum BlockKernel {
    /// Tilted Gaussian proposal built node by node with early rejection.
    #[default]
    Dual,
    /// The exact one-line sampler: plain bridge proposal, midpoint construction.
    ExactPrimal,
}

/// Sweep schedule and rejection budgets of the block Gibbs sampler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    pub sweeps: usize,
    /// Nodes per base block, endpoints included.
    pub block_points: usize,
    pub burn_in: usize,
    pub thinning: usize,
    /// Attempts per block before it is split in two. A single interior node that
    /// exhausts them is drawn directly from its conditional law.
    pub attempts: u64,
    pub kernel: BlockKernel,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self { sweeps: 1000, block_points: 33, burn_in: 0, thinning: 1, attempts: 64, kernel: BlockKernel::Dual }
    }
}

impl McmcConfig {
    /// Defaults with burn-in of ten sweeps per base block length of the domain.
    pub fn for_points(points: usize) -> Self {
        let mut c = Self::default();
        c.burn_in = c.default_burn_in(points);
        c.sweeps = c.burn_in + 1000;
        c
    }

    pub fn default_burn_in(&self, points: usize) -> usize {
        10 * (points - 1).div_ceil(self.block_points - 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.block_points < 3 {
            return Err(invalid("block_points", "blocks need at least 3 points"));
        }
        if self.sweeps <= self.burn_in {
            return Err(invalid("sweeps", "sweeps must exceed burn-in"));
        }
        if self.thinning == 0 {
            return Err(invalid("thinning", "must be at least 1"));
        }
        if self.attempts == 0 {
            return Err(invalid("attempts", "rejection budget must be positive"));
        }
        Ok(())
    }

    /// Draws produced by a run of `sweeps` sweeps.
    pub fn draws(&self) -> usize {
        (self.sweeps - self.burn_in) / self.thinning
    }
}

/// Counters describing how the block updates went.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainStats {
    pub blocks: u64,
    pub splits: u64,
    /// Single nodes drawn by inverse CDF after rejection ran out.
    pub direct: u64,
    pub attempts: u64,
}

/// Line ensemble state with fixed end values, a wall under the bottom line, and per-line tilts.
#[derive(Debug, Clone)]
pub struct GibbsChain<S> {
    grid: TimeGrid<S>,
    dt: S,
    lines: Vec<Vec<S>>,
    strengths: Vec<S>,
    wall: Vec<S>,
    wall_var: S,
    line_var: S,
    cfg: McmcConfig,
    stats: ChainStats,
    scratch: Vec<S>,
}

/// Gap variance for two independent lines.
pub(crate) const LINE_GAP_VAR: f64 = 2.0;

impl<S: Real> GibbsChain<S> {
    /// Chain started from the clipped tilted-mean profile built bottom up.
    ///
    /// `ends[i]` holds the (left, right) values of line `i`; they must be strictly
    /// ordered and strictly above the wall.
    pub fn new(grid: TimeGrid<S>, ends: &[(S, S)], strengths: Vec<S>, wall: Vec<S>, cfg: McmcConfig) -> Result<Self> {
        cfg.validate()?;
        let n = ends.len();
        let m = grid.points();
        if n == 0 || strengths.len() != n {
            return Err(invalid("lines", "need one strength per line"));
        }
        if wall.len() != m {
            return Err(invalid("wall", "wall must have one value per node"));
        }
        for (i, &(l, r)) in ends.iter().enumerate() {
            let (bl, br) = if i + 1 < n { ends[i + 1] } else { (wall[0], wall[m - 1]) };
            if !(l > bl && r > br) {
                return Err(invalid("boundary", format!("end values of line {} must sit strictly above the next line or wall", i + 1)));
            }
        }
        let dt = grid.dt();
        let lift = dt.sqrt() * S::lit(0.5);
        let mut lines = vec![Vec::new(); n];
        for i in (0..n).rev() {
            let below: Vec<S> = if i + 1 < n { lines[i + 1].clone() } else { wall.clone() };
            let (l, r) = ends[i];
            let nn = S::lit((m - 1) as f64);
            let v: Vec<S> = (0..m)
                .map(|k| {
                    if k == 0 {
                        return l;
                    }
                    if k == m - 1 {
                        return r;
                    }
                    let kk = S::lit(k as f64);
                    let mean = l + (r - l) * kk / nn + S::lit(0.5) * strengths[i] * dt * dt * kk * (kk - nn);
                    mean.max(below[k] + lift)
                })
                .collect();
            lines[i] = v;
        }
        Ok(Self {
            grid,
            dt,
            lines,
            strengths,
            wall,
            wall_var: S::one(),
            line_var: S::lit(LINE_GAP_VAR),
            cfg,
            stats: ChainStats::default(),
            scratch: vec![S::zero(); m],
        })
    }

    /// Chain started from a given ordered state.
    pub fn from_state(ens: &Ensemble<S>, strengths: Vec<S>, wall: Vec<S>, cfg: McmcConfig) -> Result<Self> {
        cfg.validate()?;
        if strengths.len() != ens.len() || wall.len() != ens.grid().points() {
            return Err(invalid("lines", "strengths and wall must match the ensemble"));
        }
        let grid = *ens.grid();
        Ok(Self {
            grid,
            dt: grid.dt(),
            lines: ens.lines().iter().map(|l| l.values().to_vec()).collect(),
            strengths,
            wall,
            wall_var: S::one(),
            line_var: S::lit(LINE_GAP_VAR),
            cfg,
            stats: ChainStats::default(),
            scratch: vec![S::zero(); grid.points()],
        })
    }

    pub fn grid(&self) -> &TimeGrid<S> {
        &self.grid
    }

    pub fn config(&self) -> &McmcConfig {
        &self.cfg
    }

    pub fn stats(&self) -> ChainStats {
        self.stats
    }

    pub fn line_count(&self) -> usize {
        self.lines.len()
    }

    pub fn strengths(&self) -> &[S] {
        &self.strengths
    }

    pub(crate) fn set_strengths(&mut self, s: Vec<S>) {
        self.strengths = s;
    }

    pub fn wall(&self) -> &[S] {
        &self.wall
    }

    pub fn values(&self, line: usize) -> &[S] {
        &self.lines[line]
    }

    pub(crate) fn values_mut(&mut self, line: usize) -> &mut [S] {
        &mut self.lines[line]
    }

    pub(crate) fn line_var(&self) -> S {
        self.line_var
    }

    pub(crate) fn wall_var(&self) -> S {
        self.wall_var
    }

    pub fn line(&self, i: usize) -> Path<S> {
        Path::from_raw(self.grid, self.lines[i].clone())
    }

    pub fn ensemble(&self) -> Ensemble<S> {
        Ensemble::unchecked(self.lines.iter().map(|l| Path::from_raw(self.grid, l.clone())).collect())
            .expect("lines share the chain grid")
    }

    /// Redraws nodes strictly inside `lo..hi` of line `i`, splitting the block on failure.
    pub fn resample_block(&mut self, i: usize, lo: usize, hi: usize, rng: &mut RngStream) {
        if hi < lo + 2 {
            return;
        }
        self.stats.blocks += 1;
        let budget = self.cfg.attempts;
        let n = self.lines.len();
        let (floor_vals, floor_var) = if i + 1 < n { (&self.lines[i + 1][lo..=hi], self.line_var) } else { (&self.wall[lo..=hi], self.wall_var) };
        let ceiling = if i > 0 { Some(Side { values: &self.lines[i - 1][lo..=hi], var: self.line_var }) } else { None };
        let cur = &self.lines[i];
        let kernel = self.cfg.kernel;
        let block = Block {
            dt: self.dt,
            left: cur[lo],
            right: cur[hi],
            floor: Some(Side { values: floor_vals, var: floor_var }),
            ceiling,
            strength: self.strengths[i],
            proposal: match kernel {
                BlockKernel::Dual => Proposal::Dual,
                BlockKernel::ExactPrimal => Proposal::Primal,
            },
        };
        let out = &mut self.scratch[..=hi - lo];
        let res = match kernel {
            BlockKernel::Dual => block.sample_sequential(out, rng, budget),
            BlockKernel::ExactPrimal => block.sample_levy(out, rng.next_u64(), budget),
        };
        match res {
            Ok(a) => {
                self.stats.attempts += a;
                self.lines[i][lo + 1..hi].copy_from_slice(&self.scratch[1..hi - lo]);
            }
            Err(_) => {
                self.stats.attempts += budget;
                if hi == lo + 2 {
                    self.stats.direct += 1;
                    let u = rng.open_uniform();
                    let x = site_law(self, i, lo + 1).quantile(u);
                    self.lines[i][lo + 1] = S::lit(x);
                } else {
                    self.stats.splits += 1;
                    let mid = (lo + hi) / 2;
                    self.resample_block(i, lo, mid, rng);
                    self.resample_block(i, mid, hi, rng);
                }
            }
        }
    }

    /// Covers `a..=b` with consecutive blocks of `size` intervals shifted by a random offset.
    fn tiled_pass(&mut self, i: usize, a: usize, b: usize, size: usize, rng: &mut RngStream) {
        let span = b - a;
        if size >= span {
            self.resample_block(i, a, b, rng);
            return;
        }
        let offset = rng.below(size as u64) as usize;
        let mut lo = a;
        let mut hi = a + offset;
        if hi == lo {
            hi = lo + size;
        }
        loop {
            let h = hi.min(b);
            self.resample_block(i, lo, h, rng);
            if h == b {
                break;
            }
            lo = h;
            hi = h + size;
        }
    }

    /// One sweep over lines `lines` restricted to nodes `a..=b`: per line, a pass at a random
    /// dyadic multiple of the base block length, then a base-length pass.
    pub fn sweep_range(&mut self, lines: std::ops::Range<usize>, a: usize, b: usize, rng: &mut RngStream) {
        let base = self.cfg.block_points - 1;
        let span = b - a;
        for i in lines {
            if base < span {
                let mut levels = 0;
                while base << levels < span {
                    levels += 1;
                }
                let u = 1 + rng.below(levels as u64) as usize;
                self.tiled_pass(i, a, b, base << u, rng);
            }
            self.tiled_pass(i, a, b, base, rng);
        }
    }

    pub fn sweep(&mut self, rng: &mut RngStream) {
        let m = self.grid.points();
        self.sweep_range(0..self.lines.len(), 0, m - 1, rng);
    }

    /// Burn-in, then `draws` observations taken every `thinning` sweeps.
    pub fn run(&mut self, draws: usize, rng: &mut RngStream, mut observe: impl FnMut(&Self)) {
        for _ in 0..self.cfg.burn_in {
            self.sweep(rng);
        }
        for _ in 0..draws {
            for _ in 0..self.cfg.thinning {
                self.sweep(rng);
            }
            observe(self);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(McmcConfig::default().validate().is_ok());
        assert!(McmcConfig { block_points: 2, ..Default::default() }.validate().is_err());
        assert!(McmcConfig { sweeps: 5, burn_in: 5, ..Default::default() }.validate().is_err());
        let c = McmcConfig::for_points(2049);
        assert_eq!(c.burn_in, 640);
    }

    #[test]
    fn ordering_kept_through_sweeps() {
        let g = TimeGrid::new(-3.0, 3.0, 193).unwrap();
        let ends = [(1e-3 * 3.0, 3e-3), (2e-3, 2e-3), (1e-3, 1e-3)];
        let mut c = GibbsChain::new(g, &ends, vec![2.0, 4.0, 8.0], vec![0.0; 193], McmcConfig::default()).unwrap();
        let mut rng = RngStream::new(1, 0);
        for _ in 0..200 {
            c.sweep(&mut rng);
            c.ensemble().check_positive().unwrap();
        }
        assert!(c.stats().blocks > 0);
    }

    #[test]
    fn init_rejects_misordered_ends() {
        let g = TimeGrid::new(0.0, 1.0, 9).unwrap();
        assert!(GibbsChain::new(g, &[(1.0, 1.0), (1.0, 0.5)], vec![1.0, 2.0], vec![0.0; 9], McmcConfig::default()).is_err());
        assert!(GibbsChain::new(g, &[(0.0, 1.0)], vec![1.0], vec![0.0; 9], McmcConfig::default()).is_err());
    }
}
