//! Exact conditional law of a single interior node, sampled by inverse CDF.

use crate::bridges::clear_prob;
use crate::chain::GibbsChain;
use crate::scalar::Real;

const GL_NODES: [f64; 6] = [-0.932_469_514_203_152, -0.661_209_386_466_264_5, -0.238_619_186_083_196_9, 0.238_619_186_083_196_9, 0.661_209_386_466_264_5, 0.932_469_514_203_152];
const GL_WEIGHTS: [f64; 6] = [0.171_324_492_379_170_3, 0.360_761_573_048_138_6, 0.467_913_934_572_691, 0.467_913_934_572_691, 0.360_761_573_048_138_6, 0.171_324_492_379_170_3];
const PANELS: usize = 24;

/// Conditional law of one interior node given the rest of the ensemble.
pub(crate) struct SiteLaw {
    mu: f64,
    inv_dt: f64,
    lo: f64,
    hi: f64,
    // (left gap, right gap, 2/(var dt)) for the two intervals touching the node, floor then ceiling
    floor: Option<(f64, f64, f64)>,
    ceiling: Option<(f64, f64, f64)>,
    reference: f64,
}

impl SiteLaw {
    fn weight(&self, x: f64) -> f64 {
        let mut w = ((self.reference - self.mu).powi(2) - (x - self.mu).powi(2)) * self.inv_dt;
        w = w.exp();
        if let Some((gl, gr, c)) = self.floor {
            let g = x - self.lo;
            w *= clear_prob(gl, g, c) * clear_prob(g, gr, c);
        }
        if let Some((gl, gr, c)) = self.ceiling {
            let g = self.hi - x;
            w *= clear_prob(gl, g, c) * clear_prob(g, gr, c);
        }
        w
    }

    fn integral(&self, a: f64, b: f64) -> f64 {
        let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
        h * GL_NODES.iter().zip(&GL_WEIGHTS).map(|(n, w)| w * self.weight(c + h * n)).sum::<f64>()
    }

    /// Integration range: the allowed interval cut to where the Gaussian factor is not negligible.
    fn range(&self) -> (f64, f64) {
        let sd = (0.5 / self.inv_dt).sqrt();
        let (lo, hi) = (self.lo, self.hi);
        let mut a = lo.max(self.mu - 12.0 * sd);
        let mut b = hi.min(self.mu + 12.0 * sd);
        if a >= b {
            if lo > self.mu {
                a = lo;
                b = hi.min(lo + 12.0 * sd);
            } else {
                b = hi;
                a = lo.max(hi - 12.0 * sd);
            }
        }
        (a, b)
    }

    /// Quantile `u` by graded-panel quadrature and bisection inside the selected panel.
    pub(crate) fn quantile(&self, u: f64) -> f64 {
        let (a, b) = self.range();
        let grade = |s: f64| a + (b - a) * s * s * (3.0 - 2.0 * s);
        let edges: Vec<f64> = (0..=PANELS).map(|j| grade(j as f64 / PANELS as f64)).collect();
        let masses: Vec<f64> = edges.windows(2).map(|w| self.integral(w[0], w[1])).collect();
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) {
            return 0.5 * (a + b);
        }
        let mut target = u * total;
        let mut p = 0;
        while p + 1 < PANELS && target > masses[p] {
            target -= masses[p];
            p += 1;
        }
        let (mut l, mut r) = (edges[p], edges[p + 1]);
        let start = l;
        // safeguarded Newton on the partial integral, falling back to bisection
        let mut x = l + (r - l) * (target / masses[p]).clamp(0.0, 1.0);
        for _ in 0..100 {
            let g = self.integral(start, x) - target;
            if g < 0.0 {
                l = x;
            } else {
                r = x;
            }
            let d = self.weight(x);
            let mut next = if d > 0.0 { x - g / d } else { f64::NAN };
            if !(next > l && next < r) {
                next = 0.5 * (l + r);
            }
            if (next - x).abs() <= 1e-15 * (1.0 + x.abs()) || r - l <= 1e-15 * (1.0 + x.abs()) {
                return next;
            }
            x = next;
        }
        x
    }
}

pub(crate) fn site_law<S: Real>(c: &GibbsChain<S>, i: usize, k: usize) -> SiteLaw {
    let dt = c.grid().dt().as_f64();
    let x = c.values(i);
    let s = c.strengths()[i].as_f64();
    let mu = 0.5 * (x[k - 1].as_f64() + x[k + 1].as_f64()) - 0.5 * s * dt * dt;
    let n = c.line_count();
    let (fl, fvar) = if i + 1 < n { (c.values(i + 1), c.line_var()) } else { (c.wall(), c.wall_var()) };
    let fl = |j: usize| fl[j].as_f64();
    let lo = fl(k);
    let floor = Some((x[k - 1].as_f64() - fl(k - 1), x[k + 1].as_f64() - fl(k + 1), 2.0 / (fvar.as_f64() * dt)));
    let (hi, ceiling) = if i > 0 {
        let up = c.values(i - 1);
        let cv = 2.0 / (c.line_var().as_f64() * dt);
        (up[k].as_f64(), Some((up[k - 1].as_f64() - x[k - 1].as_f64(), up[k + 1].as_f64() - x[k + 1].as_f64(), cv)))
    } else {
        (f64::INFINITY, None)
    };
    let reference = mu.clamp(lo, hi);
    SiteLaw { mu, inv_dt: 1.0 / dt, lo, hi, floor, ceiling, reference }
}
