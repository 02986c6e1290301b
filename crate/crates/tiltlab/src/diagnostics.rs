//! Statistical checks over sample collections: slope and confinement
//! statistics, tail fits, Kolmogorov–Smirnov tests, Gaussian-marginal and
//! Gibbs-invariance certification, and parabola avoidance estimates.

use serde::{Deserialize, Serialize};

use crate::bridges::levy_fill;
use crate::chain::{GibbsChain, McmcConfig};
use crate::ensemble::{domain_nodes, ensemble_chain, resample_domain, BoundaryScheme};
use crate::error::{invalid, Error, Result};
use crate::grid::TimeGrid;
use crate::oneline::{sample_tilted_exact, OneLineSpec};
use crate::params::TiltParams;
use crate::path::{Ensemble, Path};
use crate::rng::RngStream;

/// Pass rule applied to a statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Threshold {
    AtMost { limit: f64 },
    AtLeast { limit: f64 },
    Within { lo: f64, hi: f64 },
}

impl Threshold {
    pub fn admits(&self, value: f64) -> bool {
        match *self {
            Threshold::AtMost { limit } => value <= limit,
            Threshold::AtLeast { limit } => value >= limit,
            Threshold::Within { lo, hi } => value >= lo && value <= hi,
        }
    }

    /// Distance from `value` to the boundary of the pass region, positive inside.
    pub fn margin(&self, value: f64) -> f64 {
        match *self {
            Threshold::AtMost { limit } => limit - value,
            Threshold::AtLeast { limit } => value - limit,
            Threshold::Within { lo, hi } => (value - lo).min(hi - value),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub stream: u64,
}

impl From<&RngStream> for Provenance {
    fn from(r: &RngStream) -> Self {
        Self { seed: r.seed(), stream: r.stream() }
    }
}

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub name: String,
    pub statistic: String,
    pub value: f64,
    pub threshold: Threshold,
    pub pass: bool,
    pub sample_sizes: Vec<usize>,
    pub seed: Option<Provenance>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl TestReport {
    pub fn new(name: impl Into<String>, statistic: impl Into<String>, value: f64, threshold: Threshold) -> Self {
        Self {
            name: name.into(),
            statistic: statistic.into(),
            value,
            threshold,
            pass: threshold.admits(value),
            sample_sizes: Vec::new(),
            seed: None,
            notes: Vec::new(),
        }
    }

    pub fn with_sizes(mut self, sizes: &[usize]) -> Self {
        self.sample_sizes = sizes.to_vec();
        self
    }

    pub fn with_seed(mut self, p: Provenance) -> Self {
        self.seed = Some(p);
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    pub fn margin(&self) -> f64 {
        self.threshold.margin(self.value)
    }
}

/// `c(α)` in the asymptotic Kolmogorov–Smirnov critical value.
pub fn ks_coefficient(alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt()
}

pub fn ks_critical(alpha: f64, n: usize, m: usize) -> f64 {
    let (n, m) = (n as f64, m as f64);
    ks_coefficient(alpha) * ((n + m) / (n * m)).sqrt()
}

/// Asymptotic p-value for statistic `d` at effective size `n_eff`.
pub fn ks_p_value(d: f64, n_eff: f64) -> f64 {
    let sq = n_eff.sqrt();
    let lam = (sq + 0.12 + 0.11 / sq) * d;
    if lam < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lam * lam).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Sup distance between the empirical CDFs of `a` and `b`.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    let (a, b) = (sorted(a), sorted(b));
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    Ok(d)
}

pub fn ks_two_sample(a: &[f64], b: &[f64], significance: f64) -> Result<TestReport> {
    let d = ks_statistic(a, b)?;
    let crit = ks_critical(significance, a.len(), b.len());
    Ok(TestReport::new("ks_two_sample", "D", d, Threshold::AtMost { limit: crit }).with_sizes(&[a.len(), b.len()]))
}

/// One-sample statistic against a continuous CDF.
pub fn ks_statistic_cdf(xs: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::EmptySample);
    }
    let v = sorted(xs);
    let n = v.len() as f64;
    Ok(v.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let f = cdf(x);
        d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n)
    }))
}

pub fn ks_one_sample(xs: &[f64], cdf: impl Fn(f64) -> f64, significance: f64) -> Result<TestReport> {
    let d = ks_statistic_cdf(xs, cdf)?;
    let crit = ks_coefficient(significance) / (xs.len() as f64).sqrt();
    Ok(TestReport::new("ks_one_sample", "D", d, Threshold::AtMost { limit: crit }).with_sizes(&[xs.len()]))
}

/// One-sided Mann–Whitney test of "`a` is stochastically larger than `b`", normal
/// approximation with mid-ranks. The statistic is the z-score; it passes when the
/// null of no shift is rejected at `significance`.
pub fn mann_whitney_greater(a: &[f64], b: &[f64], significance: f64) -> Result<TestReport> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut all: Vec<(f64, bool)> = a.iter().map(|&x| (x, true)).chain(b.iter().map(|&x| (x, false))).collect();
    all.sort_by(|p, q| p.0.total_cmp(&q.0));
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let mut rank_sum = 0.0;
    let mut ties = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j + 1 < all.len() && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        let t = (j - i + 1) as f64;
        ties += t * t * t - t;
        rank_sum += mid * all[i..=j].iter().filter(|p| p.1).count() as f64;
        i = j + 1;
    }
    let u = rank_sum - n1 * (n1 + 1.0) / 2.0;
    let n = n1 + n2;
    let var = n1 * n2 / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
    let z = if var > 0.0 { (u - n1 * n2 / 2.0) / var.sqrt() } else { 0.0 };
    let crit = normal_quantile(1.0 - significance);
    Ok(TestReport::new("mann_whitney_greater", "z", z, Threshold::AtLeast { limit: crit }).with_sizes(&[a.len(), b.len()]))
}

/// Standard normal quantile by bisection on [`normal_cdf`].
pub fn normal_quantile(p: f64) -> f64 {
    let (mut lo, mut hi) = (-40.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if normal_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Linear interpolation of `path` at `t`.
fn value_at(path: &Path<f64>, t: f64) -> Result<f64> {
    let g = path.grid();
    if !(t >= g.left() - 1e-12 && t <= g.right() + 1e-12) {
        return Err(Error::OutOfGrid(t));
    }
    let u = ((t - g.left()) / g.dt()).clamp(0.0, (g.points() - 1) as f64);
    let i = (u.floor() as usize).min(g.points() - 2);
    let w = u - i as f64;
    let v = path.values();
    Ok(if w == 0.0 { v[i] } else { v[i] * (1.0 - w) + v[i + 1] * w })
}

fn mean_and_error(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeEstimate {
    pub t: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub draws: usize,
}

/// Mean and standard error of `(X¹(t) − t²)/|t|` across draws.
pub fn slope_estimator(draws: &[Ensemble<f64>], t: f64) -> Result<SlopeEstimate> {
    if draws.is_empty() {
        return Err(Error::EmptySample);
    }
    if t == 0.0 || !t.is_finite() {
        return Err(Error::OutOfGrid(t));
    }
    let ys = draws.iter().map(|e| Ok((value_at(e.line(0), t)? - t * t) / t.abs())).collect::<Result<Vec<_>>>()?;
    let (estimate, std_error) = mean_and_error(&ys);
    Ok(SlopeEstimate { t, estimate, std_error, draws: ys.len() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Confinement {
    /// Mean over draws of the window maximum of line `k + 1`.
    pub mean_max: f64,
    pub std_error: f64,
    /// `(t, P(X^{k+1}(0) > t λ^{-k/3}))`.
    pub tail: Vec<(f64, f64)>,
}

/// Window-maximum and scaled tail statistics of line `k + 1` (lines counted from 1).
pub fn confinement_stats(draws: &[Ensemble<f64>], k: usize, window: (f64, f64), lambda: f64, t_grid: &[f64]) -> Result<Confinement> {
    let first = draws.first().ok_or(Error::EmptySample)?;
    let lines = first.len();
    if k >= lines {
        return Err(Error::IndexOutOfRange { index: k as i64 + 1, lo: 1, hi: lines as i64 });
    }
    let g = first.grid();
    let (lo, hi) = (g.index_of(window.0)?, g.index_of(window.1)?);
    if hi < lo {
        return Err(invalid("window", "left end exceeds right end"));
    }
    let zero = g.index_of(0.0)?;
    let maxima: Vec<f64> = draws
        .iter()
        .map(|e| e.line(k).values()[lo..=hi].iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let (mean_max, std_error) = mean_and_error(&maxima);
    let scale = lambda.powf(-(k as f64) / 3.0);
    let at0: Vec<f64> = draws.iter().map(|e| e.line(k).values()[zero]).collect();
    let n = at0.len() as f64;
    let tail = t_grid.iter().map(|&t| (t, at0.iter().filter(|&&x| x > t * scale).count() as f64 / n)).collect();
    Ok(Confinement { mean_max, std_error, tail })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub exponent: f64,
    pub intercept: f64,
    pub points: usize,
}

fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Exponent `p` in `P(X > x) ≈ exp(−c x^p)`, by regressing `log(−log Ŝ)` on `log x`
/// over the upper half of the sample, after dropping the five largest values and
/// keeping the central 80% of what remains.
pub fn stretched_exponent_fit(samples: &[f64]) -> Result<TailFit> {
    let v = sorted(samples);
    let n = v.len();
    if n < 40 {
        return Err(Error::EmptySample);
    }
    let tail: Vec<usize> = (n / 2..n - 5).collect();
    let cut = tail.len() / 10;
    let keep = &tail[cut..tail.len() - cut];
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for &i in keep {
        let x = v[i];
        let s = (n as f64 - i as f64 - 0.5) / n as f64;
        if x > 0.0 && s < 1.0 {
            xs.push(x.ln());
            ys.push((-s.ln()).ln());
        }
    }
    if xs.len() < 3 {
        return Err(invalid("samples", "too few positive tail values to fit"));
    }
    let (exponent, intercept) = least_squares(&xs, &ys);
    Ok(TailFit { exponent, intercept, points: xs.len() })
}

/// Least-squares coefficient `c` (through the origin) of `−log Ŝ(t) ≈ c t^power`
/// over the levels in `ts` where the empirical survival is positive.
pub fn survival_power_fit(samples: &[f64], ts: &[f64], power: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    let n = samples.len() as f64;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &t in ts {
        let s = samples.iter().filter(|&&x| x > t).count() as f64 / n;
        if s > 0.0 {
            let x = t.powf(power);
            sxy += x * -s.ln();
            sxx += x * x;
        }
    }
    if sxx == 0.0 {
        return Err(invalid("samples", "no level with positive survival"));
    }
    Ok(sxy / sxx)
}

/// L1 distance between a histogram of `samples` on `bins` cells of `[lo, hi]` and
/// `density`, including the mismatch of mass outside the range.
pub fn density_l1(samples: &[f64], density: impl Fn(f64) -> f64, lo: f64, hi: f64, bins: usize) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    if !(hi > lo) || bins == 0 {
        return Err(invalid("bins", "need hi > lo and at least one bin"));
    }
    let w = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    let mut outside = 0usize;
    for &x in samples {
        if x >= lo && x < hi {
            counts[(((x - lo) / w) as usize).min(bins - 1)] += 1;
        } else {
            outside += 1;
        }
    }
    let n = samples.len() as f64;
    let mut l1 = 0.0;
    let mut inside_mass = 0.0;
    for (b, &c) in counts.iter().enumerate() {
        let a = lo + b as f64 * w;
        // Simpson on four sub-cells.
        let h = w / 4.0;
        let f: Vec<f64> = (0..=4).map(|j| density(a + j as f64 * h)).collect();
        let mass = h / 3.0 * (f[0] + 4.0 * f[1] + 2.0 * f[2] + 4.0 * f[3] + f[4]);
        inside_mass += mass;
        l1 += (c as f64 / n - mass).abs();
    }
    l1 += (outside as f64 / n - (1.0 - inside_mass)).abs();
    Ok(l1)
}

/// Regime constant and significance for [`gaussian_marginal_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginalCheck {
    pub s: f64,
    pub k: f64,
    pub t: f64,
    pub significance: f64,
    pub regime_constant: f64,
}

impl MarginalCheck {
    pub fn new(s: f64, k: f64, t: f64) -> Self {
        Self { s, k, t, significance: 1e-3, regime_constant: 1.0 }
    }

    /// `C ≤ s` and `T ≥ C(s + √s log T)`.
    pub fn in_regime(&self) -> bool {
        let c = self.regime_constant;
        self.s >= c && self.s < self.t && self.t >= c * (self.s + self.s.sqrt() * self.t.ln())
    }

    pub fn variance(&self) -> f64 {
        self.s * (1.0 - self.s / self.t)
    }
}

/// KS comparison of `X¹(s) − (s² − 2Ks)` with a centred Gaussian of variance `s(1 − s/T)`.
/// Total-variation closeness is proxied by the KS distance.
pub fn gaussian_marginal_check(draws: &[Ensemble<f64>], check: &MarginalCheck) -> Result<TestReport> {
    if draws.is_empty() {
        return Err(Error::EmptySample);
    }
    let s = check.s;
    let centre = s * s - 2.0 * check.k * s;
    let xs = draws.iter().map(|e| Ok(value_at(e.line(0), s)? - centre)).collect::<Result<Vec<_>>>()?;
    let var = check.variance();
    let crit = ks_coefficient(check.significance) / (xs.len() as f64).sqrt();
    let d = if var > 0.0 {
        let sd = var.sqrt();
        ks_statistic_cdf(&xs, |x| normal_cdf(x / sd))?
    } else {
        1.0
    };
    let mut r = TestReport::new("gaussian_marginal", "D (KS proxy for TV)", d, Threshold::AtMost { limit: crit })
        .with_sizes(&[xs.len()])
        .with_note(format!("reference N(0, {var:.6}) for X1(s) - (s^2 - 2Ks)"));
    if !check.in_regime() {
        r = r.with_note("regime-violation: s too small or too close to T");
    }
    Ok(r)
}

/// Where the stationary states come from.
#[derive(Debug, Clone, PartialEq)]
pub enum InvarianceSource {
    /// Independent exact one-line draws.
    Exact(OneLineSpec<f64>),
    /// States of one long ensemble chain, `cfg.thinning` sweeps apart after `cfg.burn_in`.
    Chain { grid: TimeGrid<f64>, params: TiltParams<f64>, scheme: BoundaryScheme<f64>, cfg: McmcConfig },
}

/// Resampling variant applied to the second member of each pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Resampler {
    #[default]
    Faithful,
    /// Drops the area tilt: a deliberately wrong kernel used to check test power.
    DropTilt,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvarianceSetup {
    pub source: InvarianceSource,
    pub domain: (f64, f64),
    pub n_top: usize,
    pub repetitions: usize,
    /// Restricted sweeps in the extra resampling step.
    pub sweeps: usize,
    pub probe: f64,
    pub line: usize,
    pub significance: f64,
    pub resampler: Resampler,
    pub kernel: McmcConfig,
}

/// Pairs each stationary state with a copy that has had its top `n_top` lines
/// redrawn on `domain`, then KS-compares the marginal at `probe`.
///
/// The pairs share their state outside the domain, which makes the KS test
/// conservative; the drop-tilt resampler is still rejected decisively.
pub fn gibbs_invariance_test(setup: &InvarianceSetup, rng: &mut RngStream) -> Result<TestReport> {
    if setup.repetitions == 0 {
        return Err(Error::EmptySample);
    }
    let prov = Provenance::from(&*rng);
    let mut before = Vec::with_capacity(setup.repetitions);
    let mut after = Vec::with_capacity(setup.repetitions);
    let mut step_rng = rng.substream(1);
    let mut record = |ens: &Ensemble<f64>, strengths: Vec<f64>, wall: Vec<f64>| -> Result<()> {
        let g = ens.grid();
        let probe = g.exact_index_of(setup.probe)?;
        before.push(ens.line(setup.line).values()[probe]);
        if setup.n_top == 0 {
            after.push(ens.line(setup.line).values()[probe]);
            return Ok(());
        }
        let (a, b) = domain_nodes(g, setup.domain.0, setup.domain.1)?;
        let mut c = GibbsChain::from_state(ens, strengths, wall, setup.kernel)?;
        if setup.resampler == Resampler::DropTilt {
            c.set_strengths(vec![0.0; ens.len()]);
        }
        resample_domain(&mut c, setup.n_top, a, b, setup.sweeps, &mut step_rng);
        after.push(c.values(setup.line)[probe]);
        Ok(())
    };
    match &setup.source {
        InvarianceSource::Exact(spec) => {
            let wall = spec.floor_values()?;
            let mut src = rng.substream(0);
            for _ in 0..setup.repetitions {
                let p = sample_tilted_exact(spec, &mut src)?.value;
                record(&Ensemble::from(p), vec![spec.strength], wall.clone())?;
            }
        }
        InvarianceSource::Chain { grid, params, scheme, cfg } => {
            let mut src = rng.substream(0);
            let mut chain = ensemble_chain(*grid, params, scheme, *cfg)?;
            let strengths = chain.strengths().to_vec();
            let wall = chain.wall().to_vec();
            let mut failure = None;
            chain.run(setup.repetitions, &mut src, |c| {
                if failure.is_none() {
                    if let Err(e) = record(&c.ensemble(), strengths.clone(), wall.clone()) {
                        failure = Some(e);
                    }
                }
            });
            if let Some(e) = failure {
                return Err(e);
            }
        }
    }
    let mut r = ks_two_sample(&before, &after, setup.significance)?;
    r.name = match setup.resampler {
        Resampler::Faithful => "gibbs_invariance".into(),
        Resampler::DropTilt => "gibbs_invariance_drop_tilt".into(),
    };
    Ok(r.with_seed(prov).with_note("paired design: KS is conservative"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AvoidanceRow {
    pub h: f64,
    /// Importance-sampled failure probability.
    pub failure: f64,
    pub std_error: f64,
    /// Plain Monte Carlo failure probability.
    pub plain_failure: f64,
    pub plain_std_error: f64,
    /// Plain draws with a non-negligible crossing probability.
    pub touched: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvoidanceTable {
    pub t: f64,
    pub points: usize,
    pub draws: usize,
    pub rows: Vec<AvoidanceRow>,
    /// Slope of `log(−log P(fail))` against `log h`, when at least two rows are positive.
    pub exponent: Option<f64>,
}

/// Probability that the bridge values `z` (with the barrier `h + t²`) cross between
/// nodes, given the nodes. Kept in log form so failures far below 1e-16 survive.
fn crossing_probability(z: &[f64], times: &[f64], h: f64, inv: f64) -> f64 {
    let mut log_avoid = 0.0f64;
    let mut prev = h - z[0];
    for k in 1..z.len() {
        let g = h + times[k] * times[k] - z[k];
        if prev <= 0.0 || g <= 0.0 {
            return 1.0;
        }
        log_avoid += (-(-prev * g * inv).exp()).ln_1p();
        prev = g;
    }
    -log_avoid.exp_m1()
}

/// Node at which a bridge on `[0, T]` most cheaply reaches `h + t²`: minimizes
/// `(h + t²)² T / (2 t (T − t))` over interior nodes.
fn likeliest_touch(times: &[f64], h: f64) -> usize {
    let t = times[times.len() - 1];
    let cost = |s: f64| (h + s * s).powi(2) * t / (2.0 * s * (t - s));
    (1..times.len() - 1).min_by(|&a, &b| cost(times[a]).total_cmp(&cost(times[b]))).expect("at least 3 nodes")
}

fn moments_to_estimate(sum: f64, sum_sq: f64, n: f64) -> (f64, f64) {
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0);
    (mean, (var / n).sqrt())
}

/// Probability that a standard Brownian bridge on `[0, T]` touches `t ↦ h + t²`,
/// for each `h`. Each draw contributes the conditional crossing probability given
/// its values on a `points`-node grid.
///
/// Two estimates per level: plain draws (shared across levels), and draws shifted
/// by a tent that meets the barrier at its likeliest touching node, reweighted by
/// the Gaussian likelihood ratio. The fit uses the shifted estimate, whose relative
/// error stays bounded as the failure probability shrinks.
pub fn avoidance_probability_check(hs: &[f64], t: f64, points: usize, draws: usize, rng: &mut RngStream) -> Result<AvoidanceTable> {
    if hs.iter().any(|&h| !(h > 1.0)) {
        return Err(invalid("h", "levels must exceed 1"));
    }
    if draws == 0 {
        return Err(Error::EmptySample);
    }
    let grid = TimeGrid::new(0.0, t, points)?;
    let dt = grid.dt();
    let times = grid.times();
    let inv = 2.0 / dt;
    let n = draws as f64;
    let mut z = vec![0.0; points];

    let mut plain = vec![(0.0f64, 0.0f64, 0usize); hs.len()];
    for _ in 0..draws {
        levy_fill(&mut z, dt, rng);
        for (j, &h) in hs.iter().enumerate() {
            let f = crossing_probability(&z, &times, h, inv);
            plain[j].0 += f;
            plain[j].1 += f * f;
            if f > 1e-300 {
                plain[j].2 += 1;
            }
        }
    }

    let mut shifted = z.clone();
    let mut rows = Vec::with_capacity(hs.len());
    for (j, &h) in hs.iter().enumerate() {
        let m = likeliest_touch(&times, h);
        let s = times[m];
        let peak = h + s * s;
        let tent: Vec<f64> = times.iter().map(|&u| if u <= s { peak * u / s } else { peak * (t - u) / (t - s) }).collect();
        // Density ratio of the bridge to the shifted bridge is exp(c p (p/2 − z(s))).
        let c = t / (s * (t - s));
        let (mut sum, mut sum_sq) = (0.0f64, 0.0f64);
        for _ in 0..draws {
            levy_fill(&mut z, dt, rng);
            for ((y, &x), &b) in shifted.iter_mut().zip(&z).zip(&tent) {
                *y = x + b;
            }
            let f = crossing_probability(&shifted, &times, h, inv);
            let v = f * (c * peak * (0.5 * peak - shifted[m])).exp();
            sum += v;
            sum_sq += v * v;
        }
        let (failure, std_error) = moments_to_estimate(sum, sum_sq, n);
        let (plain_failure, plain_std_error) = moments_to_estimate(plain[j].0, plain[j].1, n);
        rows.push(AvoidanceRow { h, failure, std_error, plain_failure, plain_std_error, touched: plain[j].2 });
    }
    let pos: Vec<&AvoidanceRow> = rows.iter().filter(|r| r.failure > 0.0 && r.failure < 1.0).collect();
    let exponent = (pos.len() >= 2).then(|| {
        let xs: Vec<f64> = pos.iter().map(|r| r.h.ln()).collect();
        let ys: Vec<f64> = pos.iter().map(|r| (-r.failure.ln()).ln()).collect();
        least_squares(&xs, &ys).0
    });
    Ok(AvoidanceTable { t, points, draws, rows, exponent })
}
