//! Deterministic geometry: tangent lines to parabolas, limit shapes, and the
//! scaffolding functions (floors, paths, error envelopes) of the line-by-line
//! induction for the slope-(−2K) boundary.

use crate::error::{invalid, Error, Result};
use crate::scalar::Real;
use crate::slopes::SlopePair;

/// Tangency abscissae from the point `(T, −αT²)` to the parabola `t ↦ −a t²`.
pub fn tangency_location<S: Real>(t: S, alpha: S, a: S) -> Result<(S, S)> {
    if !(alpha > S::zero() && alpha < a) {
        return Err(invalid("alpha", format!("need 0 < α < a, got α = {alpha}, a = {a}")));
    }
    let s = (S::one() - alpha / a).sqrt();
    Ok((t * (S::one() - s), t * (S::one() + s)))
}

/// Macroscopic shape of `X − t²` for the state with slopes `(L, R)`.
pub fn hydro_limit_shape<S: Real>(pair: &SlopePair<S>, t: S) -> Result<S> {
    let (l, r) = match (pair.left().finite(), pair.right().finite()) {
        (Some(l), Some(r)) => (l, r),
        _ => return Err(invalid("slopes", "limit shape needs finite slopes")),
    };
    let half = S::lit(0.5);
    let quarter = S::lit(0.25);
    Ok(if t <= l * half {
        -l * t + quarter * l * l
    } else if t >= -r * half {
        r * t + quarter * r * r
    } else {
        -t * t
    })
}

/// Largest line index whose natural scale `Tλ^{-(k-1)/2}` is at least `T^{-15}`.
pub fn n0_threshold<S: Real>(t: S, lambda: S) -> usize {
    let q = S::lit(32.0) * t.ln() / lambda.ln();
    1 + q.floor().max(S::zero()).to_usize().unwrap_or(0)
}

/// Parameters of the induction: half-width `T`, slope parameter `K`, ratio `λ`, exponent `δ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HydroGeometry<S> {
    pub t: S,
    pub k: S,
    pub lambda: S,
    pub delta: S,
    pub n0: usize,
    pub beta: S,
    pub gamma: S,
    /// Constant in the width of the reduced-error stretch.
    pub err_constant: S,
}

impl<S: Real> HydroGeometry<S> {
    pub fn new(t: S, k: S, lambda: S, delta: S) -> Result<Self> {
        if !(t > S::one()) {
            return Err(invalid("T", "must exceed 1"));
        }
        if !(lambda > S::one()) {
            return Err(invalid("lambda", "ratio must exceed 1"));
        }
        if !(delta > S::zero() && delta < S::lit(0.05)) {
            return Err(invalid("delta", "must lie in (0, 1/20)"));
        }
        if !(k > S::zero()) {
            return Err(invalid("K", "must be positive"));
        }
        let two = S::lit(2.0);
        Ok(Self {
            t,
            k,
            lambda,
            delta,
            n0: n0_threshold(t, lambda),
            beta: (S::one() + lambda.recip().sqrt()) / two,
            gamma: S::one() - two * k / t,
            err_constant: S::one(),
        })
    }

    /// Parameter point used for the bracket checks: `T = 1000, K = 1, λ = 2, δ = 0.02`.
    pub fn reference() -> Self {
        Self::new(S::lit(1000.0), S::one(), S::lit(2.0), S::lit(0.02)).expect("reference point is valid")
    }

    fn td(&self) -> S {
        self.t.powf(self.delta)
    }

    /// Curvature `λ^{k-1}` of line `k` (1-based).
    pub fn curvature(&self, k: usize) -> S {
        self.lambda.powi(k as i32 - 1)
    }

    /// Starting height offset `S_k = T² − 2KT + 4(n₀ − k + 1)T^δ`.
    pub fn s_k(&self, k: usize) -> S {
        let t = self.t;
        t * t - S::lit(2.0) * self.k * t + S::lit(4.0 * (self.n0 as f64 - k as f64 + 1.0)) * self.td()
    }

    /// `T − ξ` for the tangent from `(T, −p_k(T) + h)` to `−p_k`.
    fn reach(&self, k: usize, h: S) -> S {
        (h / self.curvature(k)).sqrt()
    }

    fn shift(&self, k: usize) -> S {
        S::lit(4.0 * (self.n0 as f64 - k as f64) + 2.0) * self.td()
    }

    /// Height above `−p_k(T)` of the path anchor: `T² − 2KT + 2T^δ`.
    fn path_height(&self) -> S {
        self.t * self.t - S::lit(2.0) * self.k * self.t + S::lit(2.0) * self.td()
    }
}

/// Even piecewise function: parabola `−a t²` on `|t| ≤ join`, a line beyond, plus a constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetricProfile<S> {
    pub curvature: S,
    pub join: S,
    /// Value and slope of the outer line at `t = join` (the left piece mirrors it).
    pub join_value: S,
    pub slope: S,
    pub offset: S,
}

impl<S: Real> SymmetricProfile<S> {
    pub fn eval(&self, t: S) -> S {
        let u = t.abs();
        let v = if u <= self.join { -self.curvature * u * u } else { self.join_value + self.slope * (u - self.join) };
        v + self.offset
    }

    /// Value without the constant offset.
    pub fn base(&self, t: S) -> S {
        self.eval(t) - self.offset
    }
}

/// Scaffold of a light line `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LightScaffold<S> {
    pub k: usize,
    pub s_k: S,
    pub xi: S,
    pub bracket: (S, S),
    pub xi_bar: S,
    /// Tangency of the path's tangent lines.
    pub path_join: S,
    pub floor: SymmetricProfile<S>,
    pub path: SymmetricProfile<S>,
    reach: S,
    bracket_reach: (S, S),
    reach_bar: S,
    path_reach: S,
}

impl<S: Real> LightScaffold<S> {
    /// Gap `Patĥ_k(ξ̄_k) − Floor̂_k(ξ̄_k) = λ^{k-1}(ξ̄_k − ξ'_k)²`, evaluated through the
    /// distances to `T` so it stays accurate when `ξ` crowds `T`.
    pub fn gap(&self, geom: &HydroGeometry<S>) -> S {
        let d = self.path_reach - self.reach_bar;
        if d <= S::zero() {
            return S::zero();
        }
        geom.curvature(self.k) * d * d
    }

    /// Lower bound `(√γ − β)² T²` for [`gap`](Self::gap).
    pub fn gap_bound(geom: &HydroGeometry<S>) -> S {
        let d = geom.gamma.sqrt() - geom.beta;
        d * d * geom.t * geom.t
    }

    /// `T − ξ_k`.
    pub fn reach(&self) -> S {
        self.reach
    }

    /// Whether `ξ_k` lies in its bracket, compared through `T − ξ_k` to avoid
    /// rounding when the bracket crowds `T`.
    pub fn in_bracket(&self) -> bool {
        self.bracket_reach.0 <= self.reach && self.reach <= self.bracket_reach.1
    }
}

pub fn light_path_scaffold<S: Real>(geom: &HydroGeometry<S>, k: usize) -> Result<LightScaffold<S>> {
    if k < 2 || k > geom.n0 {
        return Err(Error::IndexOutOfRange { index: k as i64, lo: 2, hi: geom.n0 as i64 });
    }
    let t = geom.t;
    let a = geom.curvature(k);
    let two = S::lit(2.0);
    let s_k = geom.s_k(k);
    if !(s_k > S::zero()) {
        return Err(invalid("S_k", "starting height must be positive"));
    }
    let reach = geom.reach(k, s_k);
    let reach_next = geom.reach(k + 1, geom.s_k(k + 1));
    let reach_bar = (reach + reach_next) / two;
    let xi = t - reach;
    let xi_bar = t - reach_bar;
    let scale = geom.lambda.powf(-S::lit((k - 1) as f64) / two);
    let bracket_reach = (t * geom.gamma.sqrt() * scale, t * scale);
    let bracket = (t - bracket_reach.1, t - bracket_reach.0);

    let end = -a * t * t + t * t - two * geom.k * t;
    let floor_join_value = -a * xi_bar * xi_bar;
    let floor = SymmetricProfile {
        curvature: a,
        join: xi_bar,
        join_value: floor_join_value,
        slope: (end - floor_join_value) / (t - xi_bar),
        offset: geom.shift(k),
    };
    let path_reach = geom.reach(k, geom.path_height());
    let pj = t - path_reach;
    let path = SymmetricProfile { curvature: a, join: pj, join_value: -a * pj * pj, slope: -two * a * pj, offset: geom.shift(k) };
    Ok(LightScaffold { k, s_k, xi, bracket, xi_bar, path_join: pj, floor, path, reach, bracket_reach, reach_bar, path_reach })
}

/// Line indices in `2..=n₀` whose gap falls below [`LightScaffold::gap_bound`].
pub fn gap_failures<S: Real>(geom: &HydroGeometry<S>) -> Vec<usize> {
    let bound = LightScaffold::gap_bound(geom);
    (2..=geom.n0)
        .filter(|&k| light_path_scaffold(geom, k).map(|s| s.gap(geom) < bound).unwrap_or(true))
        .collect()
}

/// `Err(t)` and the reduced `Err′(t)` for line `k`.
pub fn err_bounds<S: Real>(geom: &HydroGeometry<S>, k: usize, t: S) -> Result<(S, S)> {
    if !(t.abs() <= geom.t) {
        return Err(Error::OutOfGrid(t.as_f64()));
    }
    let td = geom.td();
    let err = td * (geom.t - t.abs()).sqrt() + geom.t.powi(-10);
    let reach = geom.reach(k, geom.s_k(k));
    let xi = geom.t - reach;
    let edge = xi
        - geom.err_constant
            * geom.t.powf(S::lit(1.5) * geom.delta)
            * reach.powf(S::lit(0.75))
            * geom.lambda.powf(-S::lit((k as f64 - 1.0) / 6.0));
    let prime = if t.abs() >= edge { err } else { td };
    Ok((err, prime))
}

/// Three-piece envelope of a heavy line `k > n₀` started at height `H`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeavyEnvelope<S> {
    pub t: S,
    pub h: S,
    pub delta1: S,
    pub delta2: S,
}

impl<S: Real> HeavyEnvelope<S> {
    pub fn eval(&self, t: S) -> S {
        if t.abs() >= self.t - self.delta1 {
            self.h + self.delta2
        } else {
            self.delta2
        }
    }
}

pub fn heavy_envelope<S: Real>(geom: &HydroGeometry<S>, k: usize, h: S) -> Result<HeavyEnvelope<S>> {
    if k <= geom.n0 {
        return Err(Error::IndexOutOfRange { index: k as i64, lo: geom.n0 as i64 + 1, hi: i64::MAX });
    }
    if h > S::lit(2.0) * geom.t * geom.t {
        return Err(invalid("H", "must not exceed 2T²"));
    }
    let delta1 = geom.t * geom.lambda.powf(-S::lit(k as f64) / S::lit(2.0));
    let delta2 = geom.td() * geom.lambda.powf(-S::lit((k - geom.n0) as f64) / S::lit(5.0));
    Ok(HeavyEnvelope { t: geom.t, h, delta1, delta2 })
}
