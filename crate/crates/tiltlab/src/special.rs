//! Airy function and the stationary density of the one-line tilted excursion.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// Ai(0) = 3^{-2/3} / Γ(2/3).
const AI0: f64 = 0.355_028_053_887_817_2;
/// -Ai'(0) = 3^{-1/3} / Γ(1/3).
const AIP0: f64 = 0.258_819_403_792_806_8;

// Power series inside (NEG_SWITCH, POS_SWITCH), asymptotic expansions outside,
// blended smoothly over a band of width BLEND. Both are accurate to better than
// 1e-10 absolute across the bands.
const POS_SWITCH: f64 = 5.0;
const NEG_SWITCH: f64 = -7.0;
const BLEND: f64 = 0.5;

fn smoothstep(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * s * (10.0 - s * (15.0 - 6.0 * s))
}

fn airy_series(x: f64) -> f64 {
    let x3 = x * x * x;
    let (mut f, mut g) = (1.0, x);
    let (mut tf, mut tg) = (1.0, x);
    for k in 1..200 {
        let k3 = 3.0 * k as f64;
        tf *= x3 / ((k3 - 1.0) * k3);
        tg *= x3 / (k3 * (k3 + 1.0));
        f += tf;
        g += tg;
        if tf.abs() < 1e-18 * f.abs().max(1e-300) && tg.abs() < 1e-18 * g.abs().max(1e-300) {
            break;
        }
    }
    AI0 * f - AIP0 * g
}

/// Coefficients u_k of the large-argument Airy expansions.
fn asymptotic_coefficients() -> &'static [f64] {
    static U: OnceLock<Vec<f64>> = OnceLock::new();
    U.get_or_init(|| {
        let mut u = vec![1.0];
        for k in 1..40 {
            let kf = k as f64;
            let prev = u[k - 1];
            u.push(prev * (6.0 * kf - 5.0) * (6.0 * kf - 3.0) * (6.0 * kf - 1.0) / ((2.0 * kf - 1.0) * 216.0 * kf));
        }
        u
    })
}

fn airy_asymptotic_pos(x: f64) -> f64 {
    let u = asymptotic_coefficients();
    let zeta = 2.0 / 3.0 * x.powf(1.5);
    let mut sum = 0.0;
    let mut term = 1.0;
    let mut last = f64::INFINITY;
    for (k, uk) in u.iter().enumerate() {
        let t = uk / zeta.powi(k as i32) * term;
        if t.abs() > last {
            break;
        }
        sum += t;
        last = t.abs();
        term = -term;
    }
    (-zeta).exp() / (2.0 * PI.sqrt() * x.powf(0.25)) * sum
}

fn airy_asymptotic_neg(x: f64) -> f64 {
    let u = asymptotic_coefficients();
    let z = -x;
    let zeta = 2.0 / 3.0 * z.powf(1.5);
    let (mut p, mut q) = (0.0, 0.0);
    let mut last = f64::INFINITY;
    for (k, uk) in u.iter().enumerate() {
        let t = uk / zeta.powi(k as i32);
        if t > last {
            break;
        }
        last = t;
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 0 {
            p += sign * t;
        } else {
            q += sign * t;
        }
    }
    let phase = zeta + PI / 4.0;
    (phase.sin() * p - phase.cos() * q) / (PI.sqrt() * z.powf(0.25))
}

/// Airy function Ai(x).
pub fn airy_ai(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x >= POS_SWITCH + BLEND {
        if x > 105.0 {
            return 0.0;
        }
        airy_asymptotic_pos(x)
    } else if x > POS_SWITCH {
        let w = smoothstep((x - POS_SWITCH) / BLEND);
        (1.0 - w) * airy_series(x) + w * airy_asymptotic_pos(x)
    } else if x <= NEG_SWITCH - BLEND {
        airy_asymptotic_neg(x)
    } else if x < NEG_SWITCH {
        let w = smoothstep((NEG_SWITCH - x) / BLEND);
        (1.0 - w) * airy_series(x) + w * airy_asymptotic_neg(x)
    } else {
        airy_series(x)
    }
}

/// ω₁ > 0 with Ai(-ω₁) = 0, the zero of Ai closest to the origin.
pub fn airy_first_zero() -> f64 {
    static W: OnceLock<f64> = OnceLock::new();
    *W.get_or_init(|| {
        let (mut lo, mut hi) = (-3.0, -2.0);
        let flo = airy_ai(lo);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            let fm = airy_ai(mid);
            if fm == 0.0 {
                return -mid;
            }
            if (fm < 0.0) == (flo < 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        -0.5 * (lo + hi)
    })
}

/// Adaptive Simpson quadrature of `f` on `[a, b]`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Upper end of the Airy integration range: ∫_{Z_MAX}^∞ Ai² < 1e-14.
const Z_MAX: f64 = 8.0;

/// ∫_{-ω₁}^∞ Ai(z)² dz, truncated where the remaining tail is negligible.
fn airy_square_mass() -> f64 {
    static I: OnceLock<f64> = OnceLock::new();
    *I.get_or_init(|| {
        let w = airy_first_zero();
        let f = |z: f64| airy_ai(z).powi(2);
        // split at the origin and at the series switchover to keep panels smooth
        adaptive_simpson(&f, -w, 0.0, 1e-14)
            + adaptive_simpson(&f, 0.0, POS_SWITCH, 1e-14)
            + adaptive_simpson(&f, POS_SWITCH, Z_MAX, 1e-15)
    })
}

/// Stationary density `N · Ai((2a)^{1/3} x − ω₁)²` on `x > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FsDensity {
    strength: f64,
    omega1: f64,
    normalization: f64,
}

impl FsDensity {
    pub fn new(strength: f64) -> Self {
        assert!(strength > 0.0, "strength must be positive");
        let c = (2.0 * strength).cbrt();
        Self { strength, omega1: airy_first_zero(), normalization: c / airy_square_mass() }
    }

    pub fn strength(&self) -> f64 {
        self.strength
    }

    pub fn omega1(&self) -> f64 {
        self.omega1
    }

    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    fn scale(&self) -> f64 {
        (2.0 * self.strength).cbrt()
    }

    pub fn density(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        self.normalization * airy_ai(self.scale() * x - self.omega1).powi(2)
    }

    /// Point beyond which the density carries less than 1e-14 of mass.
    pub fn support_end(&self) -> f64 {
        (Z_MAX + self.omega1) / self.scale()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let x = x.min(self.support_end());
        let f = |y: f64| self.density(y);
        adaptive_simpson(&f, 0.0, x, 1e-12).min(1.0)
    }

    /// CDF on the nodes `0, h, 2h, ...` up to `x_max`, by composite Simpson on each cell.
    pub fn cdf_table(&self, x_max: f64, cells: usize) -> Vec<(f64, f64)> {
        let h = x_max / cells as f64;
        let mut acc = 0.0;
        let mut out = vec![(0.0, 0.0)];
        for i in 0..cells {
            let a = i as f64 * h;
            let f = |y: f64| self.density(y);
            acc += adaptive_simpson(&f, a, a + h, 1e-13);
            out.push((a + h, acc.min(1.0)));
        }
        out
    }

    pub fn mean(&self) -> f64 {
        let f = |y: f64| y * self.density(y);
        adaptive_simpson(&f, 0.0, self.support_end(), 1e-12)
    }
}

/// Stationary density at `x` for strength `a`.
pub fn fs_density(x: f64, a: f64) -> f64 {
    FsDensity::new(a).density(x)
}

/// Leading-order prediction `(2√(2a)/3) t^{3/2}` for `-log P(X(0) > t)`.
pub fn fs_tail_exponent(t: f64, a: f64) -> f64 {
    2.0 * (2.0 * a).sqrt() / 3.0 * t.powf(1.5)
}
