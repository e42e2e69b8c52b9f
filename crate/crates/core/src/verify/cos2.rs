//! Lower bound for `inf_{x0} ∫_ω cos²(λ(x - x0)) dx` over sets `ω ⊂ [0, 1]`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{param, Result};

/// `∫_ω cos²(λ(x - x0)) dx`, summed in closed form over the intervals:
/// `(b - a)/2 + sin(λ(b - a)) cos(λ(b + a - 2x0)) / (2λ)`.
pub fn cos2_integral(omega: &[[f64; 2]], lambda: f64, x0: f64) -> f64 {
    omega
        .iter()
        .map(|&[a, b]| 0.5 * (b - a) + (lambda * (b - a)).sin() * (lambda * (b + a - 2.0 * x0)).cos() / (2.0 * lambda))
        .sum()
}

/// Explicit admissible `c(ζ) = (ζ/2) sin²(ζ / (4(1 + 1/π)))`.
///
/// For `λ >= 1` the points of `[0, 1]` where `cos²(λ(x - x0)) < ε` lie in at
/// most `λ/π + 1` windows of width `2 arcsin(√ε)/λ`, so their total measure
/// is at most `2(1 + 1/π) arcsin(√ε)`; this choice of `ε` keeps it below
/// `ζ/2`.
pub fn cos2_lower_bound(zeta: f64) -> f64 {
    0.5 * zeta * (zeta / (4.0 * (1.0 + 1.0 / PI))).sin().powi(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cos2Inf {
    pub value: f64,
    pub argmin: f64,
}

/// Minimum over `x0` in one period `[0, π/λ]`: a scan at `resolution`
/// points followed by golden-section refinement.
pub fn cos2_inf(omega: &[[f64; 2]], zeta: f64, lambda: f64, resolution: usize) -> Result<Cos2Inf> {
    if !(lambda >= 1.0) || !lambda.is_finite() {
        return param(format!("frequency must be at least 1, got {lambda}"));
    }
    if resolution < 1000 {
        return param(format!("resolution must be at least 1000, got {resolution}"));
    }
    if omega.iter().any(|&[a, b]| !(0.0 <= a && a < b && b <= 1.0)) {
        return param("intervals must be non-empty and lie in [0, 1]");
    }
    let measure: f64 = omega.iter().map(|[a, b]| b - a).sum();
    if measure < zeta {
        return param(format!("set measure {measure} is below the density {zeta}"));
    }
    let period = PI / lambda;
    let step = period / resolution as f64;
    let f = |x: f64| cos2_integral(omega, lambda, x);
    let (mut best_i, mut best) = (0usize, f64::INFINITY);
    for i in 0..resolution {
        let v = f(i as f64 * step);
        if v < best {
            best = v;
            best_i = i;
        }
    }
    let (mut lo, mut hi) = ((best_i as f64 - 1.0) * step, (best_i as f64 + 1.0) * step);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = hi - g * (hi - lo);
    let mut d = lo + g * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..100 {
        if hi - lo < 1e-14 * period.max(1.0) {
            break;
        }
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = f(d);
        }
    }
    let mid = 0.5 * (lo + hi);
    let polished = f(mid);
    let (value, argmin) = if polished < best {
        (polished, mid.rem_euclid(period))
    } else {
        (best, best_i as f64 * step)
    };
    Ok(Cos2Inf { value, argmin })
}
