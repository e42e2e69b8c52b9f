//! Polynomial checks: zero counting from the maximum modulus, the three
//! circles inequality and the Remez-type growth bound on segments.

use std::f64::consts::{E, PI};

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;
use serde_json::json;

use super::Verdict;
use crate::error::{param, LabError, Result};

pub const MAX_DEGREE: usize = 32;
const CIRCLE_SAMPLES: usize = 4096;
const ROOT_RESIDUAL: f64 = 1e-8;

/// Polynomial with complex coefficients, lowest degree first.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexPoly {
    coeffs: Vec<Complex64>,
}

impl ComplexPoly {
    pub fn new(coeffs: Vec<Complex64>) -> Result<Self> {
        match coeffs.last() {
            None => param("polynomial needs at least one coefficient"),
            Some(c) if c.norm() == 0.0 => param("leading coefficient must be nonzero"),
            Some(_) if coeffs.len() > MAX_DEGREE + 1 => param(format!("degree is capped at {MAX_DEGREE}")),
            Some(_) => Ok(ComplexPoly { coeffs }),
        }
    }

    /// `lead · Π (z - r)`.
    pub fn from_roots(lead: Complex64, roots: &[Complex64]) -> Result<Self> {
        let mut c = vec![lead];
        for &r in roots {
            let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
            for (k, &a) in c.iter().enumerate() {
                next[k + 1] += a;
                next[k] -= a * r;
            }
            c = next;
        }
        ComplexPoly::new(c)
    }

    /// Coefficients uniform in the unit square, leading one of modulus at
    /// least 0.1.
    pub fn random(rng: &mut impl Rng, degree: usize) -> Result<Self> {
        let mut c: Vec<Complex64> = (0..=degree)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let last = c.last_mut().unwrap();
        if last.norm() < 0.1 {
            *last = Complex64::from_polar(0.1 + rng.random_range(0.0..0.9), rng.random_range(0.0..2.0 * PI));
        }
        ComplexPoly::new(c)
    }

    /// Roots uniform in the disk of radius `radius`.
    pub fn random_with_roots(rng: &mut impl Rng, degree: usize, radius: f64) -> Result<Self> {
        let roots: Vec<Complex64> = (0..degree).map(|_| random_point(rng, radius)).collect();
        let lead = Complex64::from_polar(rng.random_range(0.5..2.0), rng.random_range(0.0..2.0 * PI));
        ComplexPoly::from_roots(lead, &roots)
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn scaled(&self, s: Complex64) -> Result<Self> {
        ComplexPoly::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    fn eval_with_derivative(&self, z: Complex64) -> (Complex64, Complex64) {
        let zero = Complex64::new(0.0, 0.0);
        self.coeffs
            .iter()
            .rev()
            .fold((zero, zero), |(p, dp), &c| (p * z + c, dp * z + p))
    }

    fn magnitude_scale(&self, z: Complex64) -> f64 {
        let r = z.norm();
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c.norm())
    }

    /// Roots from the companion matrix, polished by Newton steps. Fails if a
    /// relative residual stays at or above `1e-8`.
    pub fn roots(&self) -> Result<Vec<Complex64>> {
        let n = self.degree();
        if n == 0 {
            return Ok(Vec::new());
        }
        let lead = self.coeffs[n];
        let mut comp = DMatrix::<Complex64>::zeros(n, n);
        for i in 1..n {
            comp[(i, i - 1)] = Complex64::new(1.0, 0.0);
        }
        for i in 0..n {
            comp[(i, n - 1)] = -self.coeffs[i] / lead;
        }
        let eig = Schur::new(comp)
            .eigenvalues()
            .ok_or_else(|| LabError::Numerical("companion Schur form did not converge".into()))?;
        let mut roots = Vec::with_capacity(n);
        for &r0 in eig.iter() {
            let mut r = r0;
            let mut res = self.eval(r).norm() / self.magnitude_scale(r).max(f64::MIN_POSITIVE);
            for _ in 0..8 {
                let (p, dp) = self.eval_with_derivative(r);
                if dp.norm() == 0.0 {
                    break;
                }
                let cand = r - p / dp;
                let cres = self.eval(cand).norm() / self.magnitude_scale(cand).max(f64::MIN_POSITIVE);
                if !(cres < res) {
                    break;
                }
                r = cand;
                res = cres;
            }
            if res >= ROOT_RESIDUAL {
                return Err(LabError::Numerical(format!("root {r} has residual {res:e}")));
            }
            roots.push(r);
        }
        Ok(roots)
    }

    /// `max_{|z - center| = r} |P|` from `samples` equispaced angles, then
    /// three bisection refinements around the best angle.
    pub fn max_on_circle(&self, center: Complex64, r: f64, samples: usize) -> f64 {
        let at = |theta: f64| self.eval(center + Complex64::from_polar(r, theta)).norm();
        let dtheta = 2.0 * PI / samples as f64;
        let (mut best_theta, mut best) = (0.0, f64::NEG_INFINITY);
        for i in 0..samples {
            let th = i as f64 * dtheta;
            let v = at(th);
            if v > best {
                best = v;
                best_theta = th;
            }
        }
        let mut half = dtheta;
        for _ in 0..3 {
            half *= 0.5;
            for th in [best_theta - half, best_theta + half] {
                let v = at(th);
                if v > best {
                    best = v;
                    best_theta = th;
                }
            }
        }
        best
    }
}

pub fn random_point(rng: &mut impl Rng, radius: f64) -> Complex64 {
    Complex64::from_polar(
        radius * rng.random_range(0.0f64..1.0).sqrt(),
        rng.random_range(0.0..2.0 * PI),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JensenCount {
    pub n_actual: usize,
    pub n_bound: f64,
    /// Sampled maximum of `|P|` on the outer circle.
    pub max_outer: f64,
    pub value_at_center: f64,
}

impl JensenCount {
    pub fn holds(&self) -> bool {
        self.n_actual as f64 <= self.n_bound + 1e-9
    }

    pub fn verdict(&self, a: Complex64, r1: f64, r2: f64) -> Verdict {
        Verdict::new(
            "jensen_zero_bound",
            json!({"a": [a.re, a.im], "r1": r1, "r2": r2}),
            self.n_actual as f64,
            self.n_bound,
            self.holds(),
        )
    }
}

/// Roots within `r1` of `a` against `(log M - log|P(a)|)/(log r2 - log r1)`,
/// `M` the maximum on the circle of radius `r2` about `a`.
pub fn jensen_zero_bound(p: &ComplexPoly, a: Complex64, r1: f64, r2: f64) -> Result<JensenCount> {
    if !(0.0 < r1 && r1 < r2) {
        return param(format!("need 0 < r1 < r2, got {r1}, {r2}"));
    }
    let pa = p.eval(a).norm();
    if pa == 0.0 {
        return param("P vanishes at the center");
    }
    let n_actual = p.roots()?.iter().filter(|r| (*r - a).norm() < r1).count();
    let max_outer = p.max_on_circle(a, r2, CIRCLE_SAMPLES);
    let n_bound = (max_outer.ln() - pa.ln()) / (r2.ln() - r1.ln());
    Ok(JensenCount {
        n_actual,
        n_bound,
        max_outer,
        value_at_center: pa,
    })
}

fn three_circle_sides(p: &ComplexPoly, r: [f64; 3], samples: usize) -> (f64, f64) {
    let zero = Complex64::new(0.0, 0.0);
    let m: Vec<f64> = r.iter().map(|&ri| p.max_on_circle(zero, ri, samples).ln()).collect();
    let lhs = (r[2] / r[0]).ln() * m[1];
    let rhs = (r[2] / r[1]).ln() * m[0] + (r[1] / r[0]).ln() * m[2];
    (lhs, rhs)
}

/// `log(r3/r1) log M(r2) <= log(r3/r2) log M(r1) + log(r2/r1) log M(r3)`;
/// slack below `-1e-9` triggers one refinement with 4x the samples before
/// failing.
pub fn hadamard_three_circle_check(p: &ComplexPoly, r1: f64, r2: f64, r3: f64) -> Result<Verdict> {
    if !(0.0 < r1 && r1 < r2 && r2 < r3) {
        return param(format!("need 0 < r1 < r2 < r3, got {r1}, {r2}, {r3}"));
    }
    let params = json!({"r1": r1, "r2": r2, "r3": r3, "degree": p.degree()});
    let (lhs, rhs) = three_circle_sides(p, [r1, r2, r3], CIRCLE_SAMPLES);
    if rhs - lhs >= -1e-9 {
        return Ok(Verdict::new("hadamard_three_circle", params, lhs, rhs, true));
    }
    let (lhs, rhs) = three_circle_sides(p, [r1, r2, r3], 4 * CIRCLE_SAMPLES);
    if rhs - lhs >= -1e-9 {
        return Ok(Verdict::new("hadamard_three_circle", params, lhs, rhs, true));
    }
    Err(LabError::Numerical(format!(
        "three-circle slack {:e} stays negative after refinement",
        rhs - lhs
    )))
}

fn sup_on_segments(p: &ComplexPoly, segments: &[[f64; 2]], samples: usize) -> f64 {
    let total: f64 = segments.iter().map(|[a, b]| b - a).sum();
    segments
        .iter()
        .flat_map(|&[a, b]| {
            let count = (((b - a) / total * samples as f64).ceil() as usize).max(2);
            (0..count).map(move |i| a + (b - a) * i as f64 / (count - 1) as f64)
        })
        .map(|x| p.eval(Complex64::new(x, 0.0)).norm())
        .fold(0.0, f64::max)
}

/// `sup_{B1} |P| <= (6e/H)^N sup_E |P|` with `H = ℓ/2` for a union `E` of
/// subsegments of `[-1, 1]` of total length `ℓ`; only `δ = 1` is supported.
pub fn remez_check(p: &ComplexPoly, segments: &[[f64; 2]], delta: f64) -> Result<Verdict> {
    if delta != 1.0 {
        return param("only the segment case delta = 1 is supported");
    }
    if segments.is_empty() || segments.iter().any(|&[a, b]| !(-1.0 <= a && a < b && b <= 1.0)) {
        return param("segments must be non-empty subintervals of [-1, 1]");
    }
    let mut sorted = segments.to_vec();
    sorted.sort_by(|x, y| x[0].total_cmp(&y[0]));
    if sorted.windows(2).any(|w| w[1][0] < w[0][1]) {
        return param("segments must not overlap");
    }
    let length: f64 = sorted.iter().map(|[a, b]| b - a).sum();
    let n = p.degree() as i32;
    let growth = (6.0 * E / (0.5 * length)).powi(n);
    let zero = Complex64::new(0.0, 0.0);
    let params = json!({"segments": sorted, "length": length, "degree": n, "delta": delta});
    let mut lhs = p.max_on_circle(zero, 1.0, CIRCLE_SAMPLES);
    let mut rhs = growth * sup_on_segments(p, &sorted, CIRCLE_SAMPLES);
    if lhs > rhs * (1.0 + 1e-12) {
        lhs = p.max_on_circle(zero, 1.0, 4 * CIRCLE_SAMPLES);
        rhs = growth * sup_on_segments(p, &sorted, 4 * CIRCLE_SAMPLES);
    }
    let pass = lhs <= rhs * (1.0 + 1e-12);
    Ok(Verdict::new("remez", params, lhs, rhs, pass))
}
