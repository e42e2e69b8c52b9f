//! Flat-space representation
//! `f(x) = cos(k(x-s)) f(s) + sin(k(x-s))/k f'(s) - ∫_s^x sin(k(x-y))/k F(y) dy`
//! with `k = sqrt(mu)` and `F = -f'' - mu f`.

use crate::error::{param, LabError, Result};

/// `p(x) e^{-(x-c)²/(2σ²)}` with its first two derivatives in closed form.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussPoly {
    /// Polynomial coefficients, lowest degree first.
    pub poly: Vec<f64>,
    pub center: f64,
    pub width: f64,
}

impl GaussPoly {
    pub fn new(poly: Vec<f64>, center: f64, width: f64) -> Self {
        GaussPoly { poly, center, width }
    }

    fn poly_derivs(&self, x: f64) -> (f64, f64, f64) {
        let (mut p, mut dp, mut d2p) = (0.0, 0.0, 0.0);
        for &c in self.poly.iter().rev() {
            d2p = d2p * x + 2.0 * dp;
            dp = dp * x + p;
            p = p * x + c;
        }
        (p, dp, d2p)
    }

    /// `(f, f', f'')` at `x`.
    pub fn eval(&self, x: f64) -> (f64, f64, f64) {
        let (p, dp, d2p) = self.poly_derivs(x);
        let s2 = self.width * self.width;
        let u = (x - self.center) / s2;
        let g = (-(x - self.center).powi(2) / (2.0 * s2)).exp();
        (p * g, (dp - p * u) * g, (d2p - 2.0 * dp * u - p / s2 + p * u * u) * g)
    }
}

/// Largest discrepancy between `f` and its representation on a uniform grid
/// of `[x_lo, x_hi]`; the Duhamel term uses composite Simpson with steps of
/// at most `1e-3`. Fails with an identity violation above `tol`.
pub fn solution_representation_check(f: &GaussPoly, mu: f64, s: f64, x_lo: f64, x_hi: f64, tol: f64) -> Result<f64> {
    if !(mu > 0.0) || !(x_lo < x_hi) {
        return param("need mu > 0 and a non-empty x-range");
    }
    let k = mu.sqrt();
    let (fs, dfs, _) = f.eval(s);
    let source = |y: f64| {
        let (v, _, d2) = f.eval(y);
        -d2 - mu * v
    };
    let points = 201;
    let mut worst: f64 = 0.0;
    for i in 0..points {
        let x = x_lo + (x_hi - x_lo) * i as f64 / (points - 1) as f64;
        let panels = (((x - s).abs() / 1e-3).ceil() as usize).max(1) * 2;
        let hq = (x - s) / panels as f64;
        let integrand = |y: f64| (k * (x - y)).sin() / k * source(y);
        let mut acc = integrand(s) + integrand(x);
        for j in 1..panels {
            acc += if j % 2 == 1 { 4.0 } else { 2.0 } * integrand(s + j as f64 * hq);
        }
        let duhamel = acc * hq / 3.0;
        let rep = (k * (x - s)).cos() * fs + (k * (x - s)).sin() / k * dfs - duhamel;
        worst = worst.max((rep - f.eval(x).0).abs());
    }
    if worst > tol {
        return Err(LabError::IdentityViolation(format!(
            "representation residual {worst:e} exceeds {tol:e} (mu = {mu}, s = {s})"
        )));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivatives_match_finite_differences() {
        let f = GaussPoly::new(vec![0.5, -1.0, 0.3, 0.2], 0.2, 0.6);
        for &x in &[-1.0, 0.0, 0.4, 1.3] {
            let d = 1e-5;
            let (_, d1, d2) = f.eval(x);
            let fd1 = (f.eval(x + d).0 - f.eval(x - d).0) / (2.0 * d);
            let fd2 = (f.eval(x + d).0 - 2.0 * f.eval(x).0 + f.eval(x - d).0) / (d * d);
            assert!((d1 - fd1).abs() < 1e-8);
            assert!((d2 - fd2).abs() < 1e-4);
        }
    }

    #[test]
    fn gaussian_representation() {
        let f = GaussPoly::new(vec![1.0], 0.0, 0.5);
        let r = solution_representation_check(&f, 7.0, 0.3, -2.0, 2.0, 1e-6).unwrap();
        assert!(r <= 1e-6);
    }

    #[test]
    fn homogeneous_solutions_are_exact() {
        // cos(k(x - s)) and sin(k(x - s))/k have F = 0; check the formula directly
        let (mu, s) = (5.0f64, 0.4);
        let k = mu.sqrt();
        for x in [-1.0, 0.0, 0.9, 2.2] {
            let c = |y: f64| (k * (y - s)).cos();
            let rep = (k * (x - s)).cos() * c(s);
            assert!((rep - c(x)).abs() < 1e-15);
            let sn = |y: f64| (k * (y - s)).sin() / k;
            let rep = (k * (x - s)).sin() / k * 1.0;
            assert!((rep - sn(x)).abs() < 1e-15);
        }
    }

    #[test]
    fn violation_is_reported() {
        let f = GaussPoly::new(vec![1.0], 0.0, 0.5);
        assert!(matches!(
            solution_representation_check(&f, 7.0, 0.3, -2.0, 2.0, 1e-18),
            Err(LabError::IdentityViolation(_))
        ));
    }
}
