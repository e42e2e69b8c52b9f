//! Least-squares fits of `log(constant)` against a predicted rate.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{param, LabError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitModel {
    /// `log C = a + b / T²`
    #[serde(rename = "log C = a + b/T^2")]
    InvTSquared,
    /// `log C = a + b / T`
    #[serde(rename = "log C = a + b/T")]
    InvT,
    /// `log C = a + b mu`
    #[serde(rename = "log C = a + b*mu")]
    Mu,
    /// `log C = a + b log(1/T)`
    #[serde(rename = "log C = a + b*log(1/T)")]
    LogInvT,
}

impl FitModel {
    pub fn regressor(self, p: f64) -> f64 {
        match self {
            FitModel::InvTSquared => 1.0 / (p * p),
            FitModel::InvT => 1.0 / p,
            FitModel::Mu => p,
            FitModel::LogInvT => -p.ln(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub model: FitModel,
    pub a: f64,
    pub b: f64,
    pub r2: f64,
    pub points: Vec<(f64, f64)>,
}

fn regression_data(points: &[(f64, f64)], model: FitModel) -> Result<(Vec<f64>, Vec<f64>)> {
    if points.len() < 4 {
        return param(format!("a fit needs at least 4 points, got {}", points.len()));
    }
    let mut xs = Vec::with_capacity(points.len());
    let mut ys = Vec::with_capacity(points.len());
    for &(p, c) in points {
        if !(c > 0.0) || !c.is_finite() {
            return param(format!("constants must be positive and finite, got {c} at {p}"));
        }
        let x = model.regressor(p);
        if !x.is_finite() {
            return param(format!("parameter {p} is outside the domain of the model"));
        }
        xs.push(x);
        ys.push(c.ln());
    }
    Ok((xs, ys))
}

/// Ordinary least squares of `ln C` on the model's regressor.
pub fn cost_fit(points: &[(f64, f64)], model: FitModel) -> Result<FitReport> {
    let (xs, ys) = regression_data(points, model)?;
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx <= 0.0 {
        return param("all points share the same regressor value");
    }
    let b = sxy / sxx;
    let a = my - b * mx;
    let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - a - b * x).powi(2)).sum();
    let r2 = if syy <= 1e-24 * (1.0 + my * my) * n {
        0.0
    } else {
        (1.0 - rss / syy).clamp(0.0, 1.0)
    };
    if !b.is_finite() {
        return Err(LabError::Numerical("fit slope is not finite".into()));
    }
    Ok(FitReport {
        model,
        a,
        b,
        r2,
        points: points.to_vec(),
    })
}

/// Residual sums of squares and Akaike scores of the linear model and of a
/// quadratic in the same regressor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelComparison {
    pub rss_linear: f64,
    pub rss_quadratic: f64,
    pub aic_linear: f64,
    pub aic_quadratic: f64,
}

impl ModelComparison {
    pub fn linear_preferred(&self) -> bool {
        self.aic_linear <= self.aic_quadratic
    }
}

fn least_squares_rss(design: DMatrix<f64>, y: &DVector<f64>) -> Result<f64> {
    let svd = design.clone().svd(true, true);
    let coef = svd
        .solve(y, 1e-14)
        .map_err(|e| LabError::Numerical(format!("least squares failed: {e}")))?;
    Ok((design * coef - y).norm_squared())
}

pub fn compare_linear_quadratic(points: &[(f64, f64)], model: FitModel) -> Result<ModelComparison> {
    let (xs, ys) = regression_data(points, model)?;
    let n = xs.len();
    let y = DVector::from_vec(ys);
    let lin = DMatrix::from_fn(n, 2, |i, j| xs[i].powi(j as i32));
    let quad = DMatrix::from_fn(n, 3, |i, j| xs[i].powi(j as i32));
    let rss_linear = least_squares_rss(lin, &y)?;
    let rss_quadratic = least_squares_rss(quad, &y)?;
    let nf = n as f64;
    let aic = |rss: f64, k: f64| nf * (rss.max(1e-300) / nf).ln() + 2.0 * k;
    Ok(ModelComparison {
        rss_linear,
        rss_quadratic,
        aic_linear: aic(rss_linear, 2.0),
        aic_quadratic: aic(rss_quadratic, 3.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ts() -> Vec<f64> {
        (0..12).map(|i| 0.1 * 16f64.powf(i as f64 / 11.0)).collect()
    }

    #[test]
    fn exact_inverse_square_law() {
        let pts: Vec<_> = ts().into_iter().map(|t| (t, (1.0 + 2.0 / (t * t)).exp())).collect();
        let r = cost_fit(&pts, FitModel::InvTSquared).unwrap();
        assert!((r.a - 1.0).abs() < 1e-9);
        assert!((r.b - 2.0).abs() < 1e-12);
        assert!((r.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noisy_inverse_square_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t_values: Vec<f64> = (0..12).map(|i| 0.5 + 0.1 * i as f64).collect();
        let pts: Vec<_> = t_values
            .into_iter()
            .map(|t| (t, (1.0 + 2.0 / (t * t) + rng.random_range(-1e-3..1e-3)).exp()))
            .collect();
        let r = cost_fit(&pts, FitModel::InvTSquared).unwrap();
        assert!((r.b - 2.0).abs() <= 0.05);
    }

    #[test]
    fn constant_data_gives_zero_slope() {
        let pts: Vec<_> = ts().into_iter().map(|t| (t, 3.0)).collect();
        let r = cost_fit(&pts, FitModel::InvT).unwrap();
        assert!(r.b.abs() < 1e-12);
        assert_eq!(r.r2, 0.0);
    }

    #[test]
    fn rejects_bad_points() {
        let mut pts: Vec<_> = ts().into_iter().map(|t| (t, 3.0)).collect();
        assert!(cost_fit(&pts[..3], FitModel::InvT).is_err());
        pts[2].1 = 0.0;
        assert!(cost_fit(&pts, FitModel::InvT).is_err());
    }

    #[test]
    fn quadratic_data_prefers_quadratic_model() {
        let pts: Vec<_> = (1..=10).map(|i| (i as f64, (0.3 * (i * i) as f64).exp())).collect();
        let c = compare_linear_quadratic(&pts, FitModel::Mu).unwrap();
        assert!(!c.linear_preferred());
        let pts: Vec<_> = (1..=10)
            .map(|i| (i as f64, (2.0 * i as f64 + 0.01 * ((i * 7919) % 13) as f64).exp()))
            .collect();
        let c = compare_linear_quadratic(&pts, FitModel::Mu).unwrap();
        assert!(c.rss_quadratic <= c.rss_linear);
    }

    #[test]
    fn report_json_shape() {
        let pts: Vec<_> = ts().into_iter().map(|t| (t, (1.0 / t).exp())).collect();
        let r = cost_fit(&pts, FitModel::InvT).unwrap();
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["model"], "log C = a + b/T");
        assert_eq!(v["points"].as_array().unwrap().len(), 12);
    }
}
