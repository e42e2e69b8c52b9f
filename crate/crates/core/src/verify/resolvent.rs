//! Sharp constant in `||f||² <= (C/μ)||(H - μ)f||² + C||f||²_Ω`.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::domain::Mask;
use crate::error::{param, LabError, Result};
use crate::linalg::{hermitian_norm, min_eigenpair};
use crate::observability::{mask_compression, SINGULAR_FLOOR};
use crate::operator::HamiltonianSpectrum;

/// `C(μ) = 1/λ_min(diag((E_k - μ)²/μ) + B)` in the eigenbasis.
pub fn resolvent_constant(spec: &HamiltonianSpectrum, mask: &Mask, mu: f64) -> Result<f64> {
    let b = mask_compression(spec, mask);
    from_compression(spec, &b, mu)
}

fn from_compression(spec: &HamiltonianSpectrum, b: &DMatrix<f64>, mu: f64) -> Result<f64> {
    if !(mu > 0.0) || !mu.is_finite() {
        return param(format!("mu must be positive, got {mu}"));
    }
    let mut m = b.clone();
    for (k, &e) in spec.energies().iter().enumerate() {
        m[(k, k)] += (e - mu) * (e - mu) / mu;
    }
    let (lambda, _) = min_eigenpair(&m);
    let norm = hermitian_norm(&m);
    if lambda <= SINGULAR_FLOOR * norm {
        return Err(LabError::Numerical(format!(
            "resolvent matrix is singular at mu = {mu}: lambda_min = {lambda:e}"
        )));
    }
    Ok(1.0 / lambda)
}

/// `(μ, C(μ))` for each `μ`, sharing one mask compression.
pub fn resolvent_sweep(spec: &HamiltonianSpectrum, mask: &Mask, mus: &[f64]) -> Result<Vec<(f64, f64)>> {
    let b = mask_compression(spec, mask);
    mus.par_iter()
        .map(|&mu| Ok((mu, from_compression(spec, &b, mu)?)))
        .collect()
}

/// First index `i` after which the constants stay within `factor` of each
/// other, with the median of that tail. `None` if only the last point
/// qualifies.
pub fn plateau_onset(points: &[(f64, f64)], factor: f64) -> Option<(usize, f64)> {
    if points.len() < 2 {
        return None;
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut onset = points.len() - 1;
    for i in (0..points.len()).rev() {
        lo = lo.min(points[i].1);
        hi = hi.max(points[i].1);
        if hi > factor * lo {
            break;
        }
        onset = i;
    }
    if onset >= points.len() - 1 {
        return None;
    }
    let mut tail: Vec<f64> = points[onset..].iter().map(|p| p.1).collect();
    tail.sort_by(f64::total_cmp);
    let mid = tail.len() / 2;
    let median = if tail.len().is_multiple_of(2) {
        0.5 * (tail[mid - 1] + tail[mid])
    } else {
        tail[mid]
    };
    Some((onset, median))
}
