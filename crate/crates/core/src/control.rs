//! Minimal-norm exact controls by the Hilbert uniqueness method.
//!
//! The controlled equation `i u_t - u_xx + V u = 1_Ω f` reads
//! `u_t = iHu - i 1_Ω f`, so Duhamel gives
//! `u(T) = e^{iTH} u0 - i ∫_0^T e^{i(T-t)H} 1_Ω f(t) dt`.
//! With `f(t) = 1_Ω e^{itH} φ0` the integral is `e^{iTH} G_T φ0`, hence
//! `u(T) = u1` exactly when `G_T φ0 = -i (u0 - e^{-iTH} u1)`.
//!
//! All solves are carried out on eigenbasis coefficients.

use std::io::Write;

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::Mask;
use crate::error::{param, LabError, Result};
use crate::fit::{cost_fit, FitModel, FitReport};
use crate::linalg::pcg;
use crate::observability::{schrodinger_gramian, Gramian};
use crate::operator::{HamiltonianSpectrum, StateVector};

/// Number of exported control time samples.
pub const EXPORT_SAMPLES: usize = 2048;

#[derive(Debug, Clone)]
pub struct ControlSolution {
    /// Adjoint datum in eigenbasis coefficients.
    pub phi0_coeffs: DVector<Complex64>,
    /// Adjoint datum on the grid nodes.
    pub phi0: StateVector,
    pub times: Vec<f64>,
    /// `f(t_m)` on the grid nodes; zero off the mask.
    pub control_samples: Vec<StateVector>,
    pub t: f64,
    pub endpoint_error: f64,
    pub control_cost: f64,
    pub cg_iterations: usize,
    pub residual_history: Vec<f64>,
}

/// Summary written next to the exported control samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlHeader {
    #[serde(rename = "T")]
    pub t: f64,
    pub cost: f64,
    pub endpoint_error: f64,
    pub iterations: usize,
}

/// `f(t) = 1_Ω e^{itH} φ0` on the grid nodes.
pub fn control_at(spec: &HamiltonianSpectrum, mask: &Mask, phi0_coeffs: &DVector<Complex64>, t: f64) -> StateVector {
    let ct = DVector::from_iterator(
        phi0_coeffs.len(),
        phi0_coeffs
            .iter()
            .zip(spec.energies())
            .map(|(c, e)| c * Complex64::from_polar(1.0, e * t)),
    );
    let mut u = spec.synthesize(&ct);
    for (z, &m) in u.iter_mut().zip(mask.nodes()) {
        if !m {
            *z = Complex64::new(0.0, 0.0);
        }
    }
    u
}

/// `count` uniform times covering `[0, T]` including both ends.
pub fn uniform_times(t: f64, count: usize) -> Vec<f64> {
    (0..count).map(|m| t * m as f64 / (count - 1) as f64).collect()
}

impl ControlSolution {
    pub fn sample(&self, spec: &HamiltonianSpectrum, mask: &Mask, times: &[f64]) -> Vec<StateVector> {
        times
            .par_iter()
            .map(|&t| control_at(spec, mask, &self.phi0_coeffs, t))
            .collect()
    }

    pub fn header(&self) -> ControlHeader {
        ControlHeader {
            t: self.t,
            cost: self.control_cost,
            endpoint_error: self.endpoint_error,
            iterations: self.cg_iterations,
        }
    }

    /// CSV rows `(time, node, re, im)` for every stored sample.
    pub fn write_samples_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["time", "node", "re", "im"])?;
        for (t, u) in self.times.iter().zip(&self.control_samples) {
            for (j, z) in u.iter().enumerate() {
                out.write_record([
                    format!("{t:.17e}"),
                    j.to_string(),
                    format!("{:.17e}", z.re),
                    format!("{:.17e}", z.im),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Right-hand side `-i (c0 - e^{-iTE} c1)` of the Gramian equation.
pub fn hum_rhs(spec: &HamiltonianSpectrum, u0: &StateVector, u1: &StateVector, t: f64) -> DVector<Complex64> {
    let c0 = spec.coefficients(u0);
    let c1 = spec.coefficients(u1);
    let minus_i = Complex64::new(0.0, -1.0);
    DVector::from_iterator(
        c0.len(),
        c0.iter()
            .zip(c1.iter())
            .zip(spec.energies())
            .map(|((a, b), e)| minus_i * (a - b * Complex64::from_polar(1.0, -e * t))),
    )
}

fn check_states(spec: &HamiltonianSpectrum, u0: &StateVector, u1: &StateVector, t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return param(format!("control horizon must be positive, got {t}"));
    }
    if u0.len() != spec.n() || u1.len() != spec.n() {
        return param("states do not match the grid");
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    spec: &HamiltonianSpectrum,
    mask: &Mask,
    gram: &Gramian,
    b: &DVector<Complex64>,
    u1: &StateVector,
    phi: DVector<Complex64>,
    iterations: usize,
    history: Vec<f64>,
) -> ControlSolution {
    let g_phi = &gram.matrix * &phi;
    let control_cost = phi.dotc(&g_phi).re;
    let endpoint_error = (g_phi - b).norm() / spec.norm(u1).max(1.0);
    let times = uniform_times(gram.t, EXPORT_SAMPLES);
    let mut sol = ControlSolution {
        phi0: spec.synthesize(&phi),
        phi0_coeffs: phi,
        times: times.clone(),
        control_samples: Vec::new(),
        t: gram.t,
        endpoint_error,
        control_cost,
        cg_iterations: iterations,
        residual_history: history,
    };
    sol.control_samples = sol.sample(spec, mask, &times);
    sol
}

/// HUM control steering `u0` to `u1` in time `T`, by Jacobi-preconditioned
/// conjugate gradients on the Schrödinger Gramian.
pub fn hum_solve(
    spec: &HamiltonianSpectrum,
    mask: &Mask,
    t: f64,
    u0: &StateVector,
    u1: &StateVector,
    tol: f64,
    max_iter: usize,
) -> Result<ControlSolution> {
    check_states(spec, u0, u1, t)?;
    if !(tol > 0.0) {
        return param(format!("tolerance must be positive, got {tol}"));
    }
    let gram = schrodinger_gramian(spec, mask, t)?;
    hum_solve_with(spec, mask, &gram, u0, u1, tol, max_iter)
}

/// As [`hum_solve`] with a prebuilt Gramian.
pub fn hum_solve_with(
    spec: &HamiltonianSpectrum,
    mask: &Mask,
    gram: &Gramian,
    u0: &StateVector,
    u1: &StateVector,
    tol: f64,
    max_iter: usize,
) -> Result<ControlSolution> {
    check_states(spec, u0, u1, gram.t)?;
    let b = hum_rhs(spec, u0, u1, gram.t);
    let bnorm = b.norm();
    // endpoint error is ||G φ - b|| / max(||u1||, 1)
    let rel_tol = if bnorm > 0.0 {
        tol * spec.norm(u1).max(1.0) / bnorm
    } else {
        tol
    };
    let out = pcg(&gram.matrix, &b, rel_tol, max_iter)?;
    Ok(assemble(
        spec,
        mask,
        gram,
        &b,
        u1,
        out.solution,
        out.iterations,
        out.history,
    ))
}

/// HUM control through a dense LU solve (reference path for small grids).
pub fn hum_solve_dense(
    spec: &HamiltonianSpectrum,
    mask: &Mask,
    gram: &Gramian,
    u0: &StateVector,
    u1: &StateVector,
) -> Result<ControlSolution> {
    check_states(spec, u0, u1, gram.t)?;
    let b = hum_rhs(spec, u0, u1, gram.t);
    let phi = gram
        .matrix
        .clone()
        .lu()
        .solve(&b)
        .ok_or_else(|| LabError::Numerical("Gramian is singular".into()))?;
    Ok(assemble(spec, mask, gram, &b, u1, phi, 0, Vec::new()))
}

/// Strang splitting for `u_t = iHu - i 1_Ω f` with the free flow applied
/// exactly in the eigenbasis. `control_samples[m]` is `f` at `m T / steps`.
pub fn simulate_controlled(
    spec: &HamiltonianSpectrum,
    mask: &Mask,
    control_samples: &[StateVector],
    u0: &StateVector,
    t: f64,
    steps: usize,
) -> Result<StateVector> {
    if steps < 1000 {
        return param(format!("simulation needs at least 1000 steps, got {steps}"));
    }
    if control_samples.len() != steps + 1 {
        return param(format!(
            "expected {} control samples on the stepping grid, got {}",
            steps + 1,
            control_samples.len()
        ));
    }
    if !(t > 0.0) || u0.len() != spec.n() {
        return param("invalid horizon or initial state");
    }
    let dt = t / steps as f64;
    let half: Vec<Complex64> = spec
        .energies()
        .iter()
        .map(|e| Complex64::from_polar(1.0, 0.5 * e * dt))
        .collect();
    let sources: Vec<DVector<Complex64>> = control_samples
        .par_iter()
        .map(|f| {
            let mut g = f.clone();
            for (z, &m) in g.iter_mut().zip(mask.nodes()) {
                if !m {
                    *z = Complex64::new(0.0, 0.0);
                }
            }
            spec.coefficients(&g)
        })
        .collect();
    let kick = Complex64::new(0.0, -dt * 0.5);
    let mut c = spec.coefficients(u0);
    for m in 0..steps {
        for (ck, r) in c.iter_mut().zip(&half) {
            *ck *= r;
        }
        c += (&sources[m] + &sources[m + 1]) * kick;
        for (ck, r) in c.iter_mut().zip(&half) {
            *ck *= r;
        }
    }
    Ok(spec.synthesize(&c))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostRow {
    #[serde(rename = "T")]
    pub t: f64,
    pub cost: f64,
    pub iterations: usize,
    pub endpoint_error: f64,
}

/// HUM cost over a list of horizons with a fit of `log cost` against `1/T²`.
pub fn control_cost_vs_t(
    spec: &HamiltonianSpectrum,
    mask: &Mask,
    u0: &StateVector,
    u1: &StateVector,
    t_list: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(FitReport, Vec<CostRow>)> {
    let rows: Vec<CostRow> = t_list
        .par_iter()
        .map(|&t| {
            let sol = hum_solve(spec, mask, t, u0, u1, tol, max_iter)?;
            Ok(CostRow {
                t,
                cost: sol.control_cost,
                iterations: sol.cg_iterations,
                endpoint_error: sol.endpoint_error,
            })
        })
        .collect::<Result<_>>()?;
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.t, r.cost)).collect();
    Ok((cost_fit(&points, FitModel::InvTSquared)?, rows))
}
