//! Gaussian FBI transform in time,
//! `T_h Γ(z) = 2^{1/4} (2πh)^{-3/4} ∫ e^{-(z+t)²/(2h)} Γ(t) dt`, `z = τ + is`,
//! and the identity `(∂_s - H) T_h(χF) = -T_h(iχ'F)` for `F(t) = e^{itH} f`.
//!
//! For states built from the Schrödinger flow every mode decouples, so the
//! transforms are evaluated as scalar integrals per eigen-coefficient.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, LabError, Result};
use crate::observability::lin_space;
use crate::operator::{HamiltonianSpectrum, StateVector};

/// Half-width of the quadrature window in units of `sqrt(h)`.
const WINDOW: f64 = 8.0;

fn smooth_step(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / x).exp();
        let b = (-1.0 / (1.0 - x)).exp();
        a / (a + b)
    }
}

fn smooth_step_derivative(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        0.0
    } else {
        let a = (-1.0 / x).exp();
        let b = (-1.0 / (1.0 - x)).exp();
        a * b * (1.0 / (x * x) + 1.0 / ((1.0 - x) * (1.0 - x))) / ((a + b) * (a + b))
    }
}

/// Smooth cutoff equal to 1 on `[2T, 8T]`, supported in `[0, 10T]`, with
/// `|χ'| <= 1/T`.
pub fn cutoff(t: f64, horizon: f64) -> f64 {
    let w = 2.0 * horizon;
    smooth_step(t / w) * smooth_step((10.0 * horizon - t) / w)
}

pub fn cutoff_derivative(t: f64, horizon: f64) -> f64 {
    let w = 2.0 * horizon;
    let (up, down) = (t / w, (10.0 * horizon - t) / w);
    (smooth_step_derivative(up) * smooth_step(down) - smooth_step(up) * smooth_step_derivative(down)) / w
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FbiConfig {
    /// Transform scale.
    pub h: f64,
    /// Horizon `T` fixing the cutoff.
    #[serde(rename = "T")]
    pub t: f64,
    /// Time quadrature step.
    pub dt: f64,
    /// Step of the centered difference in `s`.
    pub ds: f64,
    pub taus: Vec<f64>,
    pub ss: Vec<f64>,
}

impl FbiConfig {
    /// Defaults: `dt = sqrt(h)/20`, `ds = 1e-3`, 11 values of `τ` in
    /// `[-6T, -4T]` and of `s` in `[0, T]`.
    pub fn new(h: f64, t: f64) -> Result<Self> {
        let cfg = FbiConfig {
            h,
            t,
            dt: h.sqrt() / 20.0,
            ds: 1e-3,
            taus: lin_space(-6.0 * t, -4.0 * t, 11),
            ss: lin_space(0.0, t, 11),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h < 1.0) {
            return param(format!("FBI scale must lie in (0, 1), got {}", self.h));
        }
        if !(self.t > 0.0) || !self.t.is_finite() {
            return param(format!("horizon must be positive, got {}", self.t));
        }
        if !(self.dt > 0.0 && self.dt <= self.h.sqrt() / 10.0) {
            return param(format!(
                "time step {} does not resolve the Gaussian (need <= {})",
                self.dt,
                self.h.sqrt() / 10.0
            ));
        }
        if !(self.ds > 0.0) {
            return param("s-step must be positive");
        }
        if self.taus.is_empty() || self.ss.is_empty() {
            return param("empty tau or s sample list");
        }
        Ok(())
    }

    /// Uniform nodes covering `[0, 10T]` with spacing at most `dt`.
    pub fn t_grid(&self) -> Vec<f64> {
        let end = 10.0 * self.t;
        let steps = (end / self.dt).ceil() as usize;
        (0..=steps).map(|i| end * i as f64 / steps as f64).collect()
    }

    fn norm_const(&self) -> f64 {
        2f64.powf(0.25) * (2.0 * PI * self.h).powf(-0.75)
    }
}

/// Node indices of `grid` within the quadrature window around `center`.
fn window(grid: &[f64], center: f64, h: f64) -> std::ops::Range<usize> {
    let half = WINDOW * h.sqrt();
    let lo = grid.partition_point(|&t| t < center - half);
    let hi = grid.partition_point(|&t| t <= center + half);
    lo..hi
}

fn trapezoid_weight(i: usize, len: usize, dt: f64) -> f64 {
    if i == 0 || i + 1 == len {
        0.5 * dt
    } else {
        dt
    }
}

fn warn_truncation(grid: &[f64], center: f64, h: f64) {
    let (a, b) = (grid[0], grid[grid.len() - 1]);
    let d = (center - a).min(b - center);
    let tail = if d <= 0.0 { 1.0 } else { (-d * d / (2.0 * h)).exp() };
    if tail > 1e-10 {
        log::warn!("Gaussian tail mass {tail:e} of peak lies outside the time grid (center {center})");
    }
}

/// Trapezoid quadrature of the transform of nodal samples `gamma[i]` taken at
/// `cfg.t_grid()[i]`.
pub fn fbi_transform(gamma: &[StateVector], cfg: &FbiConfig, z: Complex64) -> Result<StateVector> {
    cfg.validate()?;
    let grid = cfg.t_grid();
    if gamma.len() != grid.len() {
        return param(format!("expected {} time samples, got {}", grid.len(), gamma.len()));
    }
    let n = gamma.first().map_or(0, |g| g.len());
    warn_truncation(&grid, -z.re, cfg.h);
    let dt = grid[1] - grid[0];
    let mut acc = StateVector::zeros(n);
    for i in window(&grid, -z.re, cfg.h) {
        let w = (-(z + grid[i]).powi(2) / (2.0 * cfg.h)).exp() * trapezoid_weight(i, grid.len(), dt);
        acc.axpy(w, &gamma[i], Complex64::new(1.0, 0.0));
    }
    Ok(acc * Complex64::new(cfg.norm_const(), 0.0))
}

/// `A ∫ e^{-(z+t)²/(2h)} weight(t) e^{iEt} dt` for each energy, by trapezoid
/// quadrature on the config's time grid.
fn modal_transform(
    energies: &[f64],
    cfg: &FbiConfig,
    grid: &[f64],
    z: Complex64,
    weight: &dyn Fn(f64) -> f64,
) -> Vec<Complex64> {
    let dt = grid[1] - grid[0];
    let mut out = vec![Complex64::new(0.0, 0.0); energies.len()];
    for i in window(grid, -z.re, cfg.h) {
        let t = grid[i];
        let w = weight(t);
        if w == 0.0 {
            continue;
        }
        let kern = (-(z + t).powi(2) / (2.0 * cfg.h)).exp() * (w * trapezoid_weight(i, grid.len(), dt));
        for (o, &e) in out.iter_mut().zip(energies) {
            *o += kern * Complex64::from_polar(1.0, e * t);
        }
    }
    let a = cfg.norm_const();
    out.iter_mut().for_each(|o| *o *= a);
    out
}

/// Nonzero eigen-coefficients of `f` with their energies.
fn active_modes(spec: &HamiltonianSpectrum, f: &StateVector) -> (Vec<usize>, Vec<f64>, Vec<Complex64>) {
    let c = spec.coefficients(f);
    let scale = c.camax();
    let idx: Vec<usize> = (0..c.len()).filter(|&k| c[k].norm() > 1e-15 * scale).collect();
    let e = idx.iter().map(|&k| spec.energies()[k]).collect();
    let cs = idx.iter().map(|&k| c[k]).collect();
    (idx, e, cs)
}

/// `T_h(χ e^{itH} f)(z)` as a grid state.
pub fn transform_flow(
    spec: &HamiltonianSpectrum,
    f: &StateVector,
    cfg: &FbiConfig,
    z: Complex64,
) -> Result<StateVector> {
    cfg.validate()?;
    let grid = cfg.t_grid();
    let (idx, e, c) = active_modes(spec, f);
    let horizon = cfg.t;
    let m = modal_transform(&e, cfg, &grid, z, &|t| cutoff(t, horizon));
    let mut coeffs = DVector::<Complex64>::zeros(spec.n());
    for (j, &k) in idx.iter().enumerate() {
        coeffs[k] = c[j] * m[j];
    }
    Ok(spec.synthesize(&coeffs))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualRow {
    pub tau: f64,
    pub s: f64,
    /// `||LHS - RHS|| / ||T_h(χF)||`.
    pub residual: f64,
    pub lhs_norm: f64,
    pub rhs_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub rows: Vec<ResidualRow>,
    pub max_residual: f64,
    /// Same maximum with the `s`-step halved.
    pub refined_max_residual: f64,
    pub refinement_ratio: f64,
}

impl ResidualReport {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.rows {
            out.serialize(r)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn residual_rows(e: &[f64], c: &[Complex64], cfg: &FbiConfig, ds: f64) -> Vec<ResidualRow> {
    let grid = cfg.t_grid();
    let horizon = cfg.t;
    let chi = move |t: f64| cutoff(t, horizon);
    let dchi = move |t: f64| cutoff_derivative(t, horizon);
    let points: Vec<(f64, f64)> = cfg
        .taus
        .iter()
        .flat_map(|&tau| cfg.ss.iter().map(move |&s| (tau, s)))
        .collect();
    points
        .par_iter()
        .map(|&(tau, s)| {
            let at = |s: f64| modal_transform(e, cfg, &grid, Complex64::new(tau, s), &chi);
            let (wm, w0, wp) = (at(s - ds), at(s), at(s + ds));
            let src = modal_transform(e, cfg, &grid, Complex64::new(tau, s), &dchi);
            let mut diff2 = 0.0;
            let mut lhs2 = 0.0;
            let mut rhs2 = 0.0;
            let mut w2 = 0.0;
            for k in 0..e.len() {
                let lhs = c[k] * ((wp[k] - wm[k]) / (2.0 * ds) - w0[k] * e[k]);
                // -T_h(i χ' F)
                let rhs = -Complex64::i() * c[k] * src[k];
                diff2 += (lhs - rhs).norm_sqr();
                lhs2 += lhs.norm_sqr();
                rhs2 += rhs.norm_sqr();
                w2 += (c[k] * w0[k]).norm_sqr();
            }
            ResidualRow {
                tau,
                s,
                residual: (diff2 / w2).sqrt(),
                lhs_norm: lhs2.sqrt(),
                rhs_norm: rhs2.sqrt(),
            }
        })
        .collect()
}

/// Residual of the intertwining identity over the `(τ, s)` grid, with the
/// `s`-derivative taken by centered differences and `H` applied exactly in
/// its eigenbasis. Fails when halving the `s`-step does not cut the residual
/// at least threefold.
pub fn intertwine_residual(spec: &HamiltonianSpectrum, f: &StateVector, cfg: &FbiConfig) -> Result<ResidualReport> {
    cfg.validate()?;
    let (_, e, c) = active_modes(spec, f);
    if c.is_empty() {
        return param("state vanishes");
    }
    let rows = residual_rows(&e, &c, cfg, cfg.ds);
    let refined = residual_rows(&e, &c, cfg, 0.5 * cfg.ds);
    let max = |r: &[ResidualRow]| r.iter().map(|x| x.residual).fold(0.0, f64::max);
    let (max_residual, refined_max_residual) = (max(&rows), max(&refined));
    let refinement_ratio = max_residual / refined_max_residual;
    if !(refinement_ratio >= 3.0) {
        return Err(LabError::IdentityViolation(format!(
            "halving the s-step changed the residual from {max_residual:e} to {refined_max_residual:e}"
        )));
    }
    Ok(ResidualReport {
        rows,
        max_residual,
        refined_max_residual,
        refinement_ratio,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReproductionRecord {
    pub h: f64,
    #[serde(rename = "T")]
    pub t: f64,
    pub tau: f64,
    pub error: f64,
    pub bound: f64,
    pub pass: bool,
}

/// `2 e^{-18T²/h} ||f|| + sqrt(32h/π) sqrt(1 + 1/T²) ||Hf||`.
pub fn reproduction_bound(h: f64, t: f64, f_norm: f64, hf_norm: f64) -> f64 {
    2.0 * (-18.0 * t * t / h).exp() * f_norm + (32.0 * h / PI).sqrt() * (1.0 + 1.0 / (t * t)).sqrt() * hf_norm
}

/// Compares `||F(τ) - (2πh)^{-1/2} ∫ e^{-(τ-t)²/(2h)} χ(t) F(t) dt||`, with
/// `F(t) = e^{itH} f`, against [`reproduction_bound`] (5% slack) at each `τ`.
pub fn gaussian_reproduce_check(
    spec: &HamiltonianSpectrum,
    f: &StateVector,
    cfg: &FbiConfig,
    taus: &[f64],
) -> Result<Vec<ReproductionRecord>> {
    cfg.validate()?;
    let (_, e, c) = active_modes(spec, f);
    if c.is_empty() {
        return param("state vanishes");
    }
    let f_norm = c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let hf_norm = c
        .iter()
        .zip(&e)
        .map(|(z, ek)| z.norm_sqr() * ek * ek)
        .sum::<f64>()
        .sqrt();
    let bound = reproduction_bound(cfg.h, cfg.t, f_norm, hf_norm);
    let grid = cfg.t_grid();
    let horizon = cfg.t;
    // (2πh)^{-1/2} e^{-(τ-t)²/2h} is the transform kernel at z = -τ up to A √(2πh)
    let rescale = 1.0 / (cfg.norm_const() * (2.0 * PI * cfg.h).sqrt());
    Ok(taus
        .par_iter()
        .map(|&tau| {
            let m = modal_transform(&e, cfg, &grid, Complex64::new(-tau, 0.0), &|t| cutoff(t, horizon));
            let err2: f64 = (0..e.len())
                .map(|k| (c[k] * (Complex64::from_polar(1.0, e[k] * tau) - m[k] * rescale)).norm_sqr())
                .sum();
            let error = err2.sqrt();
            ReproductionRecord {
                h: cfg.h,
                t: cfg.t,
                tau,
                error,
                bound,
                pass: error <= 1.05 * bound,
            }
        })
        .collect())
}
