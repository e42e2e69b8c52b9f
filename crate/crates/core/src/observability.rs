//! Observability Gramians for the Schrödinger and heat flows and the sharp
//! constants extracted from them.
//!
//! All Gramians live in eigenbasis coordinates. With `B` the control mask
//! compressed to the modes, the time integrals are done in closed form:
//!
//! * Schrödinger: `G_kj = B_kj ∫_0^T e^{i(E_j - E_k)t} dt`,
//! * heat: `G_kj = B_kj (1 - e^{-(E_j + E_k)T}) / (E_j + E_k)`.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::Mask;
use crate::error::{param, LabError, Result};
use crate::linalg::{hermitian_norm, log_sum_exp, max_generalized_diag, min_eigenpair};
use crate::operator::{HamiltonianSpectrum, StateVector};

/// Relative eigenvalue floor below which a Gramian counts as singular.
pub const SINGULAR_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GramianKind {
    Schrodinger,
    Heat,
    HighFreq { mu: f64 },
    Spectral { mu: f64 },
}

impl GramianKind {
    pub fn label(&self) -> &'static str {
        match self {
            GramianKind::Schrodinger => "schrodinger",
            GramianKind::Heat => "heat",
            GramianKind::HighFreq { .. } => "highfreq",
            GramianKind::Spectral { .. } => "spectral",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Gramian {
    pub matrix: DMatrix<Complex64>,
    pub t: f64,
    pub kind: GramianKind,
    pub mask_measure: f64,
}

impl Gramian {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `<G c, c>` for eigenbasis coefficients `c`.
    pub fn quadratic_form(&self, c: &DVector<Complex64>) -> f64 {
        c.dotc(&(&self.matrix * c)).re
    }

    /// Largest deviation from Hermitian symmetry.
    pub fn hermitian_defect(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint()).camax()
    }
}

/// `B_kj = h Σ_{m ∈ Ω} v_k(m) v_j(m)`: the mask as an operator on mode
/// coefficients (an orthogonal projection of rank `#mask`).
pub fn mask_compression(spec: &HamiltonianSpectrum, mask: &Mask) -> DMatrix<f64> {
    let idx = mask.indices();
    let rows = spec.modes().select_rows(idx.iter());
    rows.tr_mul(&rows) * spec.h()
}

/// `∫_0^T e^{i delta t} dt`, with a series near `delta T = 0`.
pub fn psi(delta: f64, t: f64) -> Complex64 {
    let x = delta * t;
    if x.abs() < 1e-6 {
        let i = Complex64::i();
        t * (1.0 + i * x / 2.0 - x * x / 6.0 - i * x * x * x / 24.0)
    } else {
        let half = 0.5 * x;
        Complex64::from_polar(t * half.sin() / half, half)
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return param(format!("time horizon must be positive and finite, got {t}"));
    }
    Ok(())
}

/// Schrödinger Gramian restricted to the modes listed in `idx`.
fn schrodinger_block(energies: &[f64], b: &DMatrix<f64>, idx: &[usize], t: f64) -> DMatrix<Complex64> {
    let m = idx.len();
    let mut g = DMatrix::<Complex64>::zeros(m, m);
    g.as_mut_slice().par_chunks_mut(m).enumerate().for_each(|(j, col)| {
        let ej = energies[idx[j]];
        for (k, entry) in col.iter_mut().enumerate() {
            let ek = energies[idx[k]];
            *entry = psi(ej - ek, t) * b[(idx[k], idx[j])];
        }
    });
    g
}

pub fn schrodinger_gramian(spec: &HamiltonianSpectrum, mask: &Mask, t: f64) -> Result<Gramian> {
    check_time(t)?;
    let b = mask_compression(spec, mask);
    let idx: Vec<usize> = (0..spec.n()).collect();
    Ok(Gramian {
        matrix: schrodinger_block(spec.energies(), &b, &idx, t),
        t,
        kind: GramianKind::Schrodinger,
        mask_measure: mask.measure(),
    })
}

fn heat_block(energies: &[f64], b: &DMatrix<f64>, t_lo: f64, t_hi: f64) -> DMatrix<f64> {
    let n = energies.len();
    let mut g = DMatrix::<f64>::zeros(n, n);
    g.as_mut_slice().par_chunks_mut(n).enumerate().for_each(|(j, col)| {
        for (k, entry) in col.iter_mut().enumerate() {
            let s = energies[j] + energies[k];
            // ∫_{t_lo}^{t_hi} e^{-s t} dt
            let integral = (-s * t_lo).exp() * -(-s * (t_hi - t_lo)).exp_m1() / s;
            *entry = b[(k, j)] * integral;
        }
    });
    g
}

pub fn heat_gramian(spec: &HamiltonianSpectrum, mask: &Mask, t: f64) -> Result<Gramian> {
    check_time(t)?;
    let b = mask_compression(spec, mask);
    let g = heat_block(spec.energies(), &b, 0.0, t);
    Ok(Gramian {
        matrix: g.map(|x| Complex64::new(x, 0.0)),
        t,
        kind: GramianKind::Heat,
        mask_measure: mask.measure(),
    })
}

/// Sharp constant `1 / lambda_min(G)` with the worst-observed state.
#[derive(Debug, Clone)]
pub struct ObsConstant {
    pub constant: f64,
    pub lambda_min: f64,
    /// Unit eigenvector (eigenbasis coefficients) for `lambda_min`.
    pub worst: DVector<Complex64>,
}

pub fn observability_constant(g: &Gramian) -> Result<ObsConstant> {
    let (lambda_min, worst) = min_eigenpair(&g.matrix);
    let norm = hermitian_norm(&g.matrix);
    if lambda_min <= SINGULAR_FLOOR * norm {
        return Err(LabError::NotObservable { lambda_min, norm });
    }
    Ok(ObsConstant {
        constant: 1.0 / lambda_min,
        lambda_min,
        worst,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralConstant {
    pub constant: f64,
    pub sigma: f64,
    pub rank: usize,
}

/// Optimal `C` in `||g|| <= C ||g||_Ω` over `g` in the range of the
/// projector onto `sqrt(E_k) <= mu`.
pub fn spectral_ineq_constant(spec: &HamiltonianSpectrum, mask: &Mask, mu: f64) -> Result<SpectralConstant> {
    let b = mask_compression(spec, mask);
    spectral_from_compression(spec, &b, mu)
}

pub(crate) fn spectral_from_compression(
    spec: &HamiltonianSpectrum,
    b: &DMatrix<f64>,
    mu: f64,
) -> Result<SpectralConstant> {
    let rank = spec.rank_below(mu);
    if rank == 0 {
        return param(format!("no mode lies below the cutoff {mu}"));
    }
    let block = b.view((0, 0), (rank, rank)).into_owned();
    let (lambda, _) = min_eigenpair(&block);
    let norm = hermitian_norm(&block);
    if lambda <= SINGULAR_FLOOR * norm.max(1.0) {
        return Err(LabError::DegenerateSet(format!(
            "mask compression on {rank} modes is singular (lambda_min = {lambda:e})"
        )));
    }
    let sigma = lambda.sqrt();
    Ok(SpectralConstant {
        constant: 1.0 / sigma,
        sigma,
        rank,
    })
}

/// Largest cutoff whose range the mask can still resolve: at most half as
/// many modes as mask nodes and `mu <= 0.5 sqrt(E_max)`.
pub fn resolvable_mu_max(spec: &HamiltonianSpectrum, mask: &Mask) -> f64 {
    let r = (mask.count() / 2).clamp(1, spec.n() - 1);
    let e = spec.energies();
    let cap = 0.5 * (e[r - 1].sqrt() + e[r].sqrt());
    cap.min(0.5 * spec.max_energy().sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatConstant {
    pub constant: f64,
    /// Diagonal shift added to the Gramian (zero when none was needed).
    pub shift: f64,
}

/// Optimal `nu` in `||e^{-TH} f||² <= nu ∫_0^T ||e^{-tH} f||²_Ω dt`.
pub fn heat_obs_constant(spec: &HamiltonianSpectrum, mask: &Mask, t: f64) -> Result<HeatConstant> {
    check_time(t)?;
    let b = mask_compression(spec, mask);
    heat_from_compression(spec, &b, t)
}

pub(crate) fn heat_from_compression(spec: &HamiltonianSpectrum, b: &DMatrix<f64>, t: f64) -> Result<HeatConstant> {
    let g = heat_block(spec.energies(), b, 0.0, t);
    let weights: Vec<f64> = spec.energies().iter().map(|e| (-2.0 * e * t).exp()).collect();
    let (constant, shift) = max_generalized_diag(&weights, &g)?;
    Ok(HeatConstant { constant, shift })
}

/// `T / lambda_min` of the Schrödinger Gramian restricted to `sqrt(E_k) > mu`.
pub fn highfreq_obs_constant(spec: &HamiltonianSpectrum, mask: &Mask, mu: f64, t: f64) -> Result<f64> {
    check_time(t)?;
    let b = mask_compression(spec, mask);
    highfreq_from_compression(spec, &b, mu, t)
}

pub(crate) fn highfreq_from_compression(spec: &HamiltonianSpectrum, b: &DMatrix<f64>, mu: f64, t: f64) -> Result<f64> {
    let start = spec.rank_below(mu);
    if start >= spec.n() {
        return param(format!("no mode lies above the cutoff {mu}"));
    }
    let idx: Vec<usize> = (start..spec.n()).collect();
    let g = schrodinger_block(spec.energies(), b, &idx, t);
    let (lambda, _) = min_eigenpair(&g);
    let norm = hermitian_norm(&g);
    if lambda <= SINGULAR_FLOOR * norm {
        return Err(LabError::NotObservable {
            lambda_min: lambda,
            norm,
        });
    }
    Ok(t / lambda)
}

/// Outcome of the heat interpolation check for one `(f, s, t, alpha)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InterpolationRecord {
    pub s: f64,
    pub t: f64,
    pub alpha: f64,
    /// `ln C_impl`; `None` when the observed norm vanishes at resolution.
    pub log_implied: Option<f64>,
}

impl InterpolationRecord {
    pub fn implied(&self) -> Option<f64> {
        self.log_implied.map(f64::exp)
    }

    pub fn is_degenerate(&self) -> bool {
        self.log_implied.is_none()
    }
}

/// `C_impl = ||e^{-tH} f|| / (e^{3/(alpha(t-s))} ||e^{-tH} f||_Ω^{1-alpha} ||e^{-sH} f||^alpha)`.
pub fn interpolation_heat_check(
    spec: &HamiltonianSpectrum,
    mask: &Mask,
    f: &StateVector,
    s: f64,
    t: f64,
    alpha: f64,
) -> Result<InterpolationRecord> {
    if !(s >= 0.0 && s < t && t.is_finite()) {
        return param(format!("need 0 <= s < t, got s = {s}, t = {t}"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return param(format!("need 0 < alpha < 1, got {alpha}"));
    }
    let c = spec.coefficients(f);
    if c.norm() == 0.0 {
        return param("initial state vanishes");
    }
    let evolve = |time: f64| {
        let mut ct = c.clone();
        for (ck, e) in ct.iter_mut().zip(spec.energies()) {
            *ck *= (-e * time).exp();
        }
        ct
    };
    let ct = evolve(t);
    let cs = evolve(s);
    // modes are orthonormal, so coefficient norms are state norms
    let full_t = ct.norm();
    let earlier = cs.norm();
    let observed = spec.masked_norm(&spec.synthesize(&ct), mask);
    let log_implied = if observed <= 1e-300 || full_t <= 1e-300 {
        None
    } else {
        Some(full_t.ln() - 3.0 / (alpha * (t - s)) - (1.0 - alpha) * observed.ln() - alpha * earlier.ln())
    };
    Ok(InterpolationRecord {
        s,
        t,
        alpha,
        log_implied,
    })
}

/// Largest implied constant over non-degenerate records.
pub fn max_implied(records: &[InterpolationRecord]) -> Option<f64> {
    records
        .iter()
        .filter_map(|r| r.log_implied)
        .fold(None, |acc: Option<f64>, x| Some(acc.map_or(x, |a| a.max(x))))
        .map(f64::exp)
}

/// Upper bound for the heat observability constant obtained by chaining the
/// one-step estimates `a_n <= a_{n+1}/4 + c_n ∫_{S_{n+1}}^{S_n} ||u||²_Ω` with
/// `S_n = T/2^n` and `a_n = ||u(S_n)||² e^{-99/(S_n - S_{n+1})}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TelescopingBound {
    pub t: f64,
    pub depth: usize,
    /// `ln` of the bound on `||u(T)||² / ∫_0^T ||u||²_Ω`.
    pub log_constant: f64,
    /// `ln(4^{-n} c_n)` for every level.
    pub level_terms: Vec<f64>,
    /// `ln` of the contribution of `a_depth`.
    pub tail_term: f64,
    /// Largest diagonal shift used when factoring a Gramian.
    pub shift: f64,
}

impl TelescopingBound {
    pub fn constant(&self) -> f64 {
        self.log_constant.exp()
    }

    fn weight(&self, n: usize) -> f64 {
        level_weight(self.t, n)
    }

    /// `ln` of the sum of the first `levels` level terms, scaled like the bound.
    pub fn log_head(&self, levels: usize) -> f64 {
        self.weight(0) + log_sum_exp(&self.level_terms[..levels.min(self.level_terms.len())])
    }

    /// The tail contribution on the scale of the bound.
    pub fn log_tail(&self) -> f64 {
        self.weight(0) + self.tail_term
    }
}

fn level_time(t: f64, n: usize) -> f64 {
    t / 2f64.powi(n as i32)
}

/// `99 / (S_n - S_{n+1})`.
fn level_weight(t: f64, n: usize) -> f64 {
    99.0 / (level_time(t, n) - level_time(t, n + 1))
}

fn check_depth(t: f64, depth: usize) -> Result<()> {
    check_time(t)?;
    if depth < 2 {
        return param(format!("telescoping needs depth >= 2, got {depth}"));
    }
    if depth > 48 || level_time(t, depth + 1) < 1e-12 * t.max(1.0) {
        return param(format!("depth {depth} resolves times below the floating-point floor"));
    }
    Ok(())
}

pub fn telescoping_heat_observability(
    spec: &HamiltonianSpectrum,
    mask: &Mask,
    t: f64,
    depth: usize,
) -> Result<TelescopingBound> {
    check_depth(t, depth)?;
    let b = mask_compression(spec, mask);
    let e = spec.energies();
    let quarter_ln = 4f64.ln();

    let levels: Vec<Result<(f64, f64)>> = (0..depth)
        .into_par_iter()
        .map(|n| {
            let (hi, lo) = (level_time(t, n), level_time(t, n + 1));
            let w = level_weight(t, n);
            // a_n - a_{n+1}/4 = e^{-w_n} (||u(S_n)||² - e^{-w_n}/4 ||u(S_{n+1})||²)
            let damp = 0.25 * (-w).exp();
            let q: Vec<f64> = e
                .iter()
                .map(|ek| ((-2.0 * ek * hi).exp() - damp * (-2.0 * ek * lo).exp()).max(0.0))
                .collect();
            let g = heat_block(e, &b, lo, hi);
            let (kappa, shift) = max_generalized_diag(&q, &g)?;
            Ok((-(n as f64) * quarter_ln - w + kappa.ln(), shift))
        })
        .collect();
    let mut level_terms = Vec::with_capacity(depth);
    let mut shift: f64 = 0.0;
    for r in levels {
        let (term, s) = r?;
        level_terms.push(term);
        shift = shift.max(s);
    }

    let tail_time = level_time(t, depth);
    let g_full = heat_block(e, &b, 0.0, t);
    let weights: Vec<f64> = e.iter().map(|ek| (-2.0 * ek * tail_time).exp()).collect();
    let (nu, s) = max_generalized_diag(&weights, &g_full)?;
    shift = shift.max(s);
    let tail_term = -(depth as f64) * quarter_ln - level_weight(t, depth) + nu.ln();

    let mut all = level_terms.clone();
    all.push(tail_term);
    let log_constant = level_weight(t, 0) + log_sum_exp(&all);
    if !log_constant.is_finite() {
        return Err(LabError::Numerical(format!(
            "telescoped bound is not finite at T = {t}"
        )));
    }
    Ok(TelescopingBound {
        t,
        depth,
        log_constant,
        level_terms,
        tail_term,
        shift,
    })
}

/// `ln a_n = 2 ln ||e^{-S_n H} f|| - 99/(S_n - S_{n+1})` for `n = 0..=depth`.
pub fn telescoping_sequence(spec: &HamiltonianSpectrum, f: &StateVector, t: f64, depth: usize) -> Result<Vec<f64>> {
    check_depth(t, depth)?;
    let c = spec.coefficients(f);
    Ok((0..=depth)
        .map(|n| {
            let sn = level_time(t, n);
            let norm2: f64 = c
                .iter()
                .zip(spec.energies())
                .map(|(ck, e)| ck.norm_sqr() * (-2.0 * e * sn).exp())
                .sum();
            norm2.ln() - level_weight(t, n)
        })
        .collect())
}

/// One row of a constant sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub kind: String,
    pub parameter: f64,
    pub constant: f64,
    pub lambda_min: f64,
    pub mask_measure: f64,
    pub n: usize,
    #[serde(rename = "T_or_mu")]
    pub t_or_mu: f64,
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

/// `count` logarithmically spaced values in `[lo, hi]`.
pub fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    (0..count)
        .map(|i| lo * (hi / lo).powf(i as f64 / (count - 1) as f64))
        .collect()
}

/// `count` evenly spaced values in `[lo, hi]`.
pub fn lin_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    (0..count)
        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
        .collect()
}

pub fn default_t_sweep() -> Vec<f64> {
    log_space(0.05, 1.6, 12)
}

/// 10 cutoffs from `sqrt(E_0) + 0.5` up to [`resolvable_mu_max`].
pub fn default_mu_sweep(spec: &HamiltonianSpectrum, mask: &Mask) -> Vec<f64> {
    let lo = spec.energies()[0].sqrt() + 0.5;
    lin_space(lo, resolvable_mu_max(spec, mask).max(lo), 10)
}

/// Schrödinger constants over a `T` sweep (parallel over `T`).
pub fn obs_sweep(spec: &HamiltonianSpectrum, mask: &Mask, ts: &[f64]) -> Result<Vec<SweepRow>> {
    let b = mask_compression(spec, mask);
    let idx: Vec<usize> = (0..spec.n()).collect();
    ts.par_iter()
        .map(|&t| {
            check_time(t)?;
            let g = Gramian {
                matrix: schrodinger_block(spec.energies(), &b, &idx, t),
                t,
                kind: GramianKind::Schrodinger,
                mask_measure: mask.measure(),
            };
            let c = observability_constant(&g)?;
            Ok(SweepRow {
                kind: "schrodinger".into(),
                parameter: t,
                constant: c.constant,
                lambda_min: c.lambda_min,
                mask_measure: mask.measure(),
                n: spec.n(),
                t_or_mu: t,
            })
        })
        .collect()
}

pub fn spectral_sweep(spec: &HamiltonianSpectrum, mask: &Mask, mus: &[f64]) -> Result<Vec<SweepRow>> {
    let b = mask_compression(spec, mask);
    mus.par_iter()
        .map(|&mu| {
            let c = spectral_from_compression(spec, &b, mu)?;
            Ok(SweepRow {
                kind: "spectral".into(),
                parameter: mu,
                constant: c.constant,
                lambda_min: c.sigma * c.sigma,
                mask_measure: mask.measure(),
                n: spec.n(),
                t_or_mu: mu,
            })
        })
        .collect()
}

pub fn heat_sweep(spec: &HamiltonianSpectrum, mask: &Mask, ts: &[f64]) -> Result<Vec<SweepRow>> {
    let b = mask_compression(spec, mask);
    ts.par_iter()
        .map(|&t| {
            check_time(t)?;
            let c = heat_from_compression(spec, &b, t)?;
            Ok(SweepRow {
                kind: "heat".into(),
                parameter: t,
                constant: c.constant,
                lambda_min: 1.0 / c.constant,
                mask_measure: mask.measure(),
                n: spec.n(),
                t_or_mu: t,
            })
        })
        .collect()
}

pub fn highfreq_sweep(spec: &HamiltonianSpectrum, mask: &Mask, mu: f64, ts: &[f64]) -> Result<Vec<SweepRow>> {
    let b = mask_compression(spec, mask);
    ts.par_iter()
        .map(|&t| {
            check_time(t)?;
            let c = highfreq_from_compression(spec, &b, mu, t)?;
            Ok(SweepRow {
                kind: "highfreq".into(),
                parameter: t,
                constant: c,
                lambda_min: t / c,
                mask_measure: mask.measure(),
                n: spec.n(),
                t_or_mu: mu,
            })
        })
        .collect()
}
