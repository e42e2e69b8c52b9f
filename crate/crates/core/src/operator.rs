//! Discretized Hamiltonian `H = -d²/dx² + V`, its eigendecomposition and the
//! functional calculus built on it.
//!
//! Modes are normalized in the grid inner product `<u, w> = h Σ conj(u_j) w_j`,
//! so a state `u` has coefficients `c = h Vᵀ u` and is rebuilt as `u = V c`.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domain::{Grid, Mask, Potential};
use crate::error::{param, LabError, Result};
use crate::linalg::tridiag_eigen;

/// Complex amplitudes on the grid nodes.
pub type StateVector = DVector<Complex64>;

/// Symmetric tridiagonal matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl Tridiagonal {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn apply(&self, u: &[Complex64]) -> Vec<Complex64> {
        let n = self.diag.len();
        (0..n)
            .map(|i| {
                let mut acc = u[i] * self.diag[i];
                if i > 0 {
                    acc += u[i - 1] * self.off[i - 1];
                }
                if i + 1 < n {
                    acc += u[i + 1] * self.off[i];
                }
                acc
            })
            .collect()
    }

    pub fn trace(&self) -> f64 {
        self.diag.iter().sum()
    }
}

pub fn assemble_hamiltonian(grid: &Grid, v: &Potential) -> Result<Tridiagonal> {
    if v.len() != grid.n() {
        return param(format!("potential has {} samples for {} nodes", v.len(), grid.n()));
    }
    let h2 = grid.h() * grid.h();
    Ok(Tridiagonal {
        diag: v.samples().iter().map(|vj| 2.0 / h2 + vj).collect(),
        off: vec![-1.0 / h2; grid.n() - 1],
    })
}

/// Full eigendecomposition of the discrete Hamiltonian.
#[derive(Debug, Clone)]
pub struct HamiltonianSpectrum {
    energies: Vec<f64>,
    modes: DMatrix<f64>,
    grid: Grid,
    potential: Potential,
}

pub fn diagonalize(hm: &Tridiagonal, grid: &Grid, potential: &Potential) -> Result<HamiltonianSpectrum> {
    let n = hm.len();
    if n != grid.n() {
        return param(format!(
            "matrix of size {n} does not match grid with {} nodes",
            grid.n()
        ));
    }
    let eig = tridiag_eigen(&hm.diag, &hm.off)?;
    let scale = 1.0 / grid.h().sqrt();
    let mut modes = DMatrix::from_vec(n, n, eig.vectors);
    modes *= scale;
    // fix the sign so every mode starts positive near the left wall
    for k in 0..n {
        let mut col = modes.column_mut(k);
        let lead = col.iter().copied().find(|x| x.abs() > 1e-8 * scale).unwrap_or(1.0);
        if lead < 0.0 {
            col.neg_mut();
        }
    }
    Ok(HamiltonianSpectrum {
        energies: eig.values,
        modes,
        grid: *grid,
        potential: potential.clone(),
    })
}

impl HamiltonianSpectrum {
    /// Assembles and diagonalizes `H` on `grid`.
    pub fn new(grid: &Grid, potential: &Potential) -> Result<Self> {
        let hm = assemble_hamiltonian(grid, potential)?;
        diagonalize(&hm, grid, potential)
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Columns are the h-normalized eigenmodes.
    pub fn modes(&self) -> &DMatrix<f64> {
        &self.modes
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn n(&self) -> usize {
        self.energies.len()
    }

    pub fn h(&self) -> f64 {
        self.grid.h()
    }

    pub fn max_energy(&self) -> f64 {
        self.energies[self.energies.len() - 1]
    }

    /// Number of modes with `sqrt(E_k) <= mu`.
    pub fn rank_below(&self, mu: f64) -> usize {
        if mu < 0.0 {
            return 0;
        }
        self.energies.partition_point(|&e| e.sqrt() <= mu)
    }

    pub fn coefficients(&self, u: &StateVector) -> DVector<Complex64> {
        let re = self.modes.tr_mul(&u.map(|z| z.re)) * self.h();
        let im = self.modes.tr_mul(&u.map(|z| z.im)) * self.h();
        DVector::from_iterator(re.len(), re.iter().zip(im.iter()).map(|(&a, &b)| Complex64::new(a, b)))
    }

    pub fn synthesize(&self, c: &DVector<Complex64>) -> StateVector {
        let re = &self.modes * c.map(|z| z.re);
        let im = &self.modes * c.map(|z| z.im);
        DVector::from_iterator(re.len(), re.iter().zip(im.iter()).map(|(&a, &b)| Complex64::new(a, b)))
    }

    /// Seeded state with uniform random coefficients in `[-1, 1]²` on the
    /// modes with `sqrt(E_k) <= mu` (all modes when `mu` is `None`).
    pub fn random_state(&self, mu: Option<f64>, seed: u64) -> StateVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rank = mu.map_or(self.n(), |mu| self.rank_below(mu));
        let c = DVector::from_fn(self.n(), |k, _| {
            if k < rank {
                Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        self.synthesize(&c)
    }

    /// Mode `k` as a complex state.
    pub fn mode(&self, k: usize) -> StateVector {
        self.modes.column(k).map(|x| Complex64::new(x, 0.0))
    }

    pub fn norm(&self, u: &StateVector) -> f64 {
        (self.h() * u.norm_squared()).sqrt()
    }

    pub fn masked_norm(&self, u: &StateVector, mask: &Mask) -> f64 {
        let s: f64 = u
            .iter()
            .zip(mask.nodes())
            .filter(|(_, &m)| m)
            .map(|(z, _)| z.norm_sqr())
            .sum();
        (self.h() * s).sqrt()
    }

    pub fn inner(&self, u: &StateVector, w: &StateVector) -> Complex64 {
        u.dotc(w) * self.h()
    }

    pub fn apply_hamiltonian(&self, u: &StateVector) -> StateVector {
        let hm = assemble_hamiltonian(&self.grid, &self.potential).expect("consistent spectrum");
        StateVector::from_vec(hm.apply(u.as_slice()))
    }

    /// Multiplies coefficient `k` by `phase(E_k)`.
    pub fn apply_function(&self, u: &StateVector, phase: impl Fn(f64) -> Complex64) -> StateVector {
        let mut c = self.coefficients(u);
        for (ck, &e) in c.iter_mut().zip(&self.energies) {
            *ck *= phase(e);
        }
        self.synthesize(&c)
    }

    /// Mass of mode `k` in the outer 10% of the box on each side.
    pub fn edge_mass(&self, k: usize) -> f64 {
        let width = 0.1 * self.grid.length();
        let (lo, hi) = (self.grid.x_min() + width, self.grid.x_max() - width);
        let col = self.modes.column(k);
        let s: f64 = (0..self.n())
            .filter(|&j| {
                let x = self.grid.node(j);
                x < lo || x > hi
            })
            .map(|j| col[j] * col[j])
            .sum();
        self.h() * s
    }

    /// Warns when any of the first `used` modes feels the box walls.
    pub fn check_edge_mass(&self, used: usize) -> f64 {
        let worst = (0..used.min(self.n())).map(|k| self.edge_mass(k)).fold(0.0, f64::max);
        if worst > 1e-6 {
            log::warn!("modes up to {used} carry mass {worst:e} near the box walls");
        }
        worst
    }

    pub fn write_spectrum_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["k", "E_k"])?;
        for (k, e) in self.energies.iter().enumerate() {
            out.write_record([k.to_string(), format!("{e:.17e}")])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Binary export: `n` as little-endian u64, `h` as f64, then the modes
    /// row-major (node by node) as little-endian f64.
    pub fn write_modes_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let n = self.n();
        w.write_all(&(n as u64).to_le_bytes())?;
        w.write_all(&self.h().to_le_bytes())?;
        for i in 0..n {
            for k in 0..n {
                w.write_all(&self.modes[(i, k)].to_le_bytes())?;
            }
        }
        Ok(())
    }
}

/// Reads a mode matrix written by [`HamiltonianSpectrum::write_modes_binary`].
pub fn read_modes_binary<R: Read>(mut r: R) -> Result<(f64, DMatrix<f64>)> {
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let n = u64::from_le_bytes(b8) as usize;
    r.read_exact(&mut b8)?;
    let h = f64::from_le_bytes(b8);
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for k in 0..n {
            r.read_exact(&mut b8)?;
            m[(i, k)] = f64::from_le_bytes(b8);
        }
    }
    Ok((h, m))
}

/// Orthogonal projection onto the modes with `sqrt(E_k) <= mu`.
#[derive(Debug, Clone)]
pub struct Projector<'a> {
    spec: &'a HamiltonianSpectrum,
    mu: f64,
    rank: usize,
}

pub fn spectral_projector(spec: &HamiltonianSpectrum, mu: f64) -> Result<Projector<'_>> {
    if !(mu > 0.0) || !mu.is_finite() {
        return param(format!("projector cutoff must be positive and finite, got {mu}"));
    }
    let rank = spec.rank_below(mu);
    if rank == 0 {
        log::warn!(
            "cutoff {mu} lies below sqrt(E_0) = {}; projector is zero",
            spec.energies()[0].sqrt()
        );
    }
    Ok(Projector { spec, mu, rank })
}

impl Projector<'_> {
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn is_zero(&self) -> bool {
        self.rank == 0
    }

    pub fn is_identity(&self) -> bool {
        self.rank == self.spec.n()
    }

    pub fn apply(&self, u: &StateVector) -> StateVector {
        let mut c = self.spec.coefficients(u);
        for ck in c.iter_mut().skip(self.rank) {
            *ck = Complex64::new(0.0, 0.0);
        }
        self.spec.synthesize(&c)
    }

    /// Nodal matrix `h V_r V_rᵀ` of the projector.
    pub fn matrix(&self) -> DMatrix<f64> {
        let vr = self.spec.modes().columns(0, self.rank);
        vr * vr.transpose() * self.spec.h()
    }
}

/// `e^{itH} u0`.
pub fn propagate_schrodinger(spec: &HamiltonianSpectrum, u0: &StateVector, t: f64) -> Result<StateVector> {
    if !t.is_finite() {
        return param("propagation time must be finite");
    }
    Ok(spec.apply_function(u0, |e| Complex64::from_polar(1.0, e * t)))
}

/// `e^{-tH} u0` for `t >= 0`.
pub fn propagate_heat(spec: &HamiltonianSpectrum, u0: &StateVector, t: f64) -> Result<StateVector> {
    if !(t >= 0.0) || !t.is_finite() {
        return param(format!("heat flow needs a finite t >= 0, got {t}"));
    }
    Ok(spec.apply_function(u0, |e| Complex64::new((-e * t).exp(), 0.0)))
}

/// Samples of `F_mu(., y) = Σ_{sqrt(E_k) <= mu} cosh(y sqrt(E_k)) <f, v_k> v_k`.
#[derive(Debug, Clone)]
pub struct CoshField {
    pub y: Vec<f64>,
    pub values: Vec<StateVector>,
}

pub fn cosh_extension(spec: &HamiltonianSpectrum, f: &StateVector, mu: f64, y_grid: &[f64]) -> Result<CoshField> {
    if !(mu > 0.0) {
        return param(format!("cutoff must be positive, got {mu}"));
    }
    let rank = spec.rank_below(mu);
    let c = spec.coefficients(f);
    let ln2 = std::f64::consts::LN_2;
    let mut values = Vec::with_capacity(y_grid.len());
    for &y in y_grid {
        let mut cy = DVector::<Complex64>::zeros(spec.n());
        for k in 0..rank {
            let a = (y * spec.energies()[k].sqrt()).abs();
            let r = c[k].norm();
            if r == 0.0 {
                continue;
            }
            // ln cosh(a) = a - ln 2 + ln(1 + e^{-2a})
            let log_mag = a - ln2 + (-2.0 * a).exp().ln_1p() + r.ln();
            if log_mag > f64::MAX.ln() {
                return Err(LabError::Numerical(format!(
                    "cosh extension overflows at y = {y}, mode {k}"
                )));
            }
            cy[k] = c[k] / r * log_mag.exp();
        }
        let field = spec.synthesize(&cy);
        if field.iter().any(|z| !z.is_finite()) {
            return Err(LabError::Numerical(format!("cosh extension overflows at y = {y}")));
        }
        values.push(field);
    }
    Ok(CoshField {
        y: y_grid.to_vec(),
        values,
    })
}
