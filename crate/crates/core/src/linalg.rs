//! Dense and tridiagonal linear algebra kernels shared by the lab.

use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{LabError, Result};

/// Eigenpairs of a real symmetric tridiagonal matrix, values ascending.
/// `vectors` is column-major: column `k` is the unit eigenvector for `values[k]`.
#[derive(Debug, Clone)]
pub struct TridiagEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<f64>,
}

/// Implicit QL with Wilkinson-style shifts on a symmetric tridiagonal matrix
/// (`diag` of length n, `off` of length n - 1).
pub fn tridiag_eigen(diag: &[f64], off: &[f64]) -> Result<TridiagEigen> {
    let n = diag.len();
    if n == 0 || off.len() + 1 != n {
        return Err(LabError::Parameter(format!(
            "tridiagonal shape mismatch: {} diagonal vs {} off-diagonal entries",
            n,
            off.len()
        )));
    }
    let mut d = diag.to_vec();
    let mut e = off.to_vec();
    e.push(0.0);
    let mut z = vec![0.0; n * n];
    for k in 0..n {
        z[k * n + k] = 1.0;
    }

    let max_iter = 60 * n.max(10);
    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m == n {
            m = n - 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > max_iter {
                    return Err(LabError::Numerical(format!(
                        "tridiagonal QL did not converge for eigenvalue {l} (n = {n}, |e| = {:e}, scale {:e})",
                        e[l].abs(),
                        tst1
                    )));
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    let (lo, hi) = z.split_at_mut((i + 1) * n);
                    let zi = &mut lo[i * n..];
                    let zi1 = &mut hi[..n];
                    for (a, b) in zi.iter_mut().zip(zi1.iter_mut()) {
                        let t = *b;
                        *b = s * *a + c * t;
                        *a = c * *a - s * t;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let values = order.iter().map(|&k| d[k]).collect();
    let mut vectors = Vec::with_capacity(n * n);
    for &k in &order {
        vectors.extend_from_slice(&z[k * n..(k + 1) * n]);
    }
    Ok(TridiagEigen { values, vectors })
}

/// Smallest eigenvalue of a Hermitian matrix and a unit eigenvector for it.
pub fn min_eigenpair<T>(m: &DMatrix<T>) -> (f64, DVector<T>)
where
    T: ComplexField<RealField = f64>,
{
    let eig = m.clone().symmetric_eigen();
    let (k, &lambda) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty matrix");
    (lambda, eig.eigenvectors.column(k).into_owned())
}

/// Ascending eigenvalues of a Hermitian matrix.
pub fn eigenvalues_sorted<T>(m: &DMatrix<T>) -> Vec<f64>
where
    T: ComplexField<RealField = f64>,
{
    let mut v: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Spectral norm of a Hermitian matrix.
pub fn hermitian_norm<T>(m: &DMatrix<T>) -> f64
where
    T: ComplexField<RealField = f64>,
{
    eigenvalues_sorted(m).into_iter().map(f64::abs).fold(0.0, f64::max)
}

/// Largest eigenvalue of the pencil `(diag(weights), G)` with `G` symmetric
/// positive definite, i.e. `sup_c (c' W c) / (c' G c)`. Negative weights are
/// not allowed. Returns the eigenvalue and the diagonal shift that had to be
/// added to `G` for its Cholesky factorization to succeed (zero when none).
pub fn max_generalized_diag(weights: &[f64], g: &DMatrix<f64>) -> Result<(f64, f64)> {
    let n = weights.len();
    if g.nrows() != n || g.ncols() != n {
        return Err(LabError::Parameter("pencil shape mismatch".into()));
    }
    if weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
        return Err(LabError::Parameter(
            "pencil weights must be finite and non-negative".into(),
        ));
    }
    let scale = g.diagonal().iter().copied().fold(0.0, f64::max);
    let mut shift = 0.0;
    let chol = loop {
        let mut gs = g.clone();
        for i in 0..n {
            gs[(i, i)] += shift;
        }
        if let Some(c) = gs.cholesky() {
            break c;
        }
        shift = if shift == 0.0 { 1e-15 * scale } else { shift * 10.0 };
        if shift > 1e-6 * scale {
            return Err(LabError::DegenerateSet(format!(
                "Gramian is not positive definite even after a diagonal shift of {shift:e}"
            )));
        }
    };
    if shift > 1e-12 * scale {
        log::warn!("regularized Gramian with diagonal shift {shift:e}");
    } else if shift > 0.0 {
        log::debug!("regularized Gramian with diagonal shift {shift:e}");
    }
    let mut rhs = DMatrix::<f64>::zeros(n, n);
    for (i, &w) in weights.iter().enumerate() {
        rhs[(i, i)] = w.sqrt();
    }
    let x = chol
        .l()
        .solve_lower_triangular(&rhs)
        .ok_or_else(|| LabError::Numerical("triangular solve failed".into()))?;
    let s = x.singular_values();
    let top = s.iter().copied().fold(0.0, f64::max);
    Ok((top * top, shift))
}

/// Result of a preconditioned conjugate-gradient solve.
#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub solution: DVector<Complex64>,
    pub iterations: usize,
    /// Relative residual `||b - A x|| / ||b||` after every iteration.
    pub history: Vec<f64>,
}

/// Jacobi-preconditioned conjugate gradients for a Hermitian positive definite
/// matrix. Stops once the relative residual drops below `tol`.
pub fn pcg(a: &DMatrix<Complex64>, b: &DVector<Complex64>, tol: f64, max_iter: usize) -> Result<CgOutcome> {
    let n = b.len();
    let bnorm = b.norm();
    if bnorm == 0.0 {
        return Ok(CgOutcome {
            solution: DVector::zeros(n),
            iterations: 0,
            history: vec![0.0],
        });
    }
    let inv_diag: Vec<f64> = (0..n)
        .map(|i| {
            let d = a[(i, i)].re;
            if d > 0.0 {
                1.0 / d
            } else {
                1.0
            }
        })
        .collect();
    let precond = |r: &DVector<Complex64>| DVector::from_iterator(n, r.iter().zip(&inv_diag).map(|(v, w)| v * *w));

    let mut x = DVector::<Complex64>::zeros(n);
    let mut r = b.clone();
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = r.dotc(&z).re;
    let mut history = Vec::new();
    for it in 1..=max_iter {
        let ap = a * &p;
        let pap = p.dotc(&ap).re;
        if pap <= 0.0 || !pap.is_finite() {
            return Err(LabError::NonConvergence {
                iterations: it,
                last: history.last().copied().unwrap_or(1.0),
                history,
            });
        }
        let alpha = rz / pap;
        x.axpy(Complex64::new(alpha, 0.0), &p, Complex64::new(1.0, 0.0));
        r.axpy(Complex64::new(-alpha, 0.0), &ap, Complex64::new(1.0, 0.0));
        let rel = r.norm() / bnorm;
        history.push(rel);
        if rel <= tol {
            return Ok(CgOutcome {
                solution: x,
                iterations: it,
                history,
            });
        }
        z = precond(&r);
        let rz_new = r.dotc(&z).re;
        let beta = rz_new / rz;
        rz = rz_new;
        p = &z + &p * Complex64::new(beta, 0.0);
    }
    Err(LabError::NonConvergence {
        iterations: max_iter,
        last: history.last().copied().unwrap_or(1.0),
        history,
    })
}

/// `ln(sum_i exp(x_i))` without overflow.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}
