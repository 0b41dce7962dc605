//! Extreme eigenvalues, spectral norms and PSD certification for symmetric
//! matrices and matrix-free symmetric operators.
//!
//! The iterative estimator is Lanczos with full reorthogonalization from a
//! seeded start vector. Ritz extremes are read off the tridiagonal matrix by
//! Sturm-sequence bisection. When the Krylov space exhausts the whole space
//! the result is exact.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::sampling::start_vector;

/// Default start-vector seed for [`spectral_norm`].
pub const DEFAULT_START_SEED: u64 = 0x5eed_1a2c_0f5e_ed01;
/// Default relative tolerance used by the library's own norm checks.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Default iteration cap.
pub const DEFAULT_MAX_ITER: usize = 600;

/// A symmetric linear map applied matrix-free.
pub trait SymmetricOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl SymmetricOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.nrows();
        let xv = nalgebra::DVectorView::from_slice(x, n);
        let mut yv = nalgebra::DVectorViewMut::from_slice(y, n);
        yv.gemv(1.0, self, &xv, 0.0);
    }
}

/// Wraps a closure `x -> y` of known dimension as an operator.
pub struct FnOperator<F: Fn(&[f64], &mut [f64])> {
    pub n: usize,
    pub f: F,
}

impl<F: Fn(&[f64], &mut [f64])> SymmetricOperator for FnOperator<F> {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (self.f)(x, y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SpectralReport {
    pub norm_estimate: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub iterations: usize,
    pub converged: bool,
    pub tolerance: f64,
}

impl SpectralReport {
    fn exact(lo: f64, hi: f64, iterations: usize, tolerance: f64) -> Self {
        SpectralReport {
            norm_estimate: lo.abs().max(hi.abs()),
            lambda_min: lo,
            lambda_max: hi,
            iterations,
            converged: true,
            tolerance,
        }
    }
}

/// Largest asymmetry |M[i,j] - M[j,i]|.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in (j + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::InvalidArgument(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let scale = m.amax().max(1.0);
    let a = asymmetry(m);
    if a > 1e-10 * scale || !a.is_finite() {
        return Err(Error::NonSymmetric(a));
    }
    Ok(())
}

/// Number of eigenvalues of the tridiagonal (alpha, beta) strictly below x.
fn sturm_count(alpha: &[f64], beta: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0f64;
    for k in 0..alpha.len() {
        let b2 = if k == 0 { 0.0 } else { beta[k - 1] * beta[k - 1] };
        q = alpha[k] - x - if k == 0 { 0.0 } else { b2 / q };
        if q == 0.0 {
            q = f64::EPSILON * (alpha[k].abs() + x.abs() + 1e-300);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Smallest and largest eigenvalue of a symmetric tridiagonal matrix.
fn tridiagonal_extremes(alpha: &[f64], beta: &[f64]) -> (f64, f64) {
    let k = alpha.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..k {
        let r = if i > 0 { beta[i - 1].abs() } else { 0.0 } + if i + 1 < k { beta[i].abs() } else { 0.0 };
        lo = lo.min(alpha[i] - r);
        hi = hi.max(alpha[i] + r);
    }
    let bisect = |target: usize| {
        // smallest x with count(x) > target, i.e. the (target)-th eigenvalue
        let (mut a, mut b) = (lo, hi);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if sturm_count(alpha, beta, mid) > target {
                b = mid;
            } else {
                a = mid;
            }
        }
        0.5 * (a + b)
    };
    (bisect(0), bisect(k - 1))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn orthogonalize(w: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for q in basis {
            let c = dot(w, q);
            w.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
        }
    }
}

fn normalize(w: &mut [f64]) -> f64 {
    let n = dot(w, w).sqrt();
    if n > 0.0 {
        w.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Extreme eigenvalues of a symmetric operator by Lanczos iteration.
///
/// Converged means the relative change of both extreme Ritz values stayed
/// below `tol` for three consecutive iterations, or the Krylov space filled
/// the whole space.
pub fn lanczos_extremes<O: SymmetricOperator + ?Sized>(
    op: &O,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<SpectralReport> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let n = op.dim();
    if n == 0 {
        return Ok(SpectralReport::exact(0.0, 0.0, 0, tol));
    }
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut q = start_vector(seed, n);
    if normalize(&mut q) == 0.0 {
        q[0] = 1.0;
    }
    let mut w = vec![0.0; n];
    let mut prev: Option<(f64, f64)> = None;
    let mut stable = 0;
    let mut restarts = 0u64;
    let cap = max_iter.max(1);
    for it in 0..cap {
        op.apply(&q, &mut w);
        if w.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("operator produced non-finite values".into()));
        }
        let a = dot(&q, &w);
        basis.push(q.clone());
        alpha.push(a);
        orthogonalize(&mut w, &basis);
        let (lo, hi) = tridiagonal_extremes(&alpha, &beta);
        let scale = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
        if basis.len() == n {
            return Ok(SpectralReport::exact(lo, hi, it + 1, tol));
        }
        if let Some((plo, phi)) = prev {
            let change = ((lo - plo).abs().max((hi - phi).abs())) / scale;
            if change < tol {
                stable += 1;
            } else {
                stable = 0;
            }
            if stable >= 3 {
                return Ok(SpectralReport::exact(lo, hi, it + 1, tol));
            }
        }
        prev = Some((lo, hi));
        let b = normalize(&mut w);
        let anorm = alpha.iter().map(|x| x.abs()).fold(0.0, f64::max).max(scale);
        if b <= 1e-13 * anorm {
            // Invariant subspace: continue from a fresh direction.
            restarts += 1;
            let mut fresh = start_vector(seed ^ restarts.wrapping_mul(0x9e37_79b9_7f4a_7c15), n);
            orthogonalize(&mut fresh, &basis);
            if normalize(&mut fresh) <= 1e-10 {
                return Ok(SpectralReport::exact(lo, hi, it + 1, tol));
            }
            beta.push(0.0);
            q = fresh;
        } else {
            beta.push(b);
            std::mem::swap(&mut q, &mut w);
        }
    }
    let (lo, hi) = tridiagonal_extremes(&alpha, &beta);
    Ok(SpectralReport {
        norm_estimate: lo.abs().max(hi.abs()),
        lambda_min: lo,
        lambda_max: hi,
        iterations: cap,
        converged: false,
        tolerance: tol,
    })
}

/// Spectral norm and extreme eigenvalues of a symmetric matrix.
pub fn spectral_norm(m: &DMatrix<f64>, tol: f64, max_iter: usize) -> Result<SpectralReport> {
    spectral_norm_seeded(m, tol, max_iter, DEFAULT_START_SEED)
}

pub fn spectral_norm_seeded(
    m: &DMatrix<f64>,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<SpectralReport> {
    check_symmetric(m)?;
    if m.nrows() == 1 {
        let v = m[(0, 0)];
        return Ok(SpectralReport::exact(v, v, 0, tol));
    }
    lanczos_extremes(m, tol, max_iter, seed)
}

/// Extremes of a diagonal matrix given by its diagonal.
pub fn diagonal_report(diag: &DVector<f64>) -> SpectralReport {
    if diag.is_empty() {
        return SpectralReport::exact(0.0, 0.0, 0, 0.0);
    }
    SpectralReport::exact(diag.min(), diag.max(), 0, 0.0)
}

/// Dense-eigensolver extremes; the oracle for small matrices.
pub fn dense_extremes(m: &DMatrix<f64>) -> Result<(f64, f64)> {
    check_symmetric(m)?;
    let e = linalg::sym_eigenvalues(m)?;
    Ok(match (e.first(), e.last()) {
        (Some(a), Some(b)) => (*a, *b),
        _ => (0.0, 0.0),
    })
}

/// True iff lambda_min(M) >= -slack. `None` uses 1e-8 * ||M||.
///
/// Certified by a Cholesky factorization of M + slack * I.
pub fn psd_check(m: &DMatrix<f64>, slack: Option<f64>) -> Result<bool> {
    check_symmetric(m)?;
    let n = m.nrows();
    if n == 0 {
        return Ok(true);
    }
    let slack = match slack {
        Some(s) if s >= 0.0 => s,
        Some(s) => return Err(Error::InvalidArgument(format!("slack must be >= 0, got {s}"))),
        None => 1e-8 * spectral_norm(m, 1e-6, DEFAULT_MAX_ITER)?.norm_estimate,
    };
    let mut shifted = m.clone();
    for i in 0..n {
        shifted[(i, i)] += slack;
    }
    Ok(linalg::is_positive_definite(&shifted))
}
