//! Thin bridge to faer for the dense factorizations. Matrices stay in
//! nalgebra storage; faer sees them through zero-copy column-major views.

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::{Side, MatMut, MatRef};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

fn view(m: &DMatrix<f64>) -> MatRef<'_, f64> {
    MatRef::from_column_major_slice(m.as_slice(), m.nrows(), m.ncols())
}

enum Kind {
    Cholesky(faer::linalg::solvers::Llt<f64>),
    Lu(PartialPivLu<f64>),
}

/// Factorization of a symmetric matrix: Cholesky when the matrix is positive
/// definite, partial-pivot LU otherwise.
pub struct Factorization {
    kind: Kind,
    n: usize,
    norm1: f64,
}

impl Factorization {
    pub fn new(m: &DMatrix<f64>) -> Result<Self> {
        let n = m.nrows();
        if n != m.ncols() {
            return Err(Error::InvalidArgument(format!(
                "factorization needs a square matrix, got {}x{}",
                n,
                m.ncols()
            )));
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::SingularMatrix("non-finite entries".into()));
        }
        let norm1 = norm1(m);
        let v = view(m);
        let kind = match v.llt(Side::Lower) {
            Ok(llt) => Kind::Cholesky(llt),
            Err(_) => {
                let lu = v.partial_piv_lu();
                let u = lu.U();
                let scale = norm1.max(f64::MIN_POSITIVE);
                for i in 0..n {
                    let p = u[(i, i)];
                    if !p.is_finite() || p.abs() <= f64::EPSILON * scale * 1e-3 {
                        return Err(Error::SingularMatrix(format!(
                            "zero pivot at position {i}"
                        )));
                    }
                }
                Kind::Lu(lu)
            }
        };
        Ok(Factorization { kind, n, norm1 })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn is_cholesky(&self) -> bool {
        matches!(self.kind, Kind::Cholesky(_))
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let rhs = MatMut::from_column_major_slice_mut(x, self.n, 1);
        match &self.kind {
            Kind::Cholesky(f) => f.solve_in_place(rhs),
            Kind::Lu(f) => f.solve_in_place(rhs),
        }
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.clone();
        self.solve_in_place(x.as_mut_slice());
        x
    }

    /// Hager–Higham estimate of the 1-norm condition number. The factored
    /// matrix is symmetric, so transposed solves reuse `solve_in_place`.
    pub fn cond1_estimate(&self) -> f64 {
        let n = self.n;
        if n == 0 {
            return 0.0;
        }
        let mut x = vec![1.0 / n as f64; n];
        let mut est = 0.0f64;
        for iter in 0..5 {
            let mut y = x.clone();
            self.solve_in_place(&mut y);
            let ny: f64 = y.iter().map(|v| v.abs()).sum();
            if !ny.is_finite() {
                return f64::INFINITY;
            }
            if iter > 0 && ny <= est {
                break;
            }
            est = ny;
            let mut z: Vec<f64> = y.iter().map(|v| if *v >= 0.0 { 1.0 } else { -1.0 }).collect();
            self.solve_in_place(&mut z);
            let (j, zmax) = z
                .iter()
                .enumerate()
                .fold((0, 0.0f64), |acc, (i, v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc });
            let ztx: f64 = z.iter().zip(&x).map(|(a, b)| a * b).sum();
            if iter > 0 && zmax <= ztx {
                break;
            }
            x.iter_mut().for_each(|v| *v = 0.0);
            x[j] = 1.0;
        }
        // Higham's alternating-sign safeguard.
        let mut alt: Vec<f64> = (0..n)
            .map(|i| {
                let s = if i % 2 == 0 { 1.0 } else { -1.0 };
                s * (1.0 + i as f64 / (n.max(2) - 1) as f64)
            })
            .collect();
        self.solve_in_place(&mut alt);
        let alt_est = 2.0 * alt.iter().map(|v| v.abs()).sum::<f64>() / (3.0 * n as f64);
        est.max(alt_est) * self.norm1
    }
}

pub fn norm1(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// True when `m` admits a Cholesky factorization.
pub fn is_positive_definite(m: &DMatrix<f64>) -> bool {
    if m.iter().any(|x| !x.is_finite()) {
        return false;
    }
    view(m).llt(Side::Lower).is_ok()
}

/// All eigenvalues of a symmetric matrix in nondecreasing order.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    view(m)
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::SingularMatrix(format!("eigenvalue solver failed: {e:?}")))
}
