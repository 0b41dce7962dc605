//! Truncated Neumann series for A^{-1} = sum_k T^k with
//! T = -(M_alpha + M_beta + M_D + I/d) = I - A.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::construction::Decomposition;
use crate::error::{Error, Result};
use crate::linalg::Factorization;
use crate::spectral::{self, FnOperator, SpectralReport, SymmetricOperator};

/// Largest m accepted by the ordered-product oracle.
pub const ORACLE_MAX_M: usize = 64;
/// Largest degree accepted by the ordered-product oracle.
pub const ORACLE_MAX_DEGREE: usize = 6;

const NORM_TOL: f64 = 1e-10;
const NORM_MAX_ITER: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct NeumannConfig {
    /// Total-degree cap of the plain partial sum.
    pub k: usize,
    /// Occurrence caps (tau_1..tau_4) on (M_alpha, M_beta, M_D, I/d).
    pub caps: Option<[usize; 4]>,
}

impl NeumannConfig {
    /// K = ceil(log2 d) + 4, no caps.
    pub fn for_dimension(d: usize) -> Self {
        NeumannConfig { k: default_k(d), caps: None }
    }

    /// tau_1 = tau_2 = ceil(log2 d), tau_3 = 3, tau_4 = 1.
    pub fn default_caps(d: usize) -> [usize; 4] {
        let l = ceil_log2(d);
        [l, l, 3, 1]
    }
}

fn ceil_log2(d: usize) -> usize {
    if d <= 1 { 0 } else { (usize::BITS - (d - 1).leading_zeros()) as usize }
}

pub fn default_k(d: usize) -> usize {
    ceil_log2(d) + 4
}

/// y = T x = x - A x.
pub fn t_apply(dec: &Decomposition, x: &[f64], y: &mut [f64]) {
    dec.a.apply(x, y);
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi = xi - *yi);
}

/// Lanczos estimate of ||T||.
pub fn t_norm(dec: &Decomposition) -> Result<SpectralReport> {
    let op = FnOperator { n: dec.m, f: |x: &[f64], y: &mut [f64]| t_apply(dec, x, y) };
    spectral::lanczos_extremes(&op, NORM_TOL, NORM_MAX_ITER, spectral::DEFAULT_START_SEED)
}

/// Partial sums of the series after a one-time check that ||T|| < 1.
pub struct Neumann<'a> {
    dec: &'a Decomposition,
    t_norm: f64,
}

impl<'a> Neumann<'a> {
    pub fn new(dec: &'a Decomposition) -> Result<Self> {
        let t = t_norm(dec)?.norm_estimate;
        if !(t < 1.0) {
            return Err(Error::DivergentSeries(t));
        }
        Ok(Neumann { dec, t_norm: t })
    }

    pub fn t_norm(&self) -> f64 {
        self.t_norm
    }

    /// sum_{k=0}^{K} T^k x via K matrix-vector products.
    pub fn apply(&self, x: &DVector<f64>, k: usize) -> DVector<f64> {
        let mut acc = x.clone();
        let mut term = x.clone();
        let mut next = DVector::zeros(x.len());
        for _ in 0..k {
            t_apply(self.dec, term.as_slice(), next.as_mut_slice());
            std::mem::swap(&mut term, &mut next);
            acc += &term;
        }
        acc
    }

    /// Geometric tail bound ||T||^{K+1} / (1 - ||T||).
    pub fn tail_bound(&self, k: usize) -> f64 {
        self.t_norm.powi(k as i32 + 1) / (1.0 - self.t_norm)
    }
}

pub fn neumann_apply(dec: &Decomposition, x: &DVector<f64>, k: usize) -> Result<DVector<f64>> {
    if x.len() != dec.m {
        return Err(Error::InvalidArgument(format!("vector length {} != m = {}", x.len(), dec.m)));
    }
    Ok(Neumann::new(dec)?.apply(x, k))
}

/// sum over ordered words Q_1..Q_k (k <= maxdeg) in {M_alpha, M_beta, M_D,
/// I/d}, each letter used at most its cap, of (-1)^k Q_1 ... Q_k.
pub fn truncated_t0_exact(dec: &Decomposition, caps: [usize; 4], maxdeg: usize) -> Result<DMatrix<f64>> {
    if dec.m > ORACLE_MAX_M || maxdeg > ORACLE_MAX_DEGREE {
        return Err(Error::SizeLimit(format!(
            "oracle mode needs m <= {ORACLE_MAX_M} and maxdeg <= {ORACLE_MAX_DEGREE} (got m={}, maxdeg={maxdeg})",
            dec.m
        )));
    }
    let m = dec.m;
    let letters = [
        dec.malpha.clone(),
        dec.mbeta.clone(),
        DMatrix::from_diagonal(&dec.md),
        DMatrix::identity(m, m) / dec.d as f64,
    ];
    let mut total = DMatrix::identity(m, m);
    let mut used = [0usize; 4];
    fn walk(
        prefix: &DMatrix<f64>,
        depth: usize,
        maxdeg: usize,
        caps: &[usize; 4],
        used: &mut [usize; 4],
        letters: &[DMatrix<f64>; 4],
        total: &mut DMatrix<f64>,
    ) {
        if depth == maxdeg {
            return;
        }
        for l in 0..4 {
            if used[l] >= caps[l] {
                continue;
            }
            used[l] += 1;
            let p = prefix * &letters[l];
            if (depth + 1) % 2 == 0 {
                *total += &p;
            } else {
                *total -= &p;
            }
            walk(&p, depth + 1, maxdeg, caps, used, letters, total);
            used[l] -= 1;
        }
    }
    let start = DMatrix::identity(m, m);
    walk(&start, 0, maxdeg, &caps, &mut used, &letters, &mut total);
    Ok(total)
}

/// Estimate of ||A^{-1} - sum_{k<=K} T^k||.
pub fn truncation_error(dec: &Decomposition, k: usize) -> Result<f64> {
    let neumann = Neumann::new(dec)?;
    let fac = Factorization::new(&dec.a)?;
    let m = dec.m;
    let op = FnOperator {
        n: m,
        f: |x: &[f64], y: &mut [f64]| {
            let xv = DVector::from_column_slice(x);
            let partial = neumann.apply(&xv, k);
            y.copy_from_slice(x);
            fac.solve_in_place(y);
            y.iter_mut().zip(partial.iter()).for_each(|(a, b)| *a -= b);
        },
    };
    Ok(spectral::lanczos_extremes(&op, 1e-8, NORM_MAX_ITER, spectral::DEFAULT_START_SEED)?.norm_estimate)
}
