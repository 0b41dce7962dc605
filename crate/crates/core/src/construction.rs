//! The identity-perturbation candidate: Gram matrix M, the split
//! M = A + B, the Woodbury scalars, the weights solving Mw = eta, and R.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hermite;
use crate::linalg::Factorization;
use crate::sampling::SampleSet;

/// Condition-number threshold above which a solve is flagged.
pub const ILL_CONDITIONED: f64 = 1e8;
/// Relative residual ||Mw - eta|| / ||eta|| accepted from a solve.
pub const SOLVE_RESIDUAL_TOL: f64 = 1e-8;

/// M, eta and every piece of the M = A + B split.
///
/// The diagonal parts (M_D and its three summands) are stored as vectors.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub d: usize,
    pub m: usize,
    pub gram: DMatrix<f64>,
    pub eta: DVector<f64>,
    pub malpha: DMatrix<f64>,
    pub mbeta: DMatrix<f64>,
    pub md: DVector<f64>,
    pub md1: DVector<f64>,
    pub md2: DVector<f64>,
    pub md3: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub r: f64,
    pub s: f64,
    pub u: f64,
    /// A^{-1} 1 and A^{-1} eta from the same solves that produced r, s, u.
    pub a_inv_one: DVector<f64>,
    pub a_inv_eta: DVector<f64>,
}

impl Decomposition {
    /// s^2 - ru.
    pub fn woodbury_denominator(&self) -> f64 {
        self.s * self.s - self.r * self.u
    }
}

/// The scalars r, s, u with the vectors they were computed from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RussScalars {
    pub r: f64,
    pub s: f64,
    pub u: f64,
}

/// Weights, Lambda, R and the constraint residual of one fit.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub w: DVector<f64>,
    pub lambda: DMatrix<f64>,
    pub r: DMatrix<f64>,
    /// max_i |v_i^T Lambda v_i - 1|
    pub residual: f64,
    /// 1-norm condition estimate of M (0 when eta = 0 and no solve ran).
    pub cond_estimate: f64,
    pub ill_conditioned: bool,
}

/// M[i,j] = <v_i, v_j>^2 and eta_i = ||v_i||^2 - 1.
pub fn build_gram(sample: &SampleSet) -> (DMatrix<f64>, DVector<f64>) {
    let v = &sample.vectors;
    let mut g = v * v.transpose();
    g.apply(|x| *x = *x * *x);
    (g, eta_of(sample))
}

fn eta_of(sample: &SampleSet) -> DVector<f64> {
    DVector::from_iterator(
        sample.m,
        sample.vectors.row_iter().map(|row| row.norm_squared() - 1.0),
    )
}

fn zero_diagonal(m: &mut DMatrix<f64>) {
    for i in 0..m.nrows().min(m.ncols()) {
        m[(i, i)] = 0.0;
    }
}

/// B = (1/d) [1 eta] [[1,1],[1,0]] [1 eta]^T.
pub fn b_matrix(eta: &DVector<f64>, d: usize) -> DMatrix<f64> {
    let m = eta.len();
    let inv_d = 1.0 / d as f64;
    DMatrix::from_fn(m, m, |i, j| (1.0 + eta[i] + eta[j]) * inv_d)
}

fn scalars_from_a(a: &DMatrix<f64>, eta: &DVector<f64>, d: usize) -> Result<(RussScalars, DVector<f64>, DVector<f64>)> {
    let f = Factorization::new(a).map_err(|e| match e {
        Error::SingularMatrix(s) => Error::SingularMatrix(format!("A: {s}")),
        other => other,
    })?;
    let m = eta.len();
    let one = DVector::from_element(m, 1.0);
    let a_inv_one = f.solve(&one);
    let a_inv_eta = f.solve(eta);
    if a_inv_one.iter().chain(a_inv_eta.iter()).any(|x| !x.is_finite()) {
        return Err(Error::SingularMatrix("A: non-finite solve".into()));
    }
    let inv_d = 1.0 / d as f64;
    let sc = RussScalars {
        r: one.dot(&a_inv_one) * inv_d,
        s: 1.0 + eta.dot(&a_inv_one) * inv_d,
        u: -1.0 + eta.dot(&a_inv_eta) * inv_d,
    };
    Ok((sc, a_inv_one, a_inv_eta))
}

/// Full decomposition through the fast algebraic path.
pub fn decompose(sample: &SampleSet) -> Result<Decomposition> {
    let (d, m) = (sample.d, sample.m);
    let inv_d = 1.0 / d as f64;
    let v = &sample.vectors;
    let (gram, eta) = build_gram(sample);

    let sq = v.map(|x| x * x);
    let h2 = sq.map(|x| x - inv_d);

    let mut malpha = &sq * sq.transpose();
    malpha.zip_apply(&gram, |q, g| *q = g - *q);
    zero_diagonal(&mut malpha);

    let mut mbeta = &h2 * h2.transpose();
    zero_diagonal(&mut mbeta);

    let mut md1 = DVector::zeros(m);
    let mut md2 = DVector::zeros(m);
    let mut md3 = DVector::zeros(m);
    for i in 0..m {
        let (mut s1, mut s2, mut s4) = (0.0, 0.0, 0.0);
        for a in 0..d {
            let x = v[(i, a)];
            let h = h2[(i, a)];
            s1 += h;
            s2 += h * h;
            s4 += hermite::scaled(4, x, inv_d);
        }
        md1[i] = s1 * s1 - s2;
        md2[i] = s4;
        md3[i] = s1;
    }
    let md = &md1 + &md2 + &md3 * (2.0 + 2.0 * inv_d);

    let mut a = &malpha + &mbeta;
    for i in 0..m {
        a[(i, i)] += md[i] + 1.0 + inv_d;
    }
    let b = b_matrix(&eta, d);
    let (sc, a_inv_one, a_inv_eta) = scalars_from_a(&a, &eta, d)?;
    Ok(Decomposition {
        d,
        m,
        gram,
        eta,
        malpha,
        mbeta,
        md,
        md1,
        md2,
        md3,
        a,
        b,
        r: sc.r,
        s: sc.s,
        u: sc.u,
        a_inv_one,
        a_inv_eta,
    })
}

/// Overwrites M with A = M - B.
pub fn gram_to_a(gram: &mut DMatrix<f64>, eta: &DVector<f64>, d: usize) {
    let m = eta.len();
    let inv_d = 1.0 / d as f64;
    for j in 0..m {
        for i in 0..m {
            gram[(i, j)] -= (1.0 + eta[i] + eta[j]) * inv_d;
        }
    }
}

/// r, s, u for a given A.
pub fn russ_scalars(a: &DMatrix<f64>, eta: &DVector<f64>, d: usize) -> Result<RussScalars> {
    scalars_from_a(a, eta, d).map(|x| x.0)
}

/// r, s, u from M alone, overwriting M with A = M - B.
pub fn russ_scalars_from_gram(mut gram: DMatrix<f64>, eta: &DVector<f64>, d: usize) -> Result<RussScalars> {
    gram_to_a(&mut gram, eta, d);
    russ_scalars(&gram, eta, d)
}

/// sum_i w_i v_i v_i^T, symmetrized.
pub fn weighted_outer_sum(sample: &SampleSet, w: &DVector<f64>) -> DMatrix<f64> {
    let v = &sample.vectors;
    let mut vw = v.clone();
    for (i, mut row) in vw.row_iter_mut().enumerate() {
        row *= w[i];
    }
    let r = vw.transpose() * v;
    (&r + r.transpose()) * 0.5
}

/// max_i |v_i^T Lambda v_i - 1|.
pub fn constraint_residual(sample: &SampleSet, lambda: &DMatrix<f64>) -> f64 {
    let v = &sample.vectors;
    let vl = v * lambda;
    vl.row_iter()
        .zip(v.row_iter())
        .map(|(a, b)| (a.dot(&b) - 1.0).abs())
        .fold(0.0, f64::max)
}

/// Solves M w = eta for a given Gram matrix and assembles Lambda and R.
pub fn weights_from_gram(gram: &DMatrix<f64>, eta: &DVector<f64>, sample: &SampleSet) -> Result<Candidate> {
    let (w, cond) = if eta.iter().all(|x| *x == 0.0) {
        (DVector::zeros(eta.len()), 0.0)
    } else {
        let f = Factorization::new(gram)?;
        let w = f.solve(eta);
        let res = (gram * &w - eta).norm() / eta.norm();
        if !res.is_finite() || res >= SOLVE_RESIDUAL_TOL {
            return Err(Error::SingularMatrix(format!(
                "M: relative residual {res:e} after solve"
            )));
        }
        (w, f.cond1_estimate())
    };
    let r = weighted_outer_sum(sample, &w);
    let lambda = DMatrix::identity(sample.d, sample.d) - &r;
    let residual = constraint_residual(sample, &lambda);
    Ok(Candidate {
        w,
        lambda,
        r,
        residual,
        cond_estimate: cond,
        ill_conditioned: cond > ILL_CONDITIONED,
    })
}

/// The candidate Lambda = I - sum w_i v_i v_i^T with M w = eta.
pub fn solve_weights(dec: &Decomposition, sample: &SampleSet) -> Result<Candidate> {
    weights_from_gram(&dec.gram, &dec.eta, sample)
}

/// M^{-1} eta through the rank-2 Woodbury expansion around A.
pub fn woodbury_inverse_eta(dec: &Decomposition) -> Result<DVector<f64>> {
    let den = dec.woodbury_denominator();
    if !den.is_finite() || den.abs() <= 1e-12 * (dec.r * dec.u).abs().max(1.0) {
        return Err(Error::DegenerateScalars(den));
    }
    let c_eta = (dec.r + dec.s) / den;
    let c_one = (dec.u + dec.s) / den;
    Ok(&dec.a_inv_eta * c_eta - &dec.a_inv_one * c_one)
}

/// R = R1 + R2 + E_R for a truncated-inverse applier `t0`.
#[derive(Debug, Clone)]
pub struct RSplit {
    pub r1: DMatrix<f64>,
    pub r2: DMatrix<f64>,
    pub er: DMatrix<f64>,
}

pub fn assemble_r_split<F>(dec: &Decomposition, sample: &SampleSet, t0: F) -> Result<RSplit>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let den = dec.woodbury_denominator();
    if !den.is_finite() || den.abs() <= 1e-12 * (dec.r * dec.u).abs().max(1.0) {
        return Err(Error::DegenerateScalars(den));
    }
    let one = DVector::from_element(dec.m, 1.0);
    let w1 = t0(&dec.eta)? * ((dec.r + dec.s) / den);
    let w2 = t0(&one)? * ((-dec.u - dec.s) / den);
    let cand = solve_weights(dec, sample)?;
    let r1 = weighted_outer_sum(sample, &w1);
    let r2 = weighted_outer_sum(sample, &w2);
    let er = &cand.r - &r1 - &r2;
    Ok(RSplit { r1, r2, er })
}

/// sum_i v_i v_i^T (d x d).
pub fn sum_outer(sample: &SampleSet) -> DMatrix<f64> {
    sample.vectors.transpose() * &sample.vectors
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::sample_vectors;

    fn rows(r: &[&[f64]]) -> SampleSet {
        let m = r.len();
        let d = r[0].len();
        let flat: Vec<f64> = r.iter().flat_map(|x| x.iter().copied()).collect();
        SampleSet::from_rows(DMatrix::from_row_slice(m, d, &flat), 0).unwrap()
    }

    #[test]
    fn gram_examples() {
        let (m, e) = build_gram(&rows(&[&[1.0, 0.0], &[0.0, 1.0]]));
        assert_eq!(m, DMatrix::identity(2, 2));
        assert_eq!(e, DVector::zeros(2));
        let (m, e) = build_gram(&rows(&[&[1.0, 0.0], &[1.0, 0.0]]));
        assert_eq!(m, DMatrix::from_element(2, 2, 1.0));
        assert_eq!(e, DVector::zeros(2));
        let (m, e) = build_gram(&rows(&[&[2.0, 0.0]]));
        assert_eq!(m[(0, 0)], 16.0);
        assert_eq!(e[0], 3.0);
    }

    #[test]
    fn zero_eta_gives_identity() {
        let s = rows(&[&[1.0, 0.0, 0.0], &[0.0, 0.6, 0.8], &[0.0, 1.0, 0.0]]);
        let dec = decompose(&s).unwrap();
        let c = solve_weights(&dec, &s).unwrap();
        assert_eq!(c.w, DVector::zeros(3));
        assert_eq!(c.lambda, DMatrix::identity(3, 3));
        let wb = woodbury_inverse_eta(&dec).unwrap();
        assert!(wb.amax() < 1e-15);
    }

    #[test]
    fn diagonal_parts_match_closed_form() {
        let s = sample_vectors(4, 30, 12).unwrap();
        let dec = decompose(&s).unwrap();
        let d = 30.0;
        for i in 0..12 {
            let n2 = s.vectors.row(i).norm_squared();
            let want = n2 * n2 - 2.0 * n2 / d - 1.0;
            assert!((dec.md[i] - want).abs() < 1e-12);
            assert!((dec.md3[i] - dec.eta[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn singular_gram_is_reported() {
        // m > d(d+1)/2 forces a singular Gram matrix.
        let s = sample_vectors(2, 2, 5).unwrap();
        let (g, e) = build_gram(&s);
        assert!(matches!(weights_from_gram(&g, &e, &s), Err(Error::SingularMatrix(_))));
    }

    #[test]
    fn lean_scalars_match_full() {
        let s = sample_vectors(8, 20, 50).unwrap();
        let dec = decompose(&s).unwrap();
        let (g, e) = build_gram(&s);
        let sc = russ_scalars_from_gram(g, &e, 20).unwrap();
        assert!((sc.r - dec.r).abs() < 1e-10 * dec.r.abs());
        assert!((sc.s - dec.s).abs() < 1e-10);
        assert!((sc.u - dec.u).abs() < 1e-10);
    }
}
