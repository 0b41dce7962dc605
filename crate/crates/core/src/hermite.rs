//! Probabilists' Hermite polynomials, their variance-1/d rescaling, exact
//! Gaussian moments of products, and the edge-factor tables used by the
//! block-value calculus.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graphmat::StepLabel;

/// Fourier/Hermite index carried by an edge.
pub type HermiteIndex = u32;

/// Largest total degree accepted by [`hermite_moment`].
pub const MAX_MOMENT_DEGREE: u32 = 256;

/// He_t(x) via h_{k+1} = x h_k - k h_{k-1}, h_0 = 1, h_1 = x.
pub fn hermite_eval(t: HermiteIndex, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, x);
    if t == 0 {
        return prev;
    }
    for k in 1..t {
        let next = x * cur - k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Scaled polynomial orthogonal under N(0, 1/d): d^{-t/2} He_t(x sqrt(d)).
pub fn hermite_scaled_eval(t: HermiteIndex, x: f64, d: usize) -> Result<f64> {
    if !(1..=4).contains(&t) {
        return Err(Error::InvalidArgument(format!(
            "scaled Hermite index must be in 1..=4, got {t}"
        )));
    }
    if d == 0 {
        return Err(Error::InvalidArgument("d must be positive".into()));
    }
    Ok(scaled(t, x, 1.0 / d as f64))
}

/// Closed forms of the scaled h_1..h_4 with `inv_d` = 1/d.
#[inline]
pub(crate) fn scaled(t: HermiteIndex, x: f64, inv_d: f64) -> f64 {
    let x2 = x * x;
    match t {
        0 => 1.0,
        1 => x,
        2 => x2 - inv_d,
        3 => x * (x2 - 3.0 * inv_d),
        4 => x2 * x2 - 6.0 * x2 * inv_d + 3.0 * inv_d * inv_d,
        _ => {
            let s = inv_d.sqrt();
            hermite_eval(t, x / s) * s.powi(t as i32)
        }
    }
}

fn he_coefficients(t: u32) -> Vec<BigInt> {
    let mut prev = vec![BigInt::one()];
    if t == 0 {
        return prev;
    }
    let mut cur = vec![BigInt::zero(), BigInt::one()];
    for k in 1..t {
        let mut next = vec![BigInt::zero(); cur.len() + 1];
        for (i, c) in cur.iter().enumerate() {
            next[i + 1] += c;
        }
        for (i, c) in prev.iter().enumerate() {
            next[i] -= c * BigInt::from(k);
        }
        prev = cur;
        cur = next;
    }
    cur
}

fn poly_mul(a: &[BigInt], b: &[BigInt]) -> Vec<BigInt> {
    let mut out = vec![BigInt::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// E_{z ~ N(0,1)}[prod He_t(z)^{a_t}] as an exact integer, together with the
/// total degree T. The variance-1/d moment is this integer times d^{-T/2}.
pub fn standard_moment(powers: &BTreeMap<HermiteIndex, u32>) -> (BigInt, u32) {
    let mut poly = vec![BigInt::one()];
    let mut degree = 0u32;
    for (&t, &a) in powers {
        let he = he_coefficients(t);
        for _ in 0..a {
            poly = poly_mul(&poly, &he);
        }
        degree += t * a;
    }
    // E[z^{2k}] = (2k-1)!!, odd moments vanish.
    let mut total = BigInt::zero();
    let mut dfact = BigInt::one();
    for (p, c) in poly.iter().enumerate() {
        if p % 2 == 1 {
            continue;
        }
        if p >= 2 {
            dfact *= BigInt::from(p - 1);
        }
        total += c * &dfact;
    }
    (total, degree)
}

/// Value of `i * d^{-degree/2}` as a float, switching to logarithms when
/// either factor leaves the floating range.
pub fn scale_integer_moment(i: &BigInt, degree: u32, d: f64) -> f64 {
    if i.is_zero() {
        return 0.0;
    }
    // exact integer denominator: one correctly rounded division
    if degree % 2 == 0 && d.fract() == 0.0 && i.bits() <= 53 {
        let den = d.powi(degree as i32 / 2);
        if den < 9007199254740992.0 {
            return i.to_f64().unwrap() / den;
        }
    }
    let pow = d.powf(-(degree as f64) / 2.0);
    if i.bits() < 900 && pow > 1e-290 && pow.is_finite() {
        return i.to_f64().unwrap() * pow;
    }
    let bits = i.bits();
    let shift = bits.saturating_sub(60);
    let top: BigInt = i.abs() >> shift;
    let ln = top.to_f64().unwrap().ln() + shift as f64 * std::f64::consts::LN_2
        - (degree as f64) / 2.0 * d.ln();
    let v = ln.exp();
    if i.is_negative() { -v } else { v }
}

/// Exact E_{x ~ N(0,1/d)}[prod h_t(x)^{a_t}] for the scaled polynomials.
pub fn hermite_moment(powers: &BTreeMap<HermiteIndex, u32>, d: usize) -> Result<f64> {
    if d == 0 {
        return Err(Error::InvalidArgument("d must be positive".into()));
    }
    let degree: u64 = powers.iter().map(|(t, a)| *t as u64 * *a as u64).sum();
    if degree > MAX_MOMENT_DEGREE as u64 {
        return Err(Error::InvalidArgument(format!(
            "total degree {degree} exceeds the cap {MAX_MOMENT_DEGREE}"
        )));
    }
    let (i, deg) = standard_moment(powers);
    Ok(scale_integer_moment(&i, deg, d as f64))
}

/// Which edge-factor scheme applies to a shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeScheme {
    /// Only h_1 or only h_2 edges: the per-edge table.
    Pure,
    /// Anything else: every h_t edge counts as t edge-copies.
    Mixed,
}

/// Edge factors for a given (d, q, D_V).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct EdgeFactorTable {
    pub d: usize,
    pub q: usize,
    pub dv: usize,
    pub h1_first: f64,
    pub h1_high: f64,
    pub h2_first: f64,
    pub h2_high: f64,
    pub mixed_first_or_return: f64,
    pub mixed_high: f64,
    pub special_h1_copy: f64,
    pub special_h2_copy: f64,
}

pub fn edge_factor_table(d: usize, q: usize, dv: usize) -> Result<EdgeFactorTable> {
    if d == 0 || q == 0 || dv == 0 {
        return Err(Error::InvalidArgument(format!(
            "edge factors need d, q, D_V >= 1 (got {d}, {q}, {dv})"
        )));
    }
    let df = d as f64;
    let sd = df.sqrt();
    let qf = q as f64;
    Ok(EdgeFactorTable {
        d,
        q,
        dv,
        h1_first: 1.0 / sd,
        h1_high: 2.0 * qf / sd,
        h2_first: 2f64.sqrt() / df,
        h2_high: 8.0 * qf * qf / df,
        mixed_first_or_return: 2f64.powf(0.25) / sd,
        mixed_high: 32.0 * qf * dv as f64 / sd,
        special_h1_copy: 1.0 / sd,
        special_h2_copy: 2f64.sqrt() / sd,
    })
}

impl EdgeFactorTable {
    /// Factor of one appearance of an h_1 or h_2 edge under the pure scheme.
    pub fn pure(&self, t: HermiteIndex, label: StepLabel) -> Option<f64> {
        let high = label == StepLabel::H;
        match t {
            1 => Some(if high { self.h1_high } else { self.h1_first }),
            2 => Some(if high { self.h2_high } else { self.h2_first }),
            _ => None,
        }
    }

    /// Factor of one edge-copy under the mixed scheme.
    pub fn mixed_copy(&self, t: HermiteIndex, label: StepLabel) -> f64 {
        if t >= 3 || label == StepLabel::H {
            self.mixed_high
        } else {
            self.mixed_first_or_return
        }
    }

    /// Factor of one appearance of an h_t edge (all of its copies).
    pub fn edge(&self, scheme: EdgeScheme, t: HermiteIndex, label: StepLabel) -> f64 {
        match scheme {
            EdgeScheme::Pure => self
                .pure(t, label)
                .unwrap_or_else(|| self.mixed_copy(t, label).powi(t as i32)),
            EdgeScheme::Mixed => self.mixed_copy(t, label).powi(t as i32),
        }
    }

    /// Product of the factors the mixed scheme assigns to an edge whose
    /// appearances along the walk carry the given Hermite indices.
    pub fn mixed_pattern_value(&self, appearances: &[HermiteIndex]) -> f64 {
        let mut sorted = appearances.to_vec();
        sorted.sort_unstable();
        if sorted == [1, 1, 2] {
            return self.special_h1_copy.powi(2) * self.special_h2_copy.powi(2);
        }
        let n = appearances.len();
        appearances
            .iter()
            .enumerate()
            .map(|(k, &t)| {
                let label = if k == 0 {
                    StepLabel::F
                } else if k + 1 == n {
                    StepLabel::R
                } else {
                    StepLabel::H
                };
                self.mixed_copy(t, label).powi(t as i32)
            })
            .product()
    }
}
