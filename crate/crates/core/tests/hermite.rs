use std::collections::BTreeMap;

use ellfit::graphmat::StepLabel;
use ellfit::hermite::{edge_factor_table, hermite_eval, hermite_moment, hermite_scaled_eval, standard_moment, EdgeScheme};
use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Coefficients of He_t from the explicit sum
/// He_t(x) = t! sum_j (-1)^j x^{t-2j} / (j! (t-2j)! 2^j).
fn he_explicit(t: usize) -> Vec<i128> {
    let fact = |n: usize| (1..=n as i128).product::<i128>();
    let mut c = vec![0i128; t + 1];
    for j in 0..=t / 2 {
        let v = fact(t) / (fact(j) * fact(t - 2 * j) * (1i128 << j));
        c[t - 2 * j] = if j % 2 == 0 { v } else { -v };
    }
    c
}

/// E[prod He_t^a] with i128 arithmetic.
fn moment_i128(powers: &[(usize, u32)]) -> i128 {
    let mut poly = vec![1i128];
    for &(t, a) in powers {
        let he = he_explicit(t);
        for _ in 0..a {
            let mut out = vec![0i128; poly.len() + he.len() - 1];
            for (i, x) in poly.iter().enumerate() {
                for (j, y) in he.iter().enumerate() {
                    out[i + j] += x * y;
                }
            }
            poly = out;
        }
    }
    let mut total = 0i128;
    let mut dfact = 1i128;
    for (p, c) in poly.iter().enumerate() {
        if p % 2 == 1 {
            continue;
        }
        if p >= 2 {
            dfact *= (p - 1) as i128;
        }
        total += c * dfact;
    }
    total
}

fn pw(v: &[(u32, u32)]) -> BTreeMap<u32, u32> {
    v.iter().copied().collect()
}

#[test]
fn exact_integer_moments_match_independent_expansion() {
    for t in 1..=4u32 {
        for k in 1..=8u32 {
            let (i, deg) = standard_moment(&pw(&[(t, k)]));
            assert_eq!(deg, t * k);
            assert_eq!(i, BigInt::from(moment_i128(&[(t as usize, k)])), "t={t} k={k}");
        }
    }
    for (s, t) in [(1u32, 2u32), (1, 3), (2, 4), (3, 4)] {
        for (a, b) in [(1u32, 1u32), (2, 1), (2, 2), (3, 2)] {
            let (i, _) = standard_moment(&pw(&[(s, a), (t, b)]));
            assert_eq!(i, BigInt::from(moment_i128(&[(s as usize, a), (t as usize, b)])));
        }
    }
}

#[test]
fn squared_norms() {
    for d in [1usize, 10, 50, 200] {
        for t in 1..=4u32 {
            let fact: u32 = (1..=t).product();
            let (i, deg) = standard_moment(&pw(&[(t, 2)]));
            assert_eq!(i, BigInt::from(fact));
            assert_eq!(deg, 2 * t);
            let v = hermite_moment(&pw(&[(t, 2)]), d).unwrap();
            let want = fact as f64 / (d as f64).powi(t as i32);
            assert!((v - want).abs() <= 2.0 * f64::EPSILON * want);
        }
    }
}

#[test]
fn mixed_h1_h1_h2() {
    let (i, deg) = standard_moment(&pw(&[(1, 2), (2, 1)]));
    assert_eq!((i, deg), (BigInt::from(2), 4));
    for d in [3usize, 50, 1000] {
        let v = hermite_moment(&pw(&[(1, 2), (2, 1)]), d).unwrap();
        assert!((v - 2.0 / (d * d) as f64).abs() <= 2.0 * f64::EPSILON * v);
    }
    assert_eq!(hermite_moment(&pw(&[(1, 1)]), 7).unwrap(), 0.0);
}

#[test]
fn orthogonality() {
    for s in 1..=4u32 {
        for t in 1..=4u32 {
            if s != t {
                assert_eq!(hermite_moment(&pw(&[(s, 1), (t, 1)]), 20).unwrap(), 0.0);
            }
        }
    }
}

#[test]
fn parity() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let x: f64 = rng.random_range(-5.0..5.0);
        for t in 0..=8u32 {
            let sign = if t % 2 == 0 { 1.0 } else { -1.0 };
            assert_eq!(hermite_eval(t, -x), sign * hermite_eval(t, x));
        }
    }
}

#[test]
fn moment_bound_in_integers() {
    // I d^{-kt/2} <= (t!)^{k/2} (k/d)^{kt/2}  <=>  I <= (t!)^{k/2} k^{kt/2}
    for t in 1..=4u32 {
        let fact: u64 = (1..=t as u64).product();
        for k in (2..=8u32).step_by(2) {
            let (i, _) = standard_moment(&pw(&[(t, k)]));
            let bound = BigInt::from(fact).pow(k / 2) * BigInt::from(k).pow(k * t / 2);
            assert!(i <= bound, "t={t} k={k}");
        }
    }
}

#[test]
fn scaled_h2_second_moment_by_sampling() {
    let d = 50usize;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let normal = Normal::new(0.0, 1.0 / (d as f64).sqrt()).unwrap();
    let n = 200_000;
    let mean: f64 = (0..n)
        .map(|_| hermite_scaled_eval(2, normal.sample(&mut rng), d).unwrap().powi(2))
        .sum::<f64>()
        / n as f64;
    let want = 2.0 / (d * d) as f64;
    assert!((mean - want).abs() < 0.1 * want);
}

#[test]
fn table_values() {
    let t = edge_factor_table(10_000, 16, 4).unwrap();
    assert!((t.h1_first - 0.01).abs() < 1e-15);
    assert!((t.h1_high - 0.32).abs() < 1e-15);
    assert!((t.mixed_first_or_return - 0.011892).abs() < 1e-6);
    for l in [StepLabel::F, StepLabel::R, StepLabel::S] {
        assert_eq!(t.edge(EdgeScheme::Pure, 1, l), 0.01);
        assert!((t.edge(EdgeScheme::Pure, 2, l) - 2f64.sqrt() / 1e4).abs() < 1e-18);
    }
    assert!((t.edge(EdgeScheme::Pure, 2, StepLabel::H) - 8.0 * 256.0 / 1e4).abs() < 1e-15);
    assert!(edge_factor_table(0, 1, 1).is_err());
}

/// Pure scheme: an h_t edge traversed k times gets F and R factors once and H
/// factors k - 2 times; compare with E[h_t^k] for every k <= 2q.
#[test]
fn pure_factors_dominate_moments() {
    for q in [1usize, 2, 4, 8, 16, 32] {
        let d = 1000usize;
        let table = edge_factor_table(d, q, 8).unwrap();
        for t in 1..=2u32 {
            for k in 2..=(2 * q) as u32 {
                let exact = hermite_moment(&pw(&[(t, k)]), d).unwrap();
                let f = |l| table.edge(EdgeScheme::Pure, t, l);
                let assigned = f(StepLabel::F) * f(StepLabel::R) * f(StepLabel::H).powi(k as i32 - 2);
                assert!(assigned >= exact * (1.0 - 1e-12), "t={t} k={k} q={q}: {assigned} < {exact}");
            }
        }
    }
}

/// Mixed scheme: every pattern of up to four appearances of h_1..h_4.
#[test]
fn mixed_factors_dominate_moments() {
    let d = 400usize;
    for q in [1usize, 2, 5] {
        let table = edge_factor_table(d, q, 8).unwrap();
        for len in 2..=4usize {
            for code in 0..4usize.pow(len as u32) {
                let mut pattern = Vec::new();
                let mut c = code;
                for _ in 0..len {
                    pattern.push((c % 4) as u32 + 1);
                    c /= 4;
                }
                let mut powers = BTreeMap::new();
                for &t in &pattern {
                    *powers.entry(t).or_insert(0) += 1;
                }
                let exact = hermite_moment(&powers, d).unwrap();
                let assigned = table.mixed_pattern_value(&pattern);
                assert!(assigned >= exact * (1.0 - 1e-12), "{pattern:?} q={q}: {assigned} < {exact}");
            }
        }
    }
}
