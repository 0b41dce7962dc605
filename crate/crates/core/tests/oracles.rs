//! Fast paths against explicit index loops.

use ellfit::construction::decompose;
use ellfit::graphmat::{realize, realize_by_enumeration, RealizeInput, Shape, ShapeKind};
use ellfit::neumann::truncated_t0_exact;
use ellfit::{sample_goe, sample_vectors, SampleSet};
use nalgebra::DMatrix;

fn h(t: u32, x: f64, d: usize) -> f64 {
    let e = 1.0 / d as f64;
    match t {
        1 => x,
        2 => x * x - e,
        3 => x * x * x - 3.0 * x * e,
        4 => x.powi(4) - 6.0 * x * x * e + 3.0 * e * e,
        _ => unreachable!(),
    }
}

fn loops_malpha(s: &SampleSet) -> DMatrix<f64> {
    let v = &s.vectors;
    DMatrix::from_fn(s.m, s.m, |i, j| {
        if i == j {
            return 0.0;
        }
        let mut acc = 0.0;
        for a in 0..s.d {
            for b in 0..s.d {
                if a != b {
                    acc += v[(i, a)] * v[(j, a)] * v[(i, b)] * v[(j, b)];
                }
            }
        }
        acc
    })
}

fn loops_mbeta(s: &SampleSet) -> DMatrix<f64> {
    let v = &s.vectors;
    DMatrix::from_fn(s.m, s.m, |i, j| {
        if i == j {
            return 0.0;
        }
        (0..s.d).map(|a| h(2, v[(i, a)], s.d) * h(2, v[(j, a)], s.d)).sum()
    })
}

fn loops_md(s: &SampleSet) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let v = &s.vectors;
    let mut md1 = vec![0.0; s.m];
    let mut md2 = vec![0.0; s.m];
    let mut md3 = vec![0.0; s.m];
    for i in 0..s.m {
        for a in 0..s.d {
            for b in 0..s.d {
                if a != b {
                    md1[i] += h(2, v[(i, a)], s.d) * h(2, v[(i, b)], s.d);
                }
            }
            md2[i] += h(4, v[(i, a)], s.d);
            md3[i] += h(2, v[(i, a)], s.d);
        }
    }
    (md1, md2, md3)
}

fn loops_sumvv(s: &SampleSet) -> DMatrix<f64> {
    let v = &s.vectors;
    DMatrix::from_fn(s.d, s.d, |a, b| {
        if a == b {
            return 0.0;
        }
        (0..s.m).map(|i| v[(i, a)] * v[(i, b)]).sum()
    })
}

fn close(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> bool {
    a.shape() == b.shape() && (a - b).amax() <= tol
}

fn small_samples() -> Vec<SampleSet> {
    let mut out = Vec::new();
    for d in 2..=5 {
        for m in 1..=4 {
            for seed in 0..3 {
                out.push(sample_vectors(1000 * d as u64 + 10 * m as u64 + seed, d, m).unwrap());
            }
        }
    }
    out
}

#[test]
fn decomposition_parts_match_loops() {
    for s in small_samples() {
        let dec = decompose(&s).unwrap();
        assert!(close(&dec.malpha, &loops_malpha(&s), 1e-12));
        assert!(close(&dec.mbeta, &loops_mbeta(&s), 1e-12));
        let (md1, md2, md3) = loops_md(&s);
        for i in 0..s.m {
            assert!((dec.md1[i] - md1[i]).abs() < 1e-12);
            assert!((dec.md2[i] - md2[i]).abs() < 1e-12);
            assert!((dec.md3[i] - md3[i]).abs() < 1e-12);
        }
    }
}

#[test]
fn realize_matches_loops() {
    for s in small_samples() {
        let input = RealizeInput::Vectors(&s);
        let r = |k| realize(&Shape::get(k), input).unwrap();
        assert!(close(&r(ShapeKind::MAlpha), &loops_malpha(&s), 1e-12));
        assert!(close(&r(ShapeKind::MBeta), &loops_mbeta(&s), 1e-12));
        assert!(close(&r(ShapeKind::SumVV), &loops_sumvv(&s), 1e-12));
        let (md1, md2, md3) = loops_md(&s);
        for (k, want) in [(ShapeKind::MD1, md1), (ShapeKind::MD2, md2), (ShapeKind::MD3, md3)] {
            let got = r(k);
            assert!(close(&got, &DMatrix::from_diagonal(&want.into()), 1e-12));
        }
    }
}

#[test]
fn realize_matches_generic_enumeration() {
    for s in small_samples() {
        for k in [ShapeKind::MAlpha, ShapeKind::MBeta, ShapeKind::MD1, ShapeKind::MD2, ShapeKind::MD3, ShapeKind::SumVV] {
            let shape = Shape::get(k);
            let input = RealizeInput::Vectors(&s);
            let fast = realize(&shape, input).unwrap();
            let slow = realize_by_enumeration(&shape, input).unwrap();
            assert!(close(&fast, &slow, 1e-12), "{k:?} d={} m={}", s.d, s.m);
        }
    }
    for n in 1..=5 {
        let g = sample_goe(n as u64, n, 1.0 / n as f64).unwrap();
        let shape = Shape::get(ShapeKind::Goe);
        let fast = realize(&shape, RealizeInput::Goe(&g)).unwrap();
        let slow = realize_by_enumeration(&shape, RealizeInput::Goe(&g)).unwrap();
        assert!(close(&fast, &slow, 1e-15));
        assert!(close(&fast, &g.entries, 0.0));
    }
}

#[test]
fn single_square_mbeta_is_zero() {
    let s = sample_vectors(4, 5, 1).unwrap();
    let r = realize(&Shape::get(ShapeKind::MBeta), RealizeInput::Vectors(&s)).unwrap();
    assert_eq!(r, DMatrix::zeros(1, 1));
}

/// Sum over all words of length <= maxdeg, enumerated as base-4 numbers,
/// respecting the letter caps.
fn word_enumeration(letters: &[DMatrix<f64>; 4], caps: [usize; 4], maxdeg: usize) -> DMatrix<f64> {
    let m = letters[0].nrows();
    let mut total = DMatrix::identity(m, m);
    for len in 1..=maxdeg {
        for code in 0..4usize.pow(len as u32) {
            let mut word = Vec::with_capacity(len);
            let mut c = code;
            for _ in 0..len {
                word.push(c % 4);
                c /= 4;
            }
            let mut count = [0usize; 4];
            word.iter().for_each(|&l| count[l] += 1);
            if (0..4).any(|l| count[l] > caps[l]) {
                continue;
            }
            let mut p = DMatrix::identity(m, m);
            for &l in &word {
                p = p * &letters[l];
            }
            let sign = if len % 2 == 0 { 1.0 } else { -1.0 };
            total += p * sign;
        }
    }
    total
}

#[test]
fn truncated_t0_matches_word_enumeration() {
    for (seed, d, m) in [(1u64, 6usize, 4usize), (2, 10, 8), (3, 4, 8)] {
        let s = sample_vectors(seed, d, m).unwrap();
        let dec = decompose(&s).unwrap();
        let letters = [
            dec.malpha.clone(),
            dec.mbeta.clone(),
            DMatrix::from_diagonal(&dec.md),
            DMatrix::identity(m, m) / d as f64,
        ];
        for caps in [[1, 1, 1, 1], [2, 2, 1, 1], [3, 0, 2, 1], [2, 2, 2, 2]] {
            for maxdeg in 0..=4 {
                let got = truncated_t0_exact(&dec, caps, maxdeg).unwrap();
                let want = word_enumeration(&letters, caps, maxdeg);
                let scale = want.amax().max(1.0);
                assert!((got - &want).amax() <= 1e-12 * scale, "caps {caps:?} deg {maxdeg}");
            }
        }
    }
}

#[test]
fn uncapped_t0_is_neumann_partial_sum() {
    let s = sample_vectors(9, 8, 6).unwrap();
    let dec = decompose(&s).unwrap();
    let t = DMatrix::identity(6, 6) - &dec.a;
    let mut want = DMatrix::identity(6, 6);
    let mut p = DMatrix::identity(6, 6);
    for _ in 0..4 {
        p = &p * &t;
        want += &p;
    }
    let got = truncated_t0_exact(&dec, [4; 4], 4).unwrap();
    assert!((got - want).amax() < 1e-10);
}
