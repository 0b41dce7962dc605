use ellfit::graphmat::{
    all_labelings, block_value, catalog, default_dv, realize, trace_moment_mc, verify_block_bound,
    verify_block_bound_multi, RealizeInput, Shape, ShapeKind, StepLabeling,
};
use ellfit::{sample_vectors, Error};

#[test]
fn every_admissible_labeling_once() {
    for shape in catalog() {
        let bv = block_value(&shape, 1000, 5000, 3, default_dv()).unwrap();
        assert_eq!(bv.candidates, 4usize.pow(shape.edges.len() as u32));
        let admissible: Vec<String> = all_labelings(shape.edges.len())
            .into_iter()
            .filter(|l| StepLabeling::deduce(&shape, l).is_some())
            .map(|l| l.iter().map(|x| x.to_string()).collect())
            .collect();
        let rows: Vec<String> = bv.rows.iter().map(|r| r.labels.clone()).collect();
        assert_eq!(rows, admissible);
        let sum: f64 = bv.rows.iter().map(|r| r.product).sum();
        assert_eq!(sum, bv.total);
        for r in &bv.rows {
            let p = r.vertex_factor * r.pur_factor * r.edge_factor;
            assert!((p - r.product).abs() <= 1e-15 * p.abs());
        }
    }
}

#[test]
fn mbeta_cases() {
    let (d, m) = (400usize, 9000usize);
    let bv = block_value(&Shape::get(ShapeKind::MBeta), d, m, 2, 8).unwrap();
    let vf = |l: &str| {
        bv.rows
            .iter()
            .find(|r| r.labels == l)
            .map(|r| r.vertex_factor * r.return_multiplier)
    };
    let md = ((m * d) as f64).sqrt();
    assert!((vf("FF").unwrap() - md).abs() < 1e-9 * md);
    assert!((vf("RR").unwrap() - 2.0 * md).abs() < 1e-9 * md);
    assert!((vf("RF").unwrap() - m as f64).abs() < 1e-9);
    assert_eq!(vf("FR"), None);
    assert!(bv.rows.iter().any(|r| r.labels.contains('S') || r.labels.contains('H')));
}

#[test]
fn goe_value_and_limit() {
    let goe = Shape::get(ShapeKind::Goe);
    let at = |d: usize| block_value(&goe, d, 1, 40, 2).unwrap();
    let b = at(1_000_000);
    assert!((b.total - 40.4).abs() < 1e-9);
    assert!((b.dominant - 2.0).abs() < 1e-12);
    let mut last = f64::INFINITY;
    for d in [1e6, 1e8, 1e10, 1e12] {
        let t = at(d as usize).total;
        assert!(t < last);
        last = t;
    }
    assert!(last <= 2.05, "{last}");
}

#[test]
fn mbeta_dominant_ratio() {
    let (d, m) = (1_000_000usize, 1_000_000_000usize);
    let bv = block_value(&Shape::get(ShapeKind::MBeta), d, m, 40, 4).unwrap();
    let ratio = bv.dominant / (2.0 * m as f64 / (d as f64).powi(2));
    assert!((1.0..=1.1).contains(&ratio), "{ratio}");
}

#[test]
fn malpha_dominant_ratio() {
    let (d, m) = (1_000_000f64, 1_000_000_000f64);
    let bv = block_value(&Shape::get(ShapeKind::MAlpha), d as usize, m as usize, 40, 4).unwrap();
    let reference = (3.0 * d * m.sqrt() + 2.0 * m) / (d * d);
    assert!(bv.dominant <= 1.1 * reference, "{}", bv.dominant / reference);
}

#[test]
fn realize_agrees_with_sumvv_definition() {
    let s = sample_vectors(12, 7, 9).unwrap();
    let r = realize(&Shape::get(ShapeKind::SumVV), RealizeInput::Vectors(&s)).unwrap();
    let mut full = s.vectors.transpose() * &s.vectors;
    for i in 0..7 {
        full[(i, i)] = 0.0;
    }
    assert!((r - full).amax() < 1e-12);
}

#[test]
fn goe_trace_q1() {
    let d = 80;
    let est = trace_moment_mc(&Shape::get(ShapeKind::Goe), d, 1, 1, 400, 5).unwrap();
    let want = (d - 1) as f64;
    assert!((est.mean - want).abs() <= 3.0 * est.stderr, "{} vs {want} ({})", est.mean, est.stderr);
}

#[test]
fn mbeta_trace_q1() {
    let (d, m) = (30usize, 40usize);
    let est = trace_moment_mc(&Shape::get(ShapeKind::MBeta), d, m, 1, 400, 6).unwrap();
    let h2sq = 2.0 / (d * d) as f64;
    let want = (m * (m - 1) * d) as f64 * h2sq * h2sq;
    assert!((est.mean - want).abs() <= 3.0 * est.stderr, "{} vs {want} ({})", est.mean, est.stderr);
}

#[test]
fn single_trial_is_deterministic() {
    for shape in catalog() {
        let a = trace_moment_mc(&shape, 12, 10, 2, 1, 99).unwrap();
        let b = trace_moment_mc(&shape, 12, 10, 2, 1, 99).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.stderr, 0.0);
    }
}

#[test]
fn size_guard() {
    let r = trace_moment_mc(&Shape::get(ShapeKind::SumVV), 2001, 10, 1, 1, 0);
    assert!(matches!(r, Err(Error::SizeLimit(_))));
}

#[test]
fn goe_bound_holds() {
    let r = verify_block_bound(&Shape::get(ShapeKind::Goe), 500, 1, 3, 200, 1).unwrap();
    assert!(r.passed(), "{r:?}");
}

#[test]
fn mbeta_trace_bound_holds() {
    let r = verify_block_bound(&Shape::get(ShapeKind::MBeta), 60, 900, 2, 200, 2).unwrap();
    assert!(r.checks.iter().find(|c| c.check == "trace").unwrap().pass);
}

#[test]
fn single_point_mbeta() {
    let r = verify_block_bound(&Shape::get(ShapeKind::MBeta), 10, 1, 2, 5, 3).unwrap();
    assert_eq!(r.max_norm, 0.0);
    assert!(r.passed());
}

#[test]
#[ignore = "several minutes on one core"]
fn all_shapes_at_tall_size() {
    for shape in catalog() {
        for r in verify_block_bound_multi(&shape, 100, 2000, &[2, 3], 200, 4, default_dv()).unwrap() {
            assert!(r.passed(), "{} q={}", r.shape, r.q);
        }
    }
}
