use ellfit::harness::{
    self, fit, lemma_trial, norms, run_trial, sweep, verify_lemmas, with_threads, LemmaConfig, NormsConfig,
    SolverOptions, SweepConfig,
};

fn opts() -> SolverOptions {
    SolverOptions::default()
}

fn json<T: serde::Serialize>(x: &T) -> String {
    let mut buf = Vec::new();
    harness::write_json(&mut buf, x).unwrap();
    String::from_utf8(buf).unwrap()
}

#[test]
fn fit_is_reproducible() {
    let a = fit(7, 100, 300, &opts()).unwrap();
    let b = fit(7, 100, 300, &opts()).unwrap();
    assert!(a.record.residual.unwrap() < 1e-9);
    assert_eq!(json(&a), json(&b));
}

#[test]
fn records_reproduce_from_their_seed() {
    let cfg = SweepConfig { d_list: vec![30], ratios: vec![0.02], trials: 4, seed: 11, solver: opts() };
    let r = sweep(&cfg).unwrap();
    for rec in &r.trials {
        assert_eq!(rec, &run_trial(rec.seed, rec.d, rec.m, &opts()).unwrap());
    }
}

#[test]
fn proven_regime_is_feasible() {
    let cfg = SweepConfig { d_list: vec![60], ratios: vec![1.0 / 200.0], trials: 50, seed: 1, solver: opts() };
    let r = sweep(&cfg).unwrap();
    let c = &r.cells[0];
    assert_eq!(c.m, 18);
    assert_eq!(c.requested, 50);
    assert_eq!(c.completed + c.degenerate, 50);
    assert!(c.feasibility_rate >= 0.9, "{}", c.feasibility_rate);
}

#[test]
fn overcomplete_regime_is_infeasible() {
    let cfg = SweepConfig { d_list: vec![60], ratios: vec![0.6], trials: 50, seed: 2, solver: opts() };
    let r = sweep(&cfg).unwrap();
    let c = &r.cells[0];
    assert!(c.feasibility_rate <= 0.1, "{}", c.feasibility_rate);
    assert!((0.0..=1.0).contains(&c.feasibility_rate));
}

#[test]
fn sweep_independent_of_thread_count() {
    let cfg = SweepConfig { d_list: vec![20, 30], ratios: vec![0.01, 0.1, 0.3], trials: 6, seed: 3, solver: opts() };
    let one = with_threads(1, || sweep(&cfg)).unwrap().unwrap();
    let three = with_threads(3, || sweep(&cfg)).unwrap().unwrap();
    assert_eq!(json(&one), json(&three));
    let mut csv1 = Vec::new();
    let mut csv3 = Vec::new();
    harness::write_csv(&mut csv1, &one.cells).unwrap();
    harness::write_csv(&mut csv3, &three.cells).unwrap();
    assert_eq!(csv1, csv3);
}

#[test]
fn lemma_rows() {
    let cfg = LemmaConfig { sizes: vec![(60, 200), (80, 300)], trials: 4, seed: 5, solver: opts() };
    let r = verify_lemmas(&cfg).unwrap();
    assert_eq!(r.rows.len() % 2, 0);
    assert!(r.rows.iter().all(|row| ["pass", "fail", "observe"].contains(&row.status)));
    assert!(r.rows.iter().all(|row| row.passed <= row.trials));
    let t = lemma_trial(r.trials[0].seed, 60, 200, &opts()).unwrap();
    assert_eq!(t, r.trials[0]);
}

#[test]
fn lemma_trial_matches_full_decomposition() {
    let s = ellfit::sample_vectors(8, 40, 100).unwrap();
    let dec = ellfit::decompose(&s).unwrap();
    let t = lemma_trial(8, 40, 100, &opts()).unwrap();
    assert!((t.r - dec.r).abs() < 1e-10 * dec.r.abs());
    assert!((t.s - dec.s).abs() < 1e-10);
    assert!((t.u - dec.u).abs() < 1e-10);
    assert!((t.md_norm - dec.md.amax()).abs() < 1e-12);
    let ev = ellfit::linalg::sym_eigenvalues(&dec.a).unwrap();
    assert!((t.a_min - ev[0]).abs() < 1e-8 && (t.a_max - ev[99]).abs() < 1e-8);
}

#[test]
fn norm_rows() {
    let cfg = NormsConfig { d: 40, m: 200, goe_n: 60, trials: 3, seed: 1, slack: 1.3, solver: opts() };
    let r = norms(&cfg).unwrap();
    let names: Vec<&str> = r.rows.iter().map(|x| x.name).collect();
    assert_eq!(names, ["mbeta", "malpha", "md", "sum-vv", "goe"]);
    assert_eq!(r.trials.len(), 3);
}

#[test]
fn invalid_sizes() {
    assert!(run_trial(1, 0, 3, &opts()).is_err());
    let cfg = SweepConfig { d_list: vec![5], ratios: vec![0.01], trials: 1, seed: 0, solver: opts() };
    assert!(sweep(&cfg).is_err());
}
