//! Experiment orchestration: single fits, phase sweeps, the lemma suite,
//! norm-bound comparisons, and CSV/JSON report writers.
//!
//! Trials are the unit of parallel work. Trial `t` of an experiment with base
//! seed `s` samples from `derive_seed(s, t)`, and results are collected in
//! trial order, so reports do not depend on the worker count.

use std::io::Write;
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::construction::{build_gram, gram_to_a, russ_scalars, weights_from_gram};
use crate::error::{Error, Result};
use crate::graphmat::{self, BlockBoundReport, BlockValueBreakdown, RealizeInput, Shape, ShapeKind, TraceEstimate};
use crate::sampling::{derive_seed, sample_goe, sample_vectors};
use crate::spectral::{self, SpectralReport};

pub const SCHEMA_VERSION: u32 = 1;

/// d in {40, 60, 100, 150}.
pub const DEFAULT_D_LIST: [usize; 4] = [40, 60, 100, 150];
/// m/d^2 in {1/400, 1/200, 1/100, 1/50, 1/20, 1/8, 1/4, 1/2}.
pub const DEFAULT_RATIOS: [f64; 8] = [1.0 / 400.0, 1.0 / 200.0, 1.0 / 100.0, 1.0 / 50.0, 1.0 / 20.0, 0.125, 0.25, 0.5];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn parse(s: &str) -> Result<Format> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::InvalidArgument(format!("unknown format `{other}` (csv, json)"))),
        }
    }
}

/// Spectral settings shared by the commands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Record wall-clock time per trial. Breaks byte-identical output.
    #[serde(skip)]
    pub timing: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: spectral::DEFAULT_TOL, max_iter: spectral::DEFAULT_MAX_ITER, timing: false }
    }
}

/// Runs `f` on a pool of `threads` workers (0 = rayon's default).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Accepts `0.005`, `1/200` or `1e-3`.
pub fn parse_ratio(s: &str) -> Result<f64> {
    let bad = || Error::InvalidArgument(format!("cannot parse ratio `{s}`"));
    let v = match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| bad())?;
            let b: f64 = b.trim().parse().map_err(|_| bad())?;
            a / b
        }
        None => s.trim().parse().map_err(|_| bad())?,
    };
    if !(v.is_finite() && v > 0.0) {
        return Err(bad());
    }
    Ok(v)
}

fn check_dims(d: usize, m: usize) -> Result<()> {
    if d == 0 || m == 0 {
        return Err(Error::InvalidArgument(format!("d and m must be >= 1 (got d={d}, m={m})")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TrialRecord {
    pub seed: u64,
    pub d: usize,
    pub m: usize,
    pub feasible: Option<bool>,
    pub residual: Option<f64>,
    pub norm_r: Option<f64>,
    pub lambda_min_lambda: Option<f64>,
    pub r: Option<f64>,
    pub s: Option<f64>,
    pub u: Option<f64>,
    pub norm_eta_sq: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_millis: Option<u64>,
    /// Reason code when the trial could not be completed.
    pub degenerate: Option<String>,
}

impl TrialRecord {
    fn empty(seed: u64, d: usize, m: usize) -> Self {
        TrialRecord {
            seed,
            d,
            m,
            feasible: None,
            residual: None,
            norm_r: None,
            lambda_min_lambda: None,
            r: None,
            s: None,
            u: None,
            norm_eta_sq: None,
            wall_millis: None,
            degenerate: None,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate.is_some()
    }
}

fn fill_trial(rec: &mut TrialRecord, opts: &SolverOptions) -> Result<()> {
    let (d, m) = (rec.d, rec.m);
    let sample = sample_vectors(rec.seed, d, m)?;
    let (mut gram, eta) = build_gram(&sample);
    rec.norm_eta_sq = Some(eta.norm_squared());
    let cand = weights_from_gram(&gram, &eta, &sample)?;
    rec.residual = Some(cand.residual);
    // lambda(Lambda) = 1 - lambda(R)
    let rs: SpectralReport = spectral::spectral_norm(&cand.r, opts.tol, opts.max_iter)?;
    rec.norm_r = Some(rs.norm_estimate);
    let lmin = 1.0 - rs.lambda_max;
    rec.lambda_min_lambda = Some(lmin);
    let lambda_norm = (1.0 - rs.lambda_min).abs().max(lmin.abs());
    rec.feasible = Some(spectral::psd_check(&cand.lambda, Some(1e-8 * lambda_norm))?);
    gram_to_a(&mut gram, &eta, d);
    let sc = russ_scalars(&gram, &eta, d)?;
    rec.r = Some(sc.r);
    rec.s = Some(sc.s);
    rec.u = Some(sc.u);
    let values = [rec.residual, rec.norm_r, rec.lambda_min_lambda, rec.r, rec.s, rec.u, rec.norm_eta_sq];
    if values.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::SingularMatrix("non-finite statistic".into()));
    }
    Ok(())
}

/// sample -> M w = eta -> Lambda -> spectral checks, as one record.
/// Numerical failures are reported in `degenerate`, not as errors.
pub fn run_trial(seed: u64, d: usize, m: usize, opts: &SolverOptions) -> Result<TrialRecord> {
    check_dims(d, m)?;
    let start = Instant::now();
    let mut rec = TrialRecord::empty(seed, d, m);
    if let Err(e) = fill_trial(&mut rec, opts) {
        let keep = (rec.seed, rec.d, rec.m);
        rec = TrialRecord::empty(keep.0, keep.1, keep.2);
        rec.degenerate = Some(e.code().to_string());
    }
    if opts.timing {
        rec.wall_millis = Some(start.elapsed().as_millis() as u64);
    }
    Ok(rec)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct FitReport {
    pub schema_version: u32,
    pub command: &'static str,
    pub solver: SolverOptions,
    pub record: TrialRecord,
}

pub fn fit(seed: u64, d: usize, m: usize, opts: &SolverOptions) -> Result<FitReport> {
    Ok(FitReport { schema_version: SCHEMA_VERSION, command: "fit", solver: *opts, record: run_trial(seed, d, m, opts)? })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SweepConfig {
    pub d_list: Vec<usize>,
    pub ratios: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub solver: SolverOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SweepCell {
    pub d: usize,
    pub ratio: f64,
    pub m: usize,
    pub requested: usize,
    pub completed: usize,
    pub degenerate: usize,
    pub feasible: usize,
    /// feasible / requested; degenerate trials count as infeasible.
    pub feasibility_rate: f64,
    pub mean_norm_r: Option<f64>,
    /// 1.96 * sd / sqrt(n) over completed trials.
    pub norm_r_half_width: Option<f64>,
    pub max_residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SweepReport {
    pub schema_version: u32,
    pub command: &'static str,
    pub config: SweepConfig,
    pub cells: Vec<SweepCell>,
    pub warnings: Vec<String>,
    pub trials: Vec<TrialRecord>,
}

/// m = round(d^2 * ratio); rejects cells with fewer than one point.
pub fn cell_m(d: usize, ratio: f64) -> Result<usize> {
    let x = (d * d) as f64 * ratio;
    if !(x >= 1.0) {
        return Err(Error::InvalidArgument(format!("d^2 * ratio = {x} < 1 for d={d}, ratio={ratio}")));
    }
    Ok(x.round() as usize)
}

fn mean_sd(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = if xs.len() > 1 {
        (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Some((mean, sd))
}

fn summarize_cell(d: usize, ratio: f64, m: usize, recs: &[TrialRecord]) -> SweepCell {
    let done: Vec<&TrialRecord> = recs.iter().filter(|r| !r.is_degenerate()).collect();
    let norms: Vec<f64> = done.iter().filter_map(|r| r.norm_r).collect();
    let ms = mean_sd(&norms);
    let feasible = done.iter().filter(|r| r.feasible == Some(true)).count();
    SweepCell {
        d,
        ratio,
        m,
        requested: recs.len(),
        completed: done.len(),
        degenerate: recs.len() - done.len(),
        feasible,
        feasibility_rate: if recs.is_empty() { 0.0 } else { feasible as f64 / recs.len() as f64 },
        mean_norm_r: ms.map(|x| x.0),
        norm_r_half_width: ms.map(|(_, sd)| 1.96 * sd / (norms.len() as f64).sqrt()),
        max_residual: done.iter().filter_map(|r| r.residual).reduce(f64::max),
    }
}

/// Flags increases in feasibility rate with m/d^2 at fixed d that exceed two
/// combined binomial standard errors.
pub fn monotonicity_warnings(cells: &[SweepCell]) -> Vec<String> {
    let mut out = Vec::new();
    let mut ds: Vec<usize> = cells.iter().map(|c| c.d).collect();
    ds.sort_unstable();
    ds.dedup();
    for d in ds {
        let mut row: Vec<&SweepCell> = cells.iter().filter(|c| c.d == d && c.requested > 0).collect();
        row.sort_by(|a, b| a.ratio.total_cmp(&b.ratio));
        for w in row.windows(2) {
            let (a, b) = (w[0], w[1]);
            let var = |c: &SweepCell| {
                let p = c.feasibility_rate;
                (p * (1.0 - p)).max(0.25 / c.requested as f64) / c.requested as f64
            };
            let noise = 2.0 * (var(a) + var(b)).sqrt();
            if b.feasibility_rate > a.feasibility_rate + noise {
                out.push(format!(
                    "d={d}: feasibility rate rises from {:.3} at ratio {} to {:.3} at ratio {}",
                    a.feasibility_rate, a.ratio, b.feasibility_rate, b.ratio
                ));
            }
        }
    }
    out
}

/// Runs every (d, ratio) cell; `on_cell` sees each cell as soon as it is done
/// so callers can flush partial results.
pub fn sweep_with(config: &SweepConfig, mut on_cell: impl FnMut(&SweepCell, &[TrialRecord]) -> Result<()>) -> Result<SweepReport> {
    let mut plan = Vec::new();
    for &d in &config.d_list {
        for &ratio in &config.ratios {
            plan.push((d, ratio, cell_m(d, ratio)?));
        }
    }
    let mut cells = Vec::new();
    let mut trials = Vec::new();
    for (d, ratio, m) in plan {
        let recs: Vec<TrialRecord> = (0..config.trials)
            .into_par_iter()
            .map(|t| run_trial(derive_seed(config.seed, t as u64), d, m, &config.solver))
            .collect::<Result<_>>()?;
        let cell = summarize_cell(d, ratio, m, &recs);
        on_cell(&cell, &recs)?;
        cells.push(cell);
        trials.extend(recs);
    }
    Ok(SweepReport {
        schema_version: SCHEMA_VERSION,
        command: "sweep",
        config: config.clone(),
        warnings: monotonicity_warnings(&cells),
        cells,
        trials,
    })
}

pub fn sweep(config: &SweepConfig) -> Result<SweepReport> {
    sweep_with(config, |_, _| Ok(()))
}

/// Per-trial statistics of the lemma suite.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LemmaTrial {
    pub seed: u64,
    pub d: usize,
    pub m: usize,
    pub a_min: f64,
    pub a_max: f64,
    pub eta_sq: f64,
    pub r: f64,
    pub s: f64,
    pub u: f64,
    pub md_norm: f64,
}

impl LemmaTrial {
    /// ||A - I|| = ||T||.
    pub fn a_deviation(&self) -> f64 {
        (self.a_max - 1.0).abs().max((1.0 - self.a_min).abs())
    }

    pub fn woodbury_denominator(&self) -> f64 {
        self.s * self.s - self.r * self.u
    }
}

/// Statistics for one (seed, d, m) without materializing the A/B split.
pub fn lemma_trial(seed: u64, d: usize, m: usize, opts: &SolverOptions) -> Result<LemmaTrial> {
    check_dims(d, m)?;
    let sample = sample_vectors(seed, d, m)?;
    let (mut a, eta) = build_gram(&sample);
    gram_to_a(&mut a, &eta, d);
    // M_alpha and M_beta vanish on the diagonal, so A_ii = M_D,ii + 1 + 1/d.
    let shift = 1.0 + 1.0 / d as f64;
    let md_norm = (0..m).map(|i| (a[(i, i)] - shift).abs()).fold(0.0, f64::max);
    let ext = if m == 1 {
        SpectralReport { norm_estimate: a[(0, 0)].abs(), lambda_min: a[(0, 0)], lambda_max: a[(0, 0)], iterations: 0, converged: true, tolerance: 0.0 }
    } else {
        spectral::lanczos_extremes(&a, opts.tol, opts.max_iter, spectral::DEFAULT_START_SEED)?
    };
    let sc = russ_scalars(&a, &eta, d)?;
    Ok(LemmaTrial {
        seed,
        d,
        m,
        a_min: ext.lambda_min,
        a_max: ext.lambda_max,
        eta_sq: eta.norm_squared(),
        r: sc.r,
        s: sc.s,
        u: sc.u,
        md_norm,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CheckRow {
    pub name: &'static str,
    pub d: usize,
    pub m: usize,
    pub statistic: &'static str,
    pub claim: &'static str,
    pub slack: String,
    pub trials: usize,
    pub passed: usize,
    pub pass_rate: f64,
    pub required_rate: Option<f64>,
    pub min: Option<f64>,
    pub mean: Option<f64>,
    pub max: Option<f64>,
    /// "pass", "fail" or "observe".
    pub status: &'static str,
}

struct RowSpec<T> {
    name: &'static str,
    statistic: &'static str,
    claim: &'static str,
    slack: String,
    required: Option<f64>,
    value: Box<dyn Fn(&T) -> f64>,
    pass: Box<dyn Fn(f64) -> bool>,
}

fn evaluate<T>(spec: &RowSpec<T>, d: usize, m: usize, requested: usize, samples: &[T]) -> CheckRow {
    let vals: Vec<f64> = samples.iter().map(|t| (spec.value)(t)).collect();
    let passed = vals.iter().filter(|v| (spec.pass)(**v)).count();
    let pass_rate = if requested == 0 { 0.0 } else { passed as f64 / requested as f64 };
    let status = match spec.required {
        None => "observe",
        Some(req) if pass_rate >= req => "pass",
        Some(_) => "fail",
    };
    CheckRow {
        name: spec.name,
        d,
        m,
        statistic: spec.statistic,
        claim: spec.claim,
        slack: spec.slack.clone(),
        trials: requested,
        passed,
        pass_rate,
        required_rate: spec.required,
        min: vals.iter().copied().reduce(f64::min),
        mean: mean_sd(&vals).map(|x| x.0),
        max: vals.iter().copied().reduce(f64::max),
        status,
    }
}

fn lemma_specs(d: usize, m: usize) -> Vec<RowSpec<LemmaTrial>> {
    let md_ratio = m as f64 / d as f64;
    let log_scale = ((d as f64).ln() / d as f64).sqrt();
    vec![
        RowSpec {
            name: "a-spectrum",
            statistic: "||A - I||",
            claim: "0.5 I <= A <= 1.5 I",
            slack: "none".into(),
            required: Some(1.0),
            value: Box::new(|t: &LemmaTrial| t.a_deviation()),
            pass: Box::new(|x| x <= 0.5),
        },
        RowSpec {
            name: "a-min",
            statistic: "lambda_min(A)",
            claim: "lambda_min(A) >= 0.5",
            slack: "none".into(),
            required: None,
            value: Box::new(|t: &LemmaTrial| t.a_min),
            pass: Box::new(|x| x >= 0.5),
        },
        RowSpec {
            name: "a-max",
            statistic: "lambda_max(A)",
            claim: "lambda_max(A) <= 1.5",
            slack: "none".into(),
            required: None,
            value: Box::new(|t: &LemmaTrial| t.a_max),
            pass: Box::new(|x| x <= 1.5),
        },
        RowSpec {
            name: "eta-band",
            statistic: "||eta||^2 / (2m/d)",
            claim: "||eta||^2 = (1 + o(1)) 2m/d",
            slack: "band [0.8, 1.2]".into(),
            required: Some(0.95),
            value: Box::new(move |t: &LemmaTrial| t.eta_sq / (2.0 * md_ratio)),
            pass: Box::new(|x| (0.8..=1.2).contains(&x)),
        },
        RowSpec {
            name: "eta-upper",
            statistic: "||eta||^2 / (2m/d)",
            claim: "||eta||^2 <= (1 + o(1)) 2m/d",
            slack: "1.2".into(),
            required: Some(0.95),
            value: Box::new(move |t: &LemmaTrial| t.eta_sq / (2.0 * md_ratio)),
            pass: Box::new(|x| x <= 1.2),
        },
        RowSpec {
            name: "r-range",
            statistic: "r / (m/d)",
            claim: "r in (m/d) [2/3, 2]",
            slack: "none".into(),
            required: Some(0.95),
            value: Box::new(move |t: &LemmaTrial| t.r / md_ratio),
            pass: Box::new(|x| (2.0 / 3.0..=2.0).contains(&x)),
        },
        RowSpec {
            name: "u-range",
            statistic: "u",
            claim: "u in [-1, -1/2]",
            slack: "none".into(),
            required: Some(0.95),
            value: Box::new(|t: &LemmaTrial| t.u),
            pass: Box::new(|x| (-1.0..=-0.5).contains(&x)),
        },
        RowSpec {
            name: "s-bound",
            statistic: "|s|",
            claim: "|s| = O(1)",
            slack: "1.2".into(),
            required: Some(0.95),
            value: Box::new(|t: &LemmaTrial| t.s.abs()),
            pass: Box::new(|x| x <= 1.2),
        },
        RowSpec {
            name: "woodbury-denominator",
            statistic: "(s^2 - ru) / (m/d)",
            claim: "s^2 - ru = Omega(m/d)",
            slack: "constant 0.1".into(),
            required: Some(0.95),
            value: Box::new(move |t: &LemmaTrial| t.woodbury_denominator() / md_ratio),
            pass: Box::new(|x| x >= 0.1),
        },
        RowSpec {
            name: "md-norm",
            statistic: "||M_D|| / sqrt(log d / d)",
            claim: "||M_D|| = O(sqrt(log d / d))",
            slack: "constant 5".into(),
            required: Some(0.95),
            value: Box::new(move |t: &LemmaTrial| t.md_norm / log_scale),
            pass: Box::new(|x| x <= 5.0),
        },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LemmaConfig {
    pub sizes: Vec<(usize, usize)>,
    pub trials: usize,
    pub seed: u64,
    pub solver: SolverOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LemmaReport {
    pub schema_version: u32,
    pub command: &'static str,
    pub config: LemmaConfig,
    pub rows: Vec<CheckRow>,
    /// Trials whose statistics could not be computed, as (seed, reason).
    pub degenerate: Vec<(u64, String)>,
    pub trials: Vec<LemmaTrial>,
}

/// One row per lemma and size. Degenerate trials count as failures.
pub fn verify_lemmas(config: &LemmaConfig) -> Result<LemmaReport> {
    let mut rows = Vec::new();
    let mut degenerate = Vec::new();
    let mut all = Vec::new();
    for &(d, m) in &config.sizes {
        check_dims(d, m)?;
        let results: Vec<(u64, Result<LemmaTrial>)> = (0..config.trials)
            .into_par_iter()
            .map(|t| {
                let seed = derive_seed(config.seed, t as u64);
                (seed, lemma_trial(seed, d, m, &config.solver))
            })
            .collect();
        let mut ok = Vec::new();
        for (seed, r) in results {
            match r {
                Ok(t) => ok.push(t),
                Err(e) => degenerate.push((seed, e.code().to_string())),
            }
        }
        rows.extend(lemma_specs(d, m).iter().map(|s| evaluate(s, d, m, config.trials, &ok)));
        all.extend(ok);
    }
    Ok(LemmaReport {
        schema_version: SCHEMA_VERSION,
        command: "verify-lemmas",
        config: config.clone(),
        rows,
        degenerate,
        trials: all,
    })
}

/// Spectral norms of the catalog matrices for one trial.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct NormTrial {
    pub seed: u64,
    pub mbeta: f64,
    pub malpha: f64,
    pub md: f64,
    pub sum_vv: f64,
    pub goe: f64,
}

fn norm_of(x: &DMatrix<f64>, opts: &SolverOptions) -> Result<f64> {
    Ok(spectral::spectral_norm(x, opts.tol, opts.max_iter)?.norm_estimate)
}

pub fn norm_trial(seed: u64, d: usize, m: usize, goe_n: usize, opts: &SolverOptions) -> Result<NormTrial> {
    check_dims(d, m)?;
    let sample = sample_vectors(seed, d, m)?;
    let input = RealizeInput::Vectors(&sample);
    let mb = graphmat::realize(&Shape::get(ShapeKind::MBeta), input)?;
    let mbeta = norm_of(&mb, opts)?;
    drop(mb);
    let ma = graphmat::realize(&Shape::get(ShapeKind::MAlpha), input)?;
    let malpha = norm_of(&ma, opts)?;
    drop(ma);
    let mut md = 0.0f64;
    {
        let (mut a, eta) = build_gram(&sample);
        gram_to_a(&mut a, &eta, d);
        let shift = 1.0 + 1.0 / d as f64;
        for i in 0..m {
            md = md.max((a[(i, i)] - shift).abs());
        }
    }
    let sv = graphmat::realize(&Shape::get(ShapeKind::SumVV), input)?;
    // The realized shape drops the diagonal; the comparison is for the full sum.
    let mut full = sv;
    for (i, col) in sample.vectors.column_iter().enumerate() {
        full[(i, i)] = col.norm_squared();
    }
    let sum_vv = norm_of(&full, opts)?;
    let goe = sample_goe(seed, goe_n, 1.0 / goe_n as f64)?;
    let goe = norm_of(&goe.entries, opts)?;
    Ok(NormTrial { seed, mbeta, malpha, md, sum_vv, goe })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct NormsConfig {
    pub d: usize,
    pub m: usize,
    pub goe_n: usize,
    pub trials: usize,
    pub seed: u64,
    /// Multiplicative slack on the leading-order norm predictions.
    pub slack: f64,
    pub solver: SolverOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct NormsReport {
    pub schema_version: u32,
    pub command: &'static str,
    pub config: NormsConfig,
    pub rows: Vec<CheckRow>,
    pub trials: Vec<NormTrial>,
}

fn norm_specs(c: &NormsConfig) -> Vec<RowSpec<NormTrial>> {
    let (d, m) = (c.d as f64, c.m as f64);
    let slack = c.slack;
    let beta_ref = 2.0 * m / (d * d);
    let alpha_ref = (3.0 * d * m.sqrt() + 2.0 * m) / (d * d);
    let md_ref = (d.ln() / d).sqrt();
    let svv_ref = (m / d) * (1.0 + (d / m).sqrt()).powi(2);
    vec![
        RowSpec {
            name: "mbeta",
            statistic: "||M_beta|| / (2m/d^2)",
            claim: "||M_beta|| <= (1 + o(1)) 2m/d^2",
            slack: format!("{slack}"),
            required: Some(0.95),
            value: Box::new(move |t: &NormTrial| t.mbeta / beta_ref),
            pass: Box::new(move |x| x <= slack),
        },
        RowSpec {
            name: "malpha",
            statistic: "||M_alpha|| / ((3d sqrt(m) + 2m)/d^2)",
            claim: "||M_alpha|| <= (1 + o(1)) (3d sqrt(m) + 2m)/d^2",
            slack: format!("{slack}"),
            required: Some(0.95),
            value: Box::new(move |t: &NormTrial| t.malpha / alpha_ref),
            pass: Box::new(move |x| x <= slack),
        },
        RowSpec {
            name: "md",
            statistic: "||M_D|| / sqrt(log d / d)",
            claim: "||M_D|| = O(sqrt(log d / d))",
            slack: "constant 5".into(),
            required: Some(0.95),
            value: Box::new(move |t: &NormTrial| t.md / md_ref),
            pass: Box::new(|x| x <= 5.0),
        },
        RowSpec {
            name: "sum-vv",
            statistic: "||sum v v^T|| / ((m/d)(1 + sqrt(d/m))^2)",
            claim: "||sum v v^T|| <= (1 + o(1)) (m/d)(1 + sqrt(d/m))^2",
            slack: "1.1".into(),
            required: Some(0.95),
            value: Box::new(move |t: &NormTrial| t.sum_vv / svv_ref),
            pass: Box::new(|x| x <= 1.1),
        },
        RowSpec {
            name: "goe",
            statistic: "||G||, variance 1/n",
            claim: "||G|| = 2 + o(1)",
            slack: "band [1.8, 2.2]".into(),
            required: Some(0.95),
            value: Box::new(|t: &NormTrial| t.goe),
            pass: Box::new(|x| (1.8..=2.2).contains(&x)),
        },
    ]
}

pub fn norms(config: &NormsConfig) -> Result<NormsReport> {
    if config.goe_n < 2 {
        return Err(Error::InvalidArgument("goe dimension must be >= 2".into()));
    }
    let trials: Vec<NormTrial> = (0..config.trials)
        .into_par_iter()
        .map(|t| norm_trial(derive_seed(config.seed, t as u64), config.d, config.m, config.goe_n, &config.solver))
        .collect::<Result<_>>()?;
    let rows = norm_specs(config)
        .iter()
        .map(|s| evaluate(s, config.d, config.m, config.trials, &trials))
        .collect();
    Ok(NormsReport { schema_version: SCHEMA_VERSION, command: "norms", config: config.clone(), rows, trials })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BlockValueReport {
    pub schema_version: u32,
    pub command: &'static str,
    pub breakdown: BlockValueBreakdown,
    pub verification: Option<Vec<BlockBoundReport>>,
}

impl BlockValueReport {
    pub fn passed(&self) -> bool {
        self.verification.iter().flatten().all(|r| r.passed())
    }
}

/// Block value, optionally followed by the Monte Carlo check with
/// `(trials, seed)`.
pub fn block_value_report(
    shape: &Shape,
    d: usize,
    m: usize,
    q: usize,
    dv: usize,
    verify: Option<(usize, u64)>,
) -> Result<BlockValueReport> {
    let breakdown = graphmat::block_value(shape, d, m, q, dv)?;
    let verification = match verify {
        Some((trials, seed)) => Some(graphmat::verify_block_bound_multi(shape, d, m, &[q], trials, seed, dv)?),
        None => None,
    };
    Ok(BlockValueReport { schema_version: SCHEMA_VERSION, command: "block-value", breakdown, verification })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TraceReport {
    pub schema_version: u32,
    pub command: &'static str,
    pub shape: &'static str,
    pub d: usize,
    pub m: usize,
    pub q: usize,
    pub seed: u64,
    pub dimension: usize,
    pub estimate: TraceEstimate,
    /// mean^{1/(2q)}, a rough norm estimate.
    pub norm_proxy: f64,
}

pub fn trace_report(shape: &Shape, d: usize, m: usize, q: usize, trials: usize, seed: u64) -> Result<TraceReport> {
    let estimate = graphmat::trace_moment_mc(shape, d, m, q, trials, seed)?;
    Ok(TraceReport {
        schema_version: SCHEMA_VERSION,
        command: "trace-mc",
        shape: shape.name(),
        d,
        m,
        q,
        seed,
        dimension: shape.dimension(d, m),
        norm_proxy: estimate.mean.max(0.0).powf(1.0 / (2 * q) as f64),
        estimate,
    })
}

pub fn write_json<T: Serialize>(out: &mut dyn Write, report: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, report)?;
    writeln!(out)?;
    Ok(())
}

/// Header line plus one row per record.
pub fn write_csv<T: Serialize>(out: &mut dyn Write, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// CSV row for one labeling of a block-value breakdown.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LabelingCsvRow {
    pub shape: &'static str,
    pub labels: String,
    pub first: String,
    pub last: String,
    pub vertex_factor: f64,
    pub pur_circle: u32,
    pub pur_square: u32,
    pub return_multiplier: f64,
    pub pur_factor: f64,
    pub edge_factor: f64,
    pub product: f64,
}

/// Labeling rows followed by `dominant` and `total` summary rows.
pub fn labeling_csv_rows(b: &BlockValueBreakdown) -> Vec<LabelingCsvRow> {
    let mut rows: Vec<LabelingCsvRow> = b
        .rows
        .iter()
        .map(|r| LabelingCsvRow {
            shape: b.shape,
            labels: r.labels.clone(),
            first: r.first.join(" "),
            last: r.last.join(" "),
            vertex_factor: r.vertex_factor,
            pur_circle: r.pur_circle,
            pur_square: r.pur_square,
            return_multiplier: r.return_multiplier,
            pur_factor: r.pur_factor,
            edge_factor: r.edge_factor,
            product: r.product,
        })
        .collect();
    for (name, v) in [("dominant", b.dominant), ("total", b.total)] {
        rows.push(LabelingCsvRow {
            shape: b.shape,
            labels: name.into(),
            first: String::new(),
            last: String::new(),
            vertex_factor: 0.0,
            pur_circle: 0,
            pur_square: 0,
            return_multiplier: 0.0,
            pur_factor: 0.0,
            edge_factor: 0.0,
            product: v,
        });
    }
    rows
}

/// Flat CSV row for a block-bound check.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BoundCsvRow {
    pub shape: &'static str,
    pub d: usize,
    pub m: usize,
    pub q: usize,
    pub trials: usize,
    pub block_value: f64,
    pub check: &'static str,
    pub measured: f64,
    pub bound: f64,
    pub pass: bool,
}

pub fn bound_csv_rows(reports: &[BlockBoundReport]) -> Vec<BoundCsvRow> {
    reports
        .iter()
        .flat_map(|r| {
            r.checks.iter().map(move |c| BoundCsvRow {
                shape: r.shape,
                d: r.d,
                m: r.m,
                q: r.q,
                trials: r.trials,
                block_value: r.block_value,
                check: c.check,
                measured: c.measured,
                bound: c.bound,
                pass: c.pass,
            })
        })
        .collect()
}
