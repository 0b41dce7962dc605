use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ellfit::harness::{self, Format, LemmaConfig, NormsConfig, SolverOptions, SweepConfig};
use ellfit::neumann;
use ellfit::{graphmat, Error, Shape, ShapeKind};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "ellfit", version, about = "Ellipsoid fitting experiments for Gaussian point clouds")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Base seed; trial t uses a seed derived from (seed, t).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file (default: stdout).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// csv or json.
    #[arg(long, global = true, default_value = "json")]
    format: String,
    /// Worker threads, 0 = one per core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Lanczos convergence tolerance.
    #[arg(long, global = true, default_value_t = ellfit::spectral::DEFAULT_TOL)]
    tol: f64,
    /// Record per-trial wall time (output is then not reproducible).
    #[arg(long, global = true)]
    timing: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one instance and print its trial record.
    Fit {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        m: usize,
    },
    /// Feasibility rates over a (d, m/d^2) grid.
    Sweep {
        /// Comma-separated dimensions.
        #[arg(long, value_delimiter = ',')]
        d_list: Option<Vec<usize>>,
        /// Comma-separated m/d^2 values such as 1/200 or 0.005; pass an empty
        /// string for no cells.
        #[arg(long)]
        ratios: Option<String>,
        #[arg(long, default_value_t = 50)]
        trials: usize,
    },
    /// Finite-d checks of the lemma statements.
    VerifyLemmas {
        /// Comma-separated DxM pairs.
        #[arg(long, default_value = "500x2500")]
        sizes: String,
        #[arg(long, default_value_t = 50)]
        trials: usize,
    },
    /// Step-labeling table and block value for a catalog shape.
    BlockValue {
        #[arg(long)]
        shape: String,
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 1)]
        m: usize,
        #[arg(long, default_value_t = 2)]
        q: usize,
        /// Vertex bound used by the pur factors.
        #[arg(long)]
        dv: Option<usize>,
        /// Also run the trace Monte Carlo and norm check.
        #[arg(long)]
        verify: bool,
        #[arg(long, default_value_t = 200)]
        trials: usize,
    },
    /// Monte Carlo estimate of E tr((M M^T)^q) for a catalog shape.
    TraceMc {
        #[arg(long)]
        shape: String,
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 1)]
        m: usize,
        #[arg(long, default_value_t = 2)]
        q: usize,
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
    /// Empirical norms against their leading-order predictions.
    Norms {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        m: usize,
        /// GOE dimension (default: d).
        #[arg(long)]
        goe_n: Option<usize>,
        #[arg(long, default_value_t = 30)]
        trials: usize,
        #[arg(long, default_value_t = 1.3)]
        slack: f64,
    },
    /// Estimate ||T|| and the Neumann truncation error at one instance.
    Neumann {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        k: Option<usize>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidArgument(_)
        | Error::UnknownShape { .. }
        | Error::DimensionTooSmall(_)
        | Error::SizeLimit(_) => 1,
        _ => 2,
    }
}

fn open_out<'a>(path: &Option<PathBuf>, stdout: &'a mut (dyn Write + Send)) -> Result<Box<dyn Write + Send + 'a>, Error> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(stdout),
    })
}

fn emit<T: Serialize, R: Serialize>(out: &mut dyn Write, format: Format, json: &T, csv_rows: &[R]) -> Result<(), Error> {
    match format {
        Format::Json => harness::write_json(out, json),
        Format::Csv => harness::write_csv(out, csv_rows),
    }
}

fn parse_sizes(s: &str) -> Result<Vec<(usize, usize)>, Error> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let bad = || Error::InvalidArgument(format!("size `{p}` is not of the form DxM"));
            let (d, m) = p.trim().split_once(['x', 'X']).ok_or_else(bad)?;
            Ok((d.parse().map_err(|_| bad())?, m.parse().map_err(|_| bad())?))
        })
        .collect()
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct TraceCsvRow {
    shape: &'static str,
    d: usize,
    m: usize,
    q: usize,
    seed: u64,
    dimension: usize,
    trials: usize,
    mean: f64,
    stderr: f64,
    norm_proxy: f64,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct NeumannReport {
    schema_version: u32,
    command: &'static str,
    seed: u64,
    d: usize,
    m: usize,
    k: usize,
    t_norm: f64,
    tail_bound: Option<f64>,
    truncation_error: Option<f64>,
}

fn run(cli: Cli, stdout: &mut (dyn Write + Send)) -> Result<(), Error> {
    let c = &cli.common;
    let format = Format::parse(&c.format)?;
    if !(c.tol > 0.0 && c.tol < 1.0) {
        return Err(Error::InvalidArgument(format!("--tol must lie in (0, 1), got {}", c.tol)));
    }
    let solver = SolverOptions { tol: c.tol, timing: c.timing, ..SolverOptions::default() };
    let seed = c.seed;
    let threads = c.threads;
    match cli.command {
        Command::Fit { d, m } => {
            let report = harness::with_threads(threads, || harness::fit(seed, d, m, &solver))??;
            if let Some(reason) = &report.record.degenerate {
                eprintln!("degenerate trial: {reason}");
            }
            let mut out = open_out(&c.out, stdout)?;
            emit(&mut *out, format, &report, std::slice::from_ref(&report.record))?;
            out.flush()?;
        }
        Command::Sweep { d_list, ratios, trials } => {
            let d_list = d_list.unwrap_or_else(|| harness::DEFAULT_D_LIST.to_vec());
            let ratios = match ratios {
                Some(s) => s
                    .split(',')
                    .filter(|r| !r.trim().is_empty())
                    .map(harness::parse_ratio)
                    .collect::<Result<Vec<_>, _>>()?,
                None => harness::DEFAULT_RATIOS.to_vec(),
            };
            let config = SweepConfig { d_list, ratios, trials, seed, solver };
            let mut out = open_out(&c.out, stdout)?;
            // CSV rows are flushed per cell so an interrupted run keeps what it finished.
            let report = match format {
                Format::Csv => {
                    let mut w = csv::Writer::from_writer(&mut out);
                    let report = harness::with_threads(threads, || {
                        harness::sweep_with(&config, |cell, _| {
                            w.serialize(cell)?;
                            w.flush()?;
                            Ok(())
                        })
                    })??;
                    if report.cells.is_empty() {
                        w.write_record(["d", "ratio", "m", "requested", "completed", "degenerate", "feasible", "feasibilityRate", "meanNormR", "normRHalfWidth", "maxResidual"])?;
                    }
                    w.flush()?;
                    report
                }
                Format::Json => {
                    let report = harness::with_threads(threads, || harness::sweep(&config))??;
                    harness::write_json(&mut *out, &report)?;
                    report
                }
            };
            out.flush()?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
        }
        Command::VerifyLemmas { sizes, trials } => {
            let config = LemmaConfig { sizes: parse_sizes(&sizes)?, trials, seed, solver };
            let report = harness::with_threads(threads, || harness::verify_lemmas(&config))??;
            let mut out = open_out(&c.out, stdout)?;
            emit(&mut *out, format, &report, &report.rows)?;
            out.flush()?;
            for r in &report.rows {
                eprintln!("{:<8} {} d={} m={} pass rate {:.3}", r.status.to_uppercase(), r.name, r.d, r.m, r.pass_rate);
            }
        }
        Command::BlockValue { shape, d, m, q, dv, verify, trials } => {
            let shape = Shape::get(ShapeKind::parse(&shape)?);
            let dv = dv.unwrap_or_else(graphmat::default_dv);
            let verify = verify.then_some((trials, seed));
            let report = harness::with_threads(threads, || harness::block_value_report(&shape, d, m, q, dv, verify))??;
            let mut out = open_out(&c.out, stdout)?;
            emit(&mut *out, format, &report, &harness::labeling_csv_rows(&report.breakdown))?;
            out.flush()?;
            eprintln!("total = {}  (F/R-only labelings: {})", report.breakdown.total, report.breakdown.dominant);
            for r in harness::bound_csv_rows(report.verification.as_deref().unwrap_or(&[])) {
                let tag = if r.pass { "PASS" } else { "FAIL" };
                eprintln!("{tag} {} q={} {}: measured {:.6e} <= bound {:.6e}", r.shape, r.q, r.check, r.measured, r.bound);
            }
        }
        Command::TraceMc { shape, d, m, q, trials } => {
            let shape = Shape::get(ShapeKind::parse(&shape)?);
            let report = harness::with_threads(threads, || harness::trace_report(&shape, d, m, q, trials, seed))??;
            let row = TraceCsvRow {
                shape: report.shape,
                d,
                m,
                q,
                seed,
                dimension: report.dimension,
                trials,
                mean: report.estimate.mean,
                stderr: report.estimate.stderr,
                norm_proxy: report.norm_proxy,
            };
            let mut out = open_out(&c.out, stdout)?;
            emit(&mut *out, format, &report, &[row])?;
            out.flush()?;
        }
        Command::Norms { d, m, goe_n, trials, slack } => {
            let config = NormsConfig { d, m, goe_n: goe_n.unwrap_or(d), trials, seed, slack, solver };
            let report = harness::with_threads(threads, || harness::norms(&config))??;
            let mut out = open_out(&c.out, stdout)?;
            emit(&mut *out, format, &report, &report.rows)?;
            out.flush()?;
        }
        Command::Neumann { d, m, k } => {
            let sample = ellfit::sample_vectors(seed, d, m)?;
            let dec = ellfit::decompose(&sample)?;
            let k = k.unwrap_or_else(|| neumann::default_k(d));
            let t = neumann::t_norm(&dec)?.norm_estimate;
            let (tail_bound, truncation_error) = if t < 1.0 {
                let n = neumann::Neumann::new(&dec)?;
                (Some(n.tail_bound(k)), Some(neumann::truncation_error(&dec, k)?))
            } else {
                (None, None)
            };
            let report = NeumannReport { schema_version: harness::SCHEMA_VERSION, command: "neumann", seed, d, m, k, t_norm: t, tail_bound, truncation_error };
            let mut out = open_out(&c.out, stdout)?;
            emit(&mut *out, format, &report, std::slice::from_ref(&report))?;
            out.flush()?;
        }
    }
    Ok(())
}

/// Parses `args`, runs the command with report output going to `stdout`, and
/// returns the process exit code.
fn execute<I, T>(args: I, stdout: &mut (dyn Write + Send)) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error [{}]: {e}", e.code());
            exit_code(&e)
        }
    }
}

fn main() -> ExitCode {
    let mut stdout = BufWriter::new(io::stdout());
    let code = execute(std::env::args_os(), &mut stdout);
    if stdout.flush().is_err() && code == 0 {
        return ExitCode::from(2);
    }
    ExitCode::from(code)
}
