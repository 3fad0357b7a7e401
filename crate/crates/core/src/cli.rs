//! Command-line front end: `test`, `simulate` and `bench`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::bench::{
    format_summary, run_experiment_with, summarize, write_records_csv, write_records_jsonl,
    ExperimentConfig, RunOptions,
};
use crate::cross::{cross_ed_test, cross_mmd_test};
use crate::data::{load_csv, sample_gaussian, save_csv, MeanShiftSpec};
use crate::error::{Error, Result};
use crate::matrix::{check_bandwidth, median_heuristic_bandwidth, DataMatrix};
use crate::perm::{perm_test, Backend, PermutationStream};
use crate::statistic::StatisticKind;
use crate::with_threads;

pub const DEFAULT_PERMUTATIONS: usize = 200;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_SHAPE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "permstat", version, about = "Energy-distance and MMD two-sample tests")]
pub struct Cli {
    /// Maximum number of worker threads; results do not depend on it.
    #[arg(long, global = true, env = "PERMSTAT_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a two-sample test on two CSV files (rows are samples).
    Test(TestArgs),
    /// Write two Gaussian samples with a mean shift to CSV files.
    Simulate(SimulateArgs),
    /// Run a timing or power experiment described by a JSON or TOML config.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StatisticArg {
    Ed,
    Mmd,
}

impl From<StatisticArg> for StatisticKind {
    fn from(s: StatisticArg) -> Self {
        match s {
            StatisticArg::Ed => StatisticKind::EnergyDistance,
            StatisticArg::Mmd => StatisticKind::MmdBiasedSquared,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    Standard,
    Precomputed,
    Efficient,
    Cross,
}

/// `median` or a positive bandwidth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandwidthArg {
    Median,
    Fixed(f64),
}

impl FromStr for BandwidthArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s.eq_ignore_ascii_case("median") {
            return Ok(BandwidthArg::Median);
        }
        let v: f64 = s
            .parse()
            .map_err(|_| format!("expected `median` or a number, got {s:?}"))?;
        check_bandwidth(v).map_err(|e| e.to_string())?;
        Ok(BandwidthArg::Fixed(v))
    }
}

#[derive(Debug, Args)]
pub struct TestArgs {
    /// CSV file with the first sample.
    pub x: PathBuf,
    /// CSV file with the second sample.
    pub y: PathBuf,
    #[arg(long, value_enum, default_value = "ed")]
    pub statistic: StatisticArg,
    #[arg(long, value_enum, default_value = "efficient")]
    pub backend: BackendArg,
    /// Number of permutations [default: 200]; ignored by the cross back-end.
    #[arg(long = "permutations", short = 'b')]
    pub permutations: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Gaussian kernel bandwidth for MMD: `median` or a positive number.
    #[arg(long, default_value = "median")]
    pub bandwidth: BandwidthArg,
    /// Write the permutation null sample to this CSV file.
    #[arg(long)]
    pub null_out: Option<PathBuf>,
    /// Print the report as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Rows in each sample.
    #[arg(long)]
    pub n: usize,
    /// Number of columns.
    #[arg(long)]
    pub p: usize,
    /// Number of shifted coordinates in the second sample.
    #[arg(long, default_value_t = 0)]
    pub j: usize,
    /// Shift applied to each of the first `j` coordinates.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output paths for the first and second sample.
    #[arg(long, num_args = 2, value_names = ["X", "Y"], required = true)]
    pub out: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Experiment config (JSON or TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Records CSV to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write records as JSON lines.
    #[arg(long)]
    pub jsonl: Option<PathBuf>,
    /// Run replications sequentially so timings do not overlap.
    #[arg(long)]
    pub timing_isolated: bool,
}

fn exit_code(e: &Error) -> i32 {
    if e.is_shape_error() {
        EXIT_SHAPE
    } else {
        EXIT_USAGE
    }
}

/// Runs a parsed command, writing reports to `out` and diagnostics to `err`.
/// Returns the process exit code.
pub fn run(cli: Cli, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> i32 {
    let threads = cli.threads;
    let result = with_threads(threads, || match &cli.command {
        Command::Test(a) => cmd_test(a, out, err),
        Command::Simulate(a) => cmd_simulate(a, out),
        Command::Bench(a) => cmd_bench(a, out),
    });
    match result.and_then(|r| r) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn load_pair(x: &Path, y: &Path) -> Result<(DataMatrix, DataMatrix)> {
    let xd = load_csv(x)?.matrix;
    let yd = load_csv(y)?.matrix;
    if xd.cols() != yd.cols() {
        return Err(Error::ColumnMismatch {
            x: x.to_path_buf(),
            y: y.to_path_buf(),
            left: xd.cols(),
            right: yd.cols(),
        });
    }
    Ok((xd, yd))
}

fn write_out(out: &mut (dyn Write + Send), text: &str) -> Result<()> {
    out.write_all(text.as_bytes()).map_err(|source| Error::Io {
        path: PathBuf::from("<stdout>"),
        source,
    })
}

fn cmd_test(a: &TestArgs, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> Result<()> {
    let (x, y) = load_pair(&a.x, &a.y)?;
    let kind: StatisticKind = a.statistic.into();
    let bandwidth = match (kind, a.bandwidth) {
        (StatisticKind::MmdBiasedSquared, BandwidthArg::Fixed(v)) => Some(v),
        _ => None,
    };

    let backend = match a.backend {
        BackendArg::Standard => Backend::Standard,
        BackendArg::Precomputed => Backend::Precomputed,
        BackendArg::Efficient => Backend::Efficient,
        BackendArg::Cross => return cmd_cross(a, kind, bandwidth, &x, &y, out, err),
    };

    let b = a.permutations.unwrap_or(DEFAULT_PERMUTATIONS);
    let stream = PermutationStream::new(a.seed);
    let r = perm_test(backend, &x, &y, b, &stream, kind, bandwidth)?;

    if let Some(path) = &a.null_out {
        write_null_sample(path, &r.null_sample)?;
    }

    let text = if a.json {
        let v = json!({
            "statistic": kind.short_name(),
            "backend": backend.name(),
            "observed": r.observed,
            "p_value": r.p_value,
            "b": r.b,
            "seed": a.seed,
            "bandwidth": r.bandwidth,
            "n_x": x.rows(),
            "n_y": y.rows(),
            "p": x.cols(),
            "elapsed_s": r.elapsed,
        });
        format!("{v}\n")
    } else {
        let mut s = String::new();
        s.push_str(&format!("statistic: {}\n", kind.short_name()));
        s.push_str(&format!("backend: {}\n", backend.name()));
        s.push_str(&format!("n_x: {}\nn_y: {}\np: {}\n", x.rows(), y.rows(), x.cols()));
        if let Some(bw) = r.bandwidth {
            s.push_str(&format!("bandwidth: {bw:?}\n"));
        }
        s.push_str(&format!("observed: {:?}\n", r.observed));
        s.push_str(&format!("p_value: {:?}\n", r.p_value));
        s.push_str(&format!("b: {}\nseed: {}\n", r.b, a.seed));
        s.push_str(&format!("elapsed_s: {:.6}\n", r.elapsed));
        s
    };
    write_out(out, &text)
}

#[allow(clippy::too_many_arguments)]
fn cmd_cross(
    a: &TestArgs,
    kind: StatisticKind,
    bandwidth: Option<f64>,
    x: &DataMatrix,
    y: &DataMatrix,
    out: &mut (dyn Write + Send),
    err: &mut (dyn Write + Send),
) -> Result<()> {
    if a.permutations.is_some() {
        let _ = writeln!(err, "warning: --permutations is ignored by the cross back-end");
    }
    if a.null_out.is_some() {
        let _ = writeln!(err, "warning: --null-out is ignored by the cross back-end");
    }
    let started = Instant::now();
    let (r, bw) = match kind {
        StatisticKind::EnergyDistance => (cross_ed_test(x, y)?, None),
        StatisticKind::MmdBiasedSquared => {
            let bw = match bandwidth {
                Some(v) => v,
                None => median_heuristic_bandwidth(x, y)?,
            };
            (cross_mmd_test(x, y, bw)?, Some(bw))
        }
    };
    let elapsed = started.elapsed().as_secs_f64();
    let name = match kind {
        StatisticKind::EnergyDistance => "cross_ed",
        StatisticKind::MmdBiasedSquared => "cross_mmd",
    };

    let text = if a.json {
        let v = json!({
            "statistic": kind.short_name(),
            "backend": name,
            "observed": r.u_hat,
            "sigma_hat": r.sigma_hat,
            "z": r.z,
            "p_value": r.p_value,
            "bandwidth": bw,
            "n_x": x.rows(),
            "n_y": y.rows(),
            "p": x.cols(),
            "elapsed_s": elapsed,
        });
        format!("{v}\n")
    } else {
        let mut s = String::new();
        s.push_str(&format!("statistic: {}\n", kind.short_name()));
        s.push_str(&format!("backend: {name}\n"));
        s.push_str(&format!("n_x: {}\nn_y: {}\np: {}\n", x.rows(), y.rows(), x.cols()));
        if let Some(bw) = bw {
            s.push_str(&format!("bandwidth: {bw:?}\n"));
        }
        s.push_str(&format!("observed: {:?}\n", r.u_hat));
        s.push_str(&format!("sigma_hat: {:?}\n", r.sigma_hat));
        s.push_str(&format!("z: {:?}\n", r.z));
        s.push_str(&format!("p_value: {:?}\n", r.p_value));
        s.push_str(&format!("elapsed_s: {elapsed:.6}\n"));
        s
    };
    write_out(out, &text)
}

fn write_null_sample(path: &Path, null: &[f64]) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    writeln!(w, "null_statistic").map_err(io_err)?;
    for v in null {
        writeln!(w, "{v:?}").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

fn cmd_simulate(a: &SimulateArgs, out: &mut (dyn Write + Send)) -> Result<()> {
    let shift = MeanShiftSpec::new(a.p, a.j, a.epsilon)?;
    // x and y get separate seeds so equal-sized samples are not identical
    let x = sample_gaussian(a.n, a.p, None, a.seed)?;
    let y = sample_gaussian(a.n, a.p, Some(&shift), a.seed.wrapping_add(0x9E37_79B9_7F4A_7C15))?;
    save_csv(&x, &a.out[0])?;
    save_csv(&y, &a.out[1])?;
    write_out(
        out,
        &format!(
            "x: {} ({}x{}, mean 0)\ny: {} ({}x{}, mean {} in coordinates 1..={}, 0 elsewhere)\n",
            a.out[0].display(),
            a.n,
            a.p,
            a.out[1].display(),
            a.n,
            a.p,
            a.epsilon,
            a.j
        ),
    )
}

fn cmd_bench(a: &BenchArgs, out: &mut (dyn Write + Send)) -> Result<()> {
    let config = ExperimentConfig::load(&a.config).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", a.config.display())),
        other => other,
    })?;
    let records = run_experiment_with(
        &config,
        RunOptions {
            timing_isolated: a.timing_isolated,
        },
    )?;

    let create = |path: &Path| {
        File::create(path).map(BufWriter::new).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    };
    write_records_csv(&records, create(&a.out)?)?;
    if let Some(path) = &a.jsonl {
        write_records_jsonl(&records, create(path)?)?;
    }
    let rows = summarize(&records, config.alpha)?;
    write_out(out, &format_summary(&rows))
}
