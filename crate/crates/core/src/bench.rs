//! Declarative timing and power experiments.
//!
//! A config names a grid of `(n_x, n_y, p, j, epsilon)` points, a set of
//! back-ends and a replication count. Every replication draws fresh data
//! (`x ~ N(0, I)`, `y ~ N(mu, I)`), runs each back-end on it and records the
//! wall time and p-value.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cross::{cross_ed_test, cross_mmd_test};
use crate::data::{sample_gaussian, MeanShiftSpec};
use crate::error::{Error, Result};
use crate::matrix::median_heuristic_bandwidth;
use crate::perm::{perm_test, Backend, PermutationStream};
use crate::statistic::StatisticKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExperimentKind {
    #[serde(alias = "timing_vs_n")]
    TimingVsN,
    #[serde(alias = "timing_vs_p")]
    TimingVsP,
    #[serde(alias = "null_calibration")]
    NullCalibration,
    #[serde(alias = "power_curve")]
    PowerCurve,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::TimingVsN => "TimingVsN",
            ExperimentKind::TimingVsP => "TimingVsP",
            ExperimentKind::NullCalibration => "NullCalibration",
            ExperimentKind::PowerCurve => "PowerCurve",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchBackend {
    #[serde(alias = "Standard")]
    Standard,
    #[serde(alias = "Precomputed")]
    Precomputed,
    #[serde(alias = "Efficient")]
    Efficient,
    #[serde(alias = "CrossED", alias = "cross-ed")]
    CrossEd,
    #[serde(alias = "CrossMMD", alias = "cross-mmd")]
    CrossMmd,
}

impl BenchBackend {
    pub fn name(self) -> &'static str {
        match self {
            BenchBackend::Standard => "standard",
            BenchBackend::Precomputed => "precomputed",
            BenchBackend::Efficient => "efficient",
            BenchBackend::CrossEd => "cross_ed",
            BenchBackend::CrossMmd => "cross_mmd",
        }
    }

    fn permutation_backend(self) -> Option<Backend> {
        match self {
            BenchBackend::Standard => Some(Backend::Standard),
            BenchBackend::Precomputed => Some(Backend::Precomputed),
            BenchBackend::Efficient => Some(Backend::Efficient),
            BenchBackend::CrossEd | BenchBackend::CrossMmd => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridPoint {
    pub n_x: usize,
    pub n_y: usize,
    pub p: usize,
    #[serde(default)]
    pub j: usize,
    #[serde(default)]
    pub epsilon: f64,
}

fn default_statistic() -> StatisticKind {
    StatisticKind::EnergyDistance
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub grid: Vec<GridPoint>,
    /// Permutations per permutation test.
    pub b: usize,
    pub replications: usize,
    pub backends: Vec<BenchBackend>,
    pub seed: u64,
    pub alpha: f64,
    /// Statistic for the permutation back-ends. `cross_ed` needs `ed` and
    /// `cross_mmd` needs `mmd`.
    #[serde(default = "default_statistic")]
    pub statistic: StatisticKind,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.grid.is_empty() {
            return bad("grid: must contain at least one point".into());
        }
        if self.replications == 0 {
            return bad("replications: must be at least 1".into());
        }
        if self.backends.is_empty() {
            return bad("backends: must name at least one back-end".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha: must lie in (0, 1), got {}", self.alpha));
        }
        let uses_perm = self.backends.iter().any(|b| b.permutation_backend().is_some());
        if uses_perm && self.b == 0 {
            return bad("b: must be at least 1 for permutation back-ends".into());
        }
        for backend in &self.backends {
            let ok = match backend {
                BenchBackend::CrossEd => self.statistic == StatisticKind::EnergyDistance,
                BenchBackend::CrossMmd => self.statistic == StatisticKind::MmdBiasedSquared,
                _ => true,
            };
            if !ok {
                return bad(format!(
                    "backends: {} is incompatible with statistic {}",
                    backend.name(),
                    self.statistic.short_name()
                ));
            }
        }
        for (i, g) in self.grid.iter().enumerate() {
            if g.n_x == 0 || g.n_y == 0 || g.p == 0 {
                return bad(format!("grid[{i}]: n_x, n_y and p must be positive"));
            }
            if g.j > g.p {
                return bad(format!("grid[{i}].j: {} exceeds p = {}", g.j, g.p));
            }
            if !g.epsilon.is_finite() {
                return bad(format!("grid[{i}].epsilon: must be finite"));
            }
            if self.kind == ExperimentKind::NullCalibration && g.j > 0 && g.epsilon != 0.0 {
                return bad(format!(
                    "grid[{i}]: null calibration needs epsilon = 0 or j = 0"
                ));
            }
            let cross = self
                .backends
                .iter()
                .any(|b| matches!(b, BenchBackend::CrossEd | BenchBackend::CrossMmd));
            if cross && (g.n_x < 4 || g.n_y < 4) {
                return bad(format!("grid[{i}]: cross tests need n_x, n_y >= 4"));
            }
        }
        Ok(())
    }

    /// Parses JSON, or TOML when the text is not JSON.
    pub fn parse(text: &str) -> Result<Self> {
        let trimmed = text.trim_start();
        let cfg: Self = if trimmed.starts_with('{') {
            let de = &mut serde_json::Deserializer::from_str(text);
            serde_path_to_error::deserialize(de).map_err(|e| {
                Error::Config(format!("{}: {}", e.path(), e.inner()))
            })?
        } else {
            let de = toml::Deserializer::parse(text).map_err(|e| Error::Config(e.to_string()))?;
            serde_path_to_error::deserialize(de).map_err(|e| {
                Error::Config(format!("{}: {}", e.path(), e.inner()))
            })?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentRecord {
    pub kind: ExperimentKind,
    pub point: GridPoint,
    pub b: usize,
    pub backend: BenchBackend,
    pub rep: usize,
    pub elapsed_s: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Run replications one at a time so timings do not overlap.
    pub timing_isolated: bool,
}

/// SplitMix64 finalizer, used to derive independent seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for `(point, replication, role)` derived from the master seed.
pub fn derive_seed(master: u64, point: usize, rep: usize, role: u64) -> u64 {
    mix(mix(mix(mix(master) ^ point as u64) ^ rep as u64) ^ role)
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ExperimentRecord>> {
    run_experiment_with(config, RunOptions::default())
}

pub fn run_experiment_with(
    config: &ExperimentConfig,
    options: RunOptions,
) -> Result<Vec<ExperimentRecord>> {
    config.validate()?;
    let jobs: Vec<(usize, usize)> = (0..config.grid.len())
        .flat_map(|pi| (0..config.replications).map(move |r| (pi, r)))
        .collect();
    let run = |&(pi, rep): &(usize, usize)| run_replication(config, pi, rep);
    let per_job: Vec<Vec<ExperimentRecord>> = if options.timing_isolated {
        jobs.iter().map(run).collect::<Result<_>>()?
    } else {
        jobs.par_iter().map(run).collect::<Result<_>>()?
    };
    Ok(per_job.into_iter().flatten().collect())
}

fn run_replication(
    config: &ExperimentConfig,
    point_index: usize,
    rep: usize,
) -> Result<Vec<ExperimentRecord>> {
    let g = config.grid[point_index];
    let shift = MeanShiftSpec::new(g.p, g.j, g.epsilon)?;
    let x = sample_gaussian(g.n_x, g.p, None, derive_seed(config.seed, point_index, rep, 1))?;
    let y = sample_gaussian(g.n_y, g.p, Some(&shift), derive_seed(config.seed, point_index, rep, 2))?;
    let stream = PermutationStream::new(derive_seed(config.seed, point_index, rep, 3));

    config
        .backends
        .iter()
        .map(|&backend| {
            let started = Instant::now();
            let p_value = match backend.permutation_backend() {
                Some(pb) => perm_test(pb, &x, &y, config.b, &stream, config.statistic, None)?.p_value,
                None if backend == BenchBackend::CrossEd => cross_ed_test(&x, &y)?.p_value,
                None => {
                    let bw = median_heuristic_bandwidth(&x, &y)?;
                    cross_mmd_test(&x, &y, bw)?.p_value
                }
            };
            Ok(ExperimentRecord {
                kind: config.kind,
                point: g,
                b: config.b,
                backend,
                rep,
                elapsed_s: started.elapsed().as_secs_f64(),
                p_value,
            })
        })
        .collect()
}

pub const CSV_COLUMNS: [&str; 11] = [
    "kind", "n_x", "n_y", "p", "j", "epsilon", "b", "backend", "rep", "elapsed_s", "p_value",
];

fn record_fields(r: &ExperimentRecord) -> [String; 11] {
    [
        r.kind.name().to_string(),
        r.point.n_x.to_string(),
        r.point.n_y.to_string(),
        r.point.p.to_string(),
        r.point.j.to_string(),
        format!("{:?}", r.point.epsilon),
        r.b.to_string(),
        r.backend.name().to_string(),
        r.rep.to_string(),
        format!("{:?}", r.elapsed_s),
        format!("{:?}", r.p_value),
    ]
}

pub fn write_records_csv<W: Write>(records: &[ExperimentRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::Config(format!("writing records: {e}"));
    w.write_record(CSV_COLUMNS).map_err(err)?;
    for r in records {
        w.write_record(record_fields(r)).map_err(err)?;
    }
    w.flush().map_err(|e| Error::Config(format!("writing records: {e}")))
}

pub fn write_records_jsonl<W: Write>(records: &[ExperimentRecord], mut out: W) -> Result<()> {
    for r in records {
        let line = serde_json::json!({
            "kind": r.kind.name(),
            "n_x": r.point.n_x,
            "n_y": r.point.n_y,
            "p": r.point.p,
            "j": r.point.j,
            "epsilon": r.point.epsilon,
            "b": r.b,
            "backend": r.backend.name(),
            "rep": r.rep,
            "elapsed_s": r.elapsed_s,
            "p_value": r.p_value,
        });
        writeln!(out, "{line}").map_err(|e| Error::Config(format!("writing records: {e}")))?;
    }
    Ok(())
}

/// Per `(grid point, back-end)` aggregate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub point: GridPoint,
    pub backend: BenchBackend,
    pub count: usize,
    pub mean_elapsed: f64,
    pub median_elapsed: f64,
    pub min_elapsed: f64,
    pub max_elapsed: f64,
    /// Fraction of p-values at or below alpha.
    pub power: f64,
    /// Bootstrap standard deviation of `power`.
    pub power_sd: f64,
}

pub const BOOTSTRAP_RESAMPLES: usize = 200;
const BOOTSTRAP_SEED: u64 = 0x5EED_B007;

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Groups records by grid point and back-end (first-seen order) and reports
/// timing statistics, empirical power and its bootstrap spread.
pub fn summarize(records: &[ExperimentRecord], alpha: f64) -> Result<Vec<SummaryRow>> {
    if records.is_empty() {
        return Err(Error::Empty("no records to summarize"));
    }
    let mut groups: Vec<((GridPoint, BenchBackend), Vec<&ExperimentRecord>)> = Vec::new();
    for r in records {
        match groups
            .iter_mut()
            .find(|((p, b), _)| *p == r.point && *b == r.backend)
        {
            Some((_, v)) => v.push(r),
            None => groups.push(((r.point, r.backend), vec![r])),
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(BOOTSTRAP_SEED);
    Ok(groups
        .into_iter()
        .map(|((point, backend), rs)| {
            let n = rs.len();
            let mut times: Vec<f64> = rs.iter().map(|r| r.elapsed_s).collect();
            times.sort_by(f64::total_cmp);
            let rejects: Vec<bool> = rs.iter().map(|r| r.p_value <= alpha).collect();
            let power = rejects.iter().filter(|&&r| r).count() as f64 / n as f64;

            let boot: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
                .map(|_| {
                    let hits = (0..n).filter(|_| rejects[rng.random_range(0..n)]).count();
                    hits as f64 / n as f64
                })
                .collect();
            let bm = boot.iter().sum::<f64>() / boot.len() as f64;
            let var = boot.iter().map(|v| (v - bm) * (v - bm)).sum::<f64>() / (boot.len() - 1) as f64;

            SummaryRow {
                point,
                backend,
                count: n,
                mean_elapsed: times.iter().sum::<f64>() / n as f64,
                median_elapsed: median(&times),
                min_elapsed: times[0],
                max_elapsed: times[n - 1],
                power,
                power_sd: var.sqrt(),
            }
        })
        .collect())
}

/// Plain-text table of summary rows.
pub fn format_summary(rows: &[SummaryRow]) -> String {
    let mut s = format!(
        "{:>5} {:>5} {:>6} {:>4} {:>8} {:<12} {:>5} {:>11} {:>11} {:>7} {:>7}\n",
        "n_x", "n_y", "p", "j", "epsilon", "backend", "reps", "mean_s", "median_s", "power", "sd"
    );
    for r in rows {
        s.push_str(&format!(
            "{:>5} {:>5} {:>6} {:>4} {:>8} {:<12} {:>5} {:>11.6} {:>11.6} {:>7.4} {:>7.4}\n",
            r.point.n_x,
            r.point.n_y,
            r.point.p,
            r.point.j,
            r.point.epsilon,
            r.backend.name(),
            r.count,
            r.mean_elapsed,
            r.median_elapsed,
            r.power,
            r.power_sd
        ));
    }
    s
}
