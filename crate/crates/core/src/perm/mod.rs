//! Permutation two-sample tests.
//!
//! Three back-ends produce the same permutation null distribution from the same
//! [`PermutationSource`]:
//!
//! * [`standard_perm_test`] reshuffles the raw rows and recomputes all three
//!   pairwise matrices at every iteration.
//! * [`precomputed_perm_test`] computes one matrix over the pooled sample and
//!   extracts sub-matrices by permuted index.
//! * [`efficient_perm_test`] computes only `D_xx`, `D_yy` and `D_xy` and
//!   rebuilds each permuted matrix by swapping blocks between them, reading
//!   `D_yx` blocks as transposed `D_xy` blocks.
//!
//! All back-ends evaluate statistics through the same summation routine, so
//! standard and pre-computed results are bit-identical and the efficient
//! back-end differs only by the order of summation.

mod efficient;
mod indexes;
mod precomputed;
mod standard;
mod stream;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{
    euclidean_distance_matrix, gaussian_kernel_matrix, median_heuristic_bandwidth, DataMatrix,
    PairwiseMatrix,
};
use crate::statistic::StatisticKind;

pub use efficient::{efficient_perm_test, efficient_perm_test_with, BaseMatrices, PermutedMatrices, YxStorage};
pub use indexes::{permutation_indexes, split_pooled, PermutationIndexSet};
pub use precomputed::precomputed_perm_test;
pub use standard::{standard_perm_test, standard_permuted_matrices};
pub use stream::{sample_without_replacement, PermutationSource, PermutationStream, ScriptedDraws};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Standard,
    Precomputed,
    Efficient,
}

impl Backend {
    pub fn name(self) -> &'static str {
        match self {
            Backend::Standard => "standard",
            Backend::Precomputed => "precomputed",
            Backend::Efficient => "efficient",
        }
    }
}

/// Outcome of a permutation test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestResult {
    pub statistic: StatisticKind,
    pub backend: Backend,
    /// Statistic on the original grouping.
    pub observed: f64,
    /// One statistic per permutation, in iteration order.
    pub null_sample: Vec<f64>,
    pub p_value: f64,
    pub b: usize,
    /// Gaussian kernel bandwidth actually used (MMD only).
    pub bandwidth: Option<f64>,
    /// Wall time of the whole test call in seconds.
    pub elapsed: f64,
    /// How many times a distance or kernel matrix was computed from raw data.
    pub matrix_computations: usize,
}

/// `(1 + #{null >= observed}) / (1 + b)`.
pub fn perm_pvalue(null_sample: &[f64], observed: f64) -> Result<f64> {
    if null_sample.is_empty() {
        return Err(Error::Empty("permutation null sample"));
    }
    let exceed = null_sample.iter().filter(|&&s| s >= observed).count();
    Ok((1 + exceed) as f64 / (1 + null_sample.len()) as f64)
}

/// Computes distance or kernel matrices for one statistic and counts the calls.
pub(crate) struct MatrixKernel {
    kind: StatisticKind,
    bandwidth: Option<f64>,
    calls: AtomicUsize,
}

impl MatrixKernel {
    /// Resolves the bandwidth for MMD (median heuristic on the pooled sample
    /// when none is given); ED ignores it.
    pub(crate) fn new(
        kind: StatisticKind,
        x: &DataMatrix,
        y: &DataMatrix,
        bandwidth: Option<f64>,
    ) -> Result<Self> {
        check_inputs(x, y)?;
        let bandwidth = match kind {
            StatisticKind::EnergyDistance => None,
            StatisticKind::MmdBiasedSquared => match bandwidth {
                Some(bw) => {
                    crate::matrix::check_bandwidth(bw)?;
                    Some(bw)
                }
                None => Some(median_heuristic_bandwidth(x, y)?),
            },
        };
        Ok(Self {
            kind,
            bandwidth,
            calls: AtomicUsize::new(0),
        })
    }

    pub(crate) fn compute(&self, a: &DataMatrix, b: &DataMatrix) -> Result<PairwiseMatrix> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        match (self.kind, self.bandwidth) {
            (StatisticKind::MmdBiasedSquared, Some(bw)) => gaussian_kernel_matrix(a, b, bw),
            _ => euclidean_distance_matrix(a, b),
        }
    }

    pub(crate) fn kind(&self) -> StatisticKind {
        self.kind
    }

    pub(crate) fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }
}

fn check_inputs(x: &DataMatrix, y: &DataMatrix) -> Result<()> {
    if x.cols() != y.cols() {
        return Err(Error::DimensionMismatch {
            what: "x and y column counts differ",
            left: x.cols(),
            right: y.cols(),
        });
    }
    Ok(())
}

/// Evaluates `b` permutation iterations, possibly in parallel. Each worker gets
/// its own scratch state from `init`; results are returned in iteration order.
pub(crate) fn null_distribution<T, I, F>(b: usize, init: I, f: F) -> Result<Vec<f64>>
where
    I: Fn() -> T + Sync + Send,
    F: Fn(&mut T, usize) -> Result<f64> + Sync + Send,
{
    (0..b).into_par_iter().map_init(init, f).collect()
}

pub(crate) fn finish(
    kernel: &MatrixKernel,
    backend: Backend,
    observed: f64,
    null_sample: Vec<f64>,
    started: Instant,
) -> Result<TestResult> {
    let p_value = perm_pvalue(&null_sample, observed)?;
    Ok(TestResult {
        statistic: kernel.kind,
        backend,
        observed,
        b: null_sample.len(),
        null_sample,
        p_value,
        bandwidth: kernel.bandwidth,
        elapsed: started.elapsed().as_secs_f64(),
        matrix_computations: kernel.calls(),
    })
}

/// Runs the chosen back-end.
pub fn perm_test<S: PermutationSource>(
    backend: Backend,
    x: &DataMatrix,
    y: &DataMatrix,
    b: usize,
    source: &S,
    kind: StatisticKind,
    bandwidth: Option<f64>,
) -> Result<TestResult> {
    match backend {
        Backend::Standard => standard_perm_test(x, y, b, source, kind, bandwidth),
        Backend::Precomputed => precomputed_perm_test(x, y, b, source, kind, bandwidth),
        Backend::Efficient => efficient_perm_test(x, y, b, source, kind, bandwidth),
    }
}
