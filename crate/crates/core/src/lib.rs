//! Energy-distance and MMD two-sample tests.
//!
//! Three interchangeable permutation back-ends (standard, pre-computed pooled
//! matrix, and block-swap reconstruction from the original matrices) produce
//! the same null sample for the same permutation stream. Permutation-free
//! cross tests, a Gaussian data generator, CSV I/O and an experiment harness
//! complete the toolkit.

pub mod bench;
pub mod cli;
pub mod cross;
pub mod data;
pub mod error;
pub mod matrix;
pub mod perm;
pub mod statistic;

pub use error::{Error, Result};
pub use matrix::{DataMatrix, PairwiseKind, PairwiseMatrix};
pub use statistic::StatisticKind;

/// Runs `f` on a rayon pool capped at `threads` workers, or on the global
/// pool when `threads` is `None`.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}
