use std::time::Instant;

use crate::error::{Error, Result};
use crate::matrix::DataMatrix;
use crate::statistic::StatisticKind;

use super::{finish, null_distribution, split_pooled, Backend, MatrixKernel, PermutationSource, TestResult};

/// Permutation test that reshuffles raw rows and recomputes every matrix.
pub fn standard_perm_test<S: PermutationSource + ?Sized>(
    x: &DataMatrix,
    y: &DataMatrix,
    b: usize,
    source: &S,
    kind: StatisticKind,
    bandwidth: Option<f64>,
) -> Result<TestResult> {
    let started = Instant::now();
    if b == 0 {
        return Err(Error::ZeroPermutations);
    }
    let kernel = MatrixKernel::new(kind, x, y, bandwidth)?;
    let observed = evaluate(&kernel, x, y)?;

    let w = x.vstack(y)?;
    let (n_x, n_y) = (x.rows(), y.rows());
    let null = null_distribution(b, || (), |_, it| {
        let (p1, p2) = split_pooled(n_x, n_y, &source.draw(it, n_x, n_y))?;
        evaluate(&kernel, &w.select_rows(&p1), &w.select_rows(&p2))
    })?;
    finish(&kernel, Backend::Standard, observed, null, started)
}

fn evaluate(kernel: &MatrixKernel, x: &DataMatrix, y: &DataMatrix) -> Result<f64> {
    let xx = kernel.compute(x, x)?;
    let yy = kernel.compute(y, y)?;
    let xy = kernel.compute(x, y)?;
    kernel.kind().evaluate(&xy, &xx, &yy)
}

/// The `(xx, yy, xy)` matrices the standard back-end computes for a single
/// first-group draw, with rows in draw order.
pub fn standard_permuted_matrices(
    x: &DataMatrix,
    y: &DataMatrix,
    p1: &[usize],
    kind: StatisticKind,
    bandwidth: Option<f64>,
) -> Result<super::PermutedMatrices> {
    let kernel = MatrixKernel::new(kind, x, y, bandwidth)?;
    let w = x.vstack(y)?;
    let (p1, p2) = split_pooled(x.rows(), y.rows(), p1)?;
    let (xs, ys) = (w.select_rows(&p1), w.select_rows(&p2));
    Ok(super::PermutedMatrices {
        xx: kernel.compute(&xs, &xs)?,
        yy: kernel.compute(&ys, &ys)?,
        xy: kernel.compute(&xs, &ys)?,
    })
}
