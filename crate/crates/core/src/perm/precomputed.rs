use std::time::Instant;

use crate::error::{Error, Result};
use crate::matrix::{gather_block, DataMatrix, PairwiseMatrix};
use crate::statistic::StatisticKind;

use super::{finish, null_distribution, split_pooled, Backend, MatrixKernel, PermutationSource, TestResult};

/// Permutation test over one pre-computed matrix of the pooled sample.
pub fn precomputed_perm_test<S: PermutationSource + ?Sized>(
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
    let w = x.vstack(y)?;
    let ww = kernel.compute(&w, &w)?;

    let (n_x, n_y) = (x.rows(), y.rows());
    let mk = kind.matrix_kind();
    let fresh = || {
        (
            PairwiseMatrix::zeros(n_x, n_y, mk),
            PairwiseMatrix::zeros(n_x, n_x, mk),
            PairwiseMatrix::zeros(n_y, n_y, mk),
        )
    };

    let ix: Vec<usize> = (0..n_x).collect();
    let iy: Vec<usize> = (n_x..n_x + n_y).collect();
    let observed = {
        let mut buf = fresh();
        extract(&ww, &ix, &iy, &mut buf);
        kind.evaluate_raw(buf.0.values(), buf.1.values(), buf.2.values())
    };

    let null = null_distribution(b, fresh, |buf, it| {
        let (p1, p2) = split_pooled(n_x, n_y, &source.draw(it, n_x, n_y))?;
        extract(&ww, &p1, &p2, buf);
        Ok(kind.evaluate_raw(buf.0.values(), buf.1.values(), buf.2.values()))
    })?;
    finish(&kernel, Backend::Precomputed, observed, null, started)
}

fn extract(
    ww: &PairwiseMatrix,
    p1: &[usize],
    p2: &[usize],
    (xy, xx, yy): &mut (PairwiseMatrix, PairwiseMatrix, PairwiseMatrix),
) {
    gather_block(xy.values_mut(), p2.len(), 0, 0, ww, p1, p2);
    gather_block(xx.values_mut(), p1.len(), 0, 0, ww, p1, p1);
    gather_block(yy.values_mut(), p2.len(), 0, 0, ww, p2, p2);
}
