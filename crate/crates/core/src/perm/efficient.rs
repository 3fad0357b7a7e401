use std::time::Instant;

use crate::error::{Error, Result};
use crate::matrix::{gather_block, gather_block_transposed, DataMatrix, PairwiseKind, PairwiseMatrix};
use crate::statistic::StatisticKind;

use super::{
    finish, null_distribution, permutation_indexes, Backend, MatrixKernel, PermutationIndexSet,
    PermutationSource, TestResult,
};

/// How `D_yx` blocks are obtained during reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum YxStorage {
    /// Read `D_yx[r, c]` as `D_xy[c, r]`; nothing extra is stored.
    #[default]
    Transposed,
    /// Keep an explicit transposed copy of `D_xy` (debugging aid).
    Explicit,
}

/// The three matrices computed once on the original data.
#[derive(Debug, Clone)]
pub struct BaseMatrices {
    pub xx: PairwiseMatrix,
    pub yy: PairwiseMatrix,
    pub xy: PairwiseMatrix,
    yx: Option<PairwiseMatrix>,
}

impl BaseMatrices {
    pub fn new(
        xx: PairwiseMatrix,
        yy: PairwiseMatrix,
        xy: PairwiseMatrix,
        storage: YxStorage,
    ) -> Result<Self> {
        let (nx, ny) = (xy.n1(), xy.n2());
        if (xx.n1(), xx.n2()) != (nx, nx) || (yy.n1(), yy.n2()) != (ny, ny) {
            return Err(Error::InvalidShape(format!(
                "base matrices {}x{}, {}x{}, {}x{} are inconsistent",
                xx.n1(),
                xx.n2(),
                yy.n1(),
                yy.n2(),
                nx,
                ny
            )));
        }
        let yx = match storage {
            YxStorage::Transposed => None,
            YxStorage::Explicit => Some(xy.transpose()),
        };
        Ok(Self { xx, yy, xy, yx })
    }

    pub fn n_x(&self) -> usize {
        self.xy.n1()
    }

    pub fn n_y(&self) -> usize {
        self.xy.n2()
    }

    /// Writes `D_yx[rows, cols]` into the destination block.
    #[inline]
    fn gather_yx(&self, dst: &mut [f64], stride: usize, row0: usize, col0: usize, rows: &[usize], cols: &[usize]) {
        match &self.yx {
            Some(yx) => gather_block(dst, stride, row0, col0, yx, rows, cols),
            None => gather_block_transposed(dst, stride, row0, col0, &self.xy, rows, cols),
        }
    }

    /// Rebuilds the permuted-data matrices purely by block swaps.
    pub fn reconstruct(&self, set: &PermutationIndexSet) -> PermutedMatrices {
        let mut out = PermutedMatrices::zeros(self.n_x(), self.n_y(), self.xy.kind());
        self.reconstruct_into(set, &mut out);
        out
    }

    /// In-place form of [`reconstruct`](Self::reconstruct); `out` must already
    /// have the right shapes.
    pub fn reconstruct_into(&self, set: &PermutationIndexSet, out: &mut PermutedMatrices) {
        let (nx, ny) = (self.n_x(), self.n_y());
        let (i1, i2, j1, j2) = (&set.i1[..], &set.i2[..], &set.j1[..], &set.j2[..]);
        let (a1, a2) = (set.i1_dest().start, set.i2_dest().start);
        let (c1, c2) = (set.j1_dest().start, set.j2_dest().start);

        let xx = out.xx.values_mut();
        gather_block(xx, nx, a1, a1, &self.xx, i1, i1);
        gather_block(xx, nx, a1, a2, &self.xy, i1, i2);
        self.gather_yx(xx, nx, a2, a1, i2, i1);
        gather_block(xx, nx, a2, a2, &self.yy, i2, i2);

        let yy = out.yy.values_mut();
        gather_block(yy, ny, c1, c1, &self.xx, j1, j1);
        gather_block(yy, ny, c1, c2, &self.xy, j1, j2);
        self.gather_yx(yy, ny, c2, c1, j2, j1);
        gather_block(yy, ny, c2, c2, &self.yy, j2, j2);

        let xy = out.xy.values_mut();
        gather_block(xy, ny, a1, c1, &self.xx, i1, j1);
        gather_block(xy, ny, a1, c2, &self.xy, i1, j2);
        self.gather_yx(xy, ny, a2, c1, i2, j1);
        gather_block(xy, ny, a2, c2, &self.yy, i2, j2);
    }
}

/// Matrices of the permuted data.
#[derive(Debug, Clone, PartialEq)]
pub struct PermutedMatrices {
    pub xx: PairwiseMatrix,
    pub yy: PairwiseMatrix,
    pub xy: PairwiseMatrix,
}

impl PermutedMatrices {
    pub fn zeros(n_x: usize, n_y: usize, kind: PairwiseKind) -> Self {
        Self {
            xx: PairwiseMatrix::zeros(n_x, n_x, kind),
            yy: PairwiseMatrix::zeros(n_y, n_y, kind),
            xy: PairwiseMatrix::zeros(n_x, n_y, kind),
        }
    }

    pub fn statistic(&self, kind: StatisticKind) -> f64 {
        kind.evaluate_raw(self.xy.values(), self.xx.values(), self.yy.values())
    }
}

/// Permutation test that computes the three base matrices once and rebuilds
/// every permuted matrix by swapping their blocks.
pub fn efficient_perm_test<S: PermutationSource + ?Sized>(
    x: &DataMatrix,
    y: &DataMatrix,
    b: usize,
    source: &S,
    kind: StatisticKind,
    bandwidth: Option<f64>,
) -> Result<TestResult> {
    efficient_perm_test_with(x, y, b, source, kind, bandwidth, YxStorage::Transposed)
}

/// [`efficient_perm_test`] with an explicit choice of `D_yx` storage.
pub fn efficient_perm_test_with<S: PermutationSource + ?Sized>(
    x: &DataMatrix,
    y: &DataMatrix,
    b: usize,
    source: &S,
    kind: StatisticKind,
    bandwidth: Option<f64>,
    storage: YxStorage,
) -> Result<TestResult> {
    let started = Instant::now();
    if b == 0 {
        return Err(Error::ZeroPermutations);
    }
    let kernel = MatrixKernel::new(kind, x, y, bandwidth)?;
    let base = BaseMatrices::new(
        kernel.compute(x, x)?,
        kernel.compute(y, y)?,
        kernel.compute(x, y)?,
        storage,
    )?;
    let observed = kind.evaluate_raw(base.xy.values(), base.xx.values(), base.yy.values());

    let (n_x, n_y) = (x.rows(), y.rows());
    let mk = kind.matrix_kind();
    let null = null_distribution(
        b,
        || PermutedMatrices::zeros(n_x, n_y, mk),
        |buf, it| {
            let set = permutation_indexes(n_x, n_y, source, it)?;
            base.reconstruct_into(&set, buf);
            Ok(buf.statistic(kind))
        },
    )?;
    finish(&kernel, Backend::Efficient, observed, null, started)
}
