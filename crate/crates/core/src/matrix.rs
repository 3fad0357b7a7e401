//! Dense data matrices and the pairwise distance / kernel matrices built from them.
//!
//! Every pairwise entry is computed by a pure function of the two rows involved,
//! so the same pair of samples always yields a bit-identical value no matter
//! which matrix (or which thread) computes it. The permutation back-ends rely on
//! this to agree with each other.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Row-major `rows x cols` matrix of samples by variables.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl DataMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidShape(format!(
                "data matrix must be at least 1x1, got {rows}x{cols}"
            )));
        }
        if values.len() != rows * cols {
            return Err(Error::InvalidShape(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / cols,
                col: pos % cols,
            });
        }
        Ok(Self { rows, cols, values })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut values = Vec::with_capacity(n * p);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != p {
                return Err(Error::InvalidShape(format!(
                    "row {i} has {} values, expected {p}",
                    r.len()
                )));
            }
            values.extend_from_slice(r);
        }
        Self::new(n, p, values)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.values[i * self.cols + k]
    }

    /// New matrix made of the given rows, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> DataMatrix {
        let mut values = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            values.extend_from_slice(self.row(i));
        }
        DataMatrix {
            rows: idx.len(),
            cols: self.cols,
            values,
        }
    }

    /// Contiguous row range `start..end`.
    pub fn slice_rows(&self, start: usize, end: usize) -> DataMatrix {
        DataMatrix {
            rows: end - start,
            cols: self.cols,
            values: self.values[start * self.cols..end * self.cols].to_vec(),
        }
    }

    /// `self` stacked on top of `other`.
    pub fn vstack(&self, other: &DataMatrix) -> Result<DataMatrix> {
        check_cols(self, other)?;
        let mut values = Vec::with_capacity(self.values.len() + other.values.len());
        values.extend_from_slice(&self.values);
        values.extend_from_slice(&other.values);
        Ok(DataMatrix {
            rows: self.rows + other.rows,
            cols: self.cols,
            values,
        })
    }

    pub fn scaled(&self, c: f64) -> DataMatrix {
        DataMatrix {
            rows: self.rows,
            cols: self.cols,
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PairwiseKind {
    EuclideanDistance,
    GaussianKernel,
}

/// Row-major `n1 x n2` matrix of distances or kernel values between two sample sets.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseMatrix {
    n1: usize,
    n2: usize,
    values: Vec<f64>,
    kind: PairwiseKind,
}

impl PairwiseMatrix {
    pub fn zeros(n1: usize, n2: usize, kind: PairwiseKind) -> Self {
        Self {
            n1,
            n2,
            values: vec![0.0; n1 * n2],
            kind,
        }
    }

    pub fn from_values(n1: usize, n2: usize, values: Vec<f64>, kind: PairwiseKind) -> Result<Self> {
        if values.len() != n1 * n2 {
            return Err(Error::InvalidShape(format!(
                "{} values cannot fill a {n1}x{n2} matrix",
                values.len()
            )));
        }
        Ok(Self {
            n1,
            n2,
            values,
            kind,
        })
    }

    #[inline]
    pub fn n1(&self) -> usize {
        self.n1
    }

    #[inline]
    pub fn n2(&self) -> usize {
        self.n2
    }

    #[inline]
    pub fn kind(&self) -> PairwiseKind {
        self.kind
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n2 + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n2..(i + 1) * self.n2]
    }

    pub fn transpose(&self) -> PairwiseMatrix {
        let mut out = PairwiseMatrix::zeros(self.n2, self.n1, self.kind);
        for i in 0..self.n1 {
            for j in 0..self.n2 {
                out.values[j * self.n1 + i] = self.values[i * self.n2 + j];
            }
        }
        out
    }

    /// `self[rows, cols]`, preserving index order.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> PairwiseMatrix {
        let mut out = PairwiseMatrix::zeros(rows.len(), cols.len(), self.kind);
        gather_block(&mut out.values, cols.len(), 0, 0, self, rows, cols);
        out
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Copies `src[rows, cols]` into the destination block whose top-left corner is
/// `(row0, col0)` of a row-major buffer with `stride` columns.
#[inline]
pub(crate) fn gather_block(
    dst: &mut [f64],
    stride: usize,
    row0: usize,
    col0: usize,
    src: &PairwiseMatrix,
    rows: &[usize],
    cols: &[usize],
) {
    for (a, &r) in rows.iter().enumerate() {
        let src_row = src.row(r);
        let start = (row0 + a) * stride + col0;
        let dst_row = &mut dst[start..start + cols.len()];
        for (d, &c) in dst_row.iter_mut().zip(cols) {
            *d = src_row[c];
        }
    }
}

/// Like [`gather_block`] but reads the transpose: destination `(a, b)` receives
/// `src[cols[b], rows[a]]`, i.e. the block `src[cols, rows]^T`.
#[inline]
pub(crate) fn gather_block_transposed(
    dst: &mut [f64],
    stride: usize,
    row0: usize,
    col0: usize,
    src: &PairwiseMatrix,
    rows: &[usize],
    cols: &[usize],
) {
    let n2 = src.n2();
    let vals = src.values();
    for (a, &r) in rows.iter().enumerate() {
        let start = (row0 + a) * stride + col0;
        let dst_row = &mut dst[start..start + cols.len()];
        for (d, &c) in dst_row.iter_mut().zip(cols) {
            *d = vals[c * n2 + r];
        }
    }
}

fn check_cols(x: &DataMatrix, y: &DataMatrix) -> Result<()> {
    if x.cols != y.cols {
        return Err(Error::DimensionMismatch {
            what: "column counts differ",
            left: x.cols,
            right: y.cols,
        });
    }
    Ok(())
}

/// Squared Euclidean distance with four fixed lanes.
///
/// Symmetric bit-for-bit in its arguments since `(a-b)^2 == (b-a)^2` exactly.
#[inline]
pub(crate) fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (u, v) in ca.zip(cb) {
        for l in 0..4 {
            let d = u[l] - v[l];
            acc[l] += d * d;
        }
    }
    let mut tail = 0.0;
    for (u, v) in ra.iter().zip(rb) {
        let d = u - v;
        tail += d * d;
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + tail
}

fn pairwise_map<F>(x: &DataMatrix, y: &DataMatrix, kind: PairwiseKind, f: F) -> PairwiseMatrix
where
    F: Fn(f64) -> f64 + Sync,
{
    let n2 = y.rows;
    let mut out = PairwiseMatrix::zeros(x.rows, n2, kind);
    out.values
        .par_chunks_mut(n2.max(1))
        .enumerate()
        .for_each(|(i, dst)| {
            let xi = x.row(i);
            for (j, d) in dst.iter_mut().enumerate() {
                *d = f(squared_euclidean(xi, y.row(j)));
            }
        });
    out
}

/// `D[i, j] = ||x_i - y_j||`, computed directly per pair.
pub fn euclidean_distance_matrix(x: &DataMatrix, y: &DataMatrix) -> Result<PairwiseMatrix> {
    check_cols(x, y)?;
    Ok(pairwise_map(x, y, PairwiseKind::EuclideanDistance, f64::sqrt))
}

/// `K[i, j] = exp(-||x_i - y_j||^2 / (2 * bandwidth^2))`.
pub fn gaussian_kernel_matrix(
    x: &DataMatrix,
    y: &DataMatrix,
    bandwidth: f64,
) -> Result<PairwiseMatrix> {
    check_bandwidth(bandwidth)?;
    check_cols(x, y)?;
    let denom = 2.0 * bandwidth * bandwidth;
    Ok(pairwise_map(x, y, PairwiseKind::GaussianKernel, move |d2| {
        (-d2 / denom).exp()
    }))
}

pub(crate) fn check_bandwidth(bandwidth: f64) -> Result<()> {
    if !(bandwidth.is_finite() && bandwidth > 0.0) {
        return Err(Error::InvalidBandwidth(bandwidth));
    }
    Ok(())
}

/// Median of the pairwise distances over the pooled sample (each unordered
/// pair of distinct rows counted once). Falls back to 1 when the median is 0.
pub fn median_heuristic_bandwidth(x: &DataMatrix, y: &DataMatrix) -> Result<f64> {
    check_cols(x, y)?;
    let n = x.rows + y.rows;
    if n < 2 {
        return Err(Error::InsufficientSamples {
            what: "median heuristic",
            needed: 2,
            got: n,
        });
    }
    let row = |i: usize| if i < x.rows { x.row(i) } else { y.row(i - x.rows) };
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            dists.push(squared_euclidean(row(i), row(j)).sqrt());
        }
    }
    let m = dists.len();
    let cmp = |a: &f64, b: &f64| a.total_cmp(b);
    let (_, &mut upper, _) = dists.select_nth_unstable_by(m / 2, cmp);
    let median = if m % 2 == 1 {
        upper
    } else {
        let lower = dists[..m / 2]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    };
    Ok(if median > 0.0 { median } else { 1.0 })
}

const PAIRWISE_BLOCK: usize = 128;

/// Pairwise (cascade) summation; error grows with `log n` rather than `n`.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= PAIRWISE_BLOCK {
        let mut acc = [0.0f64; 8];
        let chunks = values.chunks_exact(8);
        let rem = chunks.remainder();
        for c in chunks {
            for l in 0..8 {
                acc[l] += c[l];
            }
        }
        let mut s = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
        for v in rem {
            s += v;
        }
        s
    } else {
        // split on a multiple of 8 so leaf blocks stay lane-aligned
        let half = (values.len() / 2) & !7;
        pairwise_sum(&values[..half]) + pairwise_sum(&values[half..])
    }
}

pub(crate) fn mean_of(values: &[f64]) -> f64 {
    pairwise_sum(values) / values.len() as f64
}

/// Arithmetic mean of all entries.
pub fn block_mean(m: &PairwiseMatrix) -> Result<f64> {
    if m.is_empty() {
        return Err(Error::Empty("block_mean of an empty matrix"));
    }
    Ok(mean_of(&m.values))
}
