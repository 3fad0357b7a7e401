use std::ops::Range;

use crate::error::{Error, Result};

use super::stream::PermutationSource;

/// Block mapping between the original matrices and the permuted ones.
///
/// All indices are 0-based. `i1`/`i2` are the rows of `x`/`y` that land in the
/// permuted first group, `j1`/`j2` the rows of `x`/`y` that land in the permuted
/// second group. Within each list, order follows the draw. Destination ranges
/// are contiguous: the permuted first group is `x[i1]` followed by `y[i2]`,
/// the permuted second group is `x[j1]` followed by `y[j2]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PermutationIndexSet {
    pub n_x: usize,
    pub n_y: usize,
    pub i1: Vec<usize>,
    pub i2: Vec<usize>,
    pub j1: Vec<usize>,
    pub j2: Vec<usize>,
}

impl PermutationIndexSet {
    /// Maps a first-group draw over the pooled sample onto per-sample indices.
    pub fn from_draw(n_x: usize, n_y: usize, p1: &[usize]) -> Result<Self> {
        let (p1, p2) = split_pooled(n_x, n_y, p1)?;
        // pooled index k maps back to x[k] when k < n_x, otherwise y[k - n_x]
        let (i1, i2): (Vec<usize>, Vec<usize>) = p1.iter().partition(|&&k| k < n_x);
        let (j1, j2): (Vec<usize>, Vec<usize>) = p2.iter().partition(|&&k| k < n_x);
        let shift = |v: Vec<usize>| v.into_iter().map(|k| k - n_x).collect::<Vec<_>>();
        Ok(Self {
            n_x,
            n_y,
            i1,
            i2: shift(i2),
            j1,
            j2: shift(j2),
        })
    }

    pub fn i1_dest(&self) -> Range<usize> {
        0..self.i1.len()
    }

    pub fn i2_dest(&self) -> Range<usize> {
        self.i1.len()..self.n_x
    }

    pub fn j1_dest(&self) -> Range<usize> {
        0..self.j1.len()
    }

    pub fn j2_dest(&self) -> Range<usize> {
        self.j1.len()..self.n_y
    }
}

/// Validates a first-group draw and returns it with its complement; the
/// complement keeps ascending pooled order.
pub fn split_pooled(n_x: usize, n_y: usize, p1: &[usize]) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = n_x + n_y;
    if n_x == 0 || n_y == 0 {
        return Err(Error::InvalidDraw(format!(
            "both groups must be nonempty (n_x = {n_x}, n_y = {n_y})"
        )));
    }
    if p1.len() != n_x {
        return Err(Error::InvalidDraw(format!(
            "draw has {} indices, expected {n_x}",
            p1.len()
        )));
    }
    let mut taken = vec![false; n];
    for &k in p1 {
        if k >= n {
            return Err(Error::InvalidDraw(format!("index {k} out of range 0..{n}")));
        }
        if std::mem::replace(&mut taken[k], true) {
            return Err(Error::InvalidDraw(format!("index {k} drawn twice")));
        }
    }
    let p2 = (0..n).filter(|&k| !taken[k]).collect();
    Ok((p1.to_vec(), p2))
}

/// Draws iteration `iteration` from `source` and maps it to block indices.
pub fn permutation_indexes<S: PermutationSource + ?Sized>(
    n_x: usize,
    n_y: usize,
    source: &S,
    iteration: usize,
) -> Result<PermutationIndexSet> {
    PermutationIndexSet::from_draw(n_x, n_y, &source.draw(iteration, n_x, n_y))
}
