use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Supplies the pooled-sample indices assigned to the first group at each
/// permutation iteration.
///
/// A draw is `n_x` distinct 0-based indices into the pooled sample
/// `0..n_x + n_y`, in draw order. Indices below `n_x` refer to rows of `x`,
/// the rest to rows of `y` (offset by `n_x`). Implementations must be pure in
/// `iteration` so every back-end and every thread schedule sees the same draws.
pub trait PermutationSource: Sync {
    fn draw(&self, iteration: usize, n_x: usize, n_y: usize) -> Vec<usize>;
}

/// Seeded stream of permutation draws.
///
/// Iteration `i` uses ChaCha8 seeded from `seed` on stream `i`, then a partial
/// Fisher-Yates shuffle of `0..n` that stops after `n_x` swaps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PermutationStream {
    seed: u64,
}

impl PermutationStream {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub(crate) fn rng_for(&self, iteration: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(iteration as u64);
        rng
    }
}

/// Draws `k` items from `0..n` without replacement, keeping draw order.
pub fn sample_without_replacement<R: Rng>(rng: &mut R, n: usize, k: usize) -> Vec<usize> {
    assert!(k <= n, "cannot draw {k} items from {n}");
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.random_range(i..n);
        pool.swap(i, j);
    }
    pool.truncate(k);
    pool
}

impl PermutationSource for PermutationStream {
    fn draw(&self, iteration: usize, n_x: usize, n_y: usize) -> Vec<usize> {
        let mut rng = self.rng_for(iteration);
        sample_without_replacement(&mut rng, n_x + n_y, n_x)
    }
}

/// Replays a fixed list of draws, cycling when iterations exceed its length.
///
/// Mostly useful for forcing specific permutations in tests and examples.
#[derive(Debug, Clone)]
pub struct ScriptedDraws {
    draws: Vec<Vec<usize>>,
}

impl ScriptedDraws {
    pub fn new(draws: Vec<Vec<usize>>) -> Self {
        assert!(!draws.is_empty(), "scripted draws cannot be empty");
        Self { draws }
    }

    /// Builds draws from 1-based pooled indices.
    pub fn one_based(draws: &[&[usize]]) -> Self {
        Self::new(
            draws
                .iter()
                .map(|d| d.iter().map(|&i| i - 1).collect())
                .collect(),
        )
    }
}

impl PermutationSource for ScriptedDraws {
    fn draw(&self, iteration: usize, _n_x: usize, _n_y: usize) -> Vec<usize> {
        self.draws[iteration % self.draws.len()].clone()
    }
}

impl<S: PermutationSource + ?Sized> PermutationSource for &S {
    fn draw(&self, iteration: usize, n_x: usize, n_y: usize) -> Vec<usize> {
        (**self).draw(iteration, n_x, n_y)
    }
}
