//! Execution strategy for the data-parallel kernels.
//!
//! Every kernel splits its work into numbered blocks and derives randomness
//! from the block number, so results are identical in both modes and for any
//! thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Work items per block in sampling kernels.
pub const BLOCK: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    /// Uses rayon when the `parallel` feature is enabled, else runs sequentially.
    #[default]
    Parallel,
}

impl Exec {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }

    /// Maps `f` over `0..n`, keeping index order.
    pub fn map<T, F>(self, n: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Folds `0..n` with `fold` per item and merges partial states with `merge`.
    /// `merge` must be associative and commutative for reproducible output.
    pub fn fold<S, I, F, M>(self, n: u64, init: I, fold: F, merge: M) -> S
    where
        S: Send,
        I: Fn() -> S + Sync + Send,
        F: Fn(S, u64) -> S + Sync + Send,
        M: Fn(S, S) -> S + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            return (0..n).into_par_iter().fold(&init, &fold).reduce(&init, &merge);
        }
        #[cfg(not(feature = "parallel"))]
        let _ = merge;
        (0..n).fold(init(), fold)
    }
}

/// Generator for one block of a seeded sampling run.
pub fn block_rng(seed: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);
    rng
}

/// Splits `total` items into `(block, len)` pairs of at most [`BLOCK`] items.
pub fn blocks(total: u64) -> Vec<(u64, u64)> {
    (0..total.div_ceil(BLOCK)).map(|b| (b, BLOCK.min(total - b * BLOCK))).collect()
}
