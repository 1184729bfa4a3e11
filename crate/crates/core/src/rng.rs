//! Reproducible random streams and deterministic parallel fan-out.
//!
//! Every Monte Carlo path draws from its own ChaCha8 stream keyed by
//! `(master_seed, tag)` and selected by the path index. Results are always
//! collected in index order, so the number of worker threads never changes
//! the output.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Random stream handed to every sampling routine.
pub type PathRng = ChaCha8Rng;

/// Independent substream `index` of the family `(master_seed, tag)`.
pub fn substream(master_seed: u64, tag: u64, index: u64) -> PathRng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&master_seed.to_le_bytes());
    key[8..16].copy_from_slice(&tag.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

/// Derives a stream tag from a label and a numeric parameter, e.g. the
/// rung size of a convergence ladder.
pub fn tag(label: &str, param: u64) -> u64 {
    // FNV-1a; stable across platforms and releases.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes().chain(param.to_le_bytes()) {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Worker configuration for path-level parallelism.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Parallelism {
    workers: usize,
}

impl Default for Parallelism {
    fn default() -> Self {
        Self::sequential()
    }
}

impl Parallelism {
    pub fn sequential() -> Self {
        Self { workers: 1 }
    }

    pub fn new(workers: usize) -> Self {
        Self {
            workers: workers.max(1),
        }
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    /// Evaluates `f(0..count)` and returns the results in index order.
    pub fn map<T, F>(&self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        if self.workers <= 1 || count < 2 {
            return (0..count).map(f).collect();
        }
        match rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
        {
            Ok(pool) => pool.install(|| (0..count).into_par_iter().map(&f).collect()),
            Err(_) => (0..count).map(f).collect(),
        }
    }
}
