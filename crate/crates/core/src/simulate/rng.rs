//! Per-replication random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Seed of replication `index`: `base_seed XOR index`.
pub fn replication_seed(base_seed: u64, index: usize) -> u64 {
    base_seed ^ index as u64
}

/// Independent ChaCha8 stream for replication `index`. The result depends
/// only on `(base_seed, index)`, never on scheduling.
pub fn replication_rng(base_seed: u64, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(replication_seed(base_seed, index))
}
