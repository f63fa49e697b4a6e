//! One run seed fanned out into independent per-stage random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Encoder = 1,
    Mapper = 2,
    Reconstruction = 3,
    Clustering = 4,
    Heads = 5,
    Data = 6,
}

/// Deterministic generator for one stage of a run.
pub fn stage_rng(seed: u64, stage: Stage) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stage as u64);
    rng
}
