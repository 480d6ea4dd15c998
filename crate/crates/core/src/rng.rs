//! Seeded random streams. Every Monte-Carlo trial gets its own ChaCha stream
//! derived from the run seed, so trials are reproducible and independent
//! regardless of scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type TrialRng = ChaCha8Rng;

/// Independent stream `trial` of the generator seeded by `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> TrialRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}
