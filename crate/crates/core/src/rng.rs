//! Seeded random streams.
//!
//! Every stochastic component draws from a [`XRng`] created here. The
//! generator is ChaCha8, which produces the same stream on every platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type XRng = ChaCha8Rng;

/// Creates the stream for `seed`.
pub fn seeded_rng(seed: u64) -> XRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Creates an independent sub-stream of `seed`, e.g. one per component.
pub fn seeded_stream(seed: u64, stream: u64) -> XRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream ids used by the trainer.
pub mod streams {
    pub const NETWORK_INIT: u64 = 1;
    pub const ACTING: u64 = 2;
    pub const REPLAY: u64 = 3;
    pub const ENV: u64 = 4;
    pub const EVAL: u64 = 5;
    pub const PROBE: u64 = 6;
}
