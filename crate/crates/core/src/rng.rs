//! Seeded random streams.
//!
//! A run owns four independent ChaCha8 streams derived from one 64-bit seed.
//! Keeping destination draws on their own stream is what lets anonymous and
//! traced runs produce identical load trajectories: the traced engine spends
//! extra randomness (ball selection, arrival shuffles) only on stream B.

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const STREAM_DESTINATION: u64 = 0;
const STREAM_STRATEGY: u64 = 1;
const STREAM_PLACEMENT: u64 = 2;
const STREAM_FAULT_TRIGGER: u64 = 3;

#[derive(Clone, Debug)]
pub struct Streams {
    seed: u64,
    /// Stream A: one draw per forwarded ball, in ascending source order.
    pub destination: ChaCha8Rng,
    /// Stream B: random ball selection and arrival ordering.
    pub strategy: ChaCha8Rng,
    /// Initial placement and fault re-assignment.
    pub placement: ChaCha8Rng,
    /// Bernoulli fault triggers.
    pub fault_trigger: ChaCha8Rng,
}

impl Streams {
    pub fn from_seed(seed: u64) -> Self {
        let stream = |id| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(id);
            rng
        };
        Streams {
            seed,
            destination: stream(STREAM_DESTINATION),
            strategy: stream(STREAM_STRATEGY),
            placement: stream(STREAM_PLACEMENT),
            fault_trigger: stream(STREAM_FAULT_TRIGGER),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Uniform integer in `0..bound` from exactly one 64-bit draw.
///
/// Uses the high half of a 64x64 widening multiply. Each outcome has
/// probability within `1/2^64` of `1/bound`, and the draw count never varies,
/// which keeps stream layouts fixed across modes.
#[inline]
pub fn below<R: RngCore + ?Sized>(rng: &mut R, bound: u32) -> u32 {
    debug_assert!(bound > 0);
    ((rng.next_u64() as u128 * bound as u128) >> 64) as u32
}

/// Uniform real in `[0, 1)` from one draw (53 bits of precision).
#[inline]
pub fn unit<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// In-place Fisher-Yates shuffle built on [`below`].
pub fn shuffle<T, R: RngCore + ?Sized>(rng: &mut R, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = below(rng, (i + 1) as u32) as usize;
        items.swap(i, j);
    }
}
