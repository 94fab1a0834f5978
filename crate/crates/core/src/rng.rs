//! Deterministic random streams.
//!
//! Every consumer of randomness draws from a ChaCha stream keyed by
//! `(seed, stream id)`, so replicates and grid cells never share state and
//! results do not depend on execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags mixed into the stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Truth = 1,
    Data = 2,
    Sampling = 3,
}

/// RNG for `purpose` in replicate `index` under a base `seed`.
pub fn stream(seed: u64, purpose: Purpose, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 48) ^ index);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = stream(7, Purpose::Data, 0).random();
        let b: u64 = stream(7, Purpose::Data, 0).random();
        let c: u64 = stream(7, Purpose::Data, 1).random();
        let d: u64 = stream(7, Purpose::Sampling, 0).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }
}
