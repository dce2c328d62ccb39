//! Deterministic random streams.
//!
//! Every consumer of randomness gets its own ChaCha stream keyed by a `u64`
//! seed and a stream index, so adding a consumer never shifts the numbers
//! another consumer sees.

use rand::SeedableRng;
pub use rand_chacha::ChaCha20Rng;

/// Random stream `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// SplitMix64 finalizer. A bijection on `u64`, used to scramble packed
/// identifiers into seeds without collisions.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
