//! Seeded random streams.
//!
//! Disorder values use ChaCha20 as a counter-based generator: the draw for
//! configuration `σ` is the 64-bit word at counter position `σ.bits`, so any
//! single value can be computed without materializing the field. Auxiliary
//! randomness (Lanczos start vectors, Monte Carlo trials, trace sampling)
//! uses separate ChaCha streams so it never aliases the disorder.

use rand::{RngCore, SeedableRng};
use rand_chacha::{ChaCha20Rng, ChaCha8Rng};
use statrs::function::erf::erfc_inv;

pub const STREAM_LANCZOS: u64 = 1;
pub const STREAM_TRACE: u64 = 2;
pub const STREAM_WALK: u64 = 3;
pub const STREAM_TEST: u64 = 4;

/// Maps 64 random bits to the open interval (0, 1).
pub fn uniform_open(x: u64) -> f64 {
    ((x >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal quantile.
pub fn normal_quantile(u: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * u)
}

fn disorder_rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Standard normal draw `ω(σ)` for a single configuration.
pub fn omega_at(seed: u64, bits: u32) -> f64 {
    let mut rng = disorder_rng(seed);
    rng.set_word_pos(2 * bits as u128);
    normal_quantile(uniform_open(rng.next_u64()))
}

/// `ω(σ)` for all `σ < len`, identical to calling [`omega_at`] per index.
pub fn omega_field(seed: u64, len: usize) -> Vec<f64> {
    let mut rng = disorder_rng(seed);
    (0..len)
        .map(|_| normal_quantile(uniform_open(rng.next_u64())))
        .collect()
}

/// Independent auxiliary generator for `(seed, stream)`.
pub fn aux_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
