//! Seeded random streams.
//!
//! Every stochastic routine draws from a `ChaCha8Rng` keyed by `(seed, stream)`.
//! The generator crates are pinned (`rand_chacha = "=0.9.0"`) so stored outputs
//! stay reproducible across platforms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

pub type SimRng = ChaCha8Rng;

pub fn stream(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform on `(0, 1]`.
pub fn unit_open0(rng: &mut SimRng) -> f64 {
    1.0 - rng.random::<f64>()
}

pub fn exp1(rng: &mut SimRng) -> f64 {
    Exp1.sample(rng)
}

/// `Par(a)` on `[1, ∞)` by inversion.
pub fn pareto(rng: &mut SimRng, a: f64) -> f64 {
    unit_open0(rng).powf(-1.0 / a)
}

pub fn poisson(rng: &mut SimRng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    rand_distr::Poisson::new(mean).map(|d| d.sample(rng) as u64).unwrap_or(0)
}


/// SplitMix64 finalizer; derives well-separated seeds for ensemble members.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
