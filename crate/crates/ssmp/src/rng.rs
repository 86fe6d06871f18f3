//! Per-path random streams.
//!
//! Every path draws from its own ChaCha8 stream, keyed by `(seed, path_id)`.
//! ChaCha is a counter-based generator, so stream `k` is independent of how
//! many other paths were generated or in which order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Poisson, StandardNormal};

pub type PathRng = ChaCha8Rng;

/// Independent stream for one path.
pub fn path_stream(seed: u64, path_id: u64) -> PathRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_id);
    rng
}

/// Stream for one auxiliary purpose (calibration draws, restart signs, ...)
/// kept apart from path streams by a salt.
pub fn salted_stream(seed: u64, salt: u64, index: u64) -> PathRng {
    path_stream(seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15), index)
}

pub fn normal(rng: &mut PathRng) -> f64 {
    StandardNormal.sample(rng)
}

/// Exponential variable with the given rate; `+inf` for a zero rate.
pub fn exponential(rng: &mut PathRng, rate: f64) -> f64 {
    if rate <= 0.0 {
        return f64::INFINITY;
    }
    Exp::new(rate).expect("positive rate").sample(rng)
}

pub fn poisson(rng: &mut PathRng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let p: f64 = Poisson::new(mean).expect("positive mean").sample(rng);
    p as u64
}
