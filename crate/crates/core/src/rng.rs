//! Seeded randomness.
//!
//! Every stochastic quantity in the workspace is drawn from a ChaCha8 stream
//! seeded either directly from a run seed or from [`derive_seed`]. The
//! derivation is a fixed splitmix64 fold over integer tags, so sub-streams
//! (per-sample rollout noise, per-iteration eval noise) are reproducible and
//! independent of call order. Changing the fold would change every run, so it
//! is part of the determinism contract.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::scalar::{real, Real};

pub type SeededRng = ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds `tags` into `seed`, producing a decorrelated sub-seed.
pub fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    let mut h = splitmix64(seed ^ 0x6A09_E667_F3BC_C909);
    for &t in tags {
        h = splitmix64(h ^ splitmix64(t));
    }
    h
}

/// ChaCha8 stream for a derived sub-seed.
pub fn derived_rng(seed: u64, tags: &[u64]) -> SeededRng {
    SeededRng::seed_from_u64(derive_seed(seed, tags))
}

/// One standard-normal draw. The underlying draw is always performed in
/// `f64` so the stream consumed from `rng` does not depend on the scalar
/// type the caller instantiates.
pub fn standard_normal<R: Real>(rng: &mut impl Rng) -> R {
    let z: f64 = rng.sample(StandardNormal);
    real(z)
}

/// Vector of independent standard-normal draws.
pub fn normal_vec<R: Real>(rng: &mut impl Rng, dim: usize) -> Vec<R> {
    (0..dim).map(|_| standard_normal(rng)).collect()
}

/// Uniform draw in `[lo, hi)`, also performed in `f64`.
pub fn uniform<R: Real>(rng: &mut impl Rng, lo: f64, hi: f64) -> R {
    assert!(lo < hi, "uniform bounds must satisfy lo < hi");
    let u: f64 = rng.random();
    real(lo + (hi - lo) * u)
}
