//! Counter-based random streams.
//!
//! Every stream is addressed by `(master seed, purpose, indices…)`, so a draw
//! never depends on which worker ran it or in which order.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub mod purpose {
    pub const KERNEL_PATH: u64 = 0x6b65726e;
    pub const BASIS_ORACLE: u64 = 0x6f72636c;
    pub const TRIAL: u64 = 0x7472616c;
    pub const MEASUREMENT: u64 = 0x6d656173;
    pub const VERIFY: u64 = 0x76657269;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a master seed, a purpose tag and any number of indices into one seed.
pub fn derive_seed(master: u64, purpose: u64, indices: &[u64]) -> u64 {
    let mut h = splitmix64(master ^ splitmix64(purpose));
    for &i in indices {
        h = splitmix64(h ^ splitmix64(i.wrapping_add(0x632b_e59b_d9b4_e019)));
    }
    h
}

pub fn stream(master: u64, purpose: u64, indices: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, purpose, indices))
}

/// Circularly symmetric standard complex Gaussian: `E|Z|² = 1`, `E Z² = 0`.
pub fn circular_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}
