//! Seeding and the handful of distributions the generators need.
//!
//! Every random stream is a ChaCha8 generator keyed by a 64-bit [`Seed`].
//! Seeds split into independent children by hashing `(parent, index)`, so a
//! replicate or a population never shares generator state with another.
//! Continuous draws use only `next_u64` and an inverse-CDF transform, which
//! keeps them independent of `rand`'s distribution internals.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

pub type SurveyRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Seed(pub u64);

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Seed {
    /// Independent child seed for stream `index`.
    pub fn child(self, index: u64) -> Seed {
        Seed(splitmix64(
            self.0 ^ splitmix64(index.wrapping_add(0x632B_E59B_D9B4_E019)),
        ))
    }

    pub fn rng(self) -> SurveyRng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

impl From<u64> for Seed {
    fn from(v: u64) -> Self {
        Seed(v)
    }
}

/// Uniform draw on the open interval (0, 1).
pub fn open_unit<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal draw by inversion.
pub fn std_normal<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    let u = open_unit(rng);
    Normal::standard().inverse_cdf(u)
}
