//! Seeded, splittable Gaussian sources.
//!
//! A [`Seed`] names a node in a tree of substreams: `Seed::new(root)` is the
//! root and [`Seed::child`] descends by index (one level per Monte Carlo
//! sample, say). Each node yields independent ChaCha20 streams indexed by
//! [`Seed::stream`], so the draws of stream `i` never depend on how many other
//! streams or samples are requested.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use statrs::distribution::{ContinuousCDF, Normal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Seed {
    root: u64,
    path: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Seed {
    pub fn new(root: u64) -> Self {
        Seed { root, path: 0 }
    }

    pub fn root(&self) -> u64 {
        self.root
    }

    /// Child node `index`; distinct indices give unrelated key material.
    pub fn child(&self, index: u64) -> Seed {
        Seed {
            root: self.root,
            path: splitmix64(self.path ^ splitmix64(index.wrapping_add(1))),
        }
    }

    /// Gaussian stream number `index` under this node.
    pub fn stream(&self, index: u64) -> GaussianStream {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.root.to_le_bytes());
        key[8..16].copy_from_slice(&self.path.to_le_bytes());
        let mut rng = ChaCha20Rng::from_seed(key);
        rng.set_stream(index);
        GaussianStream {
            rng,
            normal: Normal::standard(),
        }
    }
}

impl From<u64> for Seed {
    fn from(root: u64) -> Self {
        Seed::new(root)
    }
}

/// Standard normal variates by inverse-CDF transform of uniform draws.
pub struct GaussianStream {
    rng: ChaCha20Rng,
    normal: Normal,
}

impl GaussianStream {
    /// Uniform on the open interval (0, 1), 53-bit resolution.
    pub fn next_uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_normal(&mut self) -> f64 {
        let u = self.next_uniform();
        self.normal.inverse_cdf(u)
    }

    pub fn fill_normal(&mut self, out: &mut [f64]) {
        for x in out.iter_mut() {
            *x = self.next_normal();
        }
    }
}
