use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{domain, Result};

/// SplitMix64 finalizer applied to `seed ⊕ φ·(tag + 1)`; used to derive
/// independent child seeds.
pub fn mix_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A seeded random stream. The same seed always yields the same draws.
///
/// Streams are not meant to be shared between tasks; parallel work derives
/// one child per work unit with [`RngStream::derive`].
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    position: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            position: 0,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Child stream determined only by this stream's seed and `tag`.
    pub fn derive(&self, tag: u64) -> Self {
        Self::new(mix_seed(self.seed, tag))
    }

    /// Child stream for a path of tags, e.g. `(cell, replication)`.
    pub fn derive_path(&self, tags: &[u64]) -> Self {
        Self::new(tags.iter().fold(self.seed, |s, &t| mix_seed(s, t)))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of draws taken so far.
    pub fn position(&self) -> u64 {
        self.position
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.position += 1;
        StandardNormal.sample(&mut self.inner)
    }

    /// Uniform on [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.position += 1;
        self.inner.random::<f64>()
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        self.position += 1;
        self.inner.random_range(0..n)
    }

    /// `k` distinct indices from `0..n`, in sorted order.
    pub fn choose_indices(&mut self, n: usize, k: usize) -> Vec<usize> {
        assert!(k <= n, "cannot choose {k} of {n}");
        self.position += 1;
        let mut picked = rand::seq::index::sample(&mut self.inner, n, k).into_vec();
        picked.sort_unstable();
        picked
    }
}

/// `n` independent draws from N(mu, sigma²).
pub fn sample_normal(rng: &mut RngStream, mu: f64, sigma: f64, n: usize) -> Result<Vec<f64>> {
    if !(sigma >= 0.0) || !sigma.is_finite() || !mu.is_finite() {
        return Err(domain(format!(
            "sample_normal: need finite mu and sigma >= 0, got ({mu}, {sigma})"
        )));
    }
    Ok((0..n).map(|_| mu + sigma * rng.standard_normal()).collect())
}
