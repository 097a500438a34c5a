//! Seeded randomness with named streams.
//!
//! Every stochastic choice in the toolkit draws from a [`StreamRng`], keyed by
//! a run seed plus a short stream label. Distinct labels give independent
//! streams, so e.g. skipping the pseudo-supervised stage of a run leaves the
//! PU-stage draw sequence untouched. Identical (seed, label) pairs reproduce
//! the same sequence across runs and platforms.

use rand::Rng as _;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, StandardNormal};

/// FNV-1a over the label bytes; stable everywhere, good enough to separate
/// the handful of stream names this crate uses.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x1000_0000_01b3);
    }
    h
}

/// A deterministic random stream identified by (seed, label).
pub struct StreamRng {
    seed: u64,
    label: String,
    inner: ChaCha8Rng,
}

impl StreamRng {
    pub fn new(seed: u64, label: &str) -> Self {
        let derived = seed ^ fnv1a(label.as_bytes()).rotate_left(17);
        StreamRng {
            seed,
            label: label.to_string(),
            inner: ChaCha8Rng::seed_from_u64(derived),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Uniform draw in [0, 1).
    pub fn unit(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// Beta(alpha, alpha) draw; `alpha` must be positive.
    pub fn beta_symmetric(&mut self, alpha: f64) -> f64 {
        let dist = Beta::new(alpha, alpha).expect("beta shape must be positive");
        dist.sample(&mut self.inner)
    }

    /// Uniform index in [0, n).
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.gen_range(0..n)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.unit() < p
    }

    /// Fisher-Yates shuffle, order fixed by the stream.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

impl std::fmt::Debug for StreamRng {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "StreamRng(seed={}, label={:?})", self.seed, self.label)
    }
}
