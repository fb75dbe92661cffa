//! Seeded random streams.
//!
//! Every stream is a ChaCha8 generator (a counter-based cipher stream) whose key is the
//! SHA-256 digest of the base seed and a path of labels. Two streams with different paths
//! are independent; the same path always yields the same bytes, on every platform.

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

const DOMAIN: &[u8] = b"knockforge-stream-v1";

#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    path: Vec<String>,
    rng: ChaCha8Rng,
}

fn key_for(seed: u64, path: &[String]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(DOMAIN);
    h.update(seed.to_le_bytes());
    for label in path {
        h.update((label.len() as u64).to_le_bytes());
        h.update(label.as_bytes());
    }
    let digest = h.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    key
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self::with_path(seed, Vec::new())
    }

    fn with_path(seed: u64, path: Vec<String>) -> Self {
        let rng = ChaCha8Rng::from_seed(key_for(seed, &path));
        RngStream { seed, path, rng }
    }

    /// Child stream keyed by this stream's path plus `label`. Independent of how much of
    /// the parent has been consumed.
    pub fn derive(&self, label: &str) -> RngStream {
        let mut path = self.path.clone();
        path.push(label.to_string());
        Self::with_path(self.seed, path)
    }

    pub fn derive_index(&self, label: &str, index: u64) -> RngStream {
        self.derive(&format!("{label}#{index}"))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path(&self) -> &[String] {
        &self.path
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// Uniform on [0, 1).
    pub fn uniform(&mut self) -> f64 {
        // 53 random mantissa bits
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in 0..n (n > 0), by rejection so it is exactly uniform.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        let n = n as u64;
        let zone = u64::MAX - (u64::MAX % n) - 1;
        loop {
            let v = self.rng.next_u64();
            if v <= zone {
                return (v % n) as usize;
            }
        }
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.below(i + 1);
            xs.swap(i, j);
        }
    }

    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut v: Vec<usize> = (0..n).collect();
        self.shuffle(&mut v);
        v
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}
