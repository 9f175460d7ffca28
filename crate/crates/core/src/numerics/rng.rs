//! Seedable, splittable random streams.
//!
//! Every stochastic draw in the crate (network noise, dropout masks,
//! minibatch indices, generator noise) comes from an [`RngStream`]. Streams
//! are ChaCha8 instances addressed by a 64-bit key and a 64-bit stream id;
//! [`RngStream::child`] derives a sub-stream from `(key, stream, index)` so
//! that realizations and components get independent sequences regardless of
//! the order in which they run.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::Matrix;

pub const ALGORITHM_ID: &str = "chacha8";

#[derive(Debug, Clone)]
pub struct RngStream {
    key: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

/// Identifies a stream; recorded in traces and reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamId {
    pub key: u64,
    pub stream: u64,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    fn with_stream(key: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(key);
        inner.set_stream(stream);
        Self { key, stream, inner }
    }

    /// Independent sub-stream number `index`. Does not advance `self`.
    pub fn child(&self, index: u64) -> Self {
        let key = splitmix64(self.key ^ splitmix64(self.stream.wrapping_add(0x5151)));
        Self::with_stream(key, index)
    }

    pub fn id(&self) -> StreamId {
        StreamId {
            key: self.key,
            stream: self.stream,
        }
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn uniform_range(&mut self, low: f64, high: f64) -> f64 {
        low + (high - low) * self.uniform()
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    pub fn index(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    pub fn normal_matrix(&mut self, rows: usize, cols: usize) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| self.normal())
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_sequence() {
        let mut a = RngStream::new(7);
        let mut b = RngStream::new(7);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn children_differ_and_are_reproducible() {
        let root = RngStream::new(3);
        let mut c0 = root.child(0);
        let mut c1 = root.child(1);
        let mut c0b = root.child(0);
        let x: Vec<u64> = (0..8).map(|_| c0.next_u64()).collect();
        let y: Vec<u64> = (0..8).map(|_| c1.next_u64()).collect();
        let z: Vec<u64> = (0..8).map(|_| c0b.next_u64()).collect();
        assert_ne!(x, y);
        assert_eq!(x, z);
        // grandchildren of different children differ too
        let mut g0 = root.child(0).child(0);
        let mut g1 = root.child(1).child(0);
        assert_ne!(g0.next_u64(), g1.next_u64());
    }

    #[test]
    fn child_does_not_advance_parent() {
        let mut a = RngStream::new(11);
        let mut b = RngStream::new(11);
        let _ = a.child(5);
        assert_eq!(a.next_u64(), b.next_u64());
    }

    #[test]
    fn normal_moments() {
        let mut r = RngStream::new(1);
        let n = 50_000;
        let xs: Vec<f64> = (0..n).map(|_| r.normal()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.02);
        assert!((var - 1.0).abs() < 0.03);
    }
}
