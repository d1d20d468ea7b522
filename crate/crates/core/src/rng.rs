//! Deterministic, splittable random-number streams.
//!
//! Every Monte Carlo estimator in this crate draws from a ChaCha stream keyed
//! by `(seed, job, sample)`. Worker threads never share generator state, so
//! results are bit-identical for any worker count and any partition of the
//! sample range.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream factory for one logical run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Streams {
    pub seed: u64,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    /// Generator for one (job, sample) cell.
    ///
    /// Jobs index independent estimator invocations (quadrature nodes,
    /// evaluation points); samples index paths within a job. Both are folded
    /// into the 64-bit ChaCha stream id, so jobs and samples below 2^32 are
    /// guaranteed collision-free.
    pub fn rng(&self, job: u64, sample: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream((job << 32) ^ sample);
        rng
    }
}

/// Fold an arbitrary label into a job id (splitmix64 finalizer).
pub fn job_id(label: u64) -> u64 {
    let mut z = label.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_deterministic_and_distinct() {
        let s = Streams::new(7);
        let a: Vec<f64> = (0..8).map(|_| s.rng(1, 2).random()).collect();
        let b: Vec<f64> = {
            let mut r = s.rng(1, 2);
            (0..8).map(|_| r.random()).collect()
        };
        // Same cell restarted from the front reproduces the prefix.
        assert_eq!(a[0], b[0]);
        let mut r1 = s.rng(1, 2);
        let mut r2 = s.rng(1, 3);
        let x1: f64 = r1.random();
        let x2: f64 = r2.random();
        assert_ne!(x1, x2);
    }
}
