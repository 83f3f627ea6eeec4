//! Counter-based random streams.
//!
//! Every random quantity in the crate is drawn from a stream identified by a
//! `(master_seed, stream_index)` pair. The pair selects a ChaCha8 key and a
//! ChaCha stream number, so the sequence a path sees depends only on its own
//! index and never on the order in which workers pick up paths.
//!
//! Gaussian variates use the basic Box-Muller transform on 53-bit uniforms:
//!
//! ```text
//! u1 = ((x1 >> 11) + 1) * 2^-53      in (0, 1]
//! u2 =  (x2 >> 11)     * 2^-53        in [0, 1)
//! z1 = sqrt(-2 ln u1) cos(2 pi u2),  z2 = sqrt(-2 ln u1) sin(2 pi u2)
//! ```
//!
//! Both outputs are used, in that order.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use std::f64::consts::TAU;

const SCALE_53: f64 = 1.0 / 9_007_199_254_740_992.0;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Identifier of an independent random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        Self {
            master_seed,
            stream_index,
        }
    }

    /// A child stream: the pair `(self, index)` is hashed into a new master
    /// seed, so children of distinct parents do not share sequences.
    pub fn substream(&self, index: u64) -> RngStream {
        let key = splitmix64(self.master_seed ^ splitmix64(self.stream_index.wrapping_add(1)));
        RngStream {
            master_seed: key,
            stream_index: index,
        }
    }

    pub fn rng(&self) -> StreamRng {
        let mut inner = ChaCha8Rng::seed_from_u64(self.master_seed);
        inner.set_stream(self.stream_index);
        StreamRng { inner, spare: None }
    }
}

/// Generator bound to one [`RngStream`].
#[derive(Debug, Clone)]
pub struct StreamRng {
    inner: ChaCha8Rng,
    spare: Option<f64>,
}

impl StreamRng {
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * SCALE_53
    }

    /// Uniform on `(0, 1]`.
    fn uniform_open_low(&mut self) -> f64 {
        ((self.inner.next_u64() >> 11) + 1) as f64 * SCALE_53
    }

    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.uniform_open_low();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (TAU * u2).sin_cos();
        self.spare = Some(r * s);
        r * c
    }

    pub fn fill_normal(&mut self, out: &mut [f64], scale: f64) {
        for x in out.iter_mut() {
            *x = scale * self.standard_normal();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_streams_agree() {
        let mut a = RngStream::new(7, 3).rng();
        let mut b = RngStream::new(7, 3).rng();
        for _ in 0..1000 {
            assert_eq!(a.standard_normal().to_bits(), b.standard_normal().to_bits());
        }
    }

    #[test]
    fn distinct_indices_differ() {
        let mut a = RngStream::new(7, 3).rng();
        let mut b = RngStream::new(7, 4).rng();
        let same = (0..100).filter(|_| a.next_u64() == b.next_u64()).count();
        assert_eq!(same, 0);
    }

    #[test]
    fn substreams_depend_on_parent() {
        let a = RngStream::new(1, 0).substream(5);
        let b = RngStream::new(1, 1).substream(5);
        let c = RngStream::new(2, 0).substream(5);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, RngStream::new(1, 0).substream(5));
    }

    #[test]
    fn uniform_range() {
        let mut r = RngStream::new(0, 0).rng();
        for _ in 0..10_000 {
            let u = r.uniform();
            assert!((0.0..1.0).contains(&u));
            let v = r.uniform_open_low();
            assert!(v > 0.0 && v <= 1.0);
        }
    }

    #[test]
    fn normal_first_two_moments() {
        let mut r = RngStream::new(11, 0).rng();
        let m = 200_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..m {
            let z = r.standard_normal();
            s += z;
            s2 += z * z;
        }
        let mean = s / m as f64;
        let var = s2 / m as f64 - mean * mean;
        assert!(mean.abs() < 4.0 / (m as f64).sqrt());
        assert!((var - 1.0).abs() < 4.0 * (2.0 / m as f64).sqrt());
    }
}
