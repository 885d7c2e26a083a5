//! Seeded random streams.
//!
//! Every random quantity in an experiment is drawn from a [`SeededRng`]
//! derived from a user seed, a purpose tag and an index (column, scenario,
//! repetition). Bits come from ChaCha8, whose output is specified
//! independently of platform and word size, so runs are bit-reproducible.
//!
//! The key of a derived stream is `seed_from_u64(mix(seed, tag))`, where
//! `mix` is the SplitMix64 finalizer applied to `seed ^ (tag * 0x9E37_79B9_7F4A_7C15)`,
//! and the ChaCha stream number is the index. Streams for different
//! indices are independent and never overlap.
//!
//! Gaussian samples use the Box–Muller transform. Each pair of uniforms
//! `(u1, u2)` yields `r cos(2 pi u2)` first and `r sin(2 pi u2)` on the
//! following call, with `r = sqrt(-2 ln(1 - u1))`.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Purpose tags for derived streams.
pub mod tag {
    pub const SEQUENCE: u64 = 1;
    pub const NOISE: u64 = 2;
    pub const EXCITATION: u64 = 3;
    pub const SCENARIO: u64 = 4;
    pub const SYSTEM: u64 = 5;
    pub const INSTANCE: u64 = 6;
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug)]
pub struct SeededRng {
    inner: ChaCha8Rng,
    spare: Option<f64>,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self::derive(seed, 0, 0)
    }

    pub fn derive(seed: u64, tag: u64, index: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(mix(seed, tag));
        inner.set_stream(index);
        Self { inner, spare: None }
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// A fresh seed for a nested experiment.
    pub fn next_seed(&mut self) -> u64 {
        self.inner.random::<u64>()
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        self.spare = Some(r * s);
        r * c
    }

    pub fn normal_vector(&mut self, len: usize, scale: f64) -> DVector<f64> {
        DVector::from_fn(len, |_, _| scale * self.standard_normal())
    }

    pub fn uniform_vector(&mut self, lo: &DVector<f64>, hi: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(lo.len(), |i, _| self.uniform_in(lo[i], hi[i]))
    }
}
