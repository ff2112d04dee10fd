//! Seeded random number generation with a pinned, platform-independent
//! contract.
//!
//! Generator: ChaCha8 (`rand_chacha::ChaCha8Rng`) keyed through
//! `seed_from_u64` with a documented 64-bit seed. Normal variates come from
//! the Box-Muller transform applied to the generator's canonical uniform
//! doubles, so identical seeds reproduce identical draws on any platform.
//! Independent sub-streams (channel draws vs. solver initialization) use the
//! ChaCha stream counter.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;

/// Stream id for channel and scene generation.
pub const STREAM_SCENE: u64 = 0;
/// Stream id for solver initialization (analog phases).
pub const STREAM_SOLVER_INIT: u64 = 1;

/// Deterministic generator handed to scene generation and solver init.
#[derive(Debug, Clone)]
pub struct SeededRng {
    inner: ChaCha8Rng,
    /// Second Box-Muller output buffered between `normal` calls.
    spare: Option<f64>,
}

impl SeededRng {
    pub fn from_seed(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { inner, spare: None }
    }

    /// Canonical uniform double in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    /// Uniform in [lo, hi).
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Standard normal via Box-Muller. u1 is shifted into (0, 1] so the log
    /// is always finite.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (TAU * u2).sin_cos();
        self.spare = Some(r * s);
        r * c
    }

    /// Circularly-symmetric complex Gaussian with E|x|^2 = variance.
    pub fn complex_normal(&mut self, variance: f64) -> Complex64 {
        let scale = (variance / 2.0).sqrt();
        let re = self.normal();
        let im = self.normal();
        Complex64::new(scale * re, scale * im)
    }

    /// Uniform phase on the unit circle.
    pub fn unit_phase(&mut self) -> Complex64 {
        let phi = self.uniform_in(0.0, TAU);
        Complex64::new(phi.cos(), phi.sin())
    }
}
