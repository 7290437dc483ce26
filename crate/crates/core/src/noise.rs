//! Counter-addressed Gaussian noise.
//!
//! Every (seed, domain, path, mode) owns an independent ChaCha8 stream. Step
//! `c` of a stream occupies 64-bit words `2c` and `2c+1`, which are turned into
//! a pair of standard normals by the Box–Muller transform evaluated with
//! `libm`, so a given address yields the same pair on every platform and under
//! any scheduling.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

const PATH_BITS: u32 = 38;
const MODE_BITS: u32 = 24;

pub const MAX_PATHS: u64 = 1 << PATH_BITS;
pub const MAX_MODES: u64 = 1 << MODE_BITS;

/// Which family of increments a stream feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    /// Per-step increments, shared by exact and numerical steppers.
    Step = 0,
    /// Per-step increments of the scalar Brownian benchmark.
    Brownian = 1,
    /// Aggregated increments over checkpoint intervals.
    Jump = 2,
    /// Aggregated increments of the scalar Brownian benchmark.
    BrownianJump = 3,
}

pub fn stream_id(domain: Domain, path: u64, mode: u64) -> u64 {
    assert!(path < MAX_PATHS, "path index {path} out of range");
    assert!(mode < MAX_MODES, "mode index {mode} out of range");
    ((domain as u64) << (PATH_BITS + MODE_BITS)) | (path << MODE_BITS) | mode
}

#[derive(Debug, Clone)]
pub struct NoiseStream {
    rng: ChaCha8Rng,
}

impl NoiseStream {
    /// Stream positioned at counter 0.
    pub fn new(seed: u64, domain: Domain, path: u64, mode: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id(domain, path, mode));
        rng.set_word_pos(0);
        Self { rng }
    }

    /// Moves to step counter `c`.
    pub fn seek(&mut self, c: u64) {
        self.rng.set_word_pos(4 * u128::from(c));
    }

    /// Current step counter.
    pub fn counter(&self) -> u64 {
        (self.rng.get_word_pos() / 4) as u64
    }

    #[inline]
    fn uniforms(&mut self) -> (f64, f64) {
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        let a = self.rng.next_u64();
        let b = self.rng.next_u64();
        (((a >> 11) + 1) as f64 * SCALE, (b >> 11) as f64 * SCALE)
    }

    /// Pair of independent standard normals for the current counter; advances
    /// the counter by one.
    #[inline]
    pub fn normal_pair(&mut self) -> (f64, f64) {
        let (u1, u2) = self.uniforms();
        let r = (-2.0 * libm::log(u1)).sqrt();
        let (s, c) = libm::sincos(std::f64::consts::TAU * u2);
        (r * c, r * s)
    }

    /// First normal of the current pair; advances the counter by one.
    #[inline]
    pub fn normal(&mut self) -> f64 {
        let (u1, u2) = self.uniforms();
        (-2.0 * libm::log(u1)).sqrt() * libm::cos(std::f64::consts::TAU * u2)
    }

    /// Pair stored at an explicit address.
    pub fn pair_at(seed: u64, domain: Domain, path: u64, mode: u64, c: u64) -> (f64, f64) {
        let mut s = Self::new(seed, domain, path, mode);
        s.seek(c);
        s.normal_pair()
    }
}
