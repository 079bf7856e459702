//! Seeded Gumbel and Laplace samplers.
//!
//! Samples are taken over ideal reals through `f64`; no floating-point
//! hardening (snapping, discrete noise) is attempted.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{invalid, Result};
use crate::math;

/// Scale `b > 0` of a Gumbel or Laplace distribution.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct NoiseScale(f64);

impl NoiseScale {
    pub fn new(b: f64) -> Result<Self> {
        if !(b.is_finite() && b > 0.0) {
            return Err(invalid!("noise scale must be positive and finite, got {b}"));
        }
        Ok(Self(b))
    }

    /// Scale `1/ε`.
    pub fn from_eps(eps: f64) -> Result<Self> {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(invalid!("eps must be positive and finite, got {eps}"));
        }
        Self::new(1.0 / eps)
    }

    pub fn get(&self) -> f64 {
        self.0
    }
}

/// Counter-based ChaCha8 stream keyed by a 64-bit seed.
///
/// `split(i)` derives an independent child stream, so work fanned out over
/// splits reproduces bit-for-bit regardless of scheduling.
#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { seed, stream, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Independent child stream `index`; does not advance `self`.
    pub fn split(&self, index: u64) -> Self {
        let child = splitmix64(self.stream ^ splitmix64(index.wrapping_add(1).wrapping_mul(GOLDEN)));
        Self::with_stream(self.seed, child)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on the open interval (0, 1): 53 random bits centred in their cell.
    pub fn uniform_open(&mut self) -> f64 {
        let bits = self.next_u64() >> 11;
        (bits as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..n` (n > 0), rejection sampled.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0);
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let x = self.next_u64();
            if x < zone {
                return x % n;
            }
        }
    }
}

impl RngCore for SeededRng {
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

fn clamp_open(u: f64) -> f64 {
    u.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// Inverse-CDF Gumbel draw for a given uniform `u ∈ (0,1)`.
pub fn gumbel_from_uniform(u: f64, scale: NoiseScale) -> f64 {
    let u = clamp_open(u);
    -scale.get() * math::ln(-math::ln(u))
}

/// Inverse-CDF Laplace draw for a given uniform `u ∈ (0,1)`.
pub fn laplace_from_uniform(u: f64, scale: NoiseScale) -> f64 {
    let u = clamp_open(u);
    if u < 0.5 {
        scale.get() * math::ln(2.0 * u)
    } else {
        -scale.get() * math::ln(2.0 * (1.0 - u))
    }
}

pub fn sample_gumbel(rng: &mut SeededRng, scale: NoiseScale) -> f64 {
    gumbel_from_uniform(rng.uniform_open(), scale)
}

pub fn sample_laplace(rng: &mut SeededRng, scale: NoiseScale) -> f64 {
    laplace_from_uniform(rng.uniform_open(), scale)
}

/// `Pr[Gum(b) ≤ x]`.
pub fn gumbel_cdf(x: f64, scale: NoiseScale) -> f64 {
    math::exp(-math::exp(-x / scale.get()))
}

/// `Pr[Lap(b) ≤ x]`.
pub fn laplace_cdf(x: f64, scale: NoiseScale) -> f64 {
    let b = scale.get();
    if x < 0.0 {
        0.5 * math::exp(x / b)
    } else {
        1.0 - 0.5 * math::exp(-x / b)
    }
}
