//! Scalar primitives shared by every model: scaled LogSumExp, the logistic
//! sigmoid, truncated Gaussian sampling and the seeded random stream.
//!
//! All arithmetic is `f64`. Transcendental functions come from `libm`, a pure
//! Rust port of musl's math library, so results do not depend on the host C
//! library.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

/// Deterministic random stream identified by `(seed, stream_id)`.
///
/// Backed by ChaCha8 (`rand_chacha::ChaCha8Rng`): the 256-bit key is expanded
/// from `seed` with `SeedableRng::seed_from_u64` (PCG32 expansion) and
/// `stream_id` selects the ChaCha stream (nonce). Different stream ids give
/// non-overlapping keystreams under the same key. This choice is fixed; golden
/// tests pin sequences produced by it.
///
/// Cloning forks the stream: the clone continues with exactly the draws the
/// original would have produced.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        RngStream {
            seed,
            stream_id,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform on `[lo, hi)`.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    pub fn normal(&mut self, mean: f64, sigma: f64) -> f64 {
        mean + sigma * self.standard_normal()
    }

    /// Uniform index in `0..n`. `n` must be positive.
    pub fn index(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
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

/// SplitMix64 finalizer. Used to derive child seeds from a root seed and a
/// tag so that unrelated consumers never share a key.
pub fn mix_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn check_lse_args(values: &[f64], beta: f64) -> Result<()> {
    if values.is_empty() {
        return Err(Error::contract("LogSumExp of an empty sequence"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::contract("LogSumExp input is not finite"));
    }
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::contract("LogSumExp scale must be positive and finite"));
    }
    Ok(())
}

/// Scaled LogSumExp `(1/beta) * ln sum_i exp(beta * x_i)`, a smooth upper
/// approximation of the maximum.
///
/// The shift is always `beta * max(values)`, so the result is finite for every
/// finite input and lies in `[max, max + ln(n)/beta]`.
pub fn lse_scaled(values: &[f64], beta: f64) -> Result<f64> {
    check_lse_args(values, beta)?;
    Ok(lse_max(values, beta))
}

/// Scaled LogSumExp with scale `-beta`, a smooth lower approximation of the
/// minimum. Shifted by `-beta * min(values)`; the result lies in
/// `[min - ln(n)/beta, min]`.
pub fn lse_scaled_neg(values: &[f64], beta: f64) -> Result<f64> {
    check_lse_args(values, beta)?;
    Ok(lse_min(values, beta))
}

/// Unchecked [`lse_scaled`] for hot loops.
#[inline]
pub(crate) fn lse_max(values: &[f64], beta: f64) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = values.iter().map(|&v| exp(beta * (v - m))).sum();
    m + ln(s) / beta
}

/// Unchecked [`lse_scaled_neg`] for hot loops.
#[inline]
pub(crate) fn lse_min(values: &[f64], beta: f64) -> f64 {
    let m = values.iter().copied().fold(f64::INFINITY, f64::min);
    let s: f64 = values.iter().map(|&v| exp(-beta * (v - m))).sum();
    m - ln(s) / beta
}

/// Logistic sigmoid `1 / (1 + exp(-x))`, evaluated on the branch that never
/// overflows.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + exp(-x))
    } else {
        let e = exp(x);
        e / (1.0 + e)
    }
}

/// Probability mass of the standard normal on `[lo, hi]`.
fn normal_mass(lo: f64, hi: f64) -> f64 {
    let s = core::f64::consts::FRAC_1_SQRT_2;
    0.5 * (libm::erf(hi * s) - libm::erf(lo * s))
}

/// Draw from the standard normal conditioned on `[lo, hi]`.
///
/// Plain rejection from the untruncated normal when the interval holds at
/// least a quarter of the mass (the usual `[-2, 2]` case accepts about 95 % of
/// draws). Narrow or tail intervals use Robert's (1995) proposals: uniform on
/// the interval, or a translated exponential for one-sided tails.
pub fn sample_truncated_gaussian(rng: &mut RngStream, lo: f64, hi: f64) -> Result<f64> {
    if !(lo < hi) {
        return Err(Error::contract("truncated Gaussian needs lo < hi"));
    }
    if normal_mass(lo, hi) >= 0.25 {
        loop {
            let v = rng.standard_normal();
            if v >= lo && v <= hi {
                return Ok(v);
            }
        }
    }
    if lo >= 0.0 {
        Ok(tail_sample(rng, lo, hi))
    } else if hi <= 0.0 {
        Ok(-tail_sample(rng, -hi, -lo))
    } else {
        // Straddles zero yet holds little mass, so the interval is narrow.
        Ok(uniform_proposal(rng, lo, hi, 0.0))
    }
}

fn uniform_proposal(rng: &mut RngStream, lo: f64, hi: f64, mode: f64) -> f64 {
    loop {
        let v = rng.uniform_in(lo, hi);
        if v > hi {
            continue;
        }
        let accept = exp(0.5 * (mode * mode - v * v));
        if rng.uniform() <= accept {
            return v;
        }
    }
}

/// Sample on `[lo, hi]` with `0 <= lo`.
fn tail_sample(rng: &mut RngStream, lo: f64, hi: f64) -> f64 {
    let root = libm::sqrt(lo * lo + 4.0);
    let alpha = 0.5 * (lo + root);
    let uniform_width = 2.0 / (lo + root) * exp(0.25 * (lo * lo - lo * root) + 0.5);
    if hi - lo < uniform_width {
        return uniform_proposal(rng, lo, hi, lo);
    }
    loop {
        let u = 1.0 - rng.uniform();
        let v = lo - ln(u) / alpha;
        if v > hi {
            continue;
        }
        let accept = exp(-0.5 * (v - alpha) * (v - alpha));
        if rng.uniform() <= accept {
            return v;
        }
    }
}
