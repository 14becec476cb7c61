//! Counter-based random streams and the samplers built on them.
//!
//! A [`RandomStream`] is a Philox4x32-10 generator keyed by the 64-bit seed.
//! The 128-bit counter holds the call index in its low half and the
//! `stream_id` in its high half, so every `(seed, stream_id)` pair names its
//! own substream and creating one costs nothing.

use std::fmt;
use std::sync::Arc;

use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Error, Result};
use crate::numerics::adaptive_simpson;

const PHILOX_M0: u32 = 0xD251_1F53;
const PHILOX_M1: u32 = 0xCD9E_8D57;
const PHILOX_W0: u32 = 0x9E37_79B9;
const PHILOX_W1: u32 = 0xBB67_AE85;

/// One Philox4x32 block with ten rounds.
pub fn philox4x32_10(counter: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let mut ctr = counter;
    let mut k = key;
    for round in 0..10 {
        if round > 0 {
            k[0] = k[0].wrapping_add(PHILOX_W0);
            k[1] = k[1].wrapping_add(PHILOX_W1);
        }
        let p0 = u64::from(PHILOX_M0) * u64::from(ctr[0]);
        let p1 = u64::from(PHILOX_M1) * u64::from(ctr[2]);
        let (hi0, lo0) = ((p0 >> 32) as u32, p0 as u32);
        let (hi1, lo1) = ((p1 >> 32) as u32, p1 as u32);
        ctr = [hi1 ^ ctr[1] ^ k[0], lo1, hi0 ^ ctr[3] ^ k[1], lo0];
    }
    ctr
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A replayable random stream identified by `(seed, stream_id)`.
///
/// Streams are plain values: clone one to replay it, send it to another
/// thread to hand over ownership. Never share one stream between workers;
/// give each worker its own [`substream`](Self::substream) instead.
#[derive(Clone, PartialEq, Eq)]
pub struct RandomStream {
    seed: u64,
    stream_id: u64,
    block: u64,
    buf: [u32; 4],
    pos: u8,
}

impl fmt::Debug for RandomStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RandomStream")
            .field("seed", &self.seed)
            .field("stream_id", &self.stream_id)
            .field("words_used", &self.words_used())
            .finish()
    }
}

impl RandomStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id, block: 0, buf: [0; 4], pos: 4 }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Number of 32-bit words drawn so far (the call index).
    pub fn words_used(&self) -> u64 {
        if self.pos == 4 && self.block == 0 {
            0
        } else {
            (self.block - 1) * 4 + u64::from(self.pos)
        }
    }

    /// Fresh stream with id `stream_id + index`, used for per-sample and per-path mapping.
    pub fn substream(&self, index: u64) -> Self {
        Self::new(self.seed, self.stream_id.wrapping_add(index))
    }

    /// Fresh stream whose id is a hash of this id and `label`.
    ///
    /// Used to open a new family of substreams (for example one per
    /// replication) that does not overlap `substream` offsets in practice.
    pub fn fork(&self, label: u64) -> Self {
        let id = splitmix64(self.stream_id ^ splitmix64(label.wrapping_add(0x5851_F42D_4C95_7F2D)));
        Self::new(self.seed, id)
    }

    fn refill(&mut self) {
        let counter = [
            self.block as u32,
            (self.block >> 32) as u32,
            self.stream_id as u32,
            (self.stream_id >> 32) as u32,
        ];
        let key = [self.seed as u32, (self.seed >> 32) as u32];
        self.buf = philox4x32_10(counter, key);
        self.block += 1;
        self.pos = 0;
    }

    #[inline]
    pub fn next_u32(&mut self) -> u32 {
        if self.pos == 4 {
            self.refill();
        }
        let w = self.buf[usize::from(self.pos)];
        self.pos += 1;
        w
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let lo = u64::from(self.next_u32());
        let hi = u64::from(self.next_u32());
        (hi << 32) | lo
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on the open interval `(0, 1)`.
    #[inline]
    pub fn next_open01(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform index in `0..n` (Lemire's multiply-shift, one word per draw).
    pub fn next_index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> Result<f64> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidRange { lo, hi });
        }
        let x = lo + (hi - lo) * self.next_f64();
        // Rounding can land on `hi`; step back inside the half-open range.
        Ok(if x < hi { x } else { f64::from_bits(hi.to_bits() - 1).max(lo) })
    }

    /// Standard normal via Box–Muller: always two uniforms per variate.
    #[inline]
    pub fn std_normal(&mut self) -> f64 {
        let u1 = self.next_open01();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn normal(&mut self, mean: f64, sd: f64) -> Result<f64> {
        if !(sd >= 0.0) || !sd.is_finite() {
            return Err(invalid("sd", format!("must be finite and non-negative, got {sd}")));
        }
        let z = self.std_normal();
        Ok(if sd == 0.0 { mean } else { mean + sd * z })
    }

    pub fn poisson(&mut self, mean: f64) -> Result<u64> {
        if !(mean >= 0.0) || !mean.is_finite() {
            return Err(invalid("mean", format!("must be finite and non-negative, got {mean}")));
        }
        Ok(if mean == 0.0 {
            0
        } else if mean < 10.0 {
            self.poisson_inversion(mean)
        } else {
            self.poisson_ptrs(mean)
        })
    }

    fn poisson_inversion(&mut self, mean: f64) -> u64 {
        let u = self.next_f64();
        let mut p = (-mean).exp();
        let mut cdf = p;
        let mut k = 0u64;
        while u >= cdf && k < 1000 {
            k += 1;
            p *= mean / k as f64;
            cdf += p;
        }
        k
    }

    /// Hörmann's transformed rejection with squeeze (PTRS).
    fn poisson_ptrs(&mut self, mean: f64) -> u64 {
        let slam = mean.sqrt();
        let loglam = mean.ln();
        let b = 0.931 + 2.53 * slam;
        let a = -0.059 + 0.02483 * b;
        let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
        let vr = 0.9277 - 3.6224 / (b - 2.0);
        loop {
            let u = self.next_f64() - 0.5;
            let v = self.next_f64();
            let us = 0.5 - u.abs();
            let k = ((2.0 * a / us + b) * u + mean + 0.43).floor();
            if us >= 0.07 && v <= vr {
                return k as u64;
            }
            if k < 0.0 || (us < 0.013 && v > us) {
                continue;
            }
            let lhs = v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln();
            let rhs = -mean + k * loglam - ln_gamma(k + 1.0);
            if lhs <= rhs {
                return k as u64;
            }
        }
    }

    /// Binomial(n, p): CDF inversion when `n·min(p, 1-p)` is small, Bernoulli counting otherwise.
    pub fn binomial(&mut self, n: u64, p: f64) -> Result<u64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(invalid("p", format!("must lie in [0, 1], got {p}")));
        }
        if n == 0 || p == 0.0 {
            return Ok(0);
        }
        if p == 1.0 {
            return Ok(n);
        }
        let flip = p > 0.5;
        let q = if flip { 1.0 - p } else { p };
        let k = if (n as f64) * q < 300.0 {
            let u = self.next_f64();
            let ratio = q / (1.0 - q);
            let mut pmf = ((n as f64) * (-q).ln_1p()).exp();
            let mut cdf = pmf;
            let mut k = 0u64;
            while u >= cdf && k < n {
                pmf *= ratio * (n - k) as f64 / (k + 1) as f64;
                k += 1;
                cdf += pmf;
            }
            k
        } else {
            (0..n).filter(|_| self.next_f64() < q).count() as u64
        };
        Ok(if flip { n - k } else { k })
    }
}

/// Draw from U(lo, hi).
pub fn sample_uniform(stream: &mut RandomStream, lo: f64, hi: f64) -> Result<f64> {
    stream.uniform(lo, hi)
}

/// Draw from N(mean, sd²).
pub fn sample_normal(stream: &mut RandomStream, mean: f64, sd: f64) -> Result<f64> {
    stream.normal(mean, sd)
}

/// Draw from Poisson(mean).
pub fn sample_poisson(stream: &mut RandomStream, mean: f64) -> Result<u64> {
    stream.poisson(mean)
}

/// Jump intensity λ(t) of a Poisson process.
#[derive(Clone)]
pub enum Intensity {
    Constant(f64),
    Function(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Intensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Intensity::Constant(l) => write!(f, "Constant({l})"),
            Intensity::Function(_) => f.write_str("Function(..)"),
        }
    }
}

/// Absolute tolerance for numerically integrated intensities.
pub const INTENSITY_TOL: f64 = 1e-10;

impl Intensity {
    pub fn function(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Intensity::Function(Arc::new(f))
    }

    pub fn at(&self, t: f64) -> f64 {
        match self {
            Intensity::Constant(l) => *l,
            Intensity::Function(f) => f(t),
        }
    }

    /// Λ(a, b) = ∫_a^b λ(s) ds.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        match self {
            Intensity::Constant(l) => l * (b - a),
            Intensity::Function(f) => adaptive_simpson(|s| f(s), a, b, INTENSITY_TOL),
        }
    }

    /// Check λ > 0 at the given probe points.
    pub fn validate_on(&self, probes: impl IntoIterator<Item = f64>) -> Result<()> {
        for t in probes {
            let l = self.at(t);
            if !(l > 0.0) || !l.is_finite() {
                return Err(invalid("intensity", format!("λ({t}) = {l} is not positive and finite")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn philox_known_answers() {
        assert_eq!(philox4x32_10([0; 4], [0; 2]), [0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8]);
        assert_eq!(
            philox4x32_10([u32::MAX; 4], [u32::MAX; 2]),
            [0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd]
        );
        assert_eq!(
            philox4x32_10([0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344], [0xa4093822, 0x299f31d0]),
            [0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1]
        );
    }

    #[test]
    fn replay_and_substreams() {
        let mut a = RandomStream::new(1, 0);
        let mut b = RandomStream::new(1, 0);
        assert_eq!(a.next_f64(), b.next_f64());
        assert_eq!(a.words_used(), 2);
        let mut c = RandomStream::new(1, 1);
        assert_ne!(a.next_u64(), c.next_u64());
        assert_eq!(RandomStream::new(3, 10).substream(5), RandomStream::new(3, 15));
    }

    #[test]
    fn uniform_rejects_bad_range() {
        let mut s = RandomStream::new(0, 0);
        assert!(matches!(s.uniform(1.0, 1.0), Err(Error::InvalidRange { .. })));
        assert!(s.uniform(2.0, 1.0).is_err());
        for _ in 0..1000 {
            let x = s.uniform(-1.0, 2.0).unwrap();
            assert!((-1.0..2.0).contains(&x));
        }
    }

    #[test]
    fn normal_degenerate_and_errors() {
        let mut s = RandomStream::new(0, 0);
        assert_eq!(s.normal(3.0, 0.0).unwrap(), 3.0);
        assert!(s.normal(0.0, -1.0).is_err());
        assert_eq!(s.words_used(), 4, "sd = 0 still consumes its two uniforms");
    }

    #[test]
    fn poisson_errors_and_zero() {
        let mut s = RandomStream::new(0, 0);
        assert_eq!(s.poisson(0.0).unwrap(), 0);
        assert!(s.poisson(-1.0).is_err());
        assert!(s.poisson(f64::NAN).is_err());
        assert!(s.poisson(f64::INFINITY).is_err());
    }

    #[test]
    fn binomial_edges() {
        let mut s = RandomStream::new(0, 0);
        assert_eq!(s.binomial(0, 0.3).unwrap(), 0);
        assert_eq!(s.binomial(7, 1.0).unwrap(), 7);
        assert_eq!(s.binomial(7, 0.0).unwrap(), 0);
        assert!(s.binomial(3, 1.5).is_err());
        for _ in 0..100 {
            assert!(s.binomial(5, 0.7).unwrap() <= 5);
        }
    }

    #[test]
    fn constant_intensity_integral_is_closed_form() {
        assert_eq!(Intensity::Constant(2.0).integral(1.0, 4.0), 6.0);
        let lin = Intensity::function(|t| 1.0 + t);
        assert!((lin.integral(0.0, 2.0) - 4.0).abs() < 1e-10);
        assert!(Intensity::function(|t| t - 1.0).validate_on([0.0, 2.0]).is_err());
    }
}
