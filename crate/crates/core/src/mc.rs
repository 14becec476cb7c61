//! Crude and weighted Monte Carlo with streaming statistics.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::exec;
use crate::numerics::two_sided_quantile;
use crate::rand::RandomStream;

/// Confidence level used when an estimator returns an interval without being asked for one.
pub const DEFAULT_LEVEL: f64 = 0.95;

/// Streaming count, mean and sum of squared deviations (Welford).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct McAccumulator {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl McAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_values(values: impl IntoIterator<Item = f64>) -> Self {
        let mut acc = Self::new();
        for x in values {
            acc.push(x);
        }
        acc
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Combine two accumulators (Chan et al. pairwise update).
    pub fn merge(&self, other: &Self) -> Self {
        if other.count == 0 {
            return *self;
        }
        if self.count == 0 {
            return *other;
        }
        let n = self.count + other.count;
        let (na, nb) = (self.count as f64, other.count as f64);
        let delta = other.mean - self.mean;
        let mean = if na >= nb {
            self.mean + delta * nb / n as f64
        } else {
            other.mean - delta * na / n as f64
        };
        let m2 = self.m2 + other.m2 + delta * delta * na * nb / n as f64;
        Self { count: n, mean, m2 }
    }

    /// Unbiased sample variance m2 / (count − 1).
    pub fn variance(&self) -> Result<f64> {
        if self.count < 2 {
            return Err(Error::InsufficientData(format!(
                "variance needs at least 2 values, have {}",
                self.count
            )));
        }
        Ok((self.m2 / (self.count - 1) as f64).max(0.0))
    }

    /// Standard error √(variance / count).
    pub fn std_error(&self) -> Result<f64> {
        Ok((self.variance()? / self.count as f64).sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntervalKind {
    Asymptotic,
    Hoeffding,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub center: f64,
    pub halfwidth: f64,
    pub level: f64,
    pub kind: IntervalKind,
}

impl ConfidenceInterval {
    pub fn low(&self) -> f64 {
        self.center - self.halfwidth
    }

    pub fn high(&self) -> f64 {
        self.center + self.halfwidth
    }

    pub fn contains(&self, x: f64) -> bool {
        self.low() <= x && x <= self.high()
    }
}

/// Empirical interval mean ± q_level·√(var/N).
pub fn asymptotic_interval(acc: &McAccumulator, level: f64) -> Result<ConfidenceInterval> {
    let q = two_sided_quantile(level)?;
    Ok(ConfidenceInterval {
        center: acc.mean,
        halfwidth: q * acc.std_error()?,
        level,
        kind: IntervalKind::Asymptotic,
    })
}

/// Non-asymptotic interval with halfwidth √(8 ln(2/δ))·sup_bound/√N.
pub fn hoeffding_interval(mean: f64, n: u64, delta: f64, sup_bound: f64) -> Result<ConfidenceInterval> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid("delta", format!("must lie in (0, 1), got {delta}")));
    }
    if !(sup_bound > 0.0) {
        return Err(invalid("sup_bound", format!("must be positive, got {sup_bound}")));
    }
    if n == 0 {
        return Err(Error::InsufficientData("no samples".into()));
    }
    Ok(ConfidenceInterval {
        center: mean,
        halfwidth: (8.0 * (2.0 / delta).ln()).sqrt() * sup_bound / (n as f64).sqrt(),
        level: 1.0 - delta,
        kind: IntervalKind::Hoeffding,
    })
}

/// Accumulated samples plus the default-level asymptotic interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub acc: McAccumulator,
    pub ci: ConfidenceInterval,
}

impl McEstimate {
    pub fn from_acc(acc: McAccumulator) -> Result<Self> {
        Ok(Self { ci: asymptotic_interval(&acc, DEFAULT_LEVEL)?, acc })
    }

    pub fn estimate(&self) -> f64 {
        self.acc.mean
    }
}

fn check_value(index: usize, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Evaluation { index, value })
    }
}

/// Crude Monte Carlo for ∫_{[0,1]^d} f.
///
/// Sample `j` draws its point from `stream.substream(j)`.
pub fn crude_mc<F>(f: F, d: usize, n: usize, stream: &RandomStream) -> Result<McEstimate>
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
{
    if d == 0 {
        return Err(invalid("d", "dimension must be at least 1"));
    }
    if n < 2 {
        return Err(Error::InsufficientData(format!("crude MC needs N ≥ 2, got {n}")));
    }
    let acc = exec::accumulate_with(
        n,
        || vec![0.0; d],
        |x, j| {
            let mut s = stream.substream(j as u64);
            for xi in x.iter_mut() {
                *xi = s.next_f64();
            }
            check_value(j, f(x))
        },
    )?;
    McEstimate::from_acc(acc)
}

/// Sampler for a probability density g = w / W on ℝ^d.
pub trait DensitySampler: Sync + Send {
    fn dim(&self) -> usize;
    /// Total mass W = ∫ w.
    fn mass(&self) -> f64;
    fn sample(&self, stream: &mut RandomStream, out: &mut [f64]);
}

/// Uniform density on a box; its mass is the box volume.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl UniformBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(invalid("box", "bounds must be non-empty and of equal length"));
        }
        for (&l, &h) in lo.iter().zip(&hi) {
            if !(l < h) {
                return Err(Error::InvalidRange { lo: l, hi: h });
            }
        }
        Ok(Self { lo, hi })
    }
}

impl DensitySampler for UniformBox {
    fn dim(&self) -> usize {
        self.lo.len()
    }

    fn mass(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).product()
    }

    fn sample(&self, stream: &mut RandomStream, out: &mut [f64]) {
        for ((o, l), h) in out.iter_mut().zip(&self.lo).zip(&self.hi) {
            *o = l + (h - l) * stream.next_f64();
        }
    }
}

/// Weight w(x) = exp(−‖x‖²) on ℝ^d: mass π^{d/2}, normalized density N(0, ½·I).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianWeight {
    pub d: usize,
}

impl DensitySampler for GaussianWeight {
    fn dim(&self) -> usize {
        self.d
    }

    fn mass(&self) -> f64 {
        std::f64::consts::PI.powf(self.d as f64 / 2.0)
    }

    fn sample(&self, stream: &mut RandomStream, out: &mut [f64]) {
        for o in out.iter_mut() {
            *o = std::f64::consts::FRAC_1_SQRT_2 * stream.std_normal();
        }
    }
}

/// Weighted Monte Carlo: (W/N) Σ f(ξ_j) with ξ_j drawn from `sampler`.
///
/// The accumulator holds the values W·f(ξ_j), so its variance is
/// σ_w² = W·I_w(f²) − I_w(f)².
pub fn weighted_mc<F, S>(f: F, sampler: &S, n: usize, stream: &RandomStream) -> Result<McEstimate>
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
    S: DensitySampler + ?Sized,
{
    let w = sampler.mass();
    if !(w > 0.0) || !w.is_finite() {
        return Err(invalid("W", format!("total mass must be positive and finite, got {w}")));
    }
    if n < 2 {
        return Err(Error::InsufficientData(format!("weighted MC needs N ≥ 2, got {n}")));
    }
    let d = sampler.dim();
    let acc = exec::accumulate_with(
        n,
        || vec![0.0; d],
        |x, j| {
            let mut s = stream.substream(j as u64);
            sampler.sample(&mut s, x);
            check_value(j, w * f(x))
        },
    )?;
    McEstimate::from_acc(acc)
}

/// Lebesgue measure of D ⊂ M by sampling uniformly on the box M.
pub fn lebesgue_measure<F>(indicator: F, bounding_box: &UniformBox, n: usize, stream: &RandomStream) -> Result<McEstimate>
where
    F: Fn(&[f64]) -> bool + Sync + Send,
{
    weighted_mc(|x| if indicator(x) { 1.0 } else { 0.0 }, bounding_box, n, stream)
}

/// 4·1{x² + y² ≤ 1} on [0,1]², whose integral is π.
pub fn pi_integrand(x: &[f64]) -> f64 {
    if x[0] * x[0] + x[1] * x[1] <= 1.0 {
        4.0
    } else {
        0.0
    }
}

/// Theoretical RMSE √(π(4 − π)/N) of the π estimator.
pub fn pi_rmse(n: usize) -> f64 {
    let pi = std::f64::consts::PI;
    (pi * (4.0 - pi) / n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn welford_hand_computation() {
        let acc = McAccumulator::from_values([1.0, 2.0, 3.0]);
        assert_eq!(acc.mean, 2.0);
        assert_eq!(acc.variance().unwrap(), 1.0);
        let merged = McAccumulator::from_values([1.0, 2.0]).merge(&McAccumulator::from_values([3.0]));
        assert_eq!(merged, acc);
        assert!(McAccumulator::from_values([1.0]).variance().is_err());
    }

    #[test]
    fn cancellation_stress_keeps_variance_non_negative() {
        let mut s = RandomStream::new(5, 0);
        let values: Vec<f64> = (0..1_000_000).map(|_| 1e8 + 1e-3 * s.next_f64()).collect();
        let acc = McAccumulator::from_values(values.iter().copied());
        // two-pass oracle on the exactly shifted data
        let shifted: Vec<f64> = values.iter().map(|v| v - 1e8).collect();
        let mean = shifted.iter().sum::<f64>() / shifted.len() as f64;
        let two_pass = shifted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (shifted.len() - 1) as f64;
        let var = acc.variance().unwrap();
        assert!(var >= 0.0);
        assert!((var - two_pass).abs() <= 1e-2 * two_pass, "{var} vs {two_pass}");
    }

    #[test]
    fn hoeffding_halfwidth_examples() {
        let ci = hoeffding_interval(0.0, 8, 2.0 / std::f64::consts::E, 1.0).unwrap();
        assert!((ci.halfwidth - 1.0).abs() < 1e-15);
        let a = hoeffding_interval(0.0, 100, 0.05, 1.0).unwrap();
        let b = hoeffding_interval(0.0, 400, 0.05, 1.0).unwrap();
        assert!((a.halfwidth / b.halfwidth - 2.0).abs() < 1e-12);
        assert!(hoeffding_interval(0.0, 8, 1.0, 1.0).is_err());
        assert!(hoeffding_interval(0.0, 8, 0.1, 0.0).is_err());
    }

    #[test]
    fn crude_mc_constant_and_errors() {
        let s = RandomStream::new(0, 0);
        let est = crude_mc(|_| 2.5, 3, 100, &s).unwrap();
        assert_eq!(est.acc.mean, 2.5);
        assert_eq!(est.acc.variance().unwrap(), 0.0);
        assert!(crude_mc(|_| 1.0, 1, 1, &s).is_err());
        let err = crude_mc(|x| if x[0] > 0.5 { f64::NAN } else { 0.0 }, 1, 100, &s).unwrap_err();
        assert!(matches!(err, Error::Evaluation { .. }));
    }

    #[test]
    fn weighted_mc_unit_integrand_gives_mass() {
        let s = RandomStream::new(1, 0);
        let g = GaussianWeight { d: 1 };
        let est = weighted_mc(|_| 1.0, &g, 1000, &s).unwrap();
        assert_eq!(est.acc.mean, std::f64::consts::PI.sqrt());
        assert_eq!(est.acc.variance().unwrap(), 0.0);
    }
}
