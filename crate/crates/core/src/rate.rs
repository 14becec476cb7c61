use serde::{Deserialize, Serialize};

use crate::numerics::loglog_slope;

/// Errors measured at increasing discretization levels and the fitted rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateStudy {
    pub n: Vec<usize>,
    pub error: Vec<f64>,
    /// Number of coarsest levels left out of the fit.
    pub skipped: usize,
    /// −slope of ln(error) against ln(n), so error ≈ C·n^{−rate}.
    pub rate: f64,
}

impl RateStudy {
    pub fn fit(n: Vec<usize>, error: Vec<f64>, skipped: usize) -> Self {
        let x: Vec<f64> = n[skipped..].iter().map(|&v| v as f64).collect();
        let rate = -loglog_slope(&x, &error[skipped..]);
        Self { n, error, skipped, rate }
    }

    /// Whether errors decrease from level to level.
    pub fn monotone_decreasing(&self) -> bool {
        self.error.windows(2).all(|w| w[1] < w[0])
    }
}

/// Dyadic levels 2^lo, …, 2^hi.
pub fn dyadic(lo: u32, hi: u32) -> Vec<usize> {
    (lo..=hi).map(|k| 1usize << k).collect()
}
