//! Monte Carlo pricing of European and Asian payoffs on Euler–Maruyama
//! paths, with asymptotic and Hoeffding intervals and a bias budget.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::exec;
use crate::grid::TimeGrid;
use crate::mc::{asymptotic_interval, ConfidenceInterval, IntervalKind, DEFAULT_LEVEL};
use crate::numerics::{composite_simpson, normal_cdf, normal_pdf};
use crate::rand::RandomStream;
use crate::sde::{draw_noise, euler_on_tape, JumpDiffusionModel};

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// How the time average of an Asian payoff is discretized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AsianRule {
    /// Left Riemann sum over the step interpolant: (1/T) Σ_{k<n} ψ(X_k)Δt_k.
    Step,
    /// Trapezoid sum over the linear interpolant.
    Linear,
}

/// Payoff functional of the first component of the state.
#[derive(Clone)]
pub enum PayoffSpec {
    /// h(X(T)) with Lipschitz constant L and optional bound |h| ≤ D.
    European { h: ScalarFn, lipschitz: f64, bound: Option<f64> },
    /// φ((1/T)∫ψ(X(t))dt) with φ bounded by D when given.
    Asian { phi: ScalarFn, psi: ScalarFn, lipschitz: f64, bound: Option<f64>, rule: AsianRule },
}

impl fmt::Debug for PayoffSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PayoffSpec::European { lipschitz, bound, .. } => {
                write!(f, "European {{ lipschitz: {lipschitz}, bound: {bound:?} }}")
            }
            PayoffSpec::Asian { lipschitz, bound, rule, .. } => {
                write!(f, "Asian {{ lipschitz: {lipschitz}, bound: {bound:?}, rule: {rule:?} }}")
            }
        }
    }
}

impl PayoffSpec {
    pub fn european(h: impl Fn(f64) -> f64 + Send + Sync + 'static, lipschitz: f64, bound: Option<f64>) -> Self {
        PayoffSpec::European { h: Arc::new(h), lipschitz, bound }
    }

    /// (x − K)⁺: Lipschitz 1, unbounded.
    pub fn call(strike: f64) -> Self {
        Self::european(move |x| (x - strike).max(0.0), 1.0, None)
    }

    /// (K − x)⁺ for non-negative prices: Lipschitz 1, bounded by K.
    pub fn put(strike: f64) -> Self {
        Self::european(move |x| (strike - x).max(0.0), 1.0, Some(strike))
    }

    /// Fixed-strike Asian put (K − average)⁺, bounded by K for non-negative prices.
    pub fn asian_put(strike: f64, rule: AsianRule) -> Self {
        PayoffSpec::Asian {
            phi: Arc::new(move |a| (strike - a).max(0.0)),
            psi: Arc::new(|x| x),
            lipschitz: 1.0,
            bound: Some(strike),
            rule,
        }
    }

    pub fn bound(&self) -> Option<f64> {
        match self {
            PayoffSpec::European { bound, .. } | PayoffSpec::Asian { bound, .. } => *bound,
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match self {
            PayoffSpec::European { lipschitz, .. } | PayoffSpec::Asian { lipschitz, .. } => *lipschitz,
        }
    }

    /// Evaluate on node values `x` of the first component over `grid`.
    pub fn evaluate(&self, grid: &TimeGrid, x: &[f64]) -> f64 {
        match self {
            PayoffSpec::European { h, .. } => h(x[x.len() - 1]),
            PayoffSpec::Asian { phi, psi, rule, .. } => phi(time_average(grid, x, psi.as_ref(), *rule)),
        }
    }
}

/// (1/T)·Σ ψ(X)Δt under the chosen rule.
pub fn time_average(grid: &TimeGrid, x: &[f64], psi: &dyn Fn(f64) -> f64, rule: AsianRule) -> f64 {
    let span = grid.end() - grid.start();
    let sum: f64 = match rule {
        AsianRule::Step => (0..grid.cells()).map(|k| psi(x[k]) * grid.dt(k)).sum(),
        AsianRule::Linear => (0..grid.cells()).map(|k| 0.5 * (psi(x[k]) + psi(x[k + 1])) * grid.dt(k)).sum(),
    };
    sum / span
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceReport {
    pub estimate: f64,
    /// Asymptotic halfwidth at `level`.
    pub mc_halfwidth: f64,
    pub level: f64,
    /// √(2 ln(2/δ))·D/√M; absent for unbounded payoffs.
    pub hoeffding_halfwidth: Option<f64>,
    pub delta: f64,
    pub n_steps: usize,
    pub m_paths: usize,
    pub sample_variance: f64,
    /// Bias budget C_bias·n^{−1/2}, when a bias constant was supplied.
    pub bias_budget: Option<f64>,
    /// C_bias·n^{−1/2} + D·M^{−1/2} (D replaced by the sample SD for unbounded payoffs).
    pub predicted_total_error: Option<f64>,
    /// Paths whose payoff exceeded the declared bound.
    pub bound_violations: u64,
    pub warnings: Vec<String>,
}

impl PriceReport {
    /// mc_halfwidth + bias budget.
    pub fn combined_halfwidth(&self) -> f64 {
        self.mc_halfwidth + self.bias_budget.unwrap_or(0.0)
    }
}

/// Options for [`price`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceOptions {
    pub level: f64,
    pub delta: f64,
    pub c_bias: Option<f64>,
}

impl Default for PriceOptions {
    fn default() -> Self {
        Self { level: DEFAULT_LEVEL, delta: 0.05, c_bias: None }
    }
}

/// Payoff of one simulated path; path p uses `stream.substream(p)`.
pub fn path_payoff<M: JumpDiffusionModel + ?Sized>(
    model: &M,
    payoff: &PayoffSpec,
    grid: &TimeGrid,
    stream: &RandomStream,
    p: usize,
) -> Result<f64> {
    let mut s = stream.substream(p as u64);
    let mut x0 = vec![0.0; model.dim()];
    model.initial(&mut s, &mut x0);
    let tape = draw_noise(model, grid, &mut s)?;
    let out = euler_on_tape(model, &x0, &tape, None)?;
    Ok(payoff.evaluate(grid, &out.component(0)))
}

/// (1/M) Σ payoff(X̄^E_n) over M Euler paths with n uniform steps.
pub fn price<M: JumpDiffusionModel + ?Sized>(
    model: &M,
    payoff: &PayoffSpec,
    n: usize,
    m: usize,
    stream: &RandomStream,
    opts: PriceOptions,
) -> Result<PriceReport> {
    if n < 2 || m < 2 {
        return Err(invalid("n/M", format!("need n, M ≥ 2, got n = {n}, M = {m}")));
    }
    let grid = TimeGrid::uniform(0.0, model.horizon(), n)?;
    let bound = payoff.bound();
    let (acc, violations) = exec::accumulate_flagged(m, |p| {
        let v = path_payoff(model, payoff, &grid, stream, p)?;
        if !v.is_finite() {
            return Err(Error::Evaluation { index: p, value: v });
        }
        Ok((v, bound.is_some_and(|d| v.abs() > d)))
    })?;
    let ci = asymptotic_interval(&acc, opts.level)?;
    let variance = acc.variance()?;
    let hoeffding = match bound {
        Some(d) => Some(hoeffding_halfwidth(d, m, opts.delta)?),
        None => None,
    };
    let bias = opts.c_bias.map(|c| c / (n as f64).sqrt());
    let spread = bound.unwrap_or(variance.sqrt());
    let mut warnings = Vec::new();
    if violations > 0 {
        warnings.push(format!("{violations} path(s) exceeded the declared payoff bound {}", bound.unwrap_or(f64::NAN)));
    }
    if bound.is_none() {
        warnings.push("payoff has no declared bound; Hoeffding interval not available".into());
    }
    Ok(PriceReport {
        estimate: acc.mean,
        mc_halfwidth: ci.halfwidth,
        level: opts.level,
        hoeffding_halfwidth: hoeffding,
        delta: opts.delta,
        n_steps: n,
        m_paths: m,
        sample_variance: variance,
        bias_budget: bias,
        predicted_total_error: opts.c_bias.map(|c| error_budget(n, m, c, spread)),
        bound_violations: violations,
        warnings,
    })
}

fn hoeffding_halfwidth(bound: f64, m: usize, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid("delta", format!("must lie in (0, 1), got {delta}")));
    }
    if !(bound > 0.0) {
        return Err(invalid("bound", format!("payoff bound must be positive, got {bound}")));
    }
    Ok((2.0 * (2.0 / delta).ln()).sqrt() * bound / (m as f64).sqrt())
}

/// Predicted error C_bias·n^{−1/2} + D·M^{−1/2}.
pub fn error_budget(n: usize, m: usize, c_bias: f64, d: f64) -> f64 {
    c_bias / (n as f64).sqrt() + d / (m as f64).sqrt()
}

/// Hoeffding interval for E h(X^E_n(T)) around the report's estimate.
pub fn hoeffding_price_interval(report: &PriceReport, bound: Option<f64>, delta: f64) -> Result<ConfidenceInterval> {
    let d = bound.ok_or_else(|| Error::Unsupported("Hoeffding interval needs a bounded payoff".into()))?;
    Ok(ConfidenceInterval {
        center: report.estimate,
        halfwidth: hoeffding_halfwidth(d, report.m_paths, delta)?,
        level: 1.0 - delta,
        kind: IntervalKind::Hoeffding,
    })
}

/// Bias constant L·√n·(E|X_n(T) − X(T)|²)^{1/2} from a coupled strong-error
/// run at `n` steps; needs a model with a closed-form solution.
pub fn bias_constant<M: JumpDiffusionModel + ?Sized>(model: &M, lipschitz: f64, n: usize, paths: usize, stream: &RandomStream) -> Result<f64> {
    let grid = TimeGrid::uniform(0.0, model.horizon(), n)?;
    let acc = exec::accumulate(paths, |p| {
        let mut s = stream.substream(p as u64);
        let mut x0 = vec![0.0; model.dim()];
        model.initial(&mut s, &mut x0);
        let tape = draw_noise(model, &grid, &mut s)?;
        let exact = model
            .exact(&x0, &tape)
            .ok_or_else(|| Error::Unsupported("model has no closed-form solution".into()))??;
        let scheme = euler_on_tape(model, &x0, &tape, None)?;
        let d = model.dim();
        Ok((scheme.terminal()[0] - exact[n * d]).powi(2))
    })?;
    Ok(lipschitz * acc.mean.sqrt() * (n as f64).sqrt())
}

/// E(S_T − K)⁺ for S_T = x0·exp((μ − σ²/2)T + σ√T·Z) by composite Simpson
/// over z ∈ [−12, 12] with `points` subintervals.
pub fn lognormal_call_quadrature(x0: f64, mu: f64, sigma: f64, horizon: f64, strike: f64, points: usize) -> f64 {
    let drift = (mu - 0.5 * sigma * sigma) * horizon;
    let vol = sigma * horizon.sqrt();
    composite_simpson(|z| (x0 * (drift + vol * z).exp() - strike).max(0.0) * normal_pdf(z), -12.0, 12.0, points)
}

/// Closed form E(S_T − K)⁺ = x0·e^{μT}Φ(d1) − KΦ(d2).
pub fn lognormal_call_closed_form(x0: f64, mu: f64, sigma: f64, horizon: f64, strike: f64) -> f64 {
    let vol = sigma * horizon.sqrt();
    let d1 = ((x0 / strike).ln() + (mu + 0.5 * sigma * sigma) * horizon) / vol;
    let d2 = d1 - vol;
    x0 * (mu * horizon).exp() * normal_cdf(d1) - strike * normal_cdf(d2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sde::Gbm;

    #[test]
    fn constant_payoff_has_zero_variance() {
        let m = Gbm { mu: 0.05, sigma: 0.2, x0: 1.0, horizon: 1.0 };
        let r = price(&m, &PayoffSpec::european(|_| 1.3, 0.0, Some(2.0)), 8, 100, &RandomStream::new(0, 0), PriceOptions::default()).unwrap();
        assert_eq!(r.estimate, 1.3);
        assert_eq!(r.sample_variance, 0.0);
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn hoeffding_examples() {
        assert!((hoeffding_halfwidth(1.0, 2, 2.0 / std::f64::consts::E).unwrap() - 1.0).abs() < 1e-15);
        let a = hoeffding_halfwidth(1.0, 100, 0.01).unwrap();
        let b = hoeffding_halfwidth(1.0, 100, 0.1).unwrap();
        assert!(a > b);
    }

    #[test]
    fn budget_structure() {
        assert_eq!(error_budget(64, 100, 0.0, 2.0), 0.2);
        let a = error_budget(16, 100, 1.0, 1.0);
        let b = error_budget(16, 400, 1.0, 1.0);
        assert!((a - b - 0.05).abs() < 1e-15);
    }

    #[test]
    fn oracle_matches_closed_form() {
        let q = lognormal_call_quadrature(1.0, 0.05, 0.2, 1.0, 1.0, 1_000_000);
        let c = lognormal_call_closed_form(1.0, 0.05, 0.2, 1.0, 1.0);
        assert!((q - c).abs() < 1e-10, "{q} vs {c}");
    }

    #[test]
    fn step_average_is_left_riemann_sum() {
        let g = TimeGrid::new(vec![0.0, 0.5, 2.0]).unwrap();
        let a = time_average(&g, &[1.0, 3.0, 100.0], &|x| x, AsianRule::Step);
        assert_eq!(a, (1.0 * 0.5 + 3.0 * 1.5) / 2.0);
    }
}
