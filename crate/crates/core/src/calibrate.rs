//! Parameter estimation from discretely observed series: quadratic
//! variation, closed-form maximum likelihood and Euler quasi-likelihood.

pub mod simplex;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Read;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::TimeGrid;
use crate::rand::RandomStream;
use simplex::{minimize, SimplexOptions, SimplexReport};

/// Relative tolerance for the uniform-spacing check.
pub const UNIFORM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSeries {
    pub times: TimeGrid,
    pub values: Vec<f64>,
    #[serde(default)]
    pub positive_required: bool,
}

impl ObservationSeries {
    pub fn new(times: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if times.points().len() != values.len() {
            return Err(Error::InsufficientData(format!(
                "{} times but {} values",
                times.points().len(),
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("observation {k} is not finite")));
        }
        Ok(Self { times, values, positive_required: false })
    }

    /// Observations x_k at t_k = t0 + k·h.
    pub fn uniform(t0: f64, h: f64, values: Vec<f64>) -> Result<Self> {
        let n = values.len().saturating_sub(1);
        let times = TimeGrid::uniform(t0, t0 + h * n as f64, n)?;
        Self::new(times, values)
    }

    /// Mark the series as requiring positive values and check it.
    pub fn require_positive(mut self) -> Result<Self> {
        if let Some(k) = self.values.iter().position(|v| !(*v > 0.0)) {
            return Err(Error::Domain(format!("observation {k} = {} is not positive", self.values[k])));
        }
        self.positive_required = true;
        Ok(self)
    }

    /// Two-column (time, value) CSV; a non-numeric first row is a header.
    pub fn from_csv(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(reader);
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Parse {
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            })?;
            let line = rec.position().map_or(i as u64 + 1, |p| p.line());
            if rec.iter().all(str::is_empty) {
                continue;
            }
            if rec.len() != 2 {
                return Err(Error::Parse { line, message: format!("expected 2 columns, found {}", rec.len()) });
            }
            let parse = |s: &str| s.parse::<f64>().ok().filter(|v| v.is_finite());
            match (parse(&rec[0]), parse(&rec[1])) {
                (Some(t), Some(v)) => {
                    if let Some(&prev) = times.last() {
                        if !(t > prev) {
                            return Err(Error::Parse { line, message: format!("time {t} does not exceed previous time {prev}") });
                        }
                    }
                    times.push(t);
                    values.push(v);
                }
                _ if i == 0 => {}
                _ => return Err(Error::Parse { line, message: format!("cannot parse `{}`,`{}` as finite numbers", &rec[0], &rec[1]) }),
            }
        }
        if times.len() < 2 {
            return Err(Error::InsufficientData(format!("need at least 2 observations, got {}", times.len())));
        }
        Self::new(TimeGrid::new(times)?, values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        self.times.end() - self.times.start()
    }

    /// Common step h, or an error if the grid is not uniform.
    pub fn uniform_step(&self) -> Result<f64> {
        if !self.times.is_uniform(UNIFORM_TOL) {
            return Err(Error::InvalidGrid("estimator requires uniformly spaced observations".into()));
        }
        Ok(self.horizon() / self.times.cells() as f64)
    }

    fn logs(&self) -> Result<Vec<f64>> {
        if let Some(k) = self.values.iter().position(|v| !(*v > 0.0)) {
            return Err(Error::Domain(format!("observation {k} = {} is not positive", self.values[k])));
        }
        Ok(self.values.iter().map(|v| v.ln()).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Qv,
    Ml,
    Qml,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub observations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<SimplexReport>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub model: String,
    pub params: BTreeMap<String, f64>,
    pub neg_log_likelihood: Option<f64>,
    pub method: Method,
    pub diagnostics: Diagnostics,
}

impl EstimationResult {
    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.get(name).copied()
    }
}

fn result(model: &str, method: Method, params: &[(&str, f64)], nll: Option<f64>, diagnostics: Diagnostics) -> EstimationResult {
    EstimationResult {
        model: model.into(),
        params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        neg_log_likelihood: nll.filter(|v| v.is_finite()),
        method,
        diagnostics,
    }
}

/// σ̂ = ((1/T)Σ ln²(s_{k+1}/s_k))^{1/2}, μ̂ = (1/T)ln(s_n/s_0) + σ̂²/2.
/// Accepts non-uniform grids.
pub fn qv_estimate_gbm(series: &ObservationSeries) -> Result<EstimationResult> {
    let x = series.logs()?;
    let t = series.horizon();
    let qv: f64 = x.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    let sigma2 = qv / t;
    let mu = (x[x.len() - 1] - x[0]) / t + 0.5 * sigma2;
    let diag = Diagnostics { observations: series.len(), ..Default::default() };
    Ok(result("gbm", Method::Qv, &[("mu", mu), ("sigma", sigma2.sqrt()), ("sigma2", sigma2)], None, diag))
}

/// Exact Gaussian negative log-likelihood of log-GBM increments.
pub fn gbm_neg_log_likelihood(series: &ObservationSeries, mu: f64, sigma2: f64) -> Result<f64> {
    let h = series.uniform_step()?;
    let x = series.logs()?;
    let m = (mu - 0.5 * sigma2) * h;
    let ss: f64 = x.windows(2).map(|w| (w[1] - w[0] - m).powi(2)).sum();
    let n = (x.len() - 1) as f64;
    Ok(0.5 * n * (2.0 * PI * sigma2 * h).ln() + ss / (2.0 * sigma2 * h))
}

/// Closed-form ML for geometric Brownian motion on a uniform grid.
pub fn ml_gbm(series: &ObservationSeries) -> Result<EstimationResult> {
    let h = series.uniform_step()?;
    let x = series.logs()?;
    let t = series.horizon();
    let total = x[x.len() - 1] - x[0];
    let sigma2: f64 = x.windows(2).map(|w| (w[1] - w[0] - h / t * total).powi(2)).sum::<f64>() / t;
    let mu = total / t + 0.5 * sigma2;
    let nll = gbm_neg_log_likelihood(series, mu, sigma2).ok();
    let diag = Diagnostics { observations: series.len(), step: Some(h), ..Default::default() };
    Ok(result("gbm", Method::Ml, &[("mu", mu), ("sigma", sigma2.sqrt()), ("sigma2", sigma2)], nll, diag))
}

/// ML for dX = −aX dt + σ dW. The variance estimate uses Â = e^{−âh}
/// in the residuals, which is where the likelihood is minimized.
pub fn ml_ou_zero(series: &ObservationSeries) -> Result<EstimationResult> {
    let h = series.uniform_step()?;
    let x = &series.values;
    let n = (x.len() - 1) as f64;
    let den: f64 = x[..x.len() - 1].iter().map(|v| v * v).sum();
    if den == 0.0 {
        return Err(Error::DegenerateData("Σx_k² = 0".into()));
    }
    let big_a = x.windows(2).map(|w| w[0] * w[1]).sum::<f64>() / den;
    if !(big_a > 0.0 && big_a < 1.0) {
        return Err(Error::MeanReversionUnidentified { beta1: big_a });
    }
    let a = -big_a.ln() / h;
    let big_sigma = x.windows(2).map(|w| (w[1] - big_a * w[0]).powi(2)).sum::<f64>() / n;
    let sigma2 = 2.0 * a * big_sigma / (1.0 - big_a * big_a);
    let nll = 0.5 * n * (2.0 * PI * big_sigma).ln() + 0.5 * n;
    let diag = Diagnostics { observations: series.len(), step: Some(h), ..Default::default() };
    Ok(result("ou0", Method::Ml, &[("a", a), ("sigma2", sigma2), ("A", big_a)], Some(nll), diag))
}

/// Vasicek negative log-likelihood at (κ, μ, σ²).
pub fn vasicek_neg_log_likelihood(x: &[f64], h: f64, kappa: f64, mu: f64, sigma2: f64) -> f64 {
    let a = (-kappa * h).exp();
    let big_sigma = sigma2 / (2.0 * kappa) * (1.0 - a * a);
    let n = (x.len() - 1) as f64;
    let ss: f64 = x.windows(2).map(|w| (w[1] - mu - a * (w[0] - mu)).powi(2)).sum();
    0.5 * n * (2.0 * PI * big_sigma).ln() + ss / (2.0 * big_sigma)
}

struct VasicekFit {
    kappa: f64,
    mu: f64,
    sigma2: f64,
    beta: [f64; 3],
}

fn vasicek_closed_form(x: &[f64], h: f64) -> Result<VasicekFit> {
    let n = (x.len() - 1) as f64;
    let (prev, next) = (&x[..x.len() - 1], &x[1..]);
    let s_prev: f64 = prev.iter().sum();
    let s_next: f64 = next.iter().sum();
    let s_cross: f64 = prev.iter().zip(next).map(|(a, b)| a * b).sum();
    let s_sq: f64 = prev.iter().map(|a| a * a).sum();
    let den = s_sq / n - (s_prev / n).powi(2);
    if !(den > 0.0) {
        return Err(Error::DegenerateData("observations x_0..x_{n-1} have zero spread".into()));
    }
    let b1 = (s_cross / n - s_prev * s_next / (n * n)) / den;
    if !(b1 > 0.0 && b1 < 1.0) {
        return Err(Error::MeanReversionUnidentified { beta1: b1 });
    }
    let b2 = (s_next - b1 * s_prev) / n / (1.0 - b1);
    let b3 = prev.iter().zip(next).map(|(a, b)| (b - b1 * a - b2 * (1.0 - b1)).powi(2)).sum::<f64>() / n;
    let kappa = -b1.ln() / h;
    Ok(VasicekFit { kappa, mu: b2, sigma2: 2.0 * kappa * b3 / (1.0 - b1 * b1), beta: [b1, b2, b3] })
}

/// Closed-form ML for dX = κ(μ − X)dt + σ dW.
pub fn ml_vasicek(series: &ObservationSeries) -> Result<EstimationResult> {
    let h = series.uniform_step()?;
    let f = vasicek_closed_form(&series.values, h)?;
    let nll = vasicek_neg_log_likelihood(&series.values, h, f.kappa, f.mu, f.sigma2);
    let diag = Diagnostics { observations: series.len(), step: Some(h), ..Default::default() };
    Ok(result(
        "vasicek",
        Method::Ml,
        &[("kappa", f.kappa), ("mu", f.mu), ("sigma2", f.sigma2), ("beta1", f.beta[0]), ("beta2", f.beta[1]), ("beta3", f.beta[2])],
        Some(nll),
        diag,
    ))
}

/// ML for dX = κX(μ − ln X)dt + σX dW via the Vasicek fit of ln X, with
/// μ̂ = μ̄̂ + σ̂²/(2κ̂).
pub fn ml_geometric_ou(series: &ObservationSeries) -> Result<EstimationResult> {
    let h = series.uniform_step()?;
    let u = series.logs()?;
    let f = vasicek_closed_form(&u, h)?;
    let mu = f.mu + f.sigma2 / (2.0 * f.kappa);
    let jacobian: f64 = u[1..].iter().sum();
    let nll = vasicek_neg_log_likelihood(&u, h, f.kappa, f.mu, f.sigma2) + jacobian;
    let diag = Diagnostics { observations: series.len(), step: Some(h), ..Default::default() };
    Ok(result("gou", Method::Ml, &[("kappa", f.kappa), ("mu", mu), ("mu_bar", f.mu), ("sigma2", f.sigma2)], Some(nll), diag))
}

type Coef = Arc<dyn Fn(f64, f64, &[f64]) -> f64 + Send + Sync>;

/// Scalar model dX = a(t,X,θ)dt + b(t,X,θ)dW with named parameters θ.
#[derive(Clone)]
pub struct QmlModel {
    pub name: String,
    pub params: Vec<String>,
    pub drift: Coef,
    pub diffusion: Coef,
}

impl std::fmt::Debug for QmlModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("QmlModel").field("name", &self.name).field("params", &self.params).finish()
    }
}

impl QmlModel {
    pub fn new(
        name: &str,
        params: &[&str],
        drift: impl Fn(f64, f64, &[f64]) -> f64 + Send + Sync + 'static,
        diffusion: impl Fn(f64, f64, &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { name: name.into(), params: params.iter().map(|s| s.to_string()).collect(), drift: Arc::new(drift), diffusion: Arc::new(diffusion) }
    }

    /// Log-price dynamics of GBM: a = μ − σ²/2, b = σ; θ = (μ, σ).
    pub fn log_gbm() -> Self {
        Self::new("log-gbm", &["mu", "sigma"], |_, _, th| th[0] - 0.5 * th[1] * th[1], |_, _, th| th[1])
    }

    /// Vasicek: a = κ(μ − x), b = σ; θ = (κ, μ, σ).
    pub fn vasicek() -> Self {
        Self::new("vasicek", &["kappa", "mu", "sigma"], |_, x, th| th[0] * (th[1] - x), |_, _, th| th[2])
    }
}

/// Euler quasi negative log-likelihood
/// ½Σ[ln(2πh b²) + (Δx − a h)²/(h b²)] on a uniform grid.
pub fn qml_objective(model: &QmlModel, series: &ObservationSeries, theta: &[f64]) -> Result<f64> {
    let h = series.uniform_step()?;
    Ok(qml_sum(model, series, h, theta))
}

fn qml_sum(model: &QmlModel, series: &ObservationSeries, h: f64, theta: &[f64]) -> f64 {
    let t = series.times.points();
    let x = &series.values;
    let mut total = 0.0;
    for k in 0..x.len() - 1 {
        let a = (model.drift)(t[k], x[k], theta);
        let b2 = (model.diffusion)(t[k], x[k], theta).powi(2);
        if !(b2 > 0.0) {
            return f64::INFINITY;
        }
        total += (2.0 * PI * h * b2).ln() + (x[k + 1] - x[k] - a * h).powi(2) / (h * b2);
    }
    0.5 * total
}

/// Minimize the Euler quasi-likelihood by Nelder–Mead within `bounds`.
pub fn qml_fit(
    model: &QmlModel,
    series: &ObservationSeries,
    theta_init: &[f64],
    bounds: &[(f64, f64)],
    opts: SimplexOptions,
) -> Result<EstimationResult> {
    let s = model.params.len();
    if theta_init.len() != s || bounds.len() != s {
        return Err(invalid("theta_init", format!("model has {s} parameters, got {} initial values and {} bounds", theta_init.len(), bounds.len())));
    }
    if theta_init.iter().zip(bounds).any(|(v, (lo, hi))| !(lo <= v && v <= hi)) {
        return Err(invalid("theta_init", "initial point lies outside the bounds"));
    }
    let h = series.uniform_step()?;
    if !qml_sum(model, series, h, theta_init).is_finite() {
        return Err(Error::InvalidStart);
    }
    let report = minimize(|th| qml_sum(model, series, h, th), theta_init, bounds, opts);
    let mut warnings = Vec::new();
    if !report.converged {
        warnings.push(format!("simplex search stopped after {} iterations without meeting the tolerance", report.iterations));
    }
    let params: Vec<(&str, f64)> = model.params.iter().map(String::as_str).zip(report.x.iter().copied()).collect();
    let nll = report.value;
    let diag = Diagnostics { observations: series.len(), step: Some(h), optimizer: Some(report), warnings };
    Ok(result(&model.name, Method::Qml, &params, Some(nll), diag))
}

/// GBM observed at t_k = k·h using the exact log-normal transition.
pub fn synthetic_gbm(mu: f64, sigma: f64, s0: f64, h: f64, n: usize, stream: &mut RandomStream) -> Result<ObservationSeries> {
    let mut v = Vec::with_capacity(n + 1);
    v.push(s0);
    for k in 0..n {
        let z = stream.std_normal();
        v.push(v[k] * ((mu - 0.5 * sigma * sigma) * h + sigma * h.sqrt() * z).exp());
    }
    ObservationSeries::uniform(0.0, h, v)
}

/// Vasicek process observed at t_k = k·h using the exact Gaussian transition.
pub fn synthetic_vasicek(kappa: f64, mu: f64, sigma: f64, x0: f64, h: f64, n: usize, stream: &mut RandomStream) -> Result<ObservationSeries> {
    if !(kappa > 0.0) {
        return Err(invalid("kappa", "must be positive"));
    }
    let a = (-kappa * h).exp();
    let sd = (sigma * sigma * (1.0 - a * a) / (2.0 * kappa)).sqrt();
    let mut v = Vec::with_capacity(n + 1);
    v.push(x0);
    for k in 0..n {
        let z = stream.std_normal();
        v.push(mu + a * (v[k] - mu) + sd * z);
    }
    ObservationSeries::uniform(0.0, h, v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_series() {
        let s = ObservationSeries::uniform(0.0, 0.1, vec![2.0; 11]).unwrap();
        let r = qv_estimate_gbm(&s).unwrap();
        assert_eq!(r.param("sigma"), Some(0.0));
        assert_eq!(r.param("mu"), Some(0.0));
    }

    #[test]
    fn ml_gbm_single_step() {
        let s = ObservationSeries::uniform(0.0, 1.0, vec![1.0, 1.7]).unwrap();
        assert_eq!(ml_gbm(&s).unwrap().param("sigma2"), Some(0.0));
    }

    #[test]
    fn noiseless_ar() {
        let rho: f64 = 0.9;
        let s = ObservationSeries::uniform(0.0, 0.5, (0..40).map(|k| rho.powi(k)).collect()).unwrap();
        let r = ml_ou_zero(&s).unwrap();
        assert!((r.param("A").unwrap() - rho).abs() < 1e-15);
        assert!(r.param("sigma2").unwrap() < 1e-28);
    }

    #[test]
    fn rejects_nonuniform_for_ml() {
        let s = ObservationSeries::new(TimeGrid::new(vec![0.0, 1.0, 3.0]).unwrap(), vec![1.0, 2.0, 1.5]).unwrap();
        assert!(matches!(ml_gbm(&s), Err(Error::InvalidGrid(_))));
        assert!(qv_estimate_gbm(&s).is_ok());
    }

    #[test]
    fn vasicek_requires_mean_reversion() {
        let s = ObservationSeries::uniform(0.0, 1.0, (0..20).map(|k| (k as f64).exp2()).collect()).unwrap();
        assert!(matches!(ml_vasicek(&s), Err(Error::MeanReversionUnidentified { .. })));
    }

    #[test]
    fn csv_header_and_errors() {
        let ok = ObservationSeries::from_csv("time,value\n0,1\n0.5,1.1\n1,1.2\n".as_bytes()).unwrap();
        assert_eq!(ok.values, vec![1.0, 1.1, 1.2]);
        let bad = ObservationSeries::from_csv("0,1\n0.5,x\n".as_bytes()).unwrap_err();
        assert_eq!(bad, Error::Parse { line: 2, message: "cannot parse `0.5`,`x` as finite numbers".into() });
        let order = ObservationSeries::from_csv("0,1\n1,2\n1,3\n".as_bytes()).unwrap_err();
        assert!(matches!(order, Error::Parse { line: 3, .. }));
        let cols = ObservationSeries::from_csv("0,1\n1,2,3\n".as_bytes()).unwrap_err();
        assert!(matches!(cols, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn qml_constant_data_gives_zero_rate() {
        let s = ObservationSeries::uniform(0.0, 0.01, vec![1.5; 50]).unwrap();
        let m = QmlModel::new("linear", &["theta"], |_, x, th| th[0] * x, |_, _, _| 0.3);
        let r = qml_fit(&m, &s, &[0.7], &[(-10.0, 10.0)], SimplexOptions::default()).unwrap();
        assert!(r.param("theta").unwrap().abs() < 1e-6);
    }
}
