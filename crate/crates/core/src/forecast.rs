//! Monte Carlo forecasting past the data horizon with one-step Euler
//! prediction intervals and ellipsoidal prediction regions.
//!
//! A chain starts from the last observation x̃_0 = x_n at time T and takes
//! steps of size h = Δ/N. Step k draws Z_k ~ N(0, I_m) from
//! `stream.substream(k)`, so injecting ground truth at one step leaves the
//! noise of every other step unchanged.

use std::collections::BTreeMap;
use std::sync::Arc;

pub use nalgebra::DMatrix;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::calibrate::EstimationResult;
use crate::error::{invalid, Error, Result};
use crate::exec;
use crate::numerics::{bisect_increasing, chi_cdf};
use crate::rand::RandomStream;

/// Condition number of bᵀb above which b is treated as rank-deficient.
pub const RANK_COND_LIMIT: f64 = 1e12;
/// Above this condition number b⁺ is formed from a QR factorization of b.
pub const QR_COND_THRESHOLD: f64 = 1e6;

type VecFn = Arc<dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync>;

/// dX = a(t, X)dt + b(t, X)dW with X ∈ ℝ^d, W ∈ ℝ^m; b is row-major d×m.
#[derive(Clone)]
pub struct ForecastModel {
    pub dim: usize,
    pub noise_dim: usize,
    drift: VecFn,
    diffusion: VecFn,
}

impl std::fmt::Debug for ForecastModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ForecastModel {{ dim: {}, noise_dim: {} }}", self.dim, self.noise_dim)
    }
}

impl ForecastModel {
    pub fn new(
        dim: usize,
        noise_dim: usize,
        drift: impl Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
        diffusion: impl Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self { dim, noise_dim, drift: Arc::new(drift), diffusion: Arc::new(diffusion) }
    }

    pub fn scalar(a: impl Fn(f64, f64) -> f64 + Send + Sync + 'static, b: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(1, 1, move |t, x, o| o[0] = a(t, x[0]), move |t, x, o| o[0] = b(t, x[0]))
    }

    /// Constant drift vector and constant d×m diffusion matrix.
    pub fn constant(drift: Vec<f64>, diffusion: DMatrix<f64>) -> Self {
        let (d, m) = diffusion.shape();
        let rows: Vec<f64> = (0..d).flat_map(|i| (0..m).map(move |j| (i, j))).map(|(i, j)| diffusion[(i, j)]).collect();
        Self::new(d, m, move |_, _, o| o.copy_from_slice(&drift), move |_, _, o| o.copy_from_slice(&rows))
    }

    /// Scalar model matching a calibrated estimate
    /// (`gbm`, `log-gbm`, `ou0`, `vasicek`, `gou`).
    pub fn from_estimate(est: &EstimationResult) -> Result<Self> {
        let p = |name: &str| est.param(name).ok_or_else(|| Error::Model(format!("estimate lacks parameter `{name}`")));
        let sigma = || -> Result<f64> { p("sigma").or_else(|_| p("sigma2").map(f64::sqrt)) };
        Ok(match est.model.as_str() {
            "gbm" => {
                let (mu, s) = (p("mu")?, sigma()?);
                Self::scalar(move |_, x| mu * x, move |_, x| s * x)
            }
            "log-gbm" => {
                let (mu, s) = (p("mu")?, sigma()?);
                Self::scalar(move |_, _| mu - 0.5 * s * s, move |_, _| s)
            }
            "ou0" => {
                let (a, s) = (p("a")?, sigma()?);
                Self::scalar(move |_, x| -a * x, move |_, _| s)
            }
            "vasicek" => {
                let (k, mu, s) = (p("kappa")?, p("mu")?, sigma()?);
                Self::scalar(move |_, x| k * (mu - x), move |_, _| s)
            }
            "gou" => {
                let (k, mu, s) = (p("kappa")?, p("mu")?, sigma()?);
                Self::scalar(move |_, x| k * x * (mu - x.ln()), move |_, x| s * x)
            }
            other => return Err(Error::Model(format!("no forecast model for `{other}`"))),
        })
    }

    fn eval(&self, t: f64, x: &[f64], a: &mut [f64], b: &mut [f64]) {
        (self.drift)(t, x, a);
        (self.diffusion)(t, x, b);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Approach {
    /// Report the drawn value as the prediction.
    #[serde(rename = "1")]
    One,
    /// Report μ̃_{k+1} as the prediction; the draw only seeds the next step.
    #[default]
    #[serde(rename = "2")]
    Two,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    /// Per-step confidence α; the radius is the α-quantile of ‖Z_m‖.
    Level(f64),
    /// Radius R of the ellipsoid in whitened coordinates.
    Radius(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastConfig {
    /// Start time T (time of the last observation).
    pub start: f64,
    /// Prediction horizon Δ.
    pub horizon: f64,
    pub steps: usize,
    pub region: Region,
    #[serde(default)]
    pub approach: Approach,
    /// Ground truth x(t_k) replacing the simulated state at step k.
    #[serde(default)]
    pub injections: BTreeMap<usize, Vec<f64>>,
}

impl ForecastConfig {
    pub fn new(horizon: f64, steps: usize, region: Region) -> Self {
        Self { start: 0.0, horizon, steps, region, approach: Approach::Two, injections: BTreeMap::new() }
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(invalid("horizon", format!("must be positive, got {}", self.horizon)));
        }
        if self.steps == 0 {
            return Err(invalid("steps", "need at least one step"));
        }
        match self.region {
            Region::Level(a) if !(a > 0.0 && a < 1.0) => Err(invalid("level", format!("must lie in (0, 1), got {a}"))),
            Region::Radius(r) if !(r > 0.0 && r.is_finite()) => Err(invalid("radius", format!("must be positive, got {r}"))),
            _ => Ok(()),
        }
    }

    /// Radius R for noise dimension m.
    pub fn radius(&self, m: usize) -> Result<f64> {
        match self.region {
            Region::Level(a) => radius_for_confidence(m, a),
            Region::Radius(r) => Ok(r),
        }
    }
}

/// One forecast step from t_k to t_{k+1}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionStep {
    /// Index k + 1 of the predicted time.
    pub k: usize,
    pub t: f64,
    /// Reported prediction x̄_{k+1}.
    pub prediction: Vec<f64>,
    /// Region center μ̃_{k+1} = x̃_k + h·a(t_k, x̃_k).
    pub center: Vec<f64>,
    /// Row-major factor b(t_k, x̃_k).
    pub factor: Vec<f64>,
    /// σ̃_{k+1} = √h·|b| for scalar models.
    pub sigma: Option<f64>,
    /// q·σ̃_{k+1} for scalar models.
    pub halfwidth: Option<f64>,
    pub radius: f64,
    /// Row-major m×d pseudo-inverse b⁺ (absent when b vanishes).
    pub pinv: Option<Vec<f64>>,
    /// Simulated next state x̃_{k+1}.
    pub next_state: Vec<f64>,
    /// Standard normal draw Z_k = ΔW_k/√h.
    pub z: Vec<f64>,
    /// Whether x̃_{k+1} lies in this step's region.
    pub inside: bool,
}

impl PredictionStep {
    pub fn lower(&self) -> Option<f64> {
        self.halfwidth.map(|w| self.center[0] - w)
    }

    pub fn upper(&self) -> Option<f64> {
        self.halfwidth.map(|w| self.center[0] + w)
    }

    /// Membership h^{−1/2}‖b⁺(z − μ̃)‖ ≤ R, or z = μ̃ when b vanishes.
    pub fn contains(&self, z: &[f64], h: f64) -> bool {
        let d = self.center.len();
        match &self.pinv {
            None => z == self.center.as_slice(),
            Some(p) => {
                let m = p.len() / d;
                let diff = DVector::from_iterator(d, z.iter().zip(&self.center).map(|(a, b)| a - b));
                let pinv = DMatrix::from_row_slice(m, d, p);
                (pinv * diff).norm() / h.sqrt() <= self.radius
            }
        }
    }
}

/// Moore–Penrose inverse (bᵀb)^{−1}bᵀ of a full-column-rank d×m matrix.
pub fn pseudo_inverse(b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (d, m) = b.shape();
    if d < m || m == 0 {
        return Err(Error::RankDeficient { step: None });
    }
    let btb = b.transpose() * b;
    let eig = btb.clone().symmetric_eigenvalues();
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &v| (l.min(v), h.max(v.abs())));
    if !(lo > 0.0) || hi / lo > RANK_COND_LIMIT {
        return Err(Error::RankDeficient { step: None });
    }
    if hi / lo > QR_COND_THRESHOLD {
        let qr = b.clone().qr();
        let r_inv = qr.r().try_inverse().ok_or(Error::RankDeficient { step: None })?;
        return Ok(r_inv * qr.q().transpose());
    }
    let chol = btb.cholesky().ok_or(Error::RankDeficient { step: None })?;
    Ok(chol.solve(&b.transpose()))
}

/// R with P(‖Z_m‖ ≤ R) = level, by bisection to 1e-10.
pub fn radius_for_confidence(m: usize, level: f64) -> Result<f64> {
    if m == 0 {
        return Err(invalid("m", "noise dimension must be positive"));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(invalid("level", format!("must lie in (0, 1), got {level}")));
    }
    let mut hi = 1.0;
    while chi_cdf(m, hi) < level {
        hi *= 2.0;
    }
    Ok(bisect_increasing(|r| chi_cdf(m, r) - level, 0.0, hi, 1e-10))
}

/// Run one forecast chain of `config.steps` steps from `x_n`.
pub fn forecast(model: &ForecastModel, x_n: &[f64], config: &ForecastConfig, stream: &RandomStream) -> Result<Vec<PredictionStep>> {
    config.validate()?;
    let (d, m) = (model.dim, model.noise_dim);
    if x_n.len() != d {
        return Err(invalid("x_n", format!("expected {d} components, got {}", x_n.len())));
    }
    let radius = config.radius(m)?;
    let h = config.step();
    let sqrt_h = h.sqrt();
    let mut x = x_n.to_vec();
    let mut a = vec![0.0; d];
    let mut b = vec![0.0; d * m];
    let mut steps = Vec::with_capacity(config.steps);
    for k in 0..config.steps {
        if let Some(truth) = config.injections.get(&k) {
            if truth.len() != d {
                return Err(invalid("injections", format!("step {k} has {} components, expected {d}", truth.len())));
            }
            x.clone_from(truth);
        }
        let t = config.start + k as f64 * h;
        model.eval(t, &x, &mut a, &mut b);
        if let Some(v) = a.iter().chain(&b).find(|v| !v.is_finite()) {
            return Err(Error::Evaluation { index: k, value: *v });
        }
        let center: Vec<f64> = x.iter().zip(&a).map(|(xi, ai)| xi + h * ai).collect();
        let mut s = stream.substream(k as u64);
        let z: Vec<f64> = (0..m).map(|_| s.std_normal()).collect();
        let vanishes = b.iter().all(|&v| v == 0.0);
        let next: Vec<f64> = if vanishes {
            center.clone()
        } else {
            (0..d).map(|i| center[i] + sqrt_h * (0..m).map(|j| b[i * m + j] * z[j]).sum::<f64>()).collect()
        };
        let pinv = if vanishes {
            None
        } else {
            let p = pseudo_inverse(&DMatrix::from_row_slice(d, m, &b)).map_err(|_| Error::RankDeficient { step: Some(k) })?;
            Some((0..m).flat_map(|i| (0..d).map(move |j| (i, j))).map(|(i, j)| p[(i, j)]).collect::<Vec<_>>())
        };
        let sigma = (d == 1 && m == 1).then(|| sqrt_h * b[0].abs());
        let mut step = PredictionStep {
            k: k + 1,
            t: t + h,
            prediction: match config.approach {
                Approach::One => next.clone(),
                Approach::Two => center.clone(),
            },
            center,
            factor: b.clone(),
            sigma,
            halfwidth: sigma.map(|s| radius * s),
            radius,
            pinv,
            next_state: next,
            z,
            inside: false,
        };
        step.inside = step.contains(&step.next_state, h);
        x.clone_from(&step.next_state);
        steps.push(step);
    }
    Ok(steps)
}

/// Scalar chain with intervals center ± q_α·σ̃ (or ± R·σ̃ for a radius).
pub fn forecast_scalar(model: &ForecastModel, x_n: f64, config: &ForecastConfig, stream: &RandomStream) -> Result<Vec<PredictionStep>> {
    if model.dim != 1 || model.noise_dim != 1 {
        return Err(invalid("model", "forecast_scalar needs d = m = 1"));
    }
    forecast(model, &[x_n], config, stream)
}

/// Chain with ellipsoidal regions of radius R.
pub fn forecast_ellipsoid(model: &ForecastModel, x_n: &[f64], config: &ForecastConfig, stream: &RandomStream) -> Result<Vec<PredictionStep>> {
    forecast(model, x_n, config, stream)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub chains: usize,
    /// Fraction of chains whose step-k state fell in its region.
    pub per_step: Vec<f64>,
    /// Fraction of chains inside at every step.
    pub simultaneous: f64,
    /// p(R) for one step.
    pub target_step: f64,
    /// p(R)^N.
    pub target_simultaneous: f64,
}

/// Empirical coverage over independent chains; chain c uses `stream.fork(c)`.
pub fn coverage_study(model: &ForecastModel, x_n: &[f64], config: &ForecastConfig, chains: usize, stream: &RandomStream) -> Result<CoverageReport> {
    let flags = exec::try_map_indexed(chains, |c| {
        let steps = forecast(model, x_n, config, &stream.fork(c as u64))?;
        Ok(steps.iter().map(|s| s.inside).collect::<Vec<_>>())
    })?;
    let n = chains as f64;
    let per_step = (0..config.steps).map(|k| flags.iter().filter(|f| f[k]).count() as f64 / n).collect();
    let simultaneous = flags.iter().filter(|f| f.iter().all(|&b| b)).count() as f64 / n;
    let p = chi_cdf(model.noise_dim, config.radius(model.noise_dim)?);
    Ok(CoverageReport { chains, per_step, simultaneous, target_step: p, target_simultaneous: p.powi(config.steps as i32) })
}

/// Per-coordinate box μ̃_i ± q·√h·‖b_i‖; its coverage is not known in general.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypercubeDiagnostic {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub warning: String,
}

pub fn hypercube_diagnostic(step: &PredictionStep, h: f64, q: f64) -> HypercubeDiagnostic {
    let d = step.center.len();
    let m = step.factor.len() / d;
    let widths: Vec<f64> = (0..d).map(|i| q * h.sqrt() * step.factor[i * m..(i + 1) * m].iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    HypercubeDiagnostic {
        lower: step.center.iter().zip(&widths).map(|(c, w)| c - w).collect(),
        upper: step.center.iter().zip(&widths).map(|(c, w)| c + w).collect(),
        warning: "per-coordinate regions carry no known joint coverage; diagnostic only".into(),
    }
}
