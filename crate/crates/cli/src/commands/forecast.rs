use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::ValueEnum;
use serde_json::json;
use stochkit::calibrate::{EstimationResult, Method};
use stochkit::forecast::{coverage_study, forecast_scalar, Approach, ForecastConfig, ForecastModel, Region};
use stochkit::numerics::chi_cdf;

use super::calibrate::read_series;
use super::root;
use crate::output::{Output, Table};
use crate::{read_file, CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Model {
    Gbm,
    LogGbm,
    Ou0,
    Vasicek,
    Gou,
}

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Model; defaults to the one named in --calibrated.
    #[arg(long, value_enum)]
    pub model: Option<Model>,
    /// EstimationResult JSON written by `stochkit calibrate`.
    #[arg(long)]
    pub calibrated: Option<PathBuf>,
    /// Parameters as name=value pairs, overriding --calibrated.
    #[arg(long, value_delimiter = ',')]
    pub params: Vec<String>,
    /// Observed series; the forecast starts from its last point.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Starting value x_n when no --input is given.
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<f64>,
    /// Starting time T when no --input is given.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub start: f64,
    /// Prediction horizon Δ.
    #[arg(long, default_value_t = 1.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 20)]
    pub steps: usize,
    /// Per-step confidence level α.
    #[arg(long, conflicts_with = "radius")]
    pub level: Option<f64>,
    /// Region radius R.
    #[arg(long)]
    pub radius: Option<f64>,
    /// 1 reports the drawn value, 2 (default) the region center.
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub approach: u8,
    /// Also run this many independent chains and report empirical coverage.
    #[arg(long, default_value_t = 0)]
    pub chains: usize,
}

fn estimate(a: &Args) -> CliResult<EstimationResult> {
    let mut est = match &a.calibrated {
        Some(p) => serde_json::from_str::<EstimationResult>(&read_file(p)?)?,
        None => EstimationResult { model: String::new(), params: BTreeMap::new(), neg_log_likelihood: None, method: Method::Ml, diagnostics: Default::default() },
    };
    if let Some(m) = a.model {
        est.model = match m {
            Model::Gbm => "gbm",
            Model::LogGbm => "log-gbm",
            Model::Ou0 => "ou0",
            Model::Vasicek => "vasicek",
            Model::Gou => "gou",
        }
        .into();
    }
    for kv in &a.params {
        let (k, v) = kv.split_once('=').ok_or_else(|| CliError::input(format!("--params entry `{kv}` is not name=value")))?;
        let v: f64 = v.trim().parse().map_err(|_| CliError::input(format!("--params value `{v}` is not a number")))?;
        est.params.insert(k.trim().into(), v);
    }
    if est.model.is_empty() {
        return Err(CliError::input("give --model or --calibrated"));
    }
    Ok(est)
}

pub fn run(a: &Args, seed: u64) -> CliResult<Output> {
    let est = estimate(a)?;
    let model = ForecastModel::from_estimate(&est)?;
    let (start, x_n) = match &a.input {
        Some(p) => {
            let s = read_series(p)?;
            (s.times.end(), *s.values.last().expect("series is non-empty"))
        }
        None => (a.start, a.x0.ok_or_else(|| CliError::input("give --input or --x0"))?),
    };
    let region = match (a.level, a.radius) {
        (_, Some(r)) => Region::Radius(r),
        (Some(l), None) => Region::Level(l),
        (None, None) => Region::Level(0.95),
    };
    let mut config = ForecastConfig::new(a.horizon, a.steps, region);
    config.start = start;
    config.approach = if a.approach == 1 { Approach::One } else { Approach::Two };
    let stream = root(seed, 8);
    let steps = forecast_scalar(&model, x_n, &config, &stream)?;
    let mut table = Table::new(&["k", "t", "prediction", "center", "lower", "upper", "sigma", "radius", "next_state", "inside"]);
    for s in &steps {
        table.push(vec![
            s.k.into(),
            s.t.into(),
            s.prediction[0].into(),
            s.center[0].into(),
            s.lower().unwrap_or(f64::NAN).into(),
            s.upper().unwrap_or(f64::NAN).into(),
            s.sigma.unwrap_or(f64::NAN).into(),
            s.radius.into(),
            s.next_state[0].into(),
            s.inside.into(),
        ]);
    }
    let radius = config.radius(1)?;
    let p = chi_cdf(1, radius);
    let mut out = Output::new(json!({
        "model": est.model,
        "params": est.params,
        "start": start,
        "x_n": x_n,
        "h": config.step(),
        "steps": a.steps,
        "approach": a.approach,
        "radius": radius,
        "target_step": p,
        "target_simultaneous": p.powi(a.steps as i32),
    }));
    if a.chains > 0 {
        let cov = coverage_study(&model, &[x_n], &config, a.chains, &stream.fork(1))?;
        out.insert("coverage", cov);
    }
    Ok(out.with_table(table))
}
