use std::path::PathBuf;

use clap::ValueEnum;
use stochkit::calibrate::simplex::SimplexOptions;
use stochkit::calibrate::{ml_gbm, ml_geometric_ou, ml_ou_zero, ml_vasicek, qml_fit, qv_estimate_gbm, ObservationSeries, QmlModel};
use stochkit::numerics::median;

use crate::output::Output;
use crate::{read_file, CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Model {
    /// Geometric Brownian motion, closed-form ML (or QV with --qv).
    Gbm,
    /// Zero-mean Ornstein–Uhlenbeck dX = −aX dt + σ dW.
    Ou0,
    /// Vasicek dX = κ(μ − X)dt + σ dW.
    Vasicek,
    /// Geometric Ornstein–Uhlenbeck.
    Gou,
    /// Euler quasi-likelihood for --qml-model.
    Qml,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum QmlKind {
    /// GBM in log coordinates; the input holds prices.
    LogGbm,
    /// Vasicek on the raw values.
    Vasicek,
}

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long, value_enum)]
    pub model: Model,
    /// Two-column (time, value) CSV; a header row is optional.
    #[arg(long)]
    pub input: PathBuf,
    /// Quadratic-variation estimator for gbm (accepts non-uniform times).
    #[arg(long)]
    pub qv: bool,
    #[arg(long, value_enum, default_value_t = QmlKind::LogGbm)]
    pub qml_model: QmlKind,
    /// Starting parameter vector for qml.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub init: Option<Vec<f64>>,
}

pub fn read_series(path: &std::path::Path) -> CliResult<ObservationSeries> {
    Ok(ObservationSeries::from_csv(read_file(path)?.as_bytes())?)
}

pub fn run(a: &Args) -> CliResult<Output> {
    let series = read_series(&a.input)?;
    let result = match a.model {
        Model::Gbm if a.qv => qv_estimate_gbm(&series)?,
        Model::Gbm => ml_gbm(&series)?,
        Model::Ou0 => ml_ou_zero(&series)?,
        Model::Vasicek => ml_vasicek(&series)?,
        Model::Gou => ml_geometric_ou(&series)?,
        Model::Qml => {
            let (model, data, init, bounds) = match a.qml_model {
                QmlKind::LogGbm => {
                    let logs = ObservationSeries::new(series.times.clone(), series.values.iter().map(|v| v.ln()).collect())?;
                    (QmlModel::log_gbm(), logs, vec![0.0, 0.5], vec![(-1e3, 1e3), (1e-10, 1e3)])
                }
                QmlKind::Vasicek => {
                    let m = median(&series.values);
                    (QmlModel::vasicek(), series, vec![1.0, m, 1.0], vec![(1e-10, 1e4), (-1e12, 1e12), (1e-10, 1e6)])
                }
            };
            let init = a.init.clone().unwrap_or(init);
            if init.len() != model.params.len() {
                return Err(CliError::input(format!("--init needs {} values ({})", model.params.len(), model.params.join(", "))));
            }
            qml_fit(&model, &data, &init, &bounds, SimplexOptions::default())?
        }
    };
    Ok(Output::new(&result))
}
