use std::path::PathBuf;

use clap::ValueEnum;
use serde_json::json;
use stochkit::rate::dyadic;
use stochkit::sde::custom::CustomModel;
use stochkit::sde::{euler_maruyama, euler_maruyama_randomized, strong_rate_study, Gbm, JumpDiffusionModel, Merton, MertonCompound, OrnsteinUhlenbeck, SchemeKind};
use stochkit::TimeGrid;

use super::root;
use crate::output::{Output, Table};
use crate::{read_file, CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Model {
    Gbm,
    Merton,
    MertonCp,
    Ou,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scheme {
    /// Classical Euler–Maruyama.
    Em,
    /// Randomized Euler–Maruyama.
    Rem,
}

impl From<Scheme> for SchemeKind {
    fn from(s: Scheme) -> Self {
        match s {
            Scheme::Em => SchemeKind::Euler,
            Scheme::Rem => SchemeKind::RandomizedEuler,
        }
    }
}

/// Parameters shared by the built-in models.
#[derive(Debug, Clone, clap::Args)]
pub struct ModelArgs {
    #[arg(long, default_value_t = 0.05, allow_hyphen_values = true)]
    pub mu: f64,
    #[arg(long, default_value_t = 0.2)]
    pub sigma: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub x0: f64,
    #[arg(long, default_value_t = 1.0)]
    pub horizon: f64,
    /// Merton jump factor c > −1.
    #[arg(long, default_value_t = -0.1, allow_hyphen_values = true)]
    pub c: f64,
    /// Jump intensity λ.
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    /// Compound-Poisson marks are uniform on [mark-lo, mark-hi).
    #[arg(long, default_value_t = -0.2, allow_hyphen_values = true)]
    pub mark_lo: f64,
    #[arg(long, default_value_t = 0.2, allow_hyphen_values = true)]
    pub mark_hi: f64,
    /// OU mean-reversion rate κ.
    #[arg(long, default_value_t = 2.0)]
    pub kappa: f64,
    /// OU long-run mean.
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub mean: f64,
}

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long, value_enum, default_value_t = Model::Gbm)]
    pub model: Model,
    /// JSON coefficient file for `--model custom`.
    #[arg(long)]
    pub model_file: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Scheme::Em)]
    pub scheme: Scheme,
    #[arg(long, default_value_t = 64)]
    pub steps: usize,
    /// Paths to simulate (default 1, or 1000 for a rate study).
    #[arg(long)]
    pub paths: Option<usize>,
    /// Coupled strong-error study over `--levels`.
    #[arg(long)]
    pub rate_study: bool,
    #[arg(long, value_delimiter = ',')]
    pub levels: Option<Vec<usize>>,
    #[command(flatten)]
    pub params: ModelArgs,
}

pub fn build_model(model: Model, p: &ModelArgs, file: Option<&PathBuf>) -> CliResult<Box<dyn JumpDiffusionModel>> {
    Ok(match model {
        Model::Gbm => Box::new(Gbm { mu: p.mu, sigma: p.sigma, x0: p.x0, horizon: p.horizon }),
        Model::Merton => Box::new(Merton::new(p.mu, p.sigma, p.c, p.lambda, p.x0, p.horizon)?),
        Model::MertonCp => Box::new(MertonCompound::uniform_marks(p.mu, p.sigma, p.lambda, p.mark_lo, p.mark_hi, p.x0, p.horizon)?),
        Model::Ou => Box::new(OrnsteinUhlenbeck { kappa: p.kappa, mu: p.mean, sigma: p.sigma, x0: p.x0, horizon: p.horizon }),
        Model::Custom => {
            let path = file.ok_or_else(|| CliError::input("--model custom needs --model-file"))?;
            Box::new(CustomModel::from_json(&read_file(path)?)?)
        }
    })
}

pub fn run(a: &Args, seed: u64) -> CliResult<Output> {
    let model = build_model(a.model, &a.params, a.model_file.as_ref())?;
    let model = model.as_ref();
    let stream = root(seed, 5);
    let name = format!("{:?}", a.model).to_lowercase();
    if a.rate_study {
        let levels = a.levels.clone().unwrap_or_else(|| dyadic(3, 9));
        let paths = a.paths.unwrap_or(1000);
        let study = strong_rate_study(model, a.scheme.into(), &levels, paths, 0, &stream)?;
        let mut t = Table::new(&["n", "rmse"]);
        for (n, e) in study.n.iter().zip(&study.error) {
            t.push(vec![(*n).into(), (*e).into()]);
        }
        return Ok(Output::new(json!({
            "model": name, "scheme": SchemeKind::from(a.scheme), "paths": paths,
            "rate": study.rate, "slope": -study.rate, "monotone": study.monotone_decreasing(),
        }))
        .with_table(t));
    }
    let d = model.dim();
    let mut cols = vec!["path".to_string(), "k".into(), "t".into()];
    cols.extend((0..d).map(|i| format!("x{i}")));
    let mut table = Table { columns: cols, rows: Vec::new() };
    let grid = TimeGrid::uniform(0.0, model.horizon(), a.steps)?;
    let mut terminal = Vec::new();
    for p in 0..a.paths.unwrap_or(1) {
        let mut s = stream.substream(p as u64);
        let out = match a.scheme {
            Scheme::Em => euler_maruyama(model, &grid, &mut s)?,
            Scheme::Rem => euler_maruyama_randomized(model, a.steps, &mut s)?,
        };
        for (k, &t) in grid.points().iter().enumerate() {
            let mut row = vec![p.into(), k.into(), t.into()];
            row.extend(out.state(k).iter().map(|&v| v.into()));
            table.push(row);
        }
        terminal.push(out.terminal().to_vec());
    }
    Ok(Output::new(json!({ "model": name, "scheme": SchemeKind::from(a.scheme), "steps": a.steps, "terminal": terminal })).with_table(table))
}
