use clap::ValueEnum;
use serde_json::json;
use stochkit::ode::{holder_quadrature_problem, holder_test_problem, rate_study, solve, OdeScheme};

use super::root;
use crate::output::{Output, Table};
use crate::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scheme {
    Euler,
    Reuler,
    Rk2,
    Rrk2,
}

impl From<Scheme> for OdeScheme {
    fn from(s: Scheme) -> Self {
        match s {
            Scheme::Euler => OdeScheme::Euler,
            Scheme::Reuler => OdeScheme::RandomizedEuler,
            Scheme::Rk2 => OdeScheme::Rk2,
            Scheme::Rrk2 => OdeScheme::RandomizedRk2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Problem {
    /// x' = x·sin(x²|t|^ρ) on [−1, 1], x(−1) = 1.
    Holder,
    /// x' = |t|^ρ on [−1, 1], x(−1) = 0.
    HolderQuad,
}

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long, value_enum, default_value_t = Scheme::Euler)]
    pub scheme: Scheme,
    #[arg(long, value_enum, default_value_t = Problem::Holder)]
    pub problem: Problem,
    /// Hölder exponent ρ of the time dependence.
    #[arg(long, default_value_t = 0.5)]
    pub rho: f64,
    /// Steps n for a single solve.
    #[arg(long, default_value_t = 64)]
    pub steps: usize,
    /// Run a self-convergence study instead of a single solve.
    #[arg(long)]
    pub rate_study: bool,
    #[arg(long, value_delimiter = ',', default_values_t = [16usize, 32, 64, 128, 256, 512, 1024])]
    pub levels: Vec<usize>,
    /// Reference step count (a multiple of every level).
    #[arg(long, default_value_t = 16_384)]
    pub n_ref: usize,
    /// Independent runs per level for randomized schemes.
    #[arg(long, default_value_t = 200)]
    pub paths: usize,
    /// Coarsest levels left out of the rate fit.
    #[arg(long, default_value_t = 2)]
    pub skip: usize,
}

pub fn run(a: &Args, seed: u64) -> CliResult<Output> {
    if !(a.rho > 0.0 && a.rho <= 1.0) {
        return Err(CliError::input(format!("--rho must lie in (0, 1], got {}", a.rho)));
    }
    let problem = match a.problem {
        Problem::Holder => holder_test_problem(a.rho),
        Problem::HolderQuad => holder_quadrature_problem(a.rho),
    };
    let scheme: OdeScheme = a.scheme.into();
    let stream = root(seed, 3);
    if a.rate_study {
        let study = rate_study(&problem, scheme, &a.levels, a.n_ref, a.paths, a.skip.min(a.levels.len().saturating_sub(2)), &stream)?;
        let mut t = Table::new(&["n", "error"]);
        for (n, e) in study.n.iter().zip(&study.error) {
            t.push(vec![(*n).into(), (*e).into()]);
        }
        return Ok(Output::new(json!({ "scheme": scheme, "rho": a.rho, "n_ref": a.n_ref, "rate": study.rate, "slope": -study.rate })).with_table(t));
    }
    let path = solve(&problem, scheme, a.steps, &stream)?;
    let mut t = Table::new(&["t", "x"]);
    for (k, &tk) in path.grid.points().iter().enumerate() {
        t.push(vec![tk.into(), path.node(k)[0].into()]);
    }
    Ok(Output::new(json!({ "scheme": scheme, "rho": a.rho, "steps": a.steps, "terminal": path.terminal()[0] })).with_table(t))
}
