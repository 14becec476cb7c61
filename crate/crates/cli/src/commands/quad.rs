use clap::ValueEnum;
use serde_json::json;
use stochkit::numerics::loglog_slope;
use stochkit::quadrature::corpus::{find_1d, CORPUS_1D};
use stochkit::quadrature::{control_variate_mc, midpoint_rule, randomized_riemann, rect_rule, stratified_mc, taylor_quadrature};

use super::root;
use crate::output::{Output, Table};
use crate::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Rect,
    Mid,
    Taylor,
    Randriemann,
    Cv,
    Strat,
}

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long, value_enum)]
    pub method: Method,
    /// Test function: linear, square, sine, pow1.5, sqrt, step0.3 or exp.
    #[arg(long, default_value = "sine")]
    pub integrand: String,
    /// Cell counts n (strata K for strat).
    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 2, 4, 8, 16, 32, 64, 128, 256, 512, 1024])]
    pub n: Vec<usize>,
    /// Monte Carlo samples N for cv and strat. For strat, N is rounded up to
    /// a whole number (at least 2) of samples per stratum; the table reports it.
    #[arg(long, default_value_t = 1024)]
    pub samples: usize,
    /// Derivatives used by taylor, or interpolation degree for cv.
    #[arg(long, default_value_t = 1)]
    pub order: usize,
    /// Add the endpoint correction to the Taylor rule.
    #[arg(long)]
    pub corrected: bool,
}

pub fn run(a: &Args, seed: u64) -> CliResult<Output> {
    let names: Vec<&str> = CORPUS_1D.iter().map(|c| c.name).collect();
    let g = find_1d(&a.integrand).ok_or_else(|| CliError::input(format!("unknown integrand `{}`; choose one of {names:?}", a.integrand)))?;
    let exact = g.integral();
    let f = g.f;
    let stream = root(seed, 2);
    let mut table = Table::new(&["n", "N", "estimate", "error_vs_oracle"]);
    let (mut xs, mut errs) = (Vec::new(), Vec::new());
    for (i, &n) in a.n.iter().enumerate() {
        let s = stream.fork(i as u64);
        let (estimate, evals) = match a.method {
            Method::Rect => (rect_rule(|x| f(x[0]), 1, n)?, n),
            Method::Mid => (midpoint_rule(|x| f(x[0]), 1, n)?, n),
            Method::Taylor => {
                if a.order == 0 || a.order > g.derivs.len() {
                    return Err(CliError::input(format!("`{}` provides {} derivative(s); --order must be 1..={}", g.name, g.derivs.len(), g.derivs.len())));
                }
                let derivs: Vec<&dyn Fn(f64) -> f64> = g.derivs[..a.order].iter().map(|d| d as &dyn Fn(f64) -> f64).collect();
                (taylor_quadrature(&derivs, 0.0, 1.0, n, a.corrected)?, n * a.order)
            }
            Method::Randriemann => (randomized_riemann(f, 0.0, 1.0, n, &s)?, n),
            Method::Cv => (control_variate_mc(f, a.order, n, a.samples, &s)?.estimate(), a.samples),
            Method::Strat => {
                let samples = n * a.samples.div_ceil(n).max(2);
                (stratified_mc(|x: &[f64]| f(x[0]), 1, n, samples, &s)?.estimate, samples)
            }
        };
        let err = (estimate - exact).abs();
        table.push(vec![n.into(), evals.into(), estimate.into(), err.into()]);
        if err > 0.0 {
            xs.push(n as f64);
            errs.push(err);
        }
    }
    let slope = if xs.len() >= 2 { Some(loglog_slope(&xs, &errs)) } else { None };
    Ok(Output::new(json!({
        "method": format!("{:?}", a.method).to_lowercase(),
        "integrand": g.name,
        "exact": exact,
        "slope": slope,
    }))
    .with_table(table))
}
