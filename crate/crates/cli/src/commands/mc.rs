use clap::ValueEnum;
use serde_json::json;
use stochkit::mc::{asymptotic_interval, crude_mc, hoeffding_interval, pi_integrand};

use super::root;
use crate::output::{Output, Table};
use crate::{CliError, CliResult};

type ScalarFn = fn(&[f64]) -> f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Integrand {
    /// 4·1{x² + y² ≤ 1} on [0,1]², integral π (d = 2 only).
    Pi,
    /// x_1 + … + x_d, integral d/2.
    Sum,
    /// x_1·…·x_d, integral 2^{−d}.
    Prod,
    /// 1{x_1 ≤ 0.3}, integral 0.3.
    Step,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Interval {
    Asymptotic,
    Hoeffding,
}

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long, value_enum, default_value_t = Integrand::Pi)]
    pub integrand: Integrand,
    /// Dimension d (pi requires 2).
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    /// Samples N per replication.
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    /// Independent replications.
    #[arg(long, default_value_t = 1)]
    pub reps: usize,
    #[arg(long, value_enum, default_value_t = Interval::Asymptotic)]
    pub interval: Interval,
    /// Confidence level of the asymptotic interval.
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Failure probability δ of the Hoeffding interval.
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
}

pub fn run(a: &Args, seed: u64) -> CliResult<Output> {
    let d = a.dim;
    if a.integrand == Integrand::Pi && d != 2 {
        return Err(CliError::input("integrand `pi` is defined for --dim 2 only"));
    }
    if d == 0 || a.reps == 0 {
        return Err(CliError::input("--dim and --reps must be positive"));
    }
    let (f, exact, sup): (ScalarFn, f64, f64) = match a.integrand {
        Integrand::Pi => (pi_integrand, std::f64::consts::PI, 4.0),
        Integrand::Sum => (|x| x.iter().sum(), d as f64 / 2.0, d as f64),
        Integrand::Prod => (|x| x.iter().product(), 0.5f64.powi(d as i32), 1.0),
        Integrand::Step => (|x| if x[0] <= 0.3 { 1.0 } else { 0.0 }, 0.3, 1.0),
    };
    let stream = root(seed, 1);
    let mut table = Table::new(&["rep", "estimate", "variance", "ci_low", "ci_high", "covered"]);
    let mut first = None;
    let mut sq = 0.0;
    let mut covered = 0usize;
    for r in 0..a.reps {
        let est = crude_mc(f, d, a.samples, &stream.fork(r as u64))?;
        let variance = est.acc.variance()?;
        let ci = match a.interval {
            Interval::Asymptotic => asymptotic_interval(&est.acc, a.level)?,
            Interval::Hoeffding => hoeffding_interval(est.estimate(), a.samples as u64, a.delta, sup)?,
        };
        sq += (est.estimate() - exact).powi(2);
        covered += usize::from(ci.contains(exact));
        table.push(vec![r.into(), est.estimate().into(), variance.into(), ci.low().into(), ci.high().into(), ci.contains(exact).into()]);
        first.get_or_insert((est.estimate(), variance, ci));
    }
    let (estimate, variance, ci) = first.expect("at least one replication");
    let mut out = Output::new(json!({
        "integrand": format!("{:?}", a.integrand).to_lowercase(),
        "dim": d,
        "samples": a.samples,
        "estimate": estimate,
        "variance": variance,
        "ci_low": ci.low(),
        "ci_high": ci.high(),
        "level": ci.level,
        "kind": ci.kind,
        "exact": exact,
    }));
    if a.reps > 1 {
        out.insert("reps", a.reps);
        out.insert("rmse", (sq / a.reps as f64).sqrt());
        out.insert("coverage", covered as f64 / a.reps as f64);
        out = out.with_table(table);
    }
    Ok(out)
}
