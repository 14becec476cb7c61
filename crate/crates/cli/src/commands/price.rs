use clap::ValueEnum;
use stochkit::pricing::{bias_constant, hoeffding_price_interval, lognormal_call_closed_form, price, AsianRule, PayoffSpec, PriceOptions};
use stochkit::sde::{Gbm, Merton};

use super::root;
use super::sde::ModelArgs;
use crate::output::Output;
use crate::CliResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Payoff {
    Call,
    Put,
    /// Fixed-strike Asian put on the time average.
    Asian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PriceModel {
    Gbm,
    Merton,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Rule {
    Step,
    Linear,
}

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long, value_enum, default_value_t = Payoff::Call)]
    pub payoff: Payoff,
    #[arg(long, default_value_t = 1.0)]
    pub strike: f64,
    /// Euler steps n.
    #[arg(long, default_value_t = 256)]
    pub steps: usize,
    /// Monte Carlo paths M.
    #[arg(long, default_value_t = 100_000)]
    pub paths: usize,
    /// Failure probability of the Hoeffding interval.
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long, value_enum, default_value_t = PriceModel::Gbm)]
    pub model: PriceModel,
    /// Time-average discretization of the Asian payoff.
    #[arg(long, value_enum, default_value_t = Rule::Step)]
    pub asian_rule: Rule,
    /// Bias constant C in the budget C·n^{−1/2}.
    #[arg(long)]
    pub c_bias: Option<f64>,
    /// Estimate C from this many coupled paths (GBM European payoffs).
    #[arg(long, default_value_t = 0)]
    pub bias_paths: usize,
    #[command(flatten)]
    pub params: ModelArgs,
}

pub fn run(a: &Args, seed: u64) -> CliResult<Output> {
    let p = &a.params;
    let payoff = match a.payoff {
        Payoff::Call => PayoffSpec::call(a.strike),
        Payoff::Put => PayoffSpec::put(a.strike),
        Payoff::Asian => PayoffSpec::asian_put(
            a.strike,
            match a.asian_rule {
                Rule::Step => AsianRule::Step,
                Rule::Linear => AsianRule::Linear,
            },
        ),
    };
    let stream = root(seed, 6);
    let gbm = Gbm { mu: p.mu, sigma: p.sigma, x0: p.x0, horizon: p.horizon };
    let european = a.payoff != Payoff::Asian;
    let c_bias = match a.c_bias {
        Some(c) => Some(c),
        None if a.bias_paths > 0 && a.model == PriceModel::Gbm && european => {
            Some(bias_constant(&gbm, payoff.lipschitz(), a.steps, a.bias_paths, &stream.fork(1))?)
        }
        None => None,
    };
    let opts = PriceOptions { level: a.level, delta: a.delta, c_bias };
    let report = match a.model {
        PriceModel::Gbm => price(&gbm, &payoff, a.steps, a.paths, &stream, opts)?,
        PriceModel::Merton => price(&Merton::new(p.mu, p.sigma, p.c, p.lambda, p.x0, p.horizon)?, &payoff, a.steps, a.paths, &stream, opts)?,
    };
    let mut out = Output::new(&report);
    out.insert("combined_halfwidth", report.combined_halfwidth());
    if let Some(c) = c_bias {
        out.insert("c_bias", c);
    }
    if payoff.bound().is_some() {
        let ci = hoeffding_price_interval(&report, payoff.bound(), a.delta)?;
        out.insert("hoeffding_low", ci.low());
        out.insert("hoeffding_high", ci.high());
    }
    if a.model == PriceModel::Gbm && european {
        let call = lognormal_call_closed_form(p.x0, p.mu, p.sigma, p.horizon, a.strike);
        let exact = match a.payoff {
            Payoff::Call => call,
            _ => call - p.x0 * (p.mu * p.horizon).exp() + a.strike,
        };
        out.insert("exact", exact);
    }
    Ok(out)
}
