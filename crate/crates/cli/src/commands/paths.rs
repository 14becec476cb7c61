use clap::ValueEnum;
use serde_json::json;
use stochkit::processes::{density_grid, ou_optimal_grid, refine_poisson, refine_wiener, simulate_compound, simulate_poisson, simulate_wiener, SamplingDensity};
use stochkit::rand::Intensity;
use stochkit::TimeGrid;

use super::root;
use crate::output::{Output, Table};
use crate::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Process {
    Wiener,
    Poisson,
    Cpoisson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Grid {
    Uniform,
    /// Grid from the density h(t) = (γ+1)(t/T)^γ.
    Density,
    /// Optimal grid for Ornstein–Uhlenbeck with rate κ.
    OuOptimal,
}

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long, value_enum, default_value_t = Process::Wiener)]
    pub process: Process,
    #[arg(long, value_enum, default_value_t = Grid::Uniform)]
    pub grid: Grid,
    /// Number of cells.
    #[arg(long, default_value_t = 16)]
    pub n: usize,
    #[arg(long, default_value_t = 1.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 1)]
    pub paths: usize,
    /// Poisson intensity λ.
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    /// Compound marks are uniform on [mark-lo, mark-hi).
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub mark_lo: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub mark_hi: f64,
    /// Exponent γ > −1 of the density grid.
    #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
    pub exponent: f64,
    /// Mean-reversion rate κ of the OU-optimal grid.
    #[arg(long, default_value_t = 1.0)]
    pub kappa: f64,
    /// Rounds of midpoint bridge refinement after simulation.
    #[arg(long, default_value_t = 0)]
    pub refine: u32,
}

fn build_grid(a: &Args) -> CliResult<TimeGrid> {
    let t = a.horizon;
    Ok(match a.grid {
        Grid::Uniform => TimeGrid::uniform(0.0, t, a.n)?,
        Grid::Density => {
            let g = a.exponent;
            if !(g > -1.0) {
                return Err(CliError::input(format!("--exponent must exceed −1, got {g}")));
            }
            density_grid(&SamplingDensity::new(move |s| (g + 1.0) * (s / t).powf(g), t)?, a.n)?
        }
        Grid::OuOptimal => ou_optimal_grid(a.kappa, t, a.n)?,
    })
}

pub fn run(a: &Args, seed: u64) -> CliResult<Output> {
    let grid = build_grid(a)?;
    let stream = root(seed, 4);
    let lambda = Intensity::Constant(a.lambda);
    let (lo, hi) = (a.mark_lo, a.mark_hi);
    if a.process == Process::Cpoisson && a.refine > 0 {
        return Err(CliError::input("bridge refinement is available for wiener and poisson paths"));
    }
    let mut table = Table::new(&["path", "t", "value"]);
    let mut terminal = Vec::new();
    for p in 0..a.paths {
        let base = stream.substream(p as u64);
        let mut s = base.clone();
        let path = match a.process {
            Process::Wiener => {
                let w = simulate_wiener(&grid, &mut s);
                if a.refine > 0 {
                    refine_wiener(&w, a.refine, &base.fork(1))?
                } else {
                    w
                }
            }
            Process::Poisson => {
                let n = simulate_poisson(&grid, &lambda, &mut s)?;
                if a.refine > 0 {
                    refine_poisson(&n, &lambda, a.refine, &base.fork(1))?
                } else {
                    n
                }
            }
            Process::Cpoisson => simulate_compound(&grid, a.lambda, &|r| lo + (hi - lo) * r.next_f64(), &mut s)?,
        };
        for (t, v) in path.grid.points().iter().zip(&path.values) {
            table.push(vec![p.into(), (*t).into(), (*v).into()]);
        }
        terminal.push(path.terminal());
    }
    Ok(Output::new(json!({
        "process": format!("{:?}", a.process).to_lowercase(),
        "grid": grid.points(),
        "paths": a.paths,
        "terminal": terminal,
    }))
    .with_table(table))
}
