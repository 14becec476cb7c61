//! Named experiments, one per acceptance criterion. Each returns its
//! metrics as a JSON summary plus a plot-ready table; pass/fail thresholds
//! live with the acceptance test, not here.

use serde_json::json;
use stochkit::calibrate::{ml_gbm, ml_vasicek, qml_fit, simplex::SimplexOptions, synthetic_gbm, synthetic_vasicek, ObservationSeries, QmlModel};
use stochkit::exec;
use stochkit::forecast::{coverage_study, radius_for_confidence, ForecastConfig, ForecastModel, Region};
use stochkit::mc::{crude_mc, hoeffding_interval, pi_integrand, pi_rmse};
use stochkit::numerics::{loglog_slope, median};
use stochkit::ode::{holder_test_problem, rate_study, OdeScheme};
use stochkit::pricing::{bias_constant, lognormal_call_closed_form, lognormal_call_quadrature, price, PayoffSpec, PriceOptions};
use stochkit::processes::{
    bridge_refine_wiener, l2_reconstruction_error, predicted_trapezoid_error, reconstruct_linear, refine_wiener, simulate_wiener,
    squared_path_distance, trapezoid_integral_w,
};
use stochkit::quadrature::corpus::{LINEAR, STEP};
use stochkit::quadrature::{crude_variance, stratified_mc, stratified_variance};
use stochkit::rate::{dyadic, RateStudy};
use stochkit::sde::{euler_maruyama, strong_rate_study, Gbm, Merton, SchemeKind};
use stochkit::{RandomStream, TimeGrid};

use crate::error::CliResult;
use crate::output::{Output, Table};

pub struct Preset {
    pub name: &'static str,
    pub about: &'static str,
    run: fn(&RandomStream) -> CliResult<Output>,
}

pub const PRESETS: &[Preset] = &[
    Preset { name: "pi-rmse", about: "RMSE of the π estimator over 500 replications at N = 10⁴", run: pi_rmse_preset },
    Preset { name: "crude-mc-rate", about: "crude MC RMSE against N for f(x) = x", run: crude_rate },
    Preset { name: "stratified-dominance", about: "stratified versus crude MC for f(x) = x with K = 4", run: stratified },
    Preset { name: "hoeffding-coverage", about: "Hoeffding interval coverage for 1_[0,0.3]", run: hoeffding },
    Preset { name: "ode-randomized-euler", about: "deterministic versus randomized Euler on a Hölder-1/2 drift", run: ode_randomized },
    Preset { name: "bridge-moments", about: "moments of the Brownian bridge midpoint on a unit cell", run: bridge_moments },
    Preset { name: "trapezoid-wiener", about: "trapezoid rule for ∫W against a bridge-refined reference", run: trapezoid_wiener },
    Preset { name: "linear-reconstruction", about: "path-L² error of linear reconstruction of W at n = 16", run: linear_reconstruction },
    Preset { name: "gbm-strong-rate", about: "Euler–Maruyama strong error on GBM (μ = 0, σ = 1)", run: gbm_strong_rate },
    Preset { name: "merton-identity", about: "Euler–Maruyama on Merton against the product form", run: merton_identity },
    Preset { name: "gbm-call-price", about: "GBM call price against a lognormal quadrature oracle", run: gbm_call_price },
    Preset { name: "qml-gbm", about: "QML on log-GBM data against closed-form ML", run: qml_gbm },
    Preset { name: "vasicek-recovery", about: "Vasicek ML over 50 exact-transition simulations", run: vasicek_recovery },
    Preset { name: "forecast-coverage", about: "forecast interval and ellipsoid coverage", run: forecast_coverage },
];

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

impl Preset {
    /// Run with the root stream of `seed`; each preset forks its own family.
    pub fn run(&self, seed: u64) -> CliResult<Output> {
        let family = PRESETS.iter().position(|p| p.name == self.name).unwrap_or(0) as u64;
        let mut out = (self.run)(&RandomStream::new(seed, 0).fork(0x5354_5544 + family))?;
        out.summary.insert("preset".into(), json!(self.name));
        out.summary.insert("seed".into(), json!(seed));
        Ok(out)
    }
}

fn rate_table(study: &RateStudy, error_name: &str) -> Table {
    let mut t = Table::new(&["n", error_name]);
    for (n, e) in study.n.iter().zip(&study.error) {
        t.push(vec![(*n).into(), (*e).into()]);
    }
    t
}

fn pi_rmse_preset(root: &RandomStream) -> CliResult<Output> {
    let (reps, n) = (500usize, 10_000);
    let pi = std::f64::consts::PI;
    let mut table = Table::new(&["rep", "estimate"]);
    let mut sq = 0.0;
    for r in 0..reps {
        let est = crude_mc(pi_integrand, 2, n, &root.fork(r as u64))?.estimate();
        sq += (est - pi).powi(2);
        table.push(vec![r.into(), est.into()]);
    }
    let rmse = (sq / reps as f64).sqrt();
    let predicted = pi_rmse(n);
    Ok(Output::new(json!({
        "reps": reps, "samples": n, "rmse": rmse, "predicted_rmse": predicted, "relative_deviation": (rmse - predicted).abs() / predicted,
    }))
    .with_table(table))
}

fn crude_rate(root: &RandomStream) -> CliResult<Output> {
    let reps = 500;
    let ns = [100usize, 1_000, 10_000, 100_000];
    let mut table = Table::new(&["N", "rmse", "predicted_rmse"]);
    let mut rmses = Vec::new();
    for (li, &n) in ns.iter().enumerate() {
        let level = root.fork(li as u64);
        let sq: f64 = (0..reps)
            .map(|r| crude_mc(|x: &[f64]| x[0], 1, n, &level.fork(r as u64)).map(|e| (e.estimate() - 0.5).powi(2)))
            .sum::<stochkit::Result<f64>>()?;
        let rmse = (sq / reps as f64).sqrt();
        rmses.push(rmse);
        table.push(vec![n.into(), rmse.into(), (1.0 / (12.0 * n as f64)).sqrt().into()]);
    }
    let x: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    Ok(Output::new(json!({ "reps": reps, "slope": loglog_slope(&x, &rmses) })).with_table(table))
}

fn stratified(root: &RandomStream) -> CliResult<Output> {
    let (reps, n, k) = (200, 4_000, 4);
    let f = LINEAR;
    let cells: Vec<f64> = (0..k).map(|i| f.cell_integral(i as f64 / k as f64, (i + 1) as f64 / k as f64)).collect();
    let var_strat = stratified_variance(f.integral_sq(), &cells, &vec![1.0 / k as f64; k], n);
    let var_crude = crude_variance(f.integral(), f.integral_sq(), n);
    let (crude_stream, strat_stream) = (root.fork(1), root.fork(2));
    let mut crude_sq = 0.0;
    let mut strat_sq = 0.0;
    for r in 0..reps {
        let g = |x: &[f64]| (f.f)(x[0]);
        crude_sq += (crude_mc(g, 1, n, &crude_stream.fork(r as u64))?.estimate() - f.integral()).powi(2);
        strat_sq += (stratified_mc(g, 1, k, n, &strat_stream.fork(r as u64))?.estimate - f.integral()).powi(2);
    }
    let rmse_crude = (crude_sq / reps as f64).sqrt();
    let rmse_strat = (strat_sq / reps as f64).sqrt();
    let mut table = Table::new(&["estimator", "analytic_variance", "empirical_rmse"]);
    table.push(vec!["crude".into(), var_crude.into(), rmse_crude.into()]);
    table.push(vec!["stratified".into(), var_strat.into(), rmse_strat.into()]);
    Ok(Output::new(json!({
        "reps": reps, "samples": n, "strata": k,
        "var_crude": var_crude, "var_strat": var_strat, "rmse_crude": rmse_crude, "rmse_strat": rmse_strat,
    }))
    .with_table(table))
}

fn hoeffding(root: &RandomStream) -> CliResult<Output> {
    let (reps, n, delta) = (500, 1_000, 0.05);
    let exact = STEP.integral();
    let mut covered = 0usize;
    let mut halfwidth = 0.0;
    for r in 0..reps {
        let est = crude_mc(|x: &[f64]| (STEP.f)(x[0]), 1, n, &root.fork(r as u64))?;
        let ci = hoeffding_interval(est.estimate(), n as u64, delta, 1.0)?;
        halfwidth = ci.halfwidth;
        covered += usize::from(ci.contains(exact));
    }
    Ok(Output::new(json!({
        "reps": reps, "samples": n, "delta": delta, "halfwidth": halfwidth, "coverage": covered as f64 / reps as f64,
    })))
}

fn ode_randomized(root: &RandomStream) -> CliResult<Output> {
    let problem = holder_test_problem(0.5);
    let levels = dyadic(4, 10);
    let n_ref = 1 << 14;
    let (paths, skip) = (200, 2);
    let det = rate_study(&problem, OdeScheme::Euler, &levels, n_ref, 1, skip, root)?;
    let ran = rate_study(&problem, OdeScheme::RandomizedEuler, &levels, n_ref, paths, skip, &root.fork(1))?;
    let mut table = Table::new(&["n", "error_euler", "error_randomized_euler"]);
    for (i, n) in levels.iter().enumerate() {
        table.push(vec![(*n).into(), det.error[i].into(), ran.error[i].into()]);
    }
    Ok(Output::new(json!({
        "rho": 0.5, "n_ref": n_ref, "paths": paths, "skipped_levels": skip,
        "rate_euler": det.rate, "rate_randomized_euler": ran.rate, "rate_gain": ran.rate - det.rate,
    }))
    .with_table(table))
}

fn bridge_moments(root: &RandomStream) -> CliResult<Output> {
    let draws = 100_000;
    let acc = exec::accumulate(draws, |i| bridge_refine_wiener(0.5, (0.0, 0.0), (1.0, 0.0), &mut root.substream(i as u64)))?;
    let var = acc.variance()?;
    Ok(Output::new(json!({
        "draws": draws, "mean": acc.mean, "std_error": acc.std_error()?, "variance": var, "predicted_variance": 0.25,
    })))
}

/// Coarse Wiener path on n cells of [0, 1] and its 2^levels-fold bridge refinement.
fn wiener_pair(root: &RandomStream, p: usize, n: usize, levels: u32) -> stochkit::Result<(stochkit::processes::ProcessPath, stochkit::processes::ProcessPath)> {
    let base = root.substream(p as u64);
    let grid = TimeGrid::uniform(0.0, 1.0, n)?;
    let coarse = simulate_wiener(&grid, &mut base.clone());
    let fine = refine_wiener(&coarse, levels, &base.fork(1))?;
    Ok((coarse, fine))
}

fn trapezoid_wiener(root: &RandomStream) -> CliResult<Output> {
    let (paths, n, levels) = (10_000, 8, 6);
    let acc = exec::accumulate(paths, |p| {
        let (coarse, fine) = wiener_pair(root, p, n, levels)?;
        Ok((trapezoid_integral_w(&fine) - trapezoid_integral_w(&coarse)).powi(2))
    })?;
    let err = acc.mean.sqrt();
    let predicted = predicted_trapezoid_error(n, 1.0);
    Ok(Output::new(json!({
        "paths": paths, "n": n, "refinement": 1 << levels, "l2_error": err, "predicted": predicted,
        "relative_deviation": (err - predicted).abs() / predicted,
    })))
}

fn linear_reconstruction(root: &RandomStream) -> CliResult<Output> {
    let (paths, n, levels) = (10_000, 16, 6);
    let acc = exec::accumulate(paths, |p| {
        let (coarse, fine) = wiener_pair(root, p, n, levels)?;
        Ok(squared_path_distance(&fine, &reconstruct_linear(&coarse)?))
    })?;
    let err = acc.mean.sqrt();
    let predicted = l2_reconstruction_error(n, 1.0);
    Ok(Output::new(json!({
        "paths": paths, "n": n, "refinement": 1 << levels, "l2_error": err, "predicted": predicted,
        "relative_deviation": (err - predicted).abs() / predicted,
    })))
}

fn gbm_strong_rate(root: &RandomStream) -> CliResult<Output> {
    let model = Gbm { mu: 0.0, sigma: 1.0, x0: 1.0, horizon: 1.0 };
    let study = strong_rate_study(&model, SchemeKind::Euler, &dyadic(3, 9), 1_000, 0, root)?;
    Ok(Output::new(json!({
        "paths": 1000, "rate": study.rate, "slope": -study.rate, "monotone": study.monotone_decreasing(),
    }))
    .with_table(rate_table(&study, "rmse")))
}

fn merton_identity(root: &RandomStream) -> CliResult<Output> {
    let (mu, sigma, c, lambda) = (0.05, 0.3, -0.2, 3.0);
    let model = Merton::new(mu, sigma, c, lambda, 1.0, 1.0)?;
    let n = 64;
    let grid = TimeGrid::uniform(0.0, 1.0, n)?;
    let mut mismatches = 0usize;
    let mut max_abs = 0.0f64;
    let mut jumps = 0u64;
    for p in 0..100 {
        let out = euler_maruyama(&model, &grid, &mut root.substream(p as u64))?;
        let mut x = out.state(0)[0];
        for k in 0..n {
            let dn = out.tape.dn(k)[0];
            jumps += dn as u64;
            x *= 1.0 + mu * grid.dt(k) + sigma * out.tape.dw(k)[0] + c * dn;
            let scheme = out.state(k + 1)[0];
            if scheme.to_bits() != x.to_bits() {
                mismatches += 1;
                max_abs = max_abs.max((scheme - x).abs());
            }
        }
    }
    Ok(Output::new(json!({ "paths": 100, "steps": n, "jumps": jumps, "mismatches": mismatches, "max_abs_difference": max_abs })))
}

fn gbm_call_price(root: &RandomStream) -> CliResult<Output> {
    let (x0, k, mu, sigma, t) = (1.0, 1.0, 0.05, 0.2, 1.0);
    let model = Gbm { mu, sigma, x0, horizon: t };
    let (n, m) = (256, 100_000);
    let c_bias = bias_constant(&model, 1.0, n, 10_000, &root.fork(1))?;
    let report = price(&model, &PayoffSpec::call(k), n, m, root, PriceOptions { c_bias: Some(c_bias), ..Default::default() })?;
    let oracle = lognormal_call_quadrature(x0, mu, sigma, t, k, 1_000_000);
    let combined = report.combined_halfwidth();
    let mut out = Output::new(&report);
    out.insert("oracle", oracle);
    out.insert("closed_form", lognormal_call_closed_form(x0, mu, sigma, t, k));
    out.insert("c_bias", c_bias);
    out.insert("combined_halfwidth", combined);
    out.insert("deviation_in_halfwidths", (report.estimate - oracle).abs() / combined);
    Ok(out)
}

fn qml_gbm(root: &RandomStream) -> CliResult<Output> {
    let (mu, sigma, h, n) = (0.05, 0.2, 1.0 / 252.0, 2_520);
    let prices = synthetic_gbm(mu, sigma, 1.0, h, n, &mut root.clone())?;
    let ml = ml_gbm(&prices)?;
    let logs = ObservationSeries::new(prices.times.clone(), prices.values.iter().map(|v| v.ln()).collect())?;
    let qml = qml_fit(&QmlModel::log_gbm(), &logs, &[0.0, 0.5], &[(-10.0, 10.0), (1e-8, 10.0)], SimplexOptions::default())?;
    let d_mu = (qml.param("mu").unwrap_or(f64::NAN) - ml.param("mu").unwrap_or(f64::NAN)).abs();
    let d_sigma = (qml.param("sigma").unwrap_or(f64::NAN) - ml.param("sigma").unwrap_or(f64::NAN)).abs();
    Ok(Output::new(json!({
        "observations": n + 1, "ml": ml, "qml": qml, "abs_diff_mu": d_mu, "abs_diff_sigma": d_sigma, "max_abs_diff": d_mu.max(d_sigma),
    })))
}

fn vasicek_recovery(root: &RandomStream) -> CliResult<Output> {
    let (kappa, mu, sigma, h, n, reps) = (2.0, 1.0, 0.3, 1.0 / 252.0, 1 << 14, 50);
    let fits = exec::try_map_indexed(reps, |r| {
        let s = synthetic_vasicek(kappa, mu, sigma, mu, h, n, &mut root.substream(r as u64))?;
        ml_vasicek(&s)
    })?;
    let mut table = Table::new(&["rep", "kappa", "mu", "sigma2"]);
    let col = |name: &str| fits.iter().map(|f| f.param(name).unwrap_or(f64::NAN)).collect::<Vec<_>>();
    let (ks, ms, ss) = (col("kappa"), col("mu"), col("sigma2"));
    for r in 0..reps {
        table.push(vec![r.into(), ks[r].into(), ms[r].into(), ss[r].into()]);
    }
    let (mk, mm, msig) = (median(&ks), median(&ms), median(&ss));
    Ok(Output::new(json!({
        "reps": reps, "observations": n + 1,
        "median_kappa": mk, "median_mu": mm, "median_sigma2": msig,
        "rel_err_kappa": (mk - kappa).abs() / kappa, "rel_err_mu": (mm - mu).abs() / mu, "rel_err_sigma2": (msig - sigma * sigma).abs() / (sigma * sigma),
    }))
    .with_table(table))
}

fn forecast_coverage(root: &RandomStream) -> CliResult<Output> {
    let scalar = ForecastModel::scalar(|_, _| 0.0, |_, _| 0.5);
    let one = coverage_study(&scalar, &[1.0], &ForecastConfig::new(0.1, 1, Region::Level(0.95)), 100_000, &root.fork(1))?;
    let many = coverage_study(&scalar, &[1.0], &ForecastConfig::new(1.0, 20, Region::Level(0.998)), 10_000, &root.fork(2))?;
    let b = stochkit::forecast::DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.2, 0.4]);
    let plane = ForecastModel::constant(vec![0.1, -0.2], b);
    let r = radius_for_confidence(2, 0.95)?;
    let ell = coverage_study(&plane, &[0.0, 0.0], &ForecastConfig::new(0.5, 1, Region::Radius(r)), 100_000, &root.fork(3))?;
    let ell5 = coverage_study(&plane, &[0.0, 0.0], &ForecastConfig::new(0.5, 5, Region::Radius(r)), 10_000, &root.fork(4))?;
    let mut table = Table::new(&["experiment", "chains", "steps", "empirical", "target"]);
    table.push(vec!["scalar-one-step".into(), one.chains.into(), 1usize.into(), one.per_step[0].into(), one.target_step.into()]);
    table.push(vec!["scalar-simultaneous".into(), many.chains.into(), 20usize.into(), many.simultaneous.into(), many.target_simultaneous.into()]);
    table.push(vec!["ellipsoid-one-step".into(), ell.chains.into(), 1usize.into(), ell.per_step[0].into(), ell.target_step.into()]);
    table.push(vec!["ellipsoid-simultaneous".into(), ell5.chains.into(), 5usize.into(), ell5.simultaneous.into(), ell5.target_simultaneous.into()]);
    Ok(Output::new(json!({
        "scalar_one_step": one.per_step[0], "scalar_one_step_target": one.target_step,
        "scalar_simultaneous": many.simultaneous, "scalar_simultaneous_target": many.target_simultaneous,
        "ellipsoid_radius": r,
        "ellipsoid_one_step": ell.per_step[0], "ellipsoid_one_step_target": ell.target_step,
        "ellipsoid_simultaneous": ell5.simultaneous, "ellipsoid_simultaneous_target": ell5.target_simultaneous,
    }))
    .with_table(table))
}
