use stochkit::calibrate::simplex::SimplexOptions;
use stochkit::calibrate::{
    ml_gbm, ml_geometric_ou, ml_vasicek, qml_fit, qv_estimate_gbm, synthetic_gbm, synthetic_vasicek,
    vasicek_neg_log_likelihood, ObservationSeries, QmlModel,
};
use stochkit::numerics::median;
use stochkit::pricing::{
    bias_constant, error_budget, hoeffding_price_interval, lognormal_call_closed_form, price, PayoffSpec, PriceOptions,
};
use stochkit::sde::Gbm;
use stochkit::{McAccumulator, RandomStream};

fn gbm(mu: f64, sigma: f64) -> Gbm {
    Gbm { mu, sigma, x0: 1.0, horizon: 1.0 }
}

#[test]
fn vanishing_volatility_gives_deterministic_payoff() {
    let model = gbm(0.05, 1e-8);
    let report = price(&model, &PayoffSpec::call(1.0), 4096, 16, &RandomStream::new(1, 0), PriceOptions::default()).unwrap();
    let target = 0.05f64.exp() - 1.0;
    assert!((report.estimate - target).abs() < 1e-6, "estimate {}", report.estimate);
}

#[test]
fn hoeffding_interval_covers_discretized_expectation() {
    let model = gbm(0.05, 0.3);
    let put = PayoffSpec::put(1.0);
    let n = 16;
    let reference = price(&model, &put, n, 1_000_000, &RandomStream::new(99, 0), PriceOptions::default()).unwrap().estimate;
    let root = RandomStream::new(2, 0);
    let reps = 500;
    let covered = (0..reps)
        .filter(|&r| {
            let report = price(&model, &put, n, 1000, &root.fork(r), PriceOptions::default()).unwrap();
            hoeffding_price_interval(&report, put.bound(), 0.05).unwrap().contains(reference)
        })
        .count();
    assert!(covered as f64 / reps as f64 >= 0.95, "coverage {}", covered as f64 / reps as f64);
}

#[test]
fn hoeffding_halfwidth_shrinks_as_delta_grows() {
    let model = gbm(0.0, 0.2);
    let put = PayoffSpec::put(1.0);
    let report = price(&model, &put, 8, 100, &RandomStream::new(3, 0), PriceOptions::default()).unwrap();
    let widths: Vec<f64> = [0.01, 0.05, 0.1, 0.5]
        .iter()
        .map(|&d| hoeffding_price_interval(&report, put.bound(), d).unwrap().halfwidth)
        .collect();
    assert!(widths.windows(2).all(|w| w[1] < w[0]));
    assert!(hoeffding_price_interval(&report, None, 0.05).is_err());
}

#[test]
fn lipschitz_payoff_bias_shrinks_with_steps() {
    let model = gbm(0.05, 0.2);
    let call = PayoffSpec::call(1.0);
    let s = RandomStream::new(4, 0);
    let runs: Vec<_> = [8, 32, 128]
        .iter()
        .map(|&n| price(&model, &call, n, 100_000, &s.fork(n as u64), PriceOptions::default()).unwrap())
        .collect();
    let se = |a: usize, b: usize| {
        ((runs[a].sample_variance + runs[b].sample_variance) / 100_000.0).sqrt()
    };
    let d1 = (runs[0].estimate - runs[1].estimate).abs();
    let d2 = (runs[1].estimate - runs[2].estimate).abs();
    assert!(d2 <= d1 + 2.0 * se(1, 2), "d1 {d1}, d2 {d2}");
}

#[test]
fn fitted_bias_constant_predicts_total_rmse() {
    let model = gbm(0.05, 0.2);
    let call = PayoffSpec::call(1.0);
    let c = bias_constant(&model, 1.0, 64, 20_000, &RandomStream::new(5, 0)).unwrap();
    let oracle = lognormal_call_closed_form(1.0, 0.05, 0.2, 1.0, 1.0);
    let root = RandomStream::new(6, 0);
    let mut sq = 0.0;
    let mut spread = McAccumulator::new();
    for r in 0..100 {
        let report = price(&model, &call, 64, 64, &root.fork(r), PriceOptions::default()).unwrap();
        sq += (report.estimate - oracle).powi(2);
        spread.push(report.sample_variance.sqrt());
    }
    let measured = (sq / 100.0).sqrt();
    let predicted = error_budget(64, 64, c, spread.mean);
    assert!(predicted / measured < 2.0 && measured / predicted < 2.0, "predicted {predicted}, measured {measured}");
    assert_eq!(error_budget(64, 64, 0.0, 2.0), 2.0 / 8.0);
}

#[test]
fn price_is_thread_count_invariant() {
    let model = gbm(0.05, 0.2);
    let payoff = PayoffSpec::call(1.0);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| {
            price(&model, &payoff, 32, 10_001, &RandomStream::new(7, 0), PriceOptions::default()).unwrap()
        })
    };
    let (a, b) = (run(1), run(4));
    assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
    assert_eq!(a.sample_variance.to_bits(), b.sample_variance.to_bits());
}

#[test]
fn qv_sigma_is_nearly_unbiased() {
    let root = RandomStream::new(8, 0);
    let n = 1 << 14;
    let (mut s2, mut mu) = (McAccumulator::new(), McAccumulator::new());
    for r in 0..100 {
        let series = synthetic_gbm(0.05, 0.2, 1.0, 1.0 / n as f64, n, &mut root.fork(r)).unwrap();
        let est = qv_estimate_gbm(&series).unwrap();
        s2.push(est.param("sigma").unwrap().powi(2));
        mu.push(est.param("mu").unwrap());
    }
    assert!((s2.mean - 0.04).abs() < 0.002, "mean sigma² {}", s2.mean);
    let sd = mu.variance().unwrap().sqrt();
    assert!((sd / 0.2 - 1.0).abs() < 0.2, "sd of mu-hat {sd}");
}

#[test]
fn qv_error_shrinks_with_mesh() {
    let root = RandomStream::new(9, 0);
    let errs: Vec<f64> = [1usize << 8, 1 << 10, 1 << 12]
        .iter()
        .map(|&n| {
            let e: Vec<f64> = (0..50)
                .map(|r| {
                    let series = synthetic_gbm(0.05, 0.2, 1.0, 1.0 / n as f64, n, &mut root.fork(n as u64).fork(r)).unwrap();
                    (qv_estimate_gbm(&series).unwrap().param("sigma").unwrap().powi(2) - 0.04).abs()
                })
                .collect();
            median(&e)
        })
        .collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
}

#[test]
fn ml_gbm_is_scale_equivariant() {
    let series = synthetic_gbm(0.1, 0.3, 50.0, 1.0 / 252.0, 500, &mut RandomStream::new(10, 0)).unwrap();
    let scaled = ObservationSeries::new(series.times.clone(), series.values.iter().map(|v| v * 7.5).collect()).unwrap();
    let (a, b) = (ml_gbm(&series).unwrap(), ml_gbm(&scaled).unwrap());
    for name in ["mu", "sigma2"] {
        let (x, y) = (a.param(name).unwrap(), b.param(name).unwrap());
        assert!((x - y).abs() <= 1e-10 * (1.0 + x.abs()), "{name}: {x} vs {y}");
    }
}

#[test]
fn vasicek_estimate_is_a_local_minimum() {
    let h = 1.0 / 252.0;
    let series = synthetic_vasicek(2.0, 1.0, 0.3, 1.0, h, 4096, &mut RandomStream::new(11, 0)).unwrap();
    let est = ml_vasicek(&series).unwrap();
    let (k, m, s2) = (est.param("kappa").unwrap(), est.param("mu").unwrap(), est.param("sigma2").unwrap());
    let best = vasicek_neg_log_likelihood(&series.values, h, k, m, s2);
    assert!((best - est.neg_log_likelihood.unwrap()).abs() < 1e-9 * best.abs().max(1.0));
    let mut probe = RandomStream::new(11, 1);
    for _ in 0..100 {
        let mut jitter = |v: f64| v * (1.0 + 0.2 * (probe.next_f64() - 0.5));
        let l = vasicek_neg_log_likelihood(&series.values, h, jitter(k), jitter(m), jitter(s2));
        assert!(l >= best, "probe beat the estimate: {l} < {best}");
    }
}

#[test]
fn geometric_ou_recovers_log_vasicek() {
    let h = 1.0 / 252.0;
    let logs = synthetic_vasicek(2.0, 0.5, 0.3, 0.5, h, 1 << 14, &mut RandomStream::new(12, 0)).unwrap();
    let prices = ObservationSeries::new(logs.times.clone(), logs.values.iter().map(|v| v.exp()).collect()).unwrap();
    let est = ml_geometric_ou(&prices).unwrap();
    let (k, mu, mu_bar, s2) = (
        est.param("kappa").unwrap(),
        est.param("mu").unwrap(),
        est.param("mu_bar").unwrap(),
        est.param("sigma2").unwrap(),
    );
    assert!((k / 2.0 - 1.0).abs() < 0.25, "kappa {k}");
    // long-run mean has standard deviation about σ/(κ√T) over the span T
    let span = h * (1 << 14) as f64;
    assert!((mu_bar - 0.5).abs() < 4.0 * 0.3 / (2.0 * span.sqrt()), "mu_bar {mu_bar}");
    assert!((s2 / 0.09 - 1.0).abs() < 0.05, "sigma2 {s2}");
    assert!((mu - (mu_bar + s2 / (2.0 * k))).abs() < 1e-14);
}

#[test]
fn qml_with_linear_drift_is_least_squares() {
    // b ≡ (2π)^{-1/2} with h = 1 makes the log term vanish, so L is a scaled
    // residual sum of squares. A slowly reverting, zero-centred series keeps
    // both directions well conditioned and L small enough that its roundoff
    // sits far below the curvature at the 1e-8 scale.
    let h = 1.0;
    let b = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = RandomStream::new(13, 0);
    let mut values = vec![0.0];
    for k in 0..2000 {
        let x: f64 = values[k];
        values.push(x + (0.002 - 0.01 * x) * h + 0.05 * s.std_normal());
    }
    let series = ObservationSeries::uniform(0.0, h, values).unwrap();
    let model = QmlModel::new("linear", &["a0", "a1"], |_, x, th| th[0] + th[1] * x, move |_, _, _| b);
    let fit = qml_fit(&model, &series, &[0.0, 0.0], &[(-50.0, 50.0), (-50.0, 50.0)], SimplexOptions::default()).unwrap();

    // Normal equations for Δx/h = a0 + a1·x.
    let x = &series.values;
    let (mut s1, mut sx, mut sxx, mut sy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for k in 0..x.len() - 1 {
        let y = (x[k + 1] - x[k]) / h;
        s1 += 1.0;
        sx += x[k];
        sxx += x[k] * x[k];
        sy += y;
        sxy += x[k] * y;
    }
    let det = s1 * sxx - sx * sx;
    let a0 = (sxx * sy - sx * sxy) / det;
    let a1 = (s1 * sxy - sx * sy) / det;
    let (q0, q1) = (fit.param("a0").unwrap(), fit.param("a1").unwrap());
    assert!((q0 - a0).abs() < 1e-8 && (q1 - a1).abs() < 1e-8, "qml ({q0}, {q1}) vs ls ({a0}, {a1})");
}

#[test]
fn qml_log_gbm_coincides_with_ml() {
    let series = synthetic_gbm(0.08, 0.25, 1.0, 1.0 / 252.0, 1000, &mut RandomStream::new(14, 0)).unwrap();
    let logs = ObservationSeries::new(series.times.clone(), series.values.iter().map(|v| v.ln()).collect()).unwrap();
    let ml = ml_gbm(&series).unwrap();
    let qml = qml_fit(&QmlModel::log_gbm(), &logs, &[0.0, 0.5], &[(-5.0, 5.0), (1e-6, 5.0)], SimplexOptions::default()).unwrap();
    assert!((ml.param("mu").unwrap() - qml.param("mu").unwrap()).abs() < 1e-5);
    assert!((ml.param("sigma").unwrap() - qml.param("sigma").unwrap()).abs() < 1e-5);
}

#[test]
fn csv_round_trip_is_lossless() {
    let series = synthetic_gbm(0.1, 0.3, 1.0, 0.1, 20, &mut RandomStream::new(15, 0)).unwrap();
    let text: String = series
        .times
        .points()
        .iter()
        .zip(&series.values)
        .map(|(t, v)| format!("{t:.16e},{v:.16e}\n"))
        .collect();
    let back = ObservationSeries::from_csv(text.as_bytes()).unwrap();
    assert_eq!(back.values, series.values);
    assert_eq!(back.times.points(), series.times.points());
}
