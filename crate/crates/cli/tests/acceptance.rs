//! End-to-end acceptance checks. Each criterion runs its preset through the
//! `stochkit` binary, checks the reported metrics and the wall-clock budget,
//! and prints one PASS/FAIL line. The target exits nonzero if any criterion fails.

use serde_json::Value;
use std::process::Command;
use std::time::{Duration, Instant};

const SEED: &str = "0";

fn run(args: &[&str]) -> (i32, Vec<u8>, Duration) {
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_stochkit"))
        .args(args)
        .env_remove("STOCHKIT_SEED")
        .output()
        .expect("failed to launch stochkit");
    let elapsed = start.elapsed();
    if !out.status.success() {
        eprintln!("{}", String::from_utf8_lossy(&out.stderr));
    }
    (out.status.code().unwrap_or(-1), out.stdout, elapsed)
}

fn preset(name: &str) -> (Value, Duration) {
    let (code, stdout, elapsed) =
        run(&["--seed", SEED, "--format", "json", "study", "--preset", name]);
    assert_eq!(code, 0, "preset {name} exited with {code}");
    (serde_json::from_slice(&stdout).expect("preset output is JSON"), elapsed)
}

fn num(v: &Value, key: &str) -> f64 {
    v[key]
        .as_f64()
        .unwrap_or_else(|| panic!("missing numeric field {key} in {v}"))
}

struct Verdict {
    id: usize,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn judge(
    id: usize,
    name: &'static str,
    budget_s: f64,
    elapsed: Duration,
    ok: bool,
    detail: String,
) -> Verdict {
    let secs = elapsed.as_secs_f64();
    let in_time = secs < budget_s;
    let mut detail = format!("{detail}; {secs:.2}s (budget {budget_s}s)");
    if !in_time {
        detail.push_str(" over budget");
    }
    Verdict { id, name, pass: ok && in_time, detail }
}

fn criterion_1() -> Verdict {
    let (v, t) = preset("pi-rmse");
    let rmse = num(&v, "rmse");
    let pi = std::f64::consts::PI;
    let predicted = (pi * (4.0 - pi)).sqrt() / 1e4f64.sqrt();
    let rel = (rmse - predicted).abs() / predicted;
    judge(1, "pi estimator RMSE", 5.0, t, rel <= 0.10,
        format!("rmse {rmse:.5} vs {predicted:.5}, rel dev {rel:.3}"))
}

fn criterion_2() -> Verdict {
    let (v, t) = preset("crude-mc-rate");
    let slope = num(&v, "slope");
    judge(2, "crude MC rate", 10.0, t, (-0.55..=-0.45).contains(&slope),
        format!("slope {slope:.4}"))
}

fn criterion_3() -> Verdict {
    let (v, t) = preset("stratified-dominance");
    let (vc, vs) = (num(&v, "var_crude"), num(&v, "var_strat"));
    let (rc, rs) = (num(&v, "rmse_crude"), num(&v, "rmse_strat"));
    judge(3, "stratified dominance", 5.0, t, vs < vc && rs < rc,
        format!("var {vs:.3e} < {vc:.3e}, rmse {rs:.3e} < {rc:.3e}"))
}

fn criterion_4() -> Verdict {
    let (v, t) = preset("hoeffding-coverage");
    let cov = num(&v, "coverage");
    judge(4, "Hoeffding coverage", 5.0, t, cov >= 0.95, format!("coverage {cov:.4}"))
}

fn criterion_5() -> Verdict {
    let (v, t) = preset("ode-randomized-euler");
    let det = num(&v, "rate_euler");
    let ran = num(&v, "rate_randomized_euler");
    let ok = ran - det >= 0.2
        && (0.35..=0.65).contains(&det)
        && (0.8..=1.2).contains(&ran);
    judge(5, "randomized vs deterministic Euler", 60.0, t, ok,
        format!("deterministic {det:.3}, randomized {ran:.3}, gain {:.3}", ran - det))
}

fn criterion_6() -> Verdict {
    let (v, t) = preset("bridge-moments");
    let (mean, se, var) = (num(&v, "mean"), num(&v, "std_error"), num(&v, "variance"));
    let ok = mean.abs() < 4.0 * se && (var - 0.25).abs() <= 0.005;
    judge(6, "Brownian bridge moments", 5.0, t, ok,
        format!("mean {mean:.5} (SE {se:.5}), variance {var:.5}"))
}

fn criterion_7() -> Verdict {
    let (v, t) = preset("trapezoid-wiener");
    let err = num(&v, "l2_error");
    let predicted = 12f64.powf(-0.5) / 8.0;
    let rel = (err - predicted).abs() / predicted;
    judge(7, "trapezoid Wiener integral", 30.0, t, rel <= 0.10,
        format!("L2 error {err:.5} vs {predicted:.5}"))
}

fn criterion_8() -> Verdict {
    let (v, t) = preset("linear-reconstruction");
    let err = num(&v, "l2_error");
    let predicted = 6f64.powf(-0.5) * 16f64.powf(-0.5);
    let rel = (err - predicted).abs() / predicted;
    judge(8, "linear reconstruction", 30.0, t, rel <= 0.10,
        format!("L2 error {err:.5} vs {predicted:.5}"))
}

fn criterion_9() -> Verdict {
    let (v, t) = preset("gbm-strong-rate");
    let rate = num(&v, "rate");
    let monotone = v["monotone"].as_bool() == Some(true);
    judge(9, "Euler-Maruyama strong rate on GBM", 60.0, t,
        (0.35..=0.65).contains(&rate) && monotone,
        format!("rate {rate:.4}, monotone {monotone}"))
}

fn criterion_10() -> Verdict {
    let (v, t) = preset("merton-identity");
    let mismatches = num(&v, "mismatches");
    let paths = num(&v, "paths");
    judge(10, "Merton recursion identity", 1.0, t, mismatches == 0.0 && paths == 100.0,
        format!("{mismatches} mismatches over {paths} paths"))
}

fn criterion_11() -> Verdict {
    let (v, t) = preset("gbm-call-price");
    let dev = num(&v, "deviation_in_halfwidths");
    judge(11, "GBM call against quadrature oracle", 60.0, t, dev <= 3.0,
        format!("estimate {:.6}, oracle {:.6}, {dev:.3} halfwidths",
            num(&v, "estimate"), num(&v, "oracle")))
}

fn criterion_12() -> Verdict {
    let (v, t) = preset("qml-gbm");
    let diff = num(&v, "max_abs_diff");
    judge(12, "QML/ML coincidence", 10.0, t, diff <= 1e-5, format!("max |diff| {diff:.3e}"))
}

fn criterion_13() -> Verdict {
    let (v, t) = preset("vasicek-recovery");
    let (k, m, s) = (num(&v, "rel_err_kappa"), num(&v, "rel_err_mu"), num(&v, "rel_err_sigma2"));
    judge(13, "Vasicek recovery", 60.0, t, k <= 0.25 && m <= 0.05 && s <= 0.05,
        format!("rel err kappa {k:.4}, mu {m:.4}, sigma2 {s:.4}"))
}

fn criterion_14() -> Verdict {
    let (v, t) = preset("forecast-coverage");
    let pairs = [
        "scalar_one_step",
        "scalar_simultaneous",
        "ellipsoid_one_step",
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for key in pairs {
        let got = num(&v, key);
        let want = num(&v, &format!("{key}_target"));
        ok &= (got - want).abs() <= 0.01;
        parts.push(format!("{key} {got:.4}/{want:.4}"));
    }
    judge(14, "forecast coverage", 60.0, t, ok, parts.join(", "))
}

fn preset_names() -> Vec<String> {
    let (code, stdout, _) = run(&["--format", "json", "study", "--list"]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_slice(&stdout).unwrap();
    v["table"]["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|row| row[0].as_str().unwrap().to_string())
        .collect()
}

fn criterion_15() -> Verdict {
    let start = Instant::now();
    let mut differing = Vec::new();
    let names = preset_names();
    for name in &names {
        for format in ["json", "csv"] {
            let outputs: Vec<Vec<u8>> = ["1", "4"]
                .iter()
                .map(|threads| {
                    let (code, stdout, _) = run(&[
                        "--seed", "11", "--threads", threads, "--format", format,
                        "study", "--preset", name,
                    ]);
                    assert_eq!(code, 0, "{name} failed with --threads {threads}");
                    stdout
                })
                .collect();
            if outputs[0] != outputs[1] || outputs[0].is_empty() {
                differing.push(format!("{name}/{format}"));
            }
        }
    }
    let detail = if differing.is_empty() {
        format!("{} presets identical across --threads 1 and 4 in JSON and CSV", names.len())
    } else {
        format!("outputs differ: {}", differing.join(", "))
    };
    judge(15, "determinism across thread counts", 120.0, start.elapsed(),
        differing.is_empty() && names.len() == 14, detail)
}

fn main() {
    let criteria: [fn() -> Verdict; 15] = [
        criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
        criterion_6, criterion_7, criterion_8, criterion_9, criterion_10,
        criterion_11, criterion_12, criterion_13, criterion_14, criterion_15,
    ];
    let verdicts: Vec<Verdict> = criteria.iter().map(|c| c()).collect();
    for v in &verdicts {
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("{tag} criterion {:>2} {}: {}", v.id, v.name, v.detail);
    }
    let failed: Vec<usize> = verdicts.iter().filter(|v| !v.pass).map(|v| v.id).collect();
    println!("{} of {} criteria passed", verdicts.len() - failed.len(), verdicts.len());
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
