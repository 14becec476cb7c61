//! End-to-end checks on the command-line contract, driven through the same
//! entry point as the binary so they run ahead of the slow acceptance target.

use super::*;
use clap::CommandFactory;
use serde_json::Value;
use std::path::Path;

struct Out {
    code: i32,
    stdout: Vec<u8>,
    stderr: Vec<u8>,
}

impl Out {
    fn success(&self) -> bool {
        self.code == 0
    }
}

fn stochkit(args: &[&str]) -> Out {
    let (code, stdout, stderr) = main_with_args(std::iter::once("stochkit").chain(args.iter().copied()));
    Out { code, stdout: stdout.into_bytes(), stderr: stderr.into_bytes() }
}

fn json(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).unwrap_or_else(|e| panic!("not JSON ({e}): {}", String::from_utf8_lossy(bytes)))
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn gbm_csv(n: usize) -> String {
    let mut s = stochkit::RandomStream::new(21, 0);
    let h = 1.0 / 252.0;
    let mut x = 100.0f64;
    let mut out = String::from("time,value\n");
    for k in 0..=n {
        out.push_str(&format!("{:.16e},{:.16e}\n", k as f64 * h, x));
        x *= ((0.05 - 0.02) * h + 0.2 * h.sqrt() * s.std_normal()).exp();
    }
    out
}

#[test]
fn mc_is_byte_identical_across_runs() {
    let a = stochkit(&["mc", "--dim", "2", "--samples", "1000", "--seed", "7"]);
    let b = stochkit(&["mc", "--dim", "2", "--samples", "1000", "--seed", "7"]);
    assert!(a.success());
    assert_eq!(a.stdout, b.stdout);
    let c = stochkit(&["mc", "--dim", "2", "--samples", "1000", "--seed", "8"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn seed_flag_falls_back_to_env() {
    let cmd = Cli::command();
    let seed = cmd.get_arguments().find(|a| a.get_id() == "seed").unwrap();
    assert_eq!(seed.get_env().and_then(|e| e.to_str()), Some("STOCHKIT_SEED"));
    assert!(seed.is_global_set());
}

#[test]
fn thread_count_does_not_change_output() {
    let args = |t: &'static str| ["--threads", t, "sde", "--model", "merton", "--paths", "50", "--steps", "32"];
    assert_eq!(stochkit(&args("1")).stdout, stochkit(&args("3")).stdout);
    let zero = stochkit(&["--threads", "0", "mc"]);
    assert_eq!(zero.code, 2);
}

#[test]
fn floats_round_trip_through_json() {
    let out = stochkit(&["--seed", "1", "mc", "--samples", "777"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let v = json(text.as_bytes());
    let est = v["estimate"].as_f64().unwrap();
    // 17 significant digits, so printing and re-reading is exact
    let printed = text.split("\"estimate\":").nth(1).unwrap().split([',', '}']).next().unwrap();
    assert_eq!(printed.parse::<f64>().unwrap().to_bits(), est.to_bits());
    assert_eq!(printed.split('e').next().unwrap().replace(['.', '-'], "").len(), 17);
}

#[test]
fn malformed_csv_exits_3_naming_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "bad.csv", "time,value\n0,1.0\n1,1.1\n2,oops\n");
    let out = stochkit(&["calibrate", "--model", "gbm", "--input", &path]);
    assert_eq!(out.code, 3);
    let err = json(&out.stderr);
    assert_eq!(err["exit_code"], 3);
    assert_eq!(err["error"]["line"], 4);
    assert!(out.stdout.is_empty());

    let path = write(dir.path(), "order.csv", "0,1.0\n1,1.1\n0.5,1.2\n");
    let out = stochkit(&["calibrate", "--model", "gbm", "--input", &path]);
    assert_eq!(out.code, 3);
    assert_eq!(json(&out.stderr)["error"]["line"], 3);
}

#[test]
fn missing_file_and_unknown_command_have_distinct_codes() {
    let out = stochkit(&["calibrate", "--model", "gbm", "--input", "/definitely/not/here.csv"]);
    assert_eq!(out.code, 4);
    assert_eq!(json(&out.stderr)["exit_code"], 4);

    let out = stochkit(&["frobnicate"]);
    assert_eq!(out.code, 2);
    assert_eq!(json(&out.stderr)["exit_code"], 2);

    let out = stochkit(&["study", "--preset", "no-such-preset"]);
    assert_eq!(out.code, 2);
}

#[test]
fn study_preset_emits_rate_table_and_slope() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("rate.csv");
    let out = stochkit(&["--format", "csv", "--out", table.to_str().unwrap(), "study", "--preset", "gbm-strong-rate"]);
    assert!(out.success());
    let csv = std::fs::read_to_string(&table).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("n,rmse"));
    let ns: Vec<u64> = lines.map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(ns, vec![8, 16, 32, 64, 128, 256, 512]);
    let summary = json(&out.stdout);
    assert!(summary["slope"].as_f64().unwrap() < 0.0);
    assert_eq!(summary["preset"], "gbm-strong-rate");
}

#[test]
fn calibrate_then_forecast_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "gbm.csv", &gbm_csv(400));
    let est_path = dir.path().join("est.json");
    let out = stochkit(&["--out", est_path.to_str().unwrap(), "calibrate", "--model", "gbm", "--input", &data]);
    assert!(out.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let est = json(&std::fs::read(&est_path).unwrap());
    assert_eq!(est["model"], "gbm");
    let sigma = est["params"]["sigma"].as_f64().unwrap();
    assert!((sigma - 0.2).abs() < 0.03, "sigma {sigma}");

    let out = stochkit(&[
        "--format", "json", "forecast", "--calibrated", est_path.to_str().unwrap(), "--input", &data, "--steps", "5",
        "--horizon", "0.05",
    ]);
    assert!(out.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out.stdout);
    let rows = v["table"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 5);
    let cols: Vec<&str> = v["table"]["columns"].as_array().unwrap().iter().map(|c| c.as_str().unwrap()).collect();
    let (lo, hi, pred) = (
        cols.iter().position(|c| *c == "lower").unwrap(),
        cols.iter().position(|c| *c == "upper").unwrap(),
        cols.iter().position(|c| *c == "prediction").unwrap(),
    );
    for row in rows {
        let (l, u, p) = (row[lo].as_f64().unwrap(), row[hi].as_f64().unwrap(), row[pred].as_f64().unwrap());
        assert!(l < p && p < u);
    }
}

#[test]
fn every_subcommand_runs_with_defaults() {
    for args in [
        vec!["mc"],
        vec!["quad", "--method", "strat"],
        vec!["ode", "--scheme", "rrk2", "--steps", "64"],
        vec!["paths", "--process", "cpoisson", "--paths", "3"],
        vec!["sde", "--model", "ou", "--paths", "4"],
        vec!["price", "--payoff", "asian", "--paths", "2000", "--steps", "16"],
        vec!["study", "--list"],
    ] {
        let out = stochkit(&args);
        assert!(out.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stdout.is_empty(), "{args:?} printed nothing");
    }
}
