//! End-to-end runs of the `dptopk` binary.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn dptopk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dptopk"))
        .args(args)
        .env_remove("DPTOPK_SEED")
        .output()
        .expect("binary runs")
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const HIST: &str = "label,count\nalpha,120\nbeta,90\ngamma,40\ndelta,5\nalpha,10\n";

#[test]
fn topk_reports_cost_and_privacy() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "h.csv", HIST);
    let o = dptopk(&[
        "topk", "--input", &input, "--k", "3", "--kbar", "4", "--eps", "0.5", "--delta", "1e-6", "--seed", "7",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    let n = v["indices"].as_array().unwrap().len() as u64;
    let term = v["terminated"].as_bool().unwrap();
    assert_eq!(v["cost"].as_u64().unwrap(), n + u64::from(term));
    assert!(term || n == 3);
    assert!((v["privacy"]["eps_prime"].as_f64().unwrap() - 1.5).abs() < 1e-12);
    assert!((v["privacy"]["delta_total"].as_f64().unwrap() - 1e-6).abs() < 1e-18);
}

#[test]
fn topk_k_above_kbar_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "h.csv", HIST);
    let o = dptopk(&["topk", "--input", &input, "--k", "3", "--kbar", "2", "--eps", "1", "--delta", "0.1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("kbar"));
    assert!(o.stdout.is_empty());
}

#[test]
fn seeded_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "h.json", r#"{"a": 10, "b": 9, "c": 9, "d": 3}"#);
    let args = ["topk", "--input", &input, "--k", "2", "--kbar", "3", "--eps", "0.2", "--delta", "0.1"];
    let mut with_flag = args.to_vec();
    with_flag.extend(["--seed", "99"]);
    let a = dptopk(&with_flag);
    let b = dptopk(&with_flag);
    let c = Command::new(env!("CARGO_BIN_EXE_dptopk")).args(args).env("DPTOPK_SEED", "99").output().unwrap();
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c.stdout);

    let acc = ["accuracy", "--k", "2", "--kbar", "5", "--eps", "1", "--delta", "0.05", "--trials", "300", "--seed", "4"];
    assert_eq!(dptopk(&acc).stdout, dptopk(&acc).stdout);
}

#[test]
fn malformed_input_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "bad.csv", "a,1\nb,2\nc,lots\n");
    let o = dptopk(&["topk", "--input", &input, "--k", "1", "--eps", "1", "--delta", "0.1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
    let input = write(dir.path(), "neg.csv", "a,-1\n");
    let o = dptopk(&["topk", "--input", &input, "--k", "1", "--eps", "1", "--delta", "0.1"]);
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn session_lifecycle() {
    let dir = tempfile::tempdir().unwrap();
    let state = dir.path().join("s.json");
    let state = state.to_str().unwrap();
    let input = write(dir.path(), "h.csv", "x,2000\ny,1990\nz,1500\nw,1400\nv,1300\n");

    let o = dptopk(&[
        "session", "create", "--state", state, "--kmax", "10", "--ellmax", "5", "--eps", "0.1", "--delta", "1e-6",
        "--delta-prime", "1e-6",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert!((v["privacy"]["eps_max"].as_f64().unwrap() - 0.8811).abs() < 1e-3);
    assert!((v["privacy"]["delta_total"].as_f64().unwrap() - 1.1e-5).abs() < 1e-12);

    // refuses to clobber
    let o = dptopk(&[
        "session", "create", "--state", state, "--kmax", "10", "--ellmax", "5", "--eps", "0.1", "--delta", "1e-6",
    ]);
    assert_ne!(o.status.code(), Some(0));

    let q = |k: &str, seed: &str| {
        let kbar = k.parse::<u32>().unwrap().max(5).to_string();
        dptopk(&["session", "query", "--state", state, "--input", &input, "--k", k, "--kbar", &kbar, "--seed", seed])
    };
    let o = q("4", "1");
    assert_eq!(o.status.code(), Some(0));
    let first = json(&o);
    assert_eq!(first["status"], "accepted");
    let cost = first["cost"].as_u64().unwrap();

    // more than what is left: soft reject, nothing changes
    let o = q("9", "2");
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["status"], "rejected");
    assert_eq!(v["budget"]["kmax_remaining"].as_u64().unwrap(), 10 - cost);
    assert_eq!(v["budget"]["ellmax_remaining"].as_u64().unwrap(), 4);

    let o = dptopk(&["session", "report", "--state", state]);
    let r = json(&o);
    let logged: u64 = r["log"].as_array().unwrap().iter().map(|e| e["cost"].as_u64().unwrap()).sum();
    assert_eq!(r["spent"].as_u64().unwrap(), logged);
    assert_eq!(logged, cost);
    assert_eq!(r["kmax_remaining"].as_u64().unwrap(), 10 - cost);
    assert!((r["privacy"]["eps_max"].as_f64().unwrap() - 0.8811).abs() < 1e-3);

    let o = dptopk(&["session", "close", "--state", state]);
    assert_eq!(json(&o)["closed"], true);
    assert_eq!(q("1", "3").status.code(), Some(2));
}

#[test]
fn compose_table_ratios() {
    let o = dptopk(&["compose", "--k", "1,5:100:5", "--eps", "0.01,0.05,0.1,0.5,1.0", "--delta", "1e-6"]);
    assert_eq!(o.status.code(), Some(0));
    let mut rdr = csv::Reader::from_reader(o.stdout.as_slice());
    assert_eq!(rdr.headers().unwrap(), vec!["k", "eps", "eps_bounded_range", "eps_optimal", "ratio"]);
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let f = |i: usize| rec[i].parse::<f64>().unwrap();
        assert!(f(4) >= 1.0, "{rec:?}");
        if f(0) == 1.0 {
            assert_eq!((f(2), f(3), f(4)), (f(1), f(1), 1.0));
        }
        if f(0) == 25.0 && f(1) == 0.1 {
            assert!((f(2) - 1.4391).abs() < 1e-3);
        }
        rows += 1;
    }
    assert_eq!(rows, 21 * 5);
}

#[test]
fn accuracy_reports() {
    let o = dptopk(&[
        "accuracy", "--distribution", "powerlaw", "--k", "5", "--kbar", "50", "--eps", "1", "--delta", "0.05", "--beta",
        "0.05", "--trials", "200", "--seed", "1",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!((json(&o)["alpha"].as_f64().unwrap() - 8.5172).abs() < 1e-4);

    let o = dptopk(&[
        "accuracy", "--distribution", "flat", "--support", "40", "--count", "50", "--k", "3", "--kbar", "10", "--eps",
        "1", "--delta", "0.05", "--trials", "500", "--seed", "2",
    ]);
    let v = json(&o);
    assert_eq!(v["separation_holds"], false);
    assert!(v["short_rate"].as_f64().unwrap() > 0.95);

    let o = dptopk(&["accuracy", "--k", "3", "--kbar", "10", "--eps", "1", "--delta", "0.05", "--trials", "50"]);
    assert_eq!(o.status.code(), Some(2));
    let o = dptopk(&["accuracy", "--distribution", "custom", "--k", "1", "--eps", "1", "--delta", "0.05"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_exit_codes() {
    let o = dptopk(&["verify", "--suite", "dp,bad-event"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    assert_eq!(json(&o)["pass"], true);

    let o = dptopk(&["verify", "--suite", "dp,bad-event", "--additive-scale", "0.5"]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(json(&o)["pass"], false);

    let o = dptopk(&["verify", "--suite", ""]);
    assert_eq!(o.status.code(), Some(2));
    let o = dptopk(&["verify", "--suite", "nonsense"]);
    assert_eq!(o.status.code(), Some(2));
    let o = dptopk(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_equivalence_suite() {
    let o = dptopk(&["verify", "--suite", "equivalence"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
}
