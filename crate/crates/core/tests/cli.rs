//! End-to-end tests of the `hllab` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use hllab::tensor::CoefficientTensor;
use serde_json::Value;

fn hllab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hllab"))
        .args(args)
        .env_remove("HLLAB_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn exponents_table_for_the_l3_example() {
    let o = hllab(&["exponents", "--m", "3", "--p", "10,10,10", "--r", "3"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "k,p,threshold\n1,10,30\n2,10,7.5\n3,10,4.28571428571\n");

    let o = hllab(&[
        "exponents", "--p", "10,10,10", "--r", "3", "--q", "29,15/2,30/7", "--format", "json",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let doc: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(doc["schema_version"], 1);
    assert_eq!(doc["admissibility"]["admissible"], false);
    assert_eq!(doc["admissibility"]["margins"][0].as_f64().unwrap(), -1.0);
}

#[test]
fn rademacher_level_one_csv() {
    let o = hllab(&["rademacher", "--n", "1", "--emit", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "1\n-1\n");
}

#[test]
fn rademacher_norm_output() {
    let o = hllab(&["rademacher", "--n", "3", "--norm", "2,2", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let doc: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(doc["status"], "exact");
    assert_eq!(doc["value"].as_f64().unwrap(), 2.82842712475);
}

#[test]
fn opnorm_of_zero_tensor_is_exact_zero() {
    let dir = tempfile::tempdir().unwrap();
    let zero = write(
        dir.path(),
        "zero.json",
        r#"{"dims":[2,2],"value_dim":1,"value_norm":1,"entries":[0,0,0,0]}"#,
    );
    let o = hllab(&["opnorm", "--tensor", &zero, "--p", "inf,inf"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        stdout(&o),
        "value,status,restarts_used,iterations,reinitializations\n0,exact,0,2,0\n"
    );
}

#[test]
fn opnorm_methods_and_seed_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let t = write(
        dir.path(),
        "t.json",
        r#"{"dims":[2,3],"value_dim":1,"value_norm":1,"entries":[1,-0.5,0.25,0.75,1,-1]}"#,
    );
    let exact = hllab(&["opnorm", "--tensor", &t, "--p", "inf,3", "--format", "json"]);
    let doc: Value = serde_json::from_str(&stdout(&exact)).unwrap();
    assert_eq!(doc["status"], "exact");

    let args = ["opnorm", "--tensor", &t, "--p", "3,5/2", "--seed", "9", "--format", "json"];
    let a = hllab(&args);
    let b = hllab(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(stdout(&a), stdout(&b));
    let doc: Value = serde_json::from_str(&stdout(&a)).unwrap();
    assert_eq!(doc["status"], "lower_bound");

    let forced = hllab(&["opnorm", "--tensor", &t, "--p", "3,5/2", "--method", "enumerate"]);
    assert_eq!(forced.status.code(), Some(2));
}

#[test]
fn mixed_norm_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let t = write(
        dir.path(),
        "r1.json",
        r#"{"dims":[2,2],"value_dim":1,"value_norm":1,"entries":[3,4,3,4]}"#,
    );
    let o = hllab(&["mixed-norm", "--tensor", &t, "--q", "inf,2"]);
    assert_eq!(stdout(&o), "kind,value\nmixed,5\n");
    let o = hllab(&["mixed-norm", "--tensor", &t, "--flat", "1"]);
    assert_eq!(stdout(&o), "kind,value\nflat,14\n");
}

#[test]
fn witness_json_reloads_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("diag.json");
    let o = hllab(&[
        "witness", "--kind", "diagonal", "--n", "3", "--p", "10,10", "--r", "3", "--output",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(&out).unwrap();
    let t = CoefficientTensor::from_json(&text).unwrap();
    assert_eq!(t.dims(), &[3, 3]);
    assert_eq!(t.value_dim(), 3);
    assert_eq!(t.to_json() + "\n", text);

    let odd = CoefficientTensor::scalar(vec![3], vec![0.1, 1.0 / 3.0, -2.0f64.sqrt()]).unwrap();
    let src = write(dir.path(), "odd.json", &odd.to_json());
    let o = hllab(&["witness", "--kind", "lift", "--tensor", &src, "--n", "2"]);
    let lifted = CoefficientTensor::from_json(&stdout(&o)).unwrap();
    assert_eq!(&lifted.entries()[..3], odd.entries());

    let sq = write(
        dir.path(),
        "sq.json",
        r#"{"dims":[2,2],"value_dim":1,"value_norm":1,"entries":[1,0,0,1]}"#,
    );
    let o = hllab(&["witness", "--kind", "slice", "--tensor", &sq, "--rho", "2"]);
    let sliced = CoefficientTensor::from_json(&stdout(&o)).unwrap();
    assert_eq!(sliced.value_dim(), 2);
}

#[test]
fn growth_subcommand() {
    let o = hllab(&[
        "growth", "--p", "4,4", "--q", "1.5,2", "--sizes", "4,8,16,32,64,128,256", "--format", "json",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let doc: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(doc["verdict"], "growing");
    let slope = doc["fitted_slope"].as_f64().unwrap();
    assert!((slope - 1.0 / 6.0).abs() < 1e-11);

    let o = hllab(&["growth", "--p", "4,4", "--q", "2,1.2", "--k", "2", "--sizes", "4,8,16,32"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("family,n,mixed_norm,operator_norm,ratio,fitted_slope,theoretical_slope,verdict\n"));
    assert_eq!(text.lines().count(), 5);

    let o = hllab(&["growth", "--p", "4,4", "--q", "2,2", "--sizes", "4,8,16"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr(&o).lines().count(), 1);
}

#[test]
fn verify_campaign_exit_codes() {
    let ok = hllab(&[
        "verify", "--p", "inf,inf", "--r", "2", "--q", "2,2", "--suite", "random:3x3:40", "--seed", "1",
    ]);
    assert_eq!(ok.status.code(), Some(0));
    let text = stdout(&ok);
    assert!(text.starts_with("instance,mixed_norm,operator_norm,norm_status,ratio,verdict\n"));
    assert_eq!(text.lines().count(), 41);
    assert!(text.lines().skip(1).all(|l| l.ends_with(",exact,1,pass") || (l.contains(",exact,") && l.ends_with(",pass"))));

    // demanding ratio <= 1 - 0.5 fails on the diagonal witnesses, whose ratio is exactly one
    let fail = hllab(&[
        "verify", "--p", "inf,inf", "--r", "2", "--q", "2,2", "--suite", "diagonal:2,3", "--tolerance=-0.5",
    ]);
    assert_eq!(fail.status.code(), Some(3));

    let bad = hllab(&["verify", "--p", "inf,inf", "--r", "2", "--q", "1.5,2", "--suite", "random:3x3:4"]);
    assert_eq!(bad.status.code(), Some(2));
    assert_eq!(stderr(&bad).lines().count(), 1);
}

#[test]
fn verify_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "campaign.json",
        r#"{"profile":{"m":2,"p":["inf",1.5],"r":1},"q":[3,3],"suites":["rank-one:3x3:10","random:3x3:10"],"seed":4}"#,
    );
    let a = hllab(&["verify", "--config", &cfg, "--format", "json"]);
    assert_eq!(a.status.code(), Some(0));
    let doc: Value = serde_json::from_str(&stdout(&a)).unwrap();
    assert_eq!(doc["status"], "passed");
    assert_eq!(doc["reports"].as_array().unwrap().len(), 20);
    let b = hllab(&["verify", "--config", &cfg, "--format", "json", "--threads", "1"]);
    assert_eq!(stdout(&a), stdout(&b));

    let unknown = write(
        dir.path(),
        "unknown.json",
        r#"{"profile":{"m":2,"p":["inf",1.5],"r":1},"q":[3,3],"suites":["random:3x3:2"],"colour":"red"}"#,
    );
    let o = hllab(&["verify", "--config", &unknown]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr(&o).lines().count(), 1);
}

#[test]
fn threads_env_fallback() {
    let o = Command::new(env!("CARGO_BIN_EXE_hllab"))
        .args(["exponents", "--p", "4,4"])
        .env("HLLAB_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let o = Command::new(env!("CARGO_BIN_EXE_hllab"))
        .args(["exponents", "--p", "4,4"])
        .env("HLLAB_THREADS", "lots")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn malformed_input_is_a_one_line_diagnostic() {
    for args in [
        &["exponents", "--p", "1/0"][..],
        &["exponents", "--p", "2,2"],
        &["exponents", "--bogus"],
        &["opnorm", "--tensor", "/nonexistent.json", "--p", "inf"],
        &["rademacher", "--n", "0"],
    ] {
        let o = hllab(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert_eq!(stderr(&o).lines().count(), 1, "{args:?}: {}", stderr(&o));
    }
}
