//! The `hdid` binary and the command functions behind it.

use std::path::Path;
use std::process::Command;

use hdid::cli::{execute, RunConfig};

fn hdid(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_hdid"))
        .args(args)
        .env_remove("HDID_SEED")
        .output()
        .expect("binary runs")
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

/// Lines that are neither comments nor the header.
fn data_rows(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).skip(1).collect()
}

#[test]
fn simulate_writes_the_expected_shapes() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("c.json");
    std::fs::write(
        &cfg,
        r#"{"data.groups": 2, "data.individuals": 1, "data.alpha": [1.0],
            "data.beta_base": [1.0], "data.beta_change": [0.5]}"#,
    )
    .unwrap();
    let out = d.path().join("tiny");
    let o = hdid(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(data_rows(&read(&out.join("individuals.csv"))).len(), 4);
    let groups = read(&out.join("groups.csv"));
    assert!(groups.starts_with("# hdid simulate seed=3 config={"));
    assert!(groups.lines().nth(1).unwrap() == "group_id,T,X1");
    let truth: serde_json::Value = serde_json::from_str(&read(&out.join("truth.json"))).unwrap();
    assert_eq!(truth["seed"], 3);
    assert_eq!(truth["result"]["mu"].as_array().unwrap().len(), 2);

    let study = d.path().join("study");
    let o = hdid(&["simulate", "--out", study.to_str().unwrap()]);
    assert!(o.status.success());
    let header = read(&study.join("groups.csv")).lines().nth(1).unwrap().to_string();
    assert_eq!(header, "group_id,T,X1,X2,X3,X4,X5,X6,X7,X8");
}

#[test]
fn simulate_is_byte_identical_across_runs() {
    let d = tempfile::tempdir().unwrap();
    let (a, b) = (d.path().join("a"), d.path().join("b"));
    for dir in [&a, &b] {
        let o = hdid(&["simulate", "--j", "7", "--seed", "11", "--out", dir.to_str().unwrap()]);
        assert!(o.status.success());
    }
    for f in ["individuals.csv", "groups.csv", "truth.json"] {
        assert_eq!(read(&a.join(f)), read(&b.join(f)), "{f}");
    }
}

#[test]
fn fit_reads_simulated_data_without_warnings() {
    let d = tempfile::tempdir().unwrap();
    let dir = d.path();
    let s = dir.to_str().unwrap();
    assert!(hdid(&["simulate", "--j", "25", "--seed", "5", "--out", s]).status.success());
    let ind = dir.join("individuals.csv");
    let grp = dir.join("groups.csv");
    let o = hdid(&[
        "fit",
        "--individuals",
        ind.to_str().unwrap(),
        "--groups",
        grp.to_str().unwrap(),
        "--method",
        "separate",
        "--method",
        "full",
        "--iterations",
        "1500",
        "--out",
        s,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stderr.is_empty(), "{}", String::from_utf8_lossy(&o.stderr));
    let ci = read(&dir.join("credible_intervals.csv"));
    assert_eq!(ci.lines().nth(1).unwrap(), "parameter,separate_lower,separate_upper,full_lower,full_upper");
    let rows = data_rows(&ci);
    assert_eq!(rows.len(), 9);
    assert!(rows[0].starts_with("delta,"));
    let summary: serde_json::Value = serde_json::from_str(&read(&dir.join("posterior_summary.json"))).unwrap();
    assert_eq!(summary["result"]["summaries"].as_array().unwrap().len(), 2);
    assert_eq!(summary["result"]["warnings"].as_array().unwrap().len(), 0);
    assert_eq!(summary["result"]["chain"]["burn_in"], 750);
}

#[test]
fn exit_codes_follow_the_error_kind() {
    let d = tempfile::tempdir().unwrap();
    let dir = d.path();
    let s = dir.to_str().unwrap();

    let bad = dir.join("bad.json");
    std::fs::write(&bad, r#"{"chain.iterationz": 5}"#).unwrap();
    let o = hdid(&["bias", "--config", bad.to_str().unwrap(), "--out", s]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("chain.iterationz"));
    assert_eq!(hdid(&["study", "--method", "lasso", "--out", s]).status.code(), Some(2));
    assert_eq!(hdid(&["bias", "--workers", "0", "--out", s]).status.code(), Some(2));

    let grp = dir.join("g.csv");
    let ind = dir.join("i.csv");
    std::fs::write(&grp, "group_id,T\nA,1\nB,1\n").unwrap();
    std::fs::write(&ind, "group_id,period,y\nA,0,1\nA,1,2\nB,0,0\nB,1,4\n").unwrap();
    let fit = |i: &Path| {
        hdid(&["fit", "--individuals", i.to_str().unwrap(), "--groups", grp.to_str().unwrap(), "--out", s])
    };
    let o = fit(&ind);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("treatment has zero variance"));

    std::fs::write(&grp, "group_id,T\nA,1\nB,0\n").unwrap();
    let malformed = dir.join("m.csv");
    std::fs::write(&malformed, "a,b,c\n").unwrap();
    let o = fit(&malformed);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"), "{}", String::from_utf8_lossy(&o.stderr));

    std::fs::write(&malformed, "group_id,period,y\nA,0,1\nC,1,2\n").unwrap();
    let o = fit(&malformed);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));

    let o = hdid(&["fit", "--individuals", "/nonexistent/i.csv", "--groups", "/nonexistent/g.csv", "--out", s]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/nonexistent/g.csv"));
}

#[test]
fn seed_comes_from_the_environment_when_not_given() {
    let d = tempfile::tempdir().unwrap();
    let s = d.path().to_str().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_hdid"))
        .args(["bias", "--replications", "1", "--out", s])
        .env("HDID_SEED", "4242")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(read(&d.path().join("bias_table.csv")).starts_with("# hdid bias seed=4242 "));
}

#[test]
fn bias_table_rows_and_determinism() {
    let d = tempfile::tempdir().unwrap();
    let (a, b) = (d.path().join("a"), d.path().join("b"));
    for (dir, workers) in [(&a, "1"), (&b, "3")] {
        let o = hdid(&["bias", "--replications", "1", "--seed", "8", "--workers", workers, "--out", dir.to_str().unwrap()]);
        assert!(o.status.success());
    }
    let text = read(&a.join("bias_table.csv"));
    assert_eq!(text, read(&b.join("bias_table.csv")));
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 9);
    assert!(rows[0].starts_with("Null,"));
    assert!(rows[8].starts_with("Full,0,0,0,0"));
}

#[test]
fn study_smoke_and_worker_independence() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("c.json");
    std::fs::write(&cfg, r#"{"study.kind": "both", "study.cells": ["X1:1", "X3:4"]}"#).unwrap();
    let mut outs = Vec::new();
    for workers in ["1", "4"] {
        let dir = d.path().join(format!("w{workers}"));
        let o = hdid(&[
            "study",
            "--config",
            cfg.to_str().unwrap(),
            "--j",
            "20",
            "--replications",
            "4",
            "--iterations",
            "300",
            "--burnin",
            "100",
            "--seed",
            "21",
            "--workers",
            workers,
            "--out",
            dir.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        outs.push(dir);
    }
    for f in ["method_study.csv", "method_study.json", "choice_grid.csv", "choice_grid.json"] {
        assert_eq!(read(&outs[0].join(f)), read(&outs[1].join(f)), "{f}");
    }
    let methods = read(&outs[0].join("method_study.csv"));
    let rows = data_rows(&methods);
    assert_eq!(rows.len(), 6);
    assert!(rows[0].starts_with("full,20,4,0,"));
    assert!(!methods.lines().next().unwrap().contains("workers"));
    assert_eq!(data_rows(&read(&outs[0].join("choice_grid.csv"))).len(), 2);
}

/// Full-model intervals for the treatment effect cover the truth in at
/// least 90% of 50 simulated datasets with 100 groups.
#[test]
fn full_model_intervals_cover_the_simulated_effect() {
    let d = tempfile::tempdir().unwrap();
    let mut covered = 0;
    for seed in 0..50u64 {
        let mut cfg = RunConfig {
            seed,
            out: d.path().join(format!("s{seed}")),
            ..RunConfig::default()
        };
        cfg.data.groups = 100;
        execute("simulate", &cfg).unwrap();
        cfg.individuals_csv = Some(cfg.out.join("individuals.csv"));
        cfg.groups_csv = Some(cfg.out.join("groups.csv"));
        cfg.methods = vec!["full".into()];
        execute("fit", &cfg).unwrap();
        let v: serde_json::Value = serde_json::from_str(&read(&cfg.out.join("posterior_summary.json"))).unwrap();
        let delta = v["result"]["summaries"][0]["parameters"]
            .as_array()
            .unwrap()
            .iter()
            .find(|p| p["name"] == "delta")
            .unwrap()
            .clone();
        let (lo, hi) = (delta["lower"].as_f64().unwrap(), delta["upper"].as_f64().unwrap());
        covered += (lo <= 1.0 && 1.0 <= hi) as usize;
    }
    assert!(covered >= 45, "covered {covered} of 50");
}
