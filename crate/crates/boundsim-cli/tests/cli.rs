//! End-to-end checks of the binary: artifacts, determinism, exit codes.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_boundsim"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("boundsim-cli-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn witness_reproduces_reference_value() {
    let v = stdout_json(&run(&[
        "witness",
        "--d",
        "3",
        "--q=-0.07,-1.73,-0.5774",
        "--labeling",
        "methods",
    ]));
    let w = v["witness"].as_f64().unwrap();
    assert!((w + 0.079).abs() < 1e-3, "witness {w}");
    assert!((v["c_values"][0].as_f64().unwrap() - 0.675).abs() < 1e-3);
}

#[test]
fn budget_emits_the_three_counts() {
    let csv = tmp("budget.csv");
    let out = run(&["budget", "--d", "3", "--json", "/dev/null", "--csv", csv.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "225,12,36");
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text, "n_qst,n_mcp1,n_mcp2\n225,12,36\n");
}

#[test]
fn variants_lists_72_rows() {
    let csv = tmp("variants.csv");
    let out = run(&[
        "variants",
        "--q=-0.07,-1.73,-0.5774",
        "--json",
        "/dev/null",
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 73); // header + 72 variants
}

#[test]
fn ppt_reports_positive_minimum_for_featured_state() {
    let v = stdout_json(&run(&["ppt", "--q=-0.07,-1.73,-0.5774"]));
    assert!(v["ppt"].as_bool().unwrap());
    assert!(v["min_pt_eig"].as_f64().unwrap() > 0.0);
}

#[test]
fn scan_artifacts_are_thread_independent() {
    let mk = |tag: &str, threads: &str| {
        let csv = tmp(&format!("scan-{tag}.csv"));
        let pgm = tmp(&format!("scan-{tag}.pgm"));
        let out = run(&[
            "scan",
            "--q3=-0.5776",
            "--resolution",
            "30",
            "--threads",
            threads,
            "--json",
            "/dev/null",
            "--csv",
            csv.to_str().unwrap(),
            "--pgm",
            pgm.to_str().unwrap(),
        ]);
        assert!(out.status.success());
        (std::fs::read(&csv).unwrap(), std::fs::read(&pgm).unwrap())
    };
    let (csv1, pgm1) = mk("t1", "1");
    let (csv4, pgm4) = mk("t4", "4");
    assert_eq!(csv1, csv4);
    assert_eq!(pgm1, pgm4);
    assert!(pgm1.starts_with(b"P5\n30 30\n255\n"));
}

#[test]
fn simulate_is_reproducible_per_seed() {
    let args = |path: &PathBuf| {
        vec![
            "simulate".into(),
            "--q=-0.07,-1.73,-0.5774".to_string(),
            "--protocol".into(),
            "mcp".into(),
            "--seed".into(),
            "11".into(),
            "--json".into(),
            path.to_str().unwrap().to_string(),
        ]
    };
    let a = tmp("sim-a.json");
    let b = tmp("sim-b.json");
    assert!(bin().args(args(&a)).output().unwrap().status.success());
    assert!(bin().args(args(&b)).output().unwrap().status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    // A different seed must change the counts.
    let c = tmp("sim-c.json");
    let mut other = args(&c);
    other[5] = "12".into();
    assert!(bin().args(other).output().unwrap().status.success());
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let cfg = tmp("config.json");
    std::fs::write(&cfg, r#"{"d":3,"q":"-0.07,-1.73,-0.5774","labeling":"methods"}"#).unwrap();
    let v = stdout_json(&run(&["witness", "--config", cfg.to_str().unwrap()]));
    assert!((v["witness"].as_f64().unwrap() + 0.079).abs() < 1e-3);

    // The flag overrides the config's family parameters.
    let v = stdout_json(&run(&[
        "witness",
        "--config",
        cfg.to_str().unwrap(),
        "--q",
        "0,0,0",
    ]));
    assert!((v["witness"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-9);
}

#[test]
fn validation_errors_exit_2() {
    let out = run(&["witness", "--q", "not-numbers"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["witness"]); // no state source at all
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["optimize", "--d", "6"]); // no complete MUB family
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn help_lists_all_subcommands() {
    let out = run(&["--help"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for sub in [
        "mubs",
        "state",
        "witness",
        "ppt",
        "scan",
        "optimize",
        "horodecki",
        "simulate",
        "tomography",
        "variants",
        "budget",
    ] {
        assert!(text.contains(sub), "missing {sub} in help");
    }
}
