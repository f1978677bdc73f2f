use std::path::Path;
use std::process::{Command, Output};

fn qkdwdm(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qkdwdm"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn preset(dir: &Path, name: &str, file: &str) {
    let o = qkdwdm(&["preset", name, "--out", file], dir);
    assert!(o.status.success(), "{}", stderr(&o));
}

fn qber_percent(report: &str) -> f64 {
    let line = report
        .lines()
        .skip_while(|l| *l != "qber")
        .nth(1)
        .expect("qber section");
    line.split_whitespace().nth(1).unwrap().parse().unwrap()
}

#[test]
fn version_lists_schema() {
    let dir = tempfile::tempdir().unwrap();
    let o = qkdwdm(&["--version"], dir.path());
    assert!(o.status.success());
    assert!(stdout(&o).contains("config schema 1"));
}

#[test]
fn budget_report_for_filtered_sarg() {
    let dir = tempfile::tempdir().unwrap();
    preset(dir.path(), "paper-default", "cfg.json");
    let o = qkdwdm(
        &["budget", "--config", "cfg.json", "--length", "25", "--protocol", "sarg", "--filters"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("sarg, filters on"));
    assert!(out.contains("r_ec (effective)") && out.contains("r_pa (effective)"));
    let q = qber_percent(&out);
    assert!((q / 1.7 - 1.0).abs() <= 0.3, "qber {q} %");
}

#[test]
fn plan_check_flags_fwm_on_quantum_channel() {
    let dir = tempfile::tempdir().unwrap();
    preset(dir.path(), "paper-default", "cfg.json");
    let ok = qkdwdm(&["plan", "check", "--config", "cfg.json"], dir.path());
    assert_eq!(ok.status.code(), Some(0));
    assert!(stdout(&ok).contains("result: ok"));

    let text = std::fs::read_to_string(dir.path().join("cfg.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    for ch in v["plan"]["channels"].as_array_mut().unwrap() {
        let off = ch["offset_ghz"].as_f64().unwrap();
        ch["direction"] = if off == 200.0 || off == 400.0 { "toward_bob" } else { "toward_alice" }.into();
    }
    std::fs::write(dir.path().join("bad.json"), v.to_string()).unwrap();
    let bad = qkdwdm(&["plan", "check", "--config", "bad.json"], dir.path());
    assert_eq!(bad.status.code(), Some(1));
    assert!(stdout(&bad).contains("-> +0 GHz"));
    assert!(stderr(&bad).starts_with("error:"));
}

#[test]
fn sweep_writes_stable_csv() {
    let dir = tempfile::tempdir().unwrap();
    preset(dir.path(), "paper-default-filters", "cfg.json");
    for out in ["a.csv", "b.csv"] {
        let o = qkdwdm(
            &["sweep", "--config", "cfg.json", "--min", "0", "--max", "50", "--step", "5", "--out", out],
            dir.path(),
        );
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b.csv")).unwrap());
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("length_km,protocol,filters,p_mu,p_ram_f,p_ram_b,p_ct,p_dc_gate,p_ap,qber,"));
    assert_eq!(text.lines().count(), 12);
}

#[test]
fn sweep_with_reversed_range_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    preset(dir.path(), "paper-default", "cfg.json");
    let o = qkdwdm(
        &["sweep", "--config", "cfg.json", "--min", "10", "--max", "1", "--step", "1", "--out", "x.csv"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error:"));
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["budget", "--length", "3"],
        vec!["preset", "no-such-preset", "--out", "x.json"],
        vec!["frobnicate"],
    ] {
        let o = qkdwdm(&args, dir.path());
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(stderr(&o).starts_with("error:"), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn config_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.json"), "{\"schema_version\": 1}").unwrap();
    for cfg in ["bad.json", "missing.json"] {
        let o = qkdwdm(&["budget", "--config", cfg, "--length", "10"], dir.path());
        assert_eq!(o.status.code(), Some(3), "{cfg}");
        assert!(stderr(&o).starts_with("error:"));
    }
}

#[test]
fn mc_is_independent_of_chunks() {
    let dir = tempfile::tempdir().unwrap();
    preset(dir.path(), "paper-default", "cfg.json");
    let run = |chunks: &str| {
        let o = qkdwdm(
            &["mc", "--config", "cfg.json", "--length", "25", "--gates", "3000000", "--seed", "5", "--chunks", chunks],
            dir.path(),
        );
        assert!(o.status.success(), "{}", stderr(&o));
        stdout(&o)
    };
    let one = run("1");
    assert_eq!(one, run("4"));
    assert!(one.contains("closed form"));
}

#[test]
fn calibrate_then_budget_reproduces_target() {
    let dir = tempfile::tempdir().unwrap();
    preset(dir.path(), "paper-default", "cfg.json");
    let o = qkdwdm(
        &["calibrate", "--config", "cfg.json", "--qber", "0.05", "--length", "25", "--out", "cal.json"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("scale factor"));
    let b = qkdwdm(&["budget", "--config", "cal.json", "--length", "25"], dir.path());
    assert!((qber_percent(&stdout(&b)) - 5.0).abs() < 1e-3);

    let low = qkdwdm(
        &["calibrate", "--config", "cfg.json", "--qber", "0.001", "--length", "25", "--out", "x.json"],
        dir.path(),
    );
    assert_eq!(low.status.code(), Some(2));
}

#[test]
fn compare_bands_writes_both_tables() {
    let dir = tempfile::tempdir().unwrap();
    preset(dir.path(), "paper-default", "c.json");
    preset(dir.path(), "low-dark-count-1310", "o.json");
    let o = qkdwdm(
        &[
            "compare-bands", "--config1550", "c.json", "--config1310", "o.json", "--out", "bands.csv", "--max", "60",
            "--step", "10",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("reach at 8.6 bps"));
    let text = std::fs::read_to_string(dir.path().join("bands.csv")).unwrap();
    assert!(text.starts_with("band,length_km,"));
    assert_eq!(text.lines().filter(|l| l.starts_with("1310,")).count(), 7);
    assert_eq!(text.lines().filter(|l| l.starts_with("1550,")).count(), 7);
}
