//! End-to-end checks of the batch interface and its exit-code contract.

use std::path::Path;
use std::process::Command;

fn carnot() -> Command {
    Command::new(env!("CARGO_BIN_EXE_carnot"))
}

#[test]
fn group_info_prints_engel_summary() {
    let out = carnot().args(["group-info", "engel"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("strata: [2, 1, 1]"));
    assert!(text.contains("homogeneous dimension Q: 7"));
    assert!(text.contains("rank at origin: 4"));
}

#[test]
fn malformed_config_exits_with_code_two() {
    let dir = std::env::temp_dir().join("carnot_cli_badcfg");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("bad.toml");
    std::fs::write(
        &cfg,
        "[group]\npreset = \"r3\"\n\n[expressions]\nreaction = \"rho +\"\n\n[params]\np = 2.0\nn = [5, 5, 5]\n",
    )
    .unwrap();
    let out = carnot()
        .args(["solve", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("expressions.reaction"), "stderr: {err}");
}

#[test]
fn solve_writes_solution_files() {
    let dir = std::env::temp_dir().join("carnot_cli_solve");
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("solve.toml");
    std::fs::write(
        &cfg,
        r#"
[group]
preset = "h1"

[domain]
kind = "box"
lo = [0.0, 0.0, 0.0]
hi = [1.0, 1.0, 1.0]

[expressions]
reaction = "1"

[params]
p = 2.0
n = [7, 7, 7]
"#,
    )
    .unwrap();
    let out_dir = dir.join("out");
    let out = carnot()
        .args(["solve", "--quiet", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("solution.csv").exists());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("solution.json")).unwrap())
            .unwrap();
    assert_eq!(report["group"], "H1");
    assert!(report["sup_norm"].as_f64().unwrap() > 0.0);
}

#[test]
fn verify_divergence_reports_are_reproducible() {
    let dir = std::env::temp_dir().join("carnot_cli_verify");
    let _ = std::fs::remove_dir_all(&dir);
    let run = |out: &Path| {
        let st = carnot()
            .args(["verify", "divergence", "--quiet", "--seed", "7", "--out"])
            .arg(out)
            .status()
            .unwrap();
        assert!(st.success());
    };
    run(&dir.join("a"));
    run(&dir.join("b"));
    let a = std::fs::read(dir.join("a/verify_divergence.csv")).unwrap();
    let b = std::fs::read(dir.join("b/verify_divergence.csv")).unwrap();
    assert_eq!(a, b, "reports must be byte-identical under a fixed seed");
}
