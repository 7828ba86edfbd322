//! End-to-end checks of the `rwdre` binary: artifact layout, determinism
//! across thread counts, and the exit-code contract.

use std::path::Path;
use std::process::{Command, Output};

fn rwdre(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rwdre"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("experiment.toml");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const SPEED_CONFIG: &str = r#"
name = "cli-speed"
replicas = 12
master_seed = 99

[kernel]
dim = 1
rates = [
    { state = 1, jump = [1], rate = 2.0 },
    { state = 0, jump = [-1], rate = 1.0 },
]

[environment]
lambda = 2.0
burn_in = 0.0

[grids]
t = [2.0, 4.0]
"#;

#[test]
fn speed_writes_all_three_files() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SPEED_CONFIG);
    let out_dir = dir.path().join("out");

    let output = rwdre(&["speed", "--config", &config, "--out", out_dir.to_str().unwrap()]);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));

    for file in ["manifest.json", "report.json", "replicas.csv"] {
        assert!(out_dir.join(file).exists(), "missing {file}");
    }

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["lambda"], 2.0);
    assert_eq!(report["points"].as_array().unwrap().len(), 2);

    let csv = std::fs::read_to_string(out_dir.join("replicas.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("replica,t,w1,n_jumps,rho"));
    assert_eq!(lines.count(), 24);
}

#[test]
fn report_and_csv_are_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SPEED_CONFIG);
    let one = dir.path().join("one");
    let four = dir.path().join("four");

    let a = rwdre(&[
        "speed", "--config", &config, "--out", one.to_str().unwrap(), "--threads", "1",
    ]);
    let b = rwdre(&[
        "speed", "--config", &config, "--out", four.to_str().unwrap(), "--threads", "4",
    ]);
    assert!(a.status.success() && b.status.success());

    for file in ["report.json", "replicas.csv"] {
        let left = std::fs::read(one.join(file)).unwrap();
        let right = std::fs::read(four.join(file)).unwrap();
        assert_eq!(left, right, "{file} differs across thread counts");
    }
}

#[test]
fn seed_override_changes_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SPEED_CONFIG);
    let base = dir.path().join("base");
    let reseeded = dir.path().join("reseeded");

    rwdre(&["speed", "--config", &config, "--out", base.to_str().unwrap()]);
    rwdre(&[
        "speed", "--config", &config, "--out", reseeded.to_str().unwrap(), "--seed", "100",
    ]);

    let left = std::fs::read(base.join("report.json")).unwrap();
    let right = std::fs::read(reseeded.join("report.json")).unwrap();
    assert_ne!(left, right);

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(reseeded.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["master_seed"], 100);
    assert_eq!(manifest["config"]["master_seed"], 100);
}

#[test]
fn missing_required_field_exits_2_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SPEED_CONFIG);
    let out_dir = dir.path().join("out");

    // The speed config has no params.t, which subadd requires.
    let output = rwdre(&["subadd", "--config", &config, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("params.t"), "stderr was: {stderr}");
    assert!(!out_dir.exists());
}

#[test]
fn unknown_flag_exits_2() {
    let output = rwdre(&["speed", "--confg", "nope.toml"]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn inconclusive_fit_exits_3_but_writes_the_report() {
    let dir = tempfile::tempdir().unwrap();
    // A deviation threshold far beyond the jump rate: every tail cell is
    // empty, the decay fit is degenerate, and the verdict is inconclusive.
    let config = write_config(
        dir.path(),
        r#"
name = "cli-degenerate"
replicas = 16
master_seed = 5

[kernel]
dim = 1
rates = [
    { state = 1, jump = [1], rate = 2.0 },
    { state = 0, jump = [-1], rate = 1.0 },
]

[environment]
lambda = 2.0
burn_in = 0.0

[grids]
t = [2.0, 3.0, 4.0]

[params]
epsilon = 50.0
"#,
    );
    let out_dir = dir.path().join("out");
    let output = rwdre(&["ldp-walk", "--config", &config, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(3));

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap())
            .unwrap();
    assert!(report["walker"]["fit"].is_null());
}

#[test]
fn abort_budget_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    // A box of radius 3 cannot contain a random walk for 40 expected jumps,
    // so nearly every replica aborts at the fence.
    let config = write_config(
        dir.path(),
        r#"
name = "cli-aborts"
replicas = 10
master_seed = 12

[kernel]
dim = 1
rates = [
    { state = 1, jump = [1], rate = 2.0 },
    { state = 0, jump = [-1], rate = 1.0 },
]

[environment]
lambda = 2.0
radius = 3
burn_in = 0.0

[grids]
t = [20.0]
"#,
    );
    let out_dir = dir.path().join("out");
    let output = rwdre(&["speed", "--config", &config, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(4));
    assert!(!out_dir.join("report.json").exists());
}

#[test]
fn oracle_check_passes_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"
name = "cli-oracle"
replicas = 25
master_seed = 8

[kernel]
dim = 1
rates = [
    { state = 1, jump = [1], rate = 2.0 },
    { state = 0, jump = [-1], rate = 1.0 },
]

[environment]
lambda = 2.0
"#,
    );
    let out_dir = dir.path().join("out");
    let output =
        rwdre(&["oracle-check", "--config", &config, "--out", out_dir.to_str().unwrap()]);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["all_ok"], true);
}
