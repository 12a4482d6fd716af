use std::path::Path;
use std::process::{Command, Output};

fn agnodp(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_agnodp")).args(args).current_dir(dir).output().unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) {
    std::fs::write(dir.join(name), body).unwrap();
}

const THRESHOLD: &str = r#"{"learner": "threshold", "domain_size": 32,
    "distribution": {"kind": "noisy_threshold", "u_star": 9, "rho": 0.1},
    "n": 300, "m": 4, "alpha": 0.1, "beta": 0.1, "epsilon": 2.0, "trials": 4, "seed": 5,
    "constants_mode": "practical", "sweep": {"n": [100, 200, 400]}}"#;

#[test]
fn learn_threshold_reports_hypothesis() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "c.json", THRESHOLD);
    let out = agnodp(&["learn-threshold", "--config", "c.json"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("hypothesis: u="));
    assert!(text.contains("population_excess: "));
}

#[test]
fn learn_from_dataset_file() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "c.json", &THRESHOLD.replace("\"m\": 4", "\"m\": 1"));
    let lines: Vec<String> = (1..=32).map(|x| format!("{x}:{}", u8::from(x > 9))).collect();
    std::fs::write(dir.path().join("z.txt"), lines.join("\n")).unwrap();
    let out = agnodp(&["learn-item", "--config", "c.json", "--data", "z.txt", "--seed", "2"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8(out.stdout).unwrap().contains("n: 32"));
}

#[test]
fn min_error_prints_estimate() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "c.json", THRESHOLD);
    let out = agnodp(&["min-error", "--config", "c.json", "--out", "est.txt"], dir.path());
    assert!(out.status.success());
    let text = std::fs::read_to_string(dir.path().join("est.txt")).unwrap();
    assert!(text.contains("eta_hat: ") && text.contains("iterations: 5"));
}

#[test]
fn sweep_writes_csv_and_plot_script() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "c.json", THRESHOLD);
    let out = agnodp(
        &["sweep", "--config", "c.json", "--out", "r.csv", "--plot-script", "r.gp", "--parallel", "2"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
    assert!(csv.starts_with("row_type,sweep,trial,"));
    assert_eq!(csv.lines().filter(|l| l.starts_with("trial,")).count(), 12);
    assert_eq!(csv.lines().filter(|l| l.starts_with("aggregate,")).count(), 3);
    let script = std::fs::read_to_string(dir.path().join("r.gp")).unwrap();
    assert!(script.contains("set xlabel 'n'"));
}

#[test]
fn mode_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "c.json", THRESHOLD);
    let out = agnodp(&["sweep", "--config", "c.json", "--mode", "theory"], dir.path());
    assert!(out.status.success());
    let csv = String::from_utf8(out.stdout).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.contains(",theory,")));
}

#[test]
fn exact_audit_of_item_learner() {
    let dir = tempfile::tempdir().unwrap();
    write_config(
        dir.path(),
        "c.json",
        r#"{"learner": "item", "domain_size": 4, "distribution": {"kind": "uniform_label"},
            "n": 3, "m": 1, "alpha": 0.1, "beta": 0.1, "epsilon": 1.0, "trials": 1}"#,
    );
    let out = agnodp(&["audit", "--config", "c.json", "--exact"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("method: exact") && text.contains("violation: false"));
    let measured: f64 = text.lines().find_map(|l| l.strip_prefix("epsilon_measured: ")).unwrap().parse().unwrap();
    assert!(measured <= 1.0 + 1e-9);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "zero.json", &THRESHOLD.replace("\"trials\": 4", "\"trials\": 0"));
    write_config(dir.path(), "typo.json", &THRESHOLD.replace("\"seed\"", "\"sed\""));
    write_config(dir.path(), "alpha.json", &THRESHOLD.replace("\"alpha\": 0.1", "\"alpha\": 1.5"));
    for name in ["zero.json", "typo.json", "alpha.json", "missing.json"] {
        let out = agnodp(&["sweep", "--config", name], dir.path());
        assert_eq!(out.status.code(), Some(2), "{name}");
    }
    assert_eq!(agnodp(&["sweep"], dir.path()).status.code(), Some(2));
    let out = agnodp(&["audit", "--config", "missing.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn infeasible_gap_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    // slack so large that no tail cut of Bin(1, .) reaches the required gap
    let body = THRESHOLD
        .replace("\"m\": 4", "\"m\": 1")
        .replace("\"constants_mode\": \"practical\"", "\"constants_mode\": \"practical\", \"slack_scale\": 5000");
    write_config(dir.path(), "c.json", &body);
    let out = agnodp(&["learn-threshold", "--config", "c.json"], dir.path());
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn empirical_audit_rejects_few_trials() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "c.json", THRESHOLD);
    let out = agnodp(&["audit", "--config", "c.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}
