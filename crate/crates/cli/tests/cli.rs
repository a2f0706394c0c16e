use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SHORT_CONFIG: &str = "\
t_end = 2.0
reference.rpm = [[0, 0], [0.5, 600]]
load.torque = [[0, 0], [1, 1]]
";

fn bldc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bldc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Short simulation into `dir`, returning the config path.
fn simulate(dir: &Path, seed: &str) -> Output {
    let cfg = dir.join("run.toml");
    fs::write(&cfg, SHORT_CONFIG).unwrap();
    bldc(&[
        "simulate",
        "--config",
        path(&cfg),
        "--out",
        path(dir),
        "--seed",
        seed,
    ])
}

#[test]
fn help_lists_config_keys() {
    for args in [&["--help"][..], &["simulate", "--help"][..]] {
        let out = bldc(args);
        assert!(out.status.success());
        let text = String::from_utf8(out.stdout).unwrap();
        for key in [
            "motor.phase_resistance",
            "pi.kp",
            "pwm.carrier_hz",
            "load.torque",
            "log_step",
        ] {
            assert!(text.contains(key), "{args:?} missing {key}");
        }
    }
}

#[test]
fn missing_config_exits_2() {
    let out = bldc(&["simulate", "--config", "/definitely/not/here.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("config not found"));
}

#[test]
fn invalid_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "ode_step = 3e-5\n").unwrap();
    let out = bldc(&[
        "simulate",
        "--config",
        path(&cfg),
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("invalid config"));
}

#[test]
fn bad_case_is_a_usage_error() {
    for case in ["5", "0", "x"] {
        let out = bldc(&["train", "--case", case]);
        assert_eq!(out.status.code(), Some(2), "case {case}");
    }
}

#[test]
fn missing_trace_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = bldc(&["train", "--case", "1", "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("trace not found"));
}

#[test]
fn divergent_run_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("stiff.toml");
    fs::write(
        &cfg,
        format!("{SHORT_CONFIG}motor.phase_inductance = 1e-7\nmotor.phase_resistance = 10.0\n"),
    )
    .unwrap();
    let out = bldc(&[
        "simulate",
        "--config",
        path(&cfg),
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
}

#[test]
fn simulate_is_repeatable_under_a_seed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(simulate(a.path(), "7").status.success());
    assert!(simulate(b.path(), "7").status.success());
    for file in ["trace.csv", "summary.txt"] {
        assert_eq!(
            fs::read(a.path().join(file)).unwrap(),
            fs::read(b.path().join(file)).unwrap(),
            "{file}"
        );
    }
    let summary = fs::read_to_string(a.path().join("summary.txt")).unwrap();
    assert!(summary.contains("rows 201\n"));
    assert!(summary.contains("seed 7\n"));
    assert!(summary.contains("final_load_torque_nm 1\n"));
}

#[test]
fn train_predict_figures_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(simulate(d, "0").status.success());

    let out = bldc(&[
        "train",
        "--case",
        "3",
        "--out",
        path(d),
        "--epochs",
        "4",
        "--lr",
        "0.02",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report = String::from_utf8(out.stdout).unwrap();
    assert!(report.contains("topology 3-5-5-5-5-5-5-3"));
    assert!(report.contains("4 epochs, adam lr 0.02"));
    let metrics = fs::read_to_string(d.join("case3_metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 5);
    assert!(metrics.starts_with("epoch,train_loss,val_loss,train_accuracy,val_accuracy,mse,mae\n"));
    let model = fs::read_to_string(d.join("case3.model")).unwrap();
    assert!(model.starts_with("bldc-mlp 1\ncase 3\n"));

    let out = bldc(&["predict", "--case", "3", "--out", path(d)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let pred = fs::read_to_string(d.join("case3_predictions.csv")).unwrap();
    assert!(pred.starts_with("row,t,validation,emf_norm_a_actual,emf_norm_a_predicted,"));
    assert_eq!(pred.lines().count(), 202);

    // a case 3 model cannot serve case 4
    let out = bldc(&[
        "predict",
        "--case",
        "4",
        "--model",
        path(&d.join("case3.model")),
        "--out",
        path(d),
    ]);
    assert_eq!(out.status.code(), Some(2));

    let out = bldc(&[
        "figures",
        "--out",
        path(d),
        "--metrics",
        path(&d.join("case3_metrics.csv")),
        "--predictions",
        path(&d.join("case3_predictions.csv")),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    for svg in [
        "speed.svg",
        "torque.svg",
        "hall.svg",
        "pwm.svg",
        "emf_norm.svg",
        "case3_metrics_loss.svg",
        "case3_predictions.svg",
    ] {
        let text = fs::read_to_string(d.join(svg)).unwrap();
        assert!(
            text.starts_with("<svg") && text.ends_with("</svg>\n"),
            "{svg}"
        );
    }
}

#[test]
fn figures_needs_input() {
    let dir = tempfile::tempdir().unwrap();
    let out = bldc(&["figures", "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gradcheck_passes() {
    let out = bldc(&["gradcheck", "--seed", "3"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.trim_end().ends_with("PASS"));
    assert_eq!(text.lines().count(), 11);
}
