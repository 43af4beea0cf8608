use std::process::{Command, Output};

use serde_json::Value;

fn qfim3d(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qfim3d"))
        .args(args)
        .env("QFIM3D_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn json_out(args: &[&str]) -> Value {
    let out = qfim3d(args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn single_qfim_gaussian_and_lg() {
    let v = json_out(&[
        "single-qfim",
        "--beam",
        "gaussian",
        "--w0",
        "100e-6",
        "--lambda",
        "0.5e-6",
    ]);
    let zr = std::f64::consts::PI * 1e-8 / 0.5e-6;
    let zz = v["qfim_zz"].as_f64().unwrap();
    assert!((zz * zr * zr - 1.0).abs() < 1e-11, "{zz}");
    assert_eq!(v["schema"], "qfim3d/single-qfim/v1");
    assert_eq!(v["gamma_zero"], true);

    let v = json_out(&["single-qfim", "--beam", "lg", "--p", "1", "--l", "2"]);
    assert!((v["transverse_ratio"].as_f64().unwrap() - 5.0).abs() < 1e-9);
}

#[test]
fn usage_errors_exit_1() {
    let out = qfim3d(&["single-qfim", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(qfim3d(&["two-qfim", "--q", "1.5"]).status.code(), Some(1));
    assert_eq!(qfim3d(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn methods_agree_and_equal_brightness_decouples() {
    let args = |m: &'static str| {
        [
            "two-qfim", "--s", "0.5", "--t", "0.3", "--q", "0.3", "--method", m,
        ]
    };
    let a = json_out(&args("closed-form"));
    let b = json_out(&args("subspace"));
    let (ea, eb) = (&a["qfim"]["entries"], &b["qfim"]["entries"]);
    for i in 0..5 {
        for j in 0..5 {
            let (x, y) = (ea[i][j].as_f64().unwrap(), eb[i][j].as_f64().unwrap());
            let scale = (ea[i][i].as_f64().unwrap() * ea[j][j].as_f64().unwrap()).sqrt();
            assert!((x - y).abs() <= 1e-4 * scale, "({i},{j}) {x} {y}");
        }
    }
    let half = json_out(&["two-qfim", "--s", "0.7", "--t", "0.4", "--q", "0.5"]);
    assert_eq!(half["qfim"]["entries"][0][1].as_f64(), Some(0.0));
    assert_eq!(half["qfim"]["entries"][2][3].as_f64(), Some(0.0));
}

#[test]
fn outputs_are_deterministic_with_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let path = dir.path().join(name);
        let p = path.to_str().unwrap();
        let out = qfim3d(&["r-map", "--s-steps", "8", "--t-steps", "6", "-o", p]);
        assert!(out.status.success());
        std::fs::read(&path).unwrap()
    };
    let (a, b) = (run("a.csv"), run("b.csv"));
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# schema: qfim3d/r-map/v1"));
    assert_eq!(lines.next(), Some("s,t,r_value"));
    assert_eq!(lines.count(), 48);

    let meta: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a.csv.meta.json")).unwrap())
            .unwrap();
    assert_eq!(meta["command"], "r-map");
    assert_eq!(meta["threads"], 2);
    assert_eq!(meta["numerical_failure"], false);
    assert_eq!(meta["config"]["s_steps"], 8);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"s": 2.0, "t": 0.0, "q": 0.2, "method": "subspace"}"#,
    )
    .unwrap();
    let c = cfg.to_str().unwrap();
    let v = json_out(&["two-qfim", "--config", c, "--q", "0.4"]);
    assert_eq!(v["method"], "subspace");
    assert!((v["params"]["q"].as_f64().unwrap() - 0.4).abs() < 1e-15);
    assert!((v["params"]["s"].as_f64().unwrap() - 2e-4).abs() < 1e-15);

    std::fs::write(&cfg, r#"{"s": 2.0, "colour": "blue"}"#).unwrap();
    assert_eq!(qfim3d(&["two-qfim", "--config", c]).status.code(), Some(1));
}

#[test]
fn cfi_sweep_layout_and_limit_check() {
    let out = qfim3d(&["cfi-sweep", "--z-steps", "31", "--no-numeric"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let header = text.lines().nth(1).unwrap();
    assert_eq!(header, "z,F_xx,F_yy,F_zz,QFI_xx,QFI_zz");
    assert_eq!(text.lines().count(), 33);

    let out = qfim3d(&["limit-check", "--q", "0.3"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let out = qfim3d(&["validate"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}
