//! End-to-end runs of the binary: exit codes, determinism, golden mode.

use std::fs;
use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_diskray"))
}

#[test]
fn verify_on_euclidean_passes_with_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .args([
            "verify",
            "--checks",
            "pestov,cancellation,santalo",
            "--grid",
            "24,24,48",
            "--rays",
            "24,24",
            "--out",
        ])
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(dir.path().join("verify.json").exists());
    assert!(dir.path().join("verify.txt").exists());
}

#[test]
fn malformed_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("broken.json");
    fs::write(&cfg, "{ this is not json").unwrap();
    let status = bin()
        .args(["simplicity", "--config"])
        .arg(&cfg)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn unknown_check_exits_two() {
    let status = bin()
        .args(["verify", "--checks", "nonsense", "--grid", "8,8,8"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn impossible_reconstruction_bound_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        format!(
            r#"{{"rays": [16, 16], "basis": 8, "recon_error_bound": 1e-12, "out": "{}"}}"#,
            dir.path().join("out").display()
        ),
    )
    .unwrap();
    let status = bin()
        .args(["invert", "--config"])
        .arg(&cfg)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn deterministic_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let run = || {
        let status = bin()
            .args([
                "verify",
                "--checks",
                "cancellation,santalo",
                "--grid",
                "16,16,16",
                "--rays",
                "16,16",
                "--seed",
                "9",
                "--deterministic",
                "--out",
            ])
            .arg(&out)
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0));
    };
    run();
    let first: Vec<Vec<u8>> = ["verify.json", "verify.txt"]
        .iter()
        .map(|name| fs::read(out.join(name)).unwrap())
        .collect();
    run();
    for (name, before) in ["verify.json", "verify.txt"].iter().zip(first) {
        let after = fs::read(out.join(name)).unwrap();
        assert_eq!(before, after, "{name} differs between identical runs");
    }
}

#[test]
fn outputs_embed_config_hash_and_version() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["transform", "--rays", "8,8", "--dump-rays", "2", "--out"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let sino = fs::read_to_string(dir.path().join("sinogram.csv")).unwrap();
    assert!(sino.starts_with("# config_hash="));
    assert!(sino.contains("version=0.1.0"));
    assert!(dir.path().join("rays.json").exists());
    assert!(dir.path().join("ray_00000.csv").exists());
}

#[test]
fn golden_mode_bootstraps_then_compares_clean() {
    let dir = tempfile::tempdir().unwrap();
    let golden = dir.path().join("baseline.json");
    for round in 0..2 {
        let status = bin()
            .args([
                "verify",
                "--checks",
                "cancellation",
                "--grid",
                "16,16,16",
                "--golden",
            ])
            .arg(&golden)
            .args(["--out"])
            .arg(dir.path().join(format!("out{round}")))
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0), "round {round}");
    }
    assert!(golden.exists());
}

#[test]
fn grid_metric_file_round_trips_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    // Sample a conformal metric to a grid file via the library.
    let profile = diskray::metric::ConformalProfile::Quadratic { a: 0.1 };
    let n = 61;
    let spacing = 2.4 / (n - 1) as f64;
    let origin = [-1.2, -1.2];
    let mut g11 = vec![0.0; n * n];
    let mut g12 = vec![0.0; n * n];
    let mut g22 = vec![0.0; n * n];
    for iy in 0..n {
        for ix in 0..n {
            let x = nalgebra::Vector2::new(
                origin[0] + ix as f64 * spacing,
                origin[1] + iy as f64 * spacing,
            );
            let g = profile.components(x);
            g11[iy * n + ix] = g[(0, 0)];
            g12[iy * n + ix] = g[(0, 1)];
            g22[iy * n + ix] = g[(1, 1)];
        }
    }
    let samples = diskray::metric::GridSamples {
        origin,
        spacing,
        nx: n,
        ny: n,
        g11,
        g12,
        g22,
        lambda_min: 0.9,
    };
    let metric_path = dir.path().join("metric.grid");
    diskray::io::write_metric_grid(&metric_path, &samples, &diskray::io::Provenance::default())
        .unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        format!(
            r#"{{"metric": {{"file": "{}"}}, "grid": [16, 16, 16], "rays": [12, 12], "out": "{}"}}"#,
            metric_path.display(),
            dir.path().join("out").display()
        ),
    )
    .unwrap();
    let status = bin()
        .args(["verify", "--checks", "cancellation,santalo", "--config"])
        .arg(&cfg)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
}

#[test]
fn missing_metric_file_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"metric": {"file": "/nonexistent/metric.grid"}}"#).unwrap();
    let status = bin()
        .args(["verify", "--checks", "cancellation", "--config"])
        .arg(&cfg)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn help_lists_all_commands() {
    let out = bin().arg("--help").output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    for cmd in [
        "simplicity",
        "verify",
        "transform",
        "invert",
        "mollify-study",
    ] {
        assert!(text.contains(cmd), "missing {cmd} in help");
    }
}

#[test]
fn config_dir_is_created_if_absent() {
    let dir = tempfile::tempdir().unwrap();
    let nested = dir.path().join("deep/ly/nested");
    let status = bin()
        .args([
            "verify",
            "--checks",
            "cancellation",
            "--grid",
            "16,16,16",
            "--out",
        ])
        .arg(&nested)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(Path::new(&nested).join("verify.json").exists());
}
