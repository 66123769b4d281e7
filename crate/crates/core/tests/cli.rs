// Copyright 2026 The catgrape Authors
// SPDX-License-Identifier: Apache-2.0

//! End-to-end runs of the `catgrape` binary on small problems.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

use catgrape::cli::run::{CORRECTED_FILE, PTM_FILE, REPORT_FILE, WAVEFORM_FILE, WIGNER_FILE};
use catgrape::cli::waveform_file::WaveformFile;

fn catgrape(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_catgrape"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.in.toml");
    std::fs::write(&path, body).unwrap();
    path.display().to_string()
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect()
}

const IDENTITY_SHORT: &str = r#"
seed = 4

[target]
kind = "gate"
gate = "I"

[pulse]
steps = 30
dt_ns = 2.0

[penalties]
lambda_amplitude = 1e-6
lambda_derivative = 1e-9
lambda_discrepancy = 1e-6

[truncation]
n_osc = 20
n_trans = 2
pads = [0]

[optimizer]
max_iter = 1
fidelity_goal = 1.0

[wigner]
extent = 2.5
points = 9
"#;

#[test]
fn below_goal_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), IDENTITY_SHORT);
    let out = dir.path().join("run");
    let o = catgrape(&["synthesize", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    let report = std::fs::read_to_string(out.join(REPORT_FILE)).unwrap();
    assert!(report.contains("termination max iterations"));
    assert!(report.contains("not met"));
    assert!(report.contains("# literature values"));
    assert!(report.contains("not expected"));
    assert!(out.join(WAVEFORM_FILE).exists());
    assert!(out.join(WIGNER_FILE).exists());
}

#[test]
fn config_errors_exit_with_one_and_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &IDENTITY_SHORT.replace("dt_ns = 2.0", "dt_ns = -2.0"));
    let out = dir.path().join("run");
    let o = catgrape(&["synthesize", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    let line = IDENTITY_SHORT.lines().position(|l| l.starts_with("dt_ns")).unwrap() + 1;
    assert!(err.contains(&format!("line {line}")), "{err}");
    assert!(err.contains("pulse.dt_ns"), "{err}");
    assert!(!out.exists(), "nothing may be written for an invalid config");

    let cfg = write_config(dir.path(), "[target]\n[pulse]\nsteps = 1\ndt_ns = 1.0\n");
    let o = catgrape(&["synthesize", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing target"));

    let o = catgrape(&["synthesize", "--config", "/nonexistent/config.toml"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn verify_only_flows_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &format!("{IDENTITY_SHORT}\n[correction]\nb_ns = 0.1\ntau_ns = 2.0\n"),
    );
    let out = dir.path().join("run");
    let out_s = out.to_str().unwrap().to_string();
    let args = ["--config", cfg.as_str(), "--out", out_s.as_str(), "--seed", "9"];
    let run_all = || {
        let _ = std::fs::remove_dir_all(&out);
        let o = catgrape(&[&["synthesize"][..], &args[..]].concat());
        assert_eq!(o.status.code(), Some(2));
        let wf = out.join(WAVEFORM_FILE);
        let saved = dir.path().join("pulse.wf");
        std::fs::copy(&wf, &saved).unwrap();
        let saved_s = saved.to_str().unwrap();
        for cmd in ["simulate", "wigner", "ptomo", "correct"] {
            let o = catgrape(&[&[cmd][..], &args[..], &["--waveform", saved_s][..]].concat());
            assert!(
                matches!(o.status.code(), Some(0) | Some(2)),
                "{cmd}: {}",
                String::from_utf8_lossy(&o.stderr)
            );
        }
        snapshot(&out)
    };
    let first = run_all();
    for f in [REPORT_FILE, WAVEFORM_FILE, WIGNER_FILE, PTM_FILE, CORRECTED_FILE] {
        assert!(first.contains_key(f), "{f} missing");
    }
    assert!(String::from_utf8_lossy(&first["config.toml"]).contains("seed = 9"));
    let corrected = WaveformFile::read(std::str::from_utf8(&first[CORRECTED_FILE]).unwrap()).unwrap();
    assert_eq!(corrected.steps(), 30);
    let second = run_all();
    assert_eq!(first, second);
}

#[test]
fn missing_waveform_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), IDENTITY_SHORT);
    let o = catgrape(&[
        "simulate",
        "--config",
        &cfg,
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--waveform"));
    let bad = dir.path().join("bad.wf");
    std::fs::write(&bad, "version 1\ndt_ns 2\nsteps 1\nbogus 1\n").unwrap();
    let o = catgrape(&["simulate", "--config", &cfg, "--waveform", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 4"));
}
