//! End-to-end checks of the binary: verbs, exit codes, and output files.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("msentropy-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn msentropy(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_msentropy"))
        .args(args)
        .output()
        .expect("binary runs")
}

#[test]
fn parse_prints_canonical_structure() {
    let path = data_dir().join("structures/z2.structure");
    let out = msentropy(&["parse", path.to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("format 1\n"));
    assert!(text.contains("genset gens { g }"));
    // canonical output parses back to the same canonical output
    let tmp = scratch("reparse").join("z2.structure");
    fs::write(&tmp, &text).unwrap();
    let again = msentropy(&["parse", tmp.to_str().unwrap()]);
    assert_eq!(text, String::from_utf8(again.stdout).unwrap());
}

#[test]
fn parse_rejects_bad_documents_with_spans() {
    let dir = scratch("bad");
    let path = dir.join("broken.structure");
    fs::write(
        &path,
        "format 1\nsignature { fn f/1; domains all; }\ncarrier { a; a; }\n",
    )
    .unwrap();
    let out = msentropy(&["parse", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line 3"), "{err}");
    assert!(err.contains("duplicate carrier element"), "{err}");
}

#[test]
fn parse_canonicalizes_configs() {
    let path = data_dir().join("configs/shannon_halves.cfg");
    let out = msentropy(&["parse", path.to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("scenario shannon"));
    assert!(text.contains("p 1/2, 1/2"));
    assert!(text.contains("delta 1/100"));
}

#[test]
fn check_summarizes_a_valid_document() {
    let path = data_dir().join("structures/z4.structure");
    let out = msentropy(&["check", path.to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("carrier: 4 elements"));
    assert!(text.contains("triangle inequality verified"));
    assert!(text.contains("genset gens: 1 elements"));
}

#[test]
fn run_shannon_end_to_end() {
    let out_dir = scratch("shannon");
    let cfg = data_dir().join("configs/shannon_halves.cfg");
    let out = msentropy(&[
        "run",
        "shannon",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("scenario: shannon"));
    assert!(stdout.contains("deviation:"));

    let table = fs::read_to_string(out_dir.join("shannon_table.csv")).unwrap();
    assert!(table.starts_with("r,F_size,R_depth,delta,eps,N_raw,log_N,normalized,packing_kind"));
    assert_eq!(table.lines().count(), 1 + 5); // header + one row per scheduled r

    let estimate: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("shannon_estimate.json")).unwrap())
            .unwrap();
    for key in [
        "value",
        "sequence",
        "statistic",
        "schedule_hash",
        "reference",
        "deviation",
    ] {
        assert!(estimate.get(key).is_some(), "missing key {key}");
    }
    assert_eq!(estimate["statistic"], "last");
    assert_eq!(estimate["sequence"].as_array().unwrap().len(), 5);
    let value = estimate["value"].as_f64().unwrap();
    let reference = estimate["reference"].as_f64().unwrap();
    assert!((value - reference).abs() < 0.01);

    assert!(out_dir.join("shannon_series_vs_r.csv").exists());
    assert!(out_dir.join("shannon_series_vs_eps.csv").exists());
}

#[test]
fn runs_are_reproducible_byte_for_byte() {
    let cfg = data_dir().join("configs/sofic_z2.cfg");
    let out_a = scratch("repro-a");
    let out_b = scratch("repro-b");
    for out_dir in [&out_a, &out_b] {
        let out = msentropy(&[
            "run",
            "sofic_dim",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            "7",
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    for name in ["sofic_dim_table.csv", "sofic_dim_estimate.json"] {
        let a = fs::read(out_a.join(name)).unwrap();
        let b = fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
}

#[test]
fn scenario_mismatch_is_a_validation_error() {
    let cfg = data_dir().join("configs/shannon_halves.cfg");
    let out = msentropy(&["run", "bowen", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("declares scenario `shannon`"), "{err}");
}

#[test]
fn oversized_model_exits_with_budget_code() {
    let dir = scratch("budget");
    let cfg_path = dir.join("huge.cfg");
    let source = data_dir().join("structures/two_cells.structure");
    fs::write(
        &cfg_path,
        format!(
            "format 1\nscenario entropy\nsource {}\ngenset p\nmodel measure_algebra\nr 20\ndelta 0.05\neps 0.01\nstates mu\n",
            source.display()
        ),
    )
    .unwrap();
    let out = msentropy(&[
        "run",
        "entropy",
        "--config",
        cfg_path.to_str().unwrap(),
        "--out",
        dir.join("out").to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("budget"), "{err}");
}

#[test]
fn missing_file_exits_with_io_code() {
    let out = msentropy(&["parse", "/nonexistent/nowhere.structure"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn sofic_dim_scenario_counts_involutions() {
    let out_dir = scratch("sofic");
    let cfg = data_dir().join("configs/sofic_z2.cfg");
    let out = msentropy(&[
        "run",
        "sofic_dim",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let table = fs::read_to_string(out_dir.join("sofic_dim_table.csv")).unwrap();
    // r=3 rows count zero microstates; r=4 rows count the three
    // fixed-point-free involutions
    let n_raw = |prefix: &str| -> Vec<String> {
        table
            .lines()
            .filter(|l| l.starts_with(prefix))
            .map(|l| l.split(',').nth(5).unwrap().to_string())
            .collect()
    };
    assert!(n_raw("3,").iter().all(|v| v == "0"));
    assert!(n_raw("4,").iter().all(|v| v == "3"));
}

#[test]
fn bowen_scenario_mentions_reference_only_for_trivial_window() {
    let out_dir = scratch("bowen-z2");
    let cfg = data_dir().join("configs/bowen_z2.cfg");
    let out = msentropy(&[
        "run",
        "bowen",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("reference: none"), "{stdout}");
}
