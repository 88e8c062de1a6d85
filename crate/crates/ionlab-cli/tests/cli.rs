//! CLI contract tests: exit codes, diagnostics, manifests, output plumbing.

use std::path::{Path, PathBuf};
use std::process::Command;

fn ionlab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ionlab"))
}

fn corpus(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join(rel)
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("ionlab-cli-tests");
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn parse_error_exits_1_with_position() {
    let seq = tmp("bad.seq");
    std::fs::write(
        &seq,
        "trap z=1MHz\nion Ca40\ninit ground\nfrobnicate\nmeasure shots=1\n",
    )
    .unwrap();
    let out = ionlab().args(["run"]).arg(&seq).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 4"), "{err}");
}

#[test]
fn unstable_crystal_exits_2() {
    let cfg = tmp("unstable.cfg");
    std::fs::write(&cfg, "trap x=0.3MHz, y=0.3MHz, z=1.0MHz\nion Ca40\n").unwrap();
    let out = ionlab()
        .args(["modes", "--ions", "2", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("unstable"), "{err}");
}

#[test]
fn schema_mismatch_exits_1_naming_column() {
    let csv = tmp("bad.csv");
    std::fs::write(&csv, "param,value,p_true\nx,1,0.5\n").unwrap();
    let out = ionlab()
        .args(["fit", "lorentzian"])
        .arg(&csv)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("p_est"), "{err}");
}

#[test]
fn fit_failure_exits_3() {
    // two fringes are required; a flat scan cannot be fit
    let csv = tmp("flat.csv");
    let mut body = String::from("param,value,p_true,p_est,stderr,shots,seed\n");
    for k in 0..50 {
        body.push_str(&format!("detuning_hz,{},0.5,0.5,0.0,0,1\n", k * 100));
    }
    std::fs::write(&csv, body).unwrap();
    let out = ionlab()
        .args(["fit", "ramsey", "--pulse", "22us", "--gap", "0.2ms"])
        .arg(&csv)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn run_writes_csv_and_manifest() {
    let out_csv = tmp("fock0.csv");
    let status = ionlab()
        .arg("run")
        .arg(corpus("sequences/fig6_fock0_flop.seq"))
        .arg("--config")
        .arg(corpus("configs/spherical_trap.cfg"))
        .args(["--seed", "3", "--shots", "50", "--out"])
        .arg(&out_csv)
        .status()
        .unwrap();
    assert!(status.success());
    let body = std::fs::read_to_string(&out_csv).unwrap();
    assert!(body.starts_with("param,value,p_true,p_est,stderr,shots,seed\n"));
    let manifest_path = tmp("fock0.csv.manifest.json");
    let manifest = std::fs::read_to_string(manifest_path).unwrap();
    assert!(manifest.contains("\"master_seed\": 3"), "{manifest}");
    assert!(manifest.contains("\"subcommand\": \"run\""));
}

#[test]
fn oracle_flag_gives_exact_zero_error_points() {
    let out_csv = tmp("oracle.csv");
    let status = ionlab()
        .arg("run")
        .arg(corpus("sequences/fig6_fock0_flop.seq"))
        .arg("--config")
        .arg(corpus("configs/spherical_trap.cfg"))
        .args(["--oracle", "--out"])
        .arg(&out_csv)
        .status()
        .unwrap();
    assert!(status.success());
    let body = std::fs::read_to_string(&out_csv).unwrap();
    for line in body.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields[2], fields[3], "p_est must equal p_true");
        assert_eq!(fields[5], "0", "oracle rows carry zero shots");
    }
}

#[test]
fn gnuplot_script_references_output() {
    let out_csv = tmp("plotted.csv");
    let script = tmp("plot.gp");
    let status = ionlab()
        .arg("run")
        .arg(corpus("sequences/fig6_fock0_flop.seq"))
        .arg("--config")
        .arg(corpus("configs/spherical_trap.cfg"))
        .args(["--oracle", "--out"])
        .arg(&out_csv)
        .arg("--gnuplot-script")
        .arg(&script)
        .status()
        .unwrap();
    assert!(status.success());
    let body = std::fs::read_to_string(&script).unwrap();
    assert!(body.contains("plotted.csv"), "{body}");
}

#[test]
fn modes_table_lists_expected_lines() {
    let out = ionlab()
        .args(["modes", "--ions", "2", "--config"])
        .arg(corpus("configs/spherical_trap.cfg"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    // √3·ω_y = 3.585 MHz breathing line and √(ω_z²−ω_y²) = 4.007 MHz rocking
    assert!(text.contains("3.585"), "{text}");
    assert!(text.contains("4.006894"), "{text}");
    assert!(text.contains("breathing"));
}
