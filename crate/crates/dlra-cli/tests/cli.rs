//! End-to-end tests of the `dlra` binary: exit codes, file outputs, config
//! round-trips. Each test works in its own temp directory.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn run_cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dlra"))
        .args(args)
        .output()
        .expect("spawn dlra binary")
}

fn workdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("dlra-cli-{}-{}", tag, std::process::id()));
    if dir.exists() {
        fs::remove_dir_all(&dir).unwrap();
    }
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn tableaux_lists_the_registry() {
    let out = run_cli(&["tableaux"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout_of(&out);
    for name in ["euler", "rk2m", "rk2h", "rk3s", "rk3h", "rk4", "rkf45-high"] {
        assert!(text.contains(name), "missing '{name}' in:\n{text}");
    }
    assert!(text.contains("stages=") && text.contains("order="));
}

#[test]
fn run_writes_trajectory_csv_and_metadata() {
    let dir = workdir("run-ok");
    let out_dir = dir.to_str().unwrap();
    let out = run_cli(&[
        "run",
        "--problem",
        "lyapunov",
        "--n",
        "16",
        "--t-final",
        "1.0",
        "--h",
        "0.025",
        "--r",
        "3",
        "--output",
        out_dir,
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));

    let csv = fs::read_to_string(dir.join("run.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "k,t,error,truncation_residual,augmented_rank");
    assert_eq!(lines.len(), 1 + 41, "one row per step plus the initial state");
    let last: Vec<&str> = lines.last().unwrap().split(',').collect();
    assert_eq!(last[0], "40");
    assert!(last[1].parse::<f64>().unwrap() > 0.999);

    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("run.json")).unwrap()).unwrap();
    assert_eq!(meta["method"], "rk-bug");
    assert_eq!(meta["tableau"], "rk2m");
    assert_eq!(meta["r"], 3);
    assert_eq!(meta["problem"], "lyapunov");
    assert_eq!(meta["steps"], 40);
    assert!(meta["version"].is_string());
}

#[test]
fn run_unknown_tableau_exits_2_and_lists_registry() {
    let dir = workdir("run-badtab");
    let out = run_cli(&[
        "run",
        "--problem",
        "lyapunov",
        "--n",
        "16",
        "--tableau",
        "nosuch",
        "--h",
        "0.1",
        "--r",
        "3",
        "--output",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_of(&out);
    assert!(err.contains("unknown tableau 'nosuch'"), "stderr: {err}");
    for name in ["euler", "rk2m", "rk2h", "rk3s", "rk3h", "rk4"] {
        assert!(err.contains(name), "registry name '{name}' missing from: {err}");
    }
}

#[test]
fn run_non_integer_step_count_exits_2() {
    let dir = workdir("run-badh");
    let out = run_cli(&[
        "run",
        "--problem",
        "lyapunov",
        "--n",
        "16",
        "--h",
        "0.3",
        "--t-final",
        "1.0",
        "--output",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("non-integer step count"), "{}", stderr_of(&out));
}

#[test]
fn run_blow_up_exits_3() {
    let dir = workdir("run-blowup");
    // step far outside the stability region of the diffusion operator; the
    // reference itself stays stable at the explicit h_ref
    let out = run_cli(&[
        "run",
        "--problem",
        "lyapunov",
        "--n",
        "16",
        "--t-final",
        "120",
        "--h",
        "1.0",
        "--h-ref",
        "0.0009765625",
        "--r",
        "3",
        "--output",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3), "stderr: {}", stderr_of(&out));
    assert!(stderr_of(&out).contains("blow-up"), "{}", stderr_of(&out));
}

#[test]
fn convergence_empty_methods_exits_2() {
    let dir = workdir("conv-nomethods");
    let out = run_cli(&[
        "convergence",
        "--problem",
        "zero",
        "--n",
        "16",
        "--methods",
        "",
        "--output",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).to_lowercase().contains("method"), "{}", stderr_of(&out));
}

#[test]
fn convergence_defaults_fill_the_grid_and_write_all_artifacts() {
    let dir = workdir("conv-defaults");
    let out = run_cli(&[
        "convergence",
        "--problem",
        "zero",
        "--n",
        "16",
        "--output",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));

    let csv = fs::read_to_string(dir.join("convergence.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "problem,theta,n,method,tableau,h,r,error,runtime_s,max_trunc_residual,plateau"
    );
    // defaults: one method (rk-bug/rk2m), a 4-rung dyadic h ladder, r in {5, 10}
    assert_eq!(lines.len(), 1 + 4 * 2, "csv:\n{csv}");
    for line in &lines[1..] {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[0], "zero");
        assert_eq!(cols[3], "rk-bug");
        assert_eq!(cols[4], "rk2m");
        assert_eq!(cols[8], "0.0000000000000000e0", "runtime must be zeroed without --timing");
        assert!(cols[7].parse::<f64>().unwrap() < 1e-12, "zero problem has ~zero error");
    }

    assert!(dir.join("convergence.json").exists());
    assert!(dir.join("effective.toml").exists());
    let gp = fs::read_to_string(dir.join("convergence.gp")).unwrap();
    assert!(gp.contains("logscale"));
    assert!(gp.contains("multiplot"));
    assert!(gp.contains("convergence.csv"));
}

#[test]
fn convergence_config_roundtrip_is_idempotent() {
    let dir = workdir("conv-roundtrip");
    let out = run_cli(&[
        "convergence",
        "--problem",
        "lyapunov",
        "--n",
        "16",
        "--t-final",
        "1.0",
        "--methods",
        "rk-bug:rk2m,bug-euler",
        "--h",
        "0.03125,0.015625",
        "--r",
        "2,4",
        "--output",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));

    let effective = dir.join("effective.toml");
    let cfg_snapshot = fs::read(&effective).unwrap();
    let csv_snapshot = fs::read(dir.join("convergence.csv")).unwrap();

    // feeding the materialized config back reproduces it (and the records) exactly
    let saved = dir.join("saved.toml");
    fs::write(&saved, &cfg_snapshot).unwrap();
    let out2 = run_cli(&["convergence", "--config", saved.to_str().unwrap()]);
    assert_eq!(out2.status.code(), Some(0), "stderr: {}", stderr_of(&out2));
    assert_eq!(fs::read(&effective).unwrap(), cfg_snapshot, "effective config must be a fixed point");
    assert_eq!(fs::read(dir.join("convergence.csv")).unwrap(), csv_snapshot);
}

#[test]
fn convergence_accepts_custom_tableaux_from_config() {
    let dir = workdir("conv-custom");
    let cfg = dir.join("custom.toml");
    fs::write(
        &cfg,
        r#"
h_values = [0.03125, 0.015625]
r_values = [3]
output = "OUT"

[problem]
kind = "lyapunov"
n = 16
t_final = 1.0

[[methods]]
method = "rk-bug"
tableau = "mid2"

[[custom_tableaux]]
name = "mid2"
a = [[0.0, 0.0], [0.5, 0.0]]
b = [0.0, 1.0]
c = [0.0, 0.5]
order = 2
"#
        .replace("OUT", dir.join("out").to_str().unwrap()),
    )
    .unwrap();

    let out = run_cli(&["convergence", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    let csv = fs::read_to_string(dir.join("out/convergence.csv")).unwrap();
    assert!(csv.contains(",mid2,"), "custom tableau name missing:\n{csv}");
}

#[test]
fn diagnostics_pass_on_the_benchmark_problems() {
    let dir = workdir("diag");
    let out = run_cli(&[
        "diagnostics",
        "--problem",
        "lyapunov",
        "--theta",
        "1.0",
        "--output",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    let text = stdout_of(&out);
    assert!(text.contains("all diagnostics passed"), "{text}");
    assert!(text.contains("basis-capture sweep"));
    assert!(text.contains("residual ladder"));
}
