use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sbm_mpc::eval::{read_report_csv, CSV_COLUMNS, PLOT_FILES};
use sbm_mpc::sbm::{read_edge_list, read_truth};

fn sbm_mpc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sbm-mpc")).args(args).output().unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.toml");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const ONE_CELL: &str = r#"
algorithm = "power"
seeds = [4]
[grid]
n = [20]
k = [2]
p = [0.7]
q = [0.05]
"#;

#[test]
fn one_cell_grid_gives_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), ONE_CELL);
    let out = dir.path().join("out");
    let result = sbm_mpc(&["run", "--config", &config, "--out", out.to_str().unwrap()]);
    assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stderr));
    let text = fs::read_to_string(out.join("report.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_COLUMNS.join(","));
    let rows = read_report_csv(text.as_bytes()).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!((rows[0].algorithm.as_str(), rows[0].seed), ("power", 4));
    for name in PLOT_FILES {
        assert!(out.join("plots").join(name).exists(), "{name}");
    }
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"
algorithm = "mpc-commnbr"
seeds = [0, 1]
s = ["log", 64]
delta_rule = { rule = "gap" }
[grid]
n = [40]
k = [2]
p = [0.7]
q = [0.05]
"#,
    );
    let mut reports = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let result = sbm_mpc(&["run", "--config", &config, "--out", out.to_str().unwrap(), "--ledgers"]);
        assert!(result.status.success());
        let ledgers: Vec<Vec<u8>> = {
            let mut names: Vec<_> = fs::read_dir(out.join("ledgers")).unwrap().map(|e| e.unwrap().path()).collect();
            names.sort();
            names.iter().map(|p| fs::read(p).unwrap()).collect()
        };
        assert_eq!(ledgers.len(), 4);
        reports.push((fs::read(out.join("report.csv")).unwrap(), ledgers));
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn seed_offset_and_algo_override() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), ONE_CELL);
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    let result = sbm_mpc(&["run", "--config", &config, "--out", out, "--seed-offset", "10", "--algo", "commnbr"]);
    assert!(result.status.success());
    let rows = read_report_csv(fs::File::open(Path::new(out).join("report.csv")).unwrap()).unwrap();
    assert_eq!((rows[0].algorithm.as_str(), rows[0].seed), ("commnbr", 14));
}

#[test]
fn failed_cells_still_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    // p barely above q: nothing to recover.
    let config = write_config(
        dir.path(),
        r#"
algorithm = "commnbr"
seeds = [0, 1, 2]
[grid]
n = [30]
k = [3]
p = [0.2]
q = [0.19]
"#,
    );
    let out = dir.path().join("out");
    let result = sbm_mpc(&["run", "--config", &config, "--out", out.to_str().unwrap()]);
    assert!(result.status.success());
    let rows = read_report_csv(fs::File::open(out.join("report.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| !r.recovered));
    assert!(rows.iter().all(|r| r.recovered || r.misclassified.is_some() || r.fail_stage.is_some()));
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    for body in [
        "algorithm = \"spectral\"\nseeds = [1]\n[grid]\nn = [10]\nk = [2]\np = [0.5]\nq = [0.1]\n",
        "algorithm = \"power\"\nseeds = []\n[grid]\nn = [10]\nk = [2]\np = [0.5]\nq = [0.1]\n",
        "algorithm = \"power\"\nseeds = [1]\n[grid]\nn = [10]\nk = [2]\np = [0.1]\nq = [0.5]\n",
        "not toml at all [",
    ] {
        let config = write_config(dir.path(), body);
        let result = sbm_mpc(&["run", "--config", &config, "--out", dir.path().to_str().unwrap()]);
        assert_eq!(result.status.code(), Some(2), "{body}");
    }
    let missing = sbm_mpc(&["run", "--config", "/nonexistent.toml"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn generate_writes_readable_instances() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), ONE_CELL);
    let out = dir.path().join("out");
    let result = sbm_mpc(&["generate", "--config", &config, "--out", out.to_str().unwrap()]);
    assert!(result.status.success());
    let stdout = String::from_utf8(result.stdout).unwrap();
    assert!(stdout.contains("commnbr="), "regime flags are printed: {stdout}");
    let dir = out.join("instances");
    let stem = "sbm_n20_k2_p0.7_q0.05_seed4";
    let edges = read_edge_list(fs::read(dir.join(format!("{stem}.edges"))).unwrap().as_slice()).unwrap();
    assert_eq!((edges.vertex_count, edges.k, edges.seed), (40, 2, 4));
    let truth = read_truth(fs::read(dir.join(format!("{stem}.truth"))).unwrap().as_slice()).unwrap();
    assert_eq!(truth.len(), 40);
}

#[test]
fn report_summarizes_and_rewrites_plots() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), ONE_CELL);
    let out = dir.path().join("out");
    let out_s = out.to_str().unwrap();
    assert!(sbm_mpc(&["run", "--config", &config, "--out", out_s]).status.success());
    fs::remove_dir_all(out.join("plots")).unwrap();
    let result = sbm_mpc(&["report", "--out", out_s]);
    assert!(result.status.success());
    let stdout = String::from_utf8(result.stdout).unwrap();
    assert!(stdout.contains("power"));
    let recovery = fs::read_to_string(out.join("plots").join(PLOT_FILES[0])).unwrap();
    assert_eq!(recovery.lines().count(), 2, "header plus one point");
}
