use std::path::Path;
use std::process::{Command, Output};

use gnnlab::formats::{self, Dataset};

const SMALL: &[&str] = &["--n", "60", "--xi-samples", "20"];

fn gnnlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gnnlab")).args(args).output().expect("binary runs")
}

fn out_flag(dir: &Path) -> [String; 2] {
    ["--out".into(), dir.display().to_string()]
}

fn run_small(dir: &Path, epochs: &str, extra: &[&str]) -> Output {
    let out = out_flag(dir);
    let mut args: Vec<&str> = vec![out[0].as_str(), out[1].as_str(), "run", "--preset", "ngnn-relu", "--epochs", epochs];
    args.extend_from_slice(SMALL);
    args.extend_from_slice(extra);
    gnnlab(&args)
}

#[test]
fn zero_epochs_writes_only_the_initial_row() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_small(dir.path(), "0", &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], formats::TRAJECTORY_HEADER);
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("0,"));
    assert!(dir.path().join("summary.txt").exists());
    assert!(dir.path().join("plot.svg").exists());
}

#[test]
fn same_seed_same_bytes_across_thread_counts() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert!(run_small(a.path(), "5", &["--seed", "7", "--threads", "1"]).status.success());
    assert!(run_small(b.path(), "5", &["--seed", "7", "--threads", "3"]).status.success());
    let read = |d: &Path| std::fs::read(d.join("trajectory.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
    let c = tempfile::tempdir().unwrap();
    assert!(run_small(c.path(), "5", &["--seed", "8"]).status.success());
    assert_ne!(read(a.path()), read(c.path()));
}

#[test]
fn config_errors_exit_2_and_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.cfg");
    std::fs::write(&cfg, "# comment\nalpha = 0.05\nwidth = 3\n").unwrap();
    let o = gnnlab(&["--config", cfg.to_str().unwrap(), "run", "--preset", "ngnn-relu"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("exp.cfg:3"), "{err}");

    std::fs::write(&cfg, "alpha = -1\n").unwrap();
    let o = gnnlab(&["--config", cfg.to_str().unwrap(), "run", "--preset", "ngnn-relu"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.cfg");
    std::fs::write(&cfg, "epochs = 9\nn = 60\nxi_samples = 20\n").unwrap();
    let out = out_flag(dir.path());
    let o = gnnlab(&[&out[0], &out[1], "--config", cfg.to_str().unwrap(), "run", "--preset", "ngnn-relu", "--epochs", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn saved_dataset_reads_back() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_small(dir.path(), "1", &["--save-dataset"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    match formats::read_dataset(&dir.path().join("dataset")).unwrap() {
        Dataset::Ngnn(ds) => {
            assert_eq!(ds.graph.n(), 60);
            assert_eq!(ds.labels.len(), 60);
        }
        Dataset::Ggnn(_) => panic!("expected a node-level dataset"),
    }
}

#[test]
fn xi_estimate_and_theory_report_write_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_flag(dir.path());
    let mut args: Vec<&str> = vec![&out[0], &out[1], "xi-estimate", "--preset", "ngnn-relu"];
    args.extend_from_slice(SMALL);
    assert!(gnnlab(&args).status.success());
    let xi = std::fs::read_to_string(dir.path().join("xi.csv")).unwrap();
    assert!(xi.starts_with("# source=monte_carlo"));
    assert_eq!(formats::parse_matrix_csv(&xi, "xi.csv").unwrap().rows(), 2);

    args[2] = "theory-report";
    let o = gnnlab(&args);
    assert!(o.status.success());
    let report = std::fs::read_to_string(dir.path().join("theory.txt")).unwrap();
    assert!(report.contains("gamma1_valid           false"), "{report}");
}

#[test]
fn sweep_writes_one_row_per_pair() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_flag(dir.path());
    let o = gnnlab(&[&out[0], &out[1], "sweep", "--preset", "ngnn-relu", "--epochs", "2", "--xi-samples", "10", "--ns", "30,60", "--seeds", "0..2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(dir.path().join("runs/n60_seed1.csv").exists());
}

#[test]
fn verify_runs_a_suite_and_unknown_suites_are_rejected() {
    let o = gnnlab(&["verify", "gradients"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8_lossy(&o.stdout).contains("PASS"));
    assert_eq!(gnnlab(&["verify", "speed"]).status.code(), Some(2));
}
