use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ksdg::estimators::LOG_HEADER;

fn ksdg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ksdg")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const CONSTANT: &str = "[mesh]\nlevel = 2\n[time]\nT = 1e-3\ntau = 2.5e-4\n[initial]\nkind = \"constant\"\nvalue = 0.5\n";
const GAUSSIAN: &str = "[mesh]\nlevel = 4\n[space]\ndegree = 1\n[time]\nT = 1e-4\n\
    [initial]\nkind = \"gaussian\"\namplitude = 1000.0\ncenter = [0.5, 0.5]\nwidth = 1e-2\n";

fn log_text(rows: &[[f64; 14]]) -> String {
    let mut s = LOG_HEADER.join(",");
    for r in rows {
        s.push('\n');
        s.push_str(&r.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","));
    }
    s.push('\n');
    s
}

#[test]
fn constant_run_has_vanishing_estimator() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", CONSTANT);
    let out_dir = dir.path().join("out");
    let o = ksdg(&["run", &cfg, "--output", out_dir.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = stdout(&o);
    assert!(s.contains("condition_holds=true"), "{s}");
    // Vanishes up to the rounding of the projected initial data.
    let full: f64 = s
        .split_whitespace()
        .find_map(|kv| kv.strip_prefix("full_estimator="))
        .expect("full_estimator field")
        .parse()
        .unwrap();
    assert!(full <= 1e-20, "{s}");
    for f in ["estimators.csv", "run_summary.toml", "effective_config.toml"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
}

#[test]
fn run_log_has_one_row_per_step() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "g.toml", GAUSSIAN);
    let out_dir = dir.path().join("out");
    let o = ksdg(&["run", &cfg, "--output", out_dir.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));

    let effective = fs::read_to_string(out_dir.join("effective_config.toml")).unwrap();
    let parsed = ksdg::config::ConfigFile::parse(&effective).unwrap();
    let run_cfg = parsed.run_config().unwrap();
    let steps = ((run_cfg.t_final / run_cfg.tau).ceil() as usize).max(1);

    let log = fs::read_to_string(out_dir.join("estimators.csv")).unwrap();
    let lines: Vec<&str> = log.lines().collect();
    assert_eq!(lines[0].split(',').count(), 14);
    assert_eq!(lines.len() - 1, steps + 1);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 14));

    // The effective configuration reproduces itself.
    let again = parsed.effective().unwrap().to_toml();
    assert_eq!(ksdg::config::ConfigFile::parse(&again).unwrap().run_config().unwrap(), run_cfg);
}

#[test]
fn missing_mesh_section_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "[space]\ndegree = 1\n");
    let o = ksdg(&["run", &cfg, "--output", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("mesh"), "{}", stderr(&o));
}

#[test]
fn study_rejects_empty_level_range() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "g.toml", GAUSSIAN);
    let o = ksdg(&["study", &cfg, "--imin", "3", "--imax", "3", "--output", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error:"));
}

#[test]
fn study_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "g.toml", GAUSSIAN);
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out_dir = dir.path().join(run);
        let o = ksdg(&["study", &cfg, "--imin", "1", "--imax", "3", "--output", out_dir.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        let mut names: Vec<_> = fs::read_dir(&out_dir).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        let files: Vec<_> = names.iter().map(|n| (n.clone(), fs::read(out_dir.join(n)).unwrap())).collect();
        outputs.push((files, stdout(&o)));
    }
    assert!(!outputs[0].0.is_empty());
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn check_condition_on_synthetic_logs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "g.toml", GAUSSIAN);

    let zero = write(dir.path(), "zero.csv", &log_text(&[[0.0; 14], {
        let mut r = [0.0; 14];
        r[0] = 1e-4;
        r
    }]));
    let o = ksdg(&["check-condition", &zero, &cfg, "--initial-error", "0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("condition holds"), "{}", stdout(&o));
    assert!(stdout(&o).contains("certified"));

    // A_bar = 2 (1/2)^2 + 2 (1/2)^2 = 1 and T = 0: the margin is
    // 512 * (2 * 1)^2 = 2048 > 1.
    let mut row = [0.0; 14];
    row[1] = 0.5;
    let one = write(dir.path(), "one.csv", &log_text(&[row]));
    let o = ksdg(&["check-condition", &one, &cfg, "--initial-error", "0.5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = stdout(&o);
    assert!(s.starts_with("condition fails"), "{s}");
    assert!(s.contains(" margin=2.0480000000000000e3"), "{s}");

    // Without --initial-error and without a run summary next to the log.
    let o = ksdg(&["check-condition", &one, &cfg]);
    assert_eq!(o.status.code(), Some(1));

    let mut text = log_text(&[row, row]);
    text.truncate(text.len() - 10);
    let truncated = write(dir.path(), "truncated.csv", &text);
    let o = ksdg(&["check-condition", &truncated, &cfg, "--initial-error", "0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("truncated.csv:3:"), "{}", stderr(&o));
}

#[test]
fn check_condition_reads_run_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "g.toml", GAUSSIAN);
    let out_dir = dir.path().join("out");
    let o = ksdg(&["run", &cfg, "--output", out_dir.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let log = out_dir.join("estimators.csv");
    let o = ksdg(&["check-condition", log.to_str().unwrap(), &cfg]);
    assert!(o.status.success(), "{}", stderr(&o));
    // The blow-up data saturate the Gronwall factor.
    assert!(stdout(&o).starts_with("condition fails"), "{}", stdout(&o));
}

#[test]
fn snapshot_writes_requested_times() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", CONSTANT);
    let o = ksdg(&["snapshot", &cfg, "--times", "0", "5e-4", "--output", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let paths: Vec<&str> = text.lines().map(str::trim).collect();
    assert!(paths.len() >= 2, "{paths:?}");
    for p in paths {
        assert!(Path::new(p).exists(), "{p}");
    }
}
