//! CSV and summary files. Every file is written to a temporary sibling and
//! renamed into place.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{EstimatorSample, RunSummary, Saturating, LOG_HEADER};
use crate::norms::grid_points;
use crate::timestepper::State;

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_error(dir))?;
    }
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    let mut file = std::fs::File::create(&tmp).map_err(io_error(&tmp))?;
    file.write_all(bytes).map_err(io_error(&tmp))?;
    file.sync_all().map_err(io_error(&tmp))?;
    std::fs::rename(&tmp, path).map_err(io_error(path))
}

/// 17 significant digits.
pub fn fmt_full(v: f64) -> String {
    format!("{v:.16e}")
}

/// Three significant digits in the tables' `4.30E+02` style.
pub fn fmt_short(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    let s = format!("{v:.2E}");
    let (mantissa, exp) = s.split_once('E').expect("exponent present");
    let e: i32 = exp.parse().expect("integer exponent");
    format!("{mantissa}E{}{:02}", if e < 0 { '-' } else { '+' }, e.abs())
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("writing to memory");
    for row in rows {
        w.write_record(&row).expect("writing to memory");
    }
    w.into_inner().expect("flushing to memory")
}

pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    write_atomic(path, &csv_bytes(header, rows))
}

pub fn write_estimator_log(path: &Path, samples: &[EstimatorSample]) -> Result<()> {
    write_csv(
        path,
        &LOG_HEADER,
        samples.iter().map(|s| s.log_row().iter().map(|v| fmt_full(*v)).collect()),
    )
}

pub fn read_estimator_log(path: &Path) -> Result<Vec<EstimatorSample>> {
    let text = std::fs::read_to_string(path).map_err(io_error(path))?;
    parse_estimator_log(&text, path)
}

pub fn parse_estimator_log(text: &str, path: &Path) -> Result<Vec<EstimatorSample>> {
    let parse_error = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| parse_error(1, e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>() != LOG_HEADER {
        return Err(parse_error(1, format!("expected header {}", LOG_HEADER.join(","))));
    }
    let mut samples = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| parse_error(e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != LOG_HEADER.len() {
            return Err(parse_error(line, format!("expected {} fields, found {}", LOG_HEADER.len(), record.len())));
        }
        let mut row = [0.0; 14];
        for (slot, field) in row.iter_mut().zip(record.iter()) {
            *slot = field
                .trim()
                .parse()
                .map_err(|_| parse_error(line, format!("invalid number {field:?}")))?;
        }
        let sample = EstimatorSample::from_log_row(row);
        if !sample.is_valid() {
            return Err(parse_error(line, "values must be finite and nonnegative".into()));
        }
        if samples.last().is_some_and(|p: &EstimatorSample| p.t > sample.t) {
            return Err(parse_error(line, "times must be nondecreasing".into()));
        }
        samples.push(sample);
    }
    if samples.is_empty() {
        return Err(parse_error(1, "log has no rows".into()));
    }
    Ok(samples)
}

pub fn snapshot_file_name(t: f64) -> String {
    format!("snapshot_t{t}.csv")
}

/// `x,y,rho,c` on an `m x m` grid.
pub fn write_snapshot(dir: &Path, state: &State, m: usize) -> Result<PathBuf> {
    let path = dir.join(snapshot_file_name(state.t));
    let rect = state.rho.space().mesh().rectangle();
    let rows = grid_points(rect, m).map(|p| {
        vec![
            fmt_full(p[0]),
            fmt_full(p[1]),
            fmt_full(state.rho.evaluate_at(p)),
            fmt_full(state.c.evaluate_at(p)),
        ]
    });
    write_csv(&path, &["x", "y", "rho", "c"], rows)?;
    Ok(path)
}

/// Sidecar written next to the estimator log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummaryFile {
    pub level: u32,
    pub degree: usize,
    pub t_final: f64,
    pub steps: usize,
    pub initial_error: f64,
    pub e0_initial: f64,
    pub sup_e0: f64,
    pub l2_e1: f64,
    pub l2_errho: f64,
    pub l2_e1_tilde: f64,
    pub a_bar: f64,
    pub log_e_bar: f64,
    pub e_bar_saturated: bool,
    pub condition_holds: bool,
    pub log_margin: f64,
    pub full_estimator_log: f64,
    pub full_estimator_saturated: bool,
    pub certified: bool,
    pub mass_drift: f64,
    pub max_clamped_fraction: f64,
}

pub const SUMMARY_FILE: &str = "run_summary.toml";
pub const LOG_FILE: &str = "estimators.csv";
pub const EFFECTIVE_CONFIG_FILE: &str = "effective_config.toml";

impl SummaryFile {
    pub fn load(path: &Path) -> Result<SummaryFile> {
        let text = std::fs::read_to_string(path).map_err(io_error(path))?;
        toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.span().map_or(0, |s| text[..s.start].lines().count().max(1)),
            message: e.message().to_string(),
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, toml::to_string(self).expect("summary is representable").as_bytes())
    }
}

/// `key=value` pairs describing a run summary on one line.
pub fn summary_line(s: &RunSummary, mass_drift: f64, clamped: f64) -> String {
    let sat = |v: &Saturating| match v {
        Saturating::Finite(x) => fmt_full(*x),
        Saturating::Saturated { log } => format!("exp({})", fmt_full(*log)),
    };
    format!(
        "summary a_bar={} log_e_bar={} e_bar={} e_bar_saturated={} condition_holds={} log_margin={} margin={} full_estimator={} certified={} sup_e0={} l2_e1={} l2_errho={} initial_error={} mass_drift={} clamped_fraction={} clamping_flag={}",
        fmt_full(s.gronwall.a_bar),
        fmt_full(s.gronwall.abar_integral),
        sat(&s.gronwall.e_bar),
        s.gronwall.e_bar.is_saturated(),
        s.condition.holds,
        fmt_full(s.condition.log_margin),
        sat(&s.condition.margin),
        sat(&s.full.value),
        s.full.certified,
        fmt_full(s.sup_e0),
        fmt_full(s.l2_e1),
        fmt_full(s.l2_errho),
        fmt_full(s.initial_error),
        fmt_full(mass_drift),
        fmt_full(clamped),
        clamped > CLAMPING_FLAG_FRACTION,
    )
}

/// Clamping of the wSIP weights is reported above this fraction of points.
pub const CLAMPING_FLAG_FRACTION: f64 = 0.01;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn short_format_matches_tables() {
        assert_eq!(fmt_short(430.0), "4.30E+02");
        assert_eq!(fmt_short(3.78e-1), "3.78E-01");
        assert_eq!(fmt_short(0.0), "0.00E+00");
    }

    #[test]
    fn log_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.csv");
        let s = EstimatorSample {
            t: 1e-4,
            e0: 1.0 / 3.0,
            abar: 2.5,
            errho_terms: [0.1, 0.2, 0.0, 0.3, 0.4],
            errho: 1.0,
            ..Default::default()
        };
        write_estimator_log(&path, &[EstimatorSample::default(), s]).unwrap();
        let back = read_estimator_log(&path).unwrap();
        assert_eq!(back[1].log_row(), s.log_row());
        let text = std::fs::read_to_string(&path).unwrap();
        let truncated = &text[..text.len() - 60];
        match parse_estimator_log(truncated, &path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
