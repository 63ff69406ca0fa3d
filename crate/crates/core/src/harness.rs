//! Convergence studies over refinement levels.

use std::path::Path;

use rayon::prelude::*;

use crate::config::ConfigFile;
use crate::error::{Error, Result};
use crate::estimators::{RunSummary, Saturating};
use crate::output::{fmt_full, fmt_short, write_csv, CLAMPING_FLAG_FRACTION};
use crate::timestepper::{run, RunConfig, RunOutput};

/// `EOC(i) = log(a(i+1) / a(i)) / log(h(i+1) / h(i))`.
pub fn eoc(values: &[f64], h: &[f64]) -> Result<Vec<f64>> {
    if values.len() != h.len() {
        return Err(Error::Eoc(format!("{} values for {} mesh widths", values.len(), h.len())));
    }
    if let Some(v) = values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::Eoc(format!("values must be positive, got {v}")));
    }
    if h.iter().any(|v| !(*v > 0.0)) || h.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Eoc("mesh widths must be positive and strictly decreasing".into()));
    }
    Ok(values
        .windows(2)
        .zip(h.windows(2))
        .map(|(a, h)| (a[1] / a[0]).ln() / (h[1] / h[0]).ln())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    SupE0,
    L2E1,
    L2ERrho,
    L2E1Tilde,
    E0Initial,
    AbarInitial,
}

impl Quantity {
    pub const ALL: [Quantity; 6] = [
        Quantity::SupE0,
        Quantity::L2E1,
        Quantity::L2ERrho,
        Quantity::L2E1Tilde,
        Quantity::E0Initial,
        Quantity::AbarInitial,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Quantity::SupE0 => "E0_Linf",
            Quantity::L2E1 => "E1_L2",
            Quantity::L2ERrho => "ERrho_L2",
            Quantity::L2E1Tilde => "E1tilde_L2",
            Quantity::E0Initial => "E0_initial",
            Quantity::AbarInitial => "abar_initial",
        }
    }

    pub fn of(self, s: &RunSummary) -> f64 {
        match self {
            Quantity::SupE0 => s.sup_e0,
            Quantity::L2E1 => s.l2_e1,
            Quantity::L2ERrho => s.l2_errho,
            Quantity::L2E1Tilde => s.l2_e1_tilde,
            Quantity::E0Initial => s.e0_initial,
            Quantity::AbarInitial => s.abar_initial,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub degree: usize,
    pub i_min: u32,
    pub i_max: u32,
    /// Source of every other run parameter; its level and degree are replaced.
    pub base: ConfigFile,
    pub quantities: Vec<Quantity>,
}

impl StudyConfig {
    pub fn new(base: ConfigFile, degree: usize, i_min: u32, i_max: u32) -> StudyConfig {
        StudyConfig {
            degree,
            i_min,
            i_max,
            base,
            quantities: Quantity::ALL.to_vec(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.i_min < 1 || self.i_min >= self.i_max {
            return Err(Error::Config(format!(
                "level range must satisfy 1 <= i_min < i_max, got [{}, {}]",
                self.i_min, self.i_max
            )));
        }
        for i in self.i_min..=self.i_max {
            self.base.run_config_for(i, self.degree)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct LevelResult {
    pub level: u32,
    pub h: f64,
    pub summary: Option<RunSummary>,
    pub mass_drift: f64,
    pub clamped_fraction: f64,
    /// Smallest squared face jump of `c_h` over all samples.
    pub c_jump_sq_min: f64,
    /// Largest number of faces per sample whose squared `c_h` jump is at most
    /// machine epsilon.
    pub c_jump_sq_tiny: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EocRow {
    pub level: u32,
    pub h: f64,
    pub value: Option<f64>,
    pub eoc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EocTable {
    pub quantity: Quantity,
    pub rows: Vec<EocRow>,
}

impl EocTable {
    /// Finite EOC entries in level order.
    pub fn eocs(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.eoc).collect()
    }
}

#[derive(Debug, Clone)]
pub struct StudyResult {
    pub degree: usize,
    pub levels: Vec<LevelResult>,
    pub tables: Vec<EocTable>,
}

/// Largest cell diameter of the level-`i` mesh.
pub fn mesh_width(cfg: &RunConfig) -> f64 {
    let n = (1u64 << cfg.level) as f64;
    (cfg.rectangle.width() / n).hypot(cfg.rectangle.height() / n)
}

impl LevelResult {
    fn failed(level: u32, h: f64, e: Error) -> LevelResult {
        LevelResult {
            level,
            h,
            summary: None,
            mass_drift: f64::NAN,
            clamped_fraction: f64::NAN,
            c_jump_sq_min: f64::NAN,
            c_jump_sq_tiny: 0,
            error: Some(e.to_string()),
        }
    }

    pub fn from_output(cfg: &RunConfig, out: &RunOutput) -> LevelResult {
        let d = out.samples.iter().map(|s| &s.diagnostics);
        LevelResult {
            level: cfg.level,
            h: mesh_width(cfg),
            summary: Some(out.summary),
            mass_drift: out.mass_drift,
            clamped_fraction: out.max_clamped_fraction,
            c_jump_sq_min: d.clone().map(|d| d.c_jump_sq_min).fold(f64::INFINITY, f64::min),
            c_jump_sq_tiny: d.map(|d| d.c_jump_sq_tiny).max().unwrap_or(0),
            error: None,
        }
    }
}

fn run_level(base: &ConfigFile, level: u32, degree: usize) -> LevelResult {
    let cfg = match base.run_config_for(level, degree) {
        Ok(c) => c,
        Err(e) => return LevelResult::failed(level, f64::NAN, e),
    };
    match run(&cfg) {
        Ok(out) => LevelResult::from_output(&cfg, &out),
        Err(e) => LevelResult::failed(level, mesh_width(&cfg), e),
    }
}

/// EOC table of one quantity; EOC entries are left empty wherever either
/// neighbouring value is missing or not positive.
pub fn eoc_table(quantity: Quantity, levels: &[LevelResult]) -> EocTable {
    let values: Vec<Option<f64>> = levels
        .iter()
        .map(|l| l.summary.as_ref().map(|s| quantity.of(s)))
        .collect();
    let rows = levels
        .iter()
        .enumerate()
        .map(|(k, l)| {
            let eoc = match (values[k], values.get(k + 1).copied().flatten(), levels.get(k + 1)) {
                (Some(a), Some(b), Some(next)) => eoc(&[a, b], &[l.h, next.h]).ok().map(|v| v[0]),
                _ => None,
            };
            EocRow {
                level: l.level,
                h: l.h,
                value: values[k],
                eoc,
            }
        })
        .collect();
    EocTable { quantity, rows }
}

/// Runs every level (the two largest alone, the others in parallel), then
/// tabulates the quantities. Failed levels are annotated and skipped.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyResult> {
    cfg.validate()?;
    let all: Vec<u32> = (cfg.i_min..=cfg.i_max).collect();
    let split = all.len().saturating_sub(2);
    let mut levels: Vec<LevelResult> = all[..split]
        .par_iter()
        .map(|&i| run_level(&cfg.base, i, cfg.degree))
        .collect();
    for &i in &all[split..] {
        levels.push(run_level(&cfg.base, i, cfg.degree));
    }
    Ok(StudyResult::from_levels(cfg.degree, levels, &cfg.quantities))
}

fn opt_full(v: Option<f64>) -> String {
    v.map(fmt_full).unwrap_or_default()
}

fn saturating_log(v: &Saturating) -> f64 {
    v.ln()
}

pub const SUMMARY_CSV: &str = "study_summary.csv";

impl StudyResult {
    pub fn from_levels(degree: usize, levels: Vec<LevelResult>, quantities: &[Quantity]) -> StudyResult {
        let tables = quantities.iter().map(|&q| eoc_table(q, &levels)).collect();
        StudyResult { degree, levels, tables }
    }

    pub fn table(&self, quantity: Quantity) -> Option<&EocTable> {
        self.tables.iter().find(|t| t.quantity == quantity)
    }

    /// One `i,h,value,eoc` file per quantity plus the combined summary.
    pub fn write(&self, dir: &Path) -> Result<()> {
        for t in &self.tables {
            let rows = t.rows.iter().map(|r| {
                vec![
                    r.level.to_string(),
                    fmt_full(r.h),
                    opt_full(r.value),
                    opt_full(r.eoc),
                ]
            });
            write_csv(&dir.join(format!("{}.csv", t.quantity.name())), &["i", "h", "value", "eoc"], rows)?;
        }
        let mut header: Vec<String> = vec!["i".into(), "h".into()];
        for t in &self.tables {
            header.push(t.quantity.name().into());
            header.push(format!("{}_eoc", t.quantity.name()));
        }
        for extra in [
            "a_bar",
            "log_e_bar",
            "e_bar_saturated",
            "condition_holds",
            "log_margin",
            "full_estimator_log",
            "full_estimator_saturated",
            "certified",
            "mass_drift",
            "clamped_fraction",
            "clamping_flag",
            "c_jump_sq_min",
            "c_jump_sq_tiny",
            "error",
        ] {
            header.push(extra.into());
        }
        let rows = self.levels.iter().enumerate().map(|(k, l)| {
            let mut row = vec![l.level.to_string(), fmt_full(l.h)];
            for t in &self.tables {
                row.push(opt_full(t.rows[k].value));
                row.push(opt_full(t.rows[k].eoc));
            }
            match &l.summary {
                Some(s) => {
                    row.extend([
                        fmt_full(s.gronwall.a_bar),
                        fmt_full(s.gronwall.abar_integral),
                        s.gronwall.e_bar.is_saturated().to_string(),
                        s.condition.holds.to_string(),
                        fmt_full(s.condition.log_margin),
                        fmt_full(saturating_log(&s.full.value)),
                        s.full.value.is_saturated().to_string(),
                        s.full.certified.to_string(),
                        fmt_full(l.mass_drift),
                        fmt_full(l.clamped_fraction),
                        (l.clamped_fraction > CLAMPING_FLAG_FRACTION).to_string(),
                        fmt_full(l.c_jump_sq_min),
                        l.c_jump_sq_tiny.to_string(),
                    ]);
                }
                None => row.extend(std::iter::repeat(String::new()).take(13)),
            }
            row.push(l.error.clone().unwrap_or_default());
            row
        });
        let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
        write_csv(&dir.join(SUMMARY_CSV), &header_refs, rows)
    }

    /// Paper-style table with three significant digits.
    pub fn human_table(&self) -> String {
        let mut out = format!("k = {}\n{:>3}", self.degree, "i");
        for t in &self.tables {
            out.push_str(&format!(" {:>12} {:>6}", t.quantity.name(), "EOC"));
        }
        out.push_str("  condition  E_bar\n");
        for (k, l) in self.levels.iter().enumerate() {
            out.push_str(&format!("{:>3}", l.level));
            for t in &self.tables {
                let r = &t.rows[k];
                let v = r.value.map(fmt_short).unwrap_or_else(|| "-".into());
                let e = r.eoc.map(|e| format!("{e:.3}")).unwrap_or_else(|| "-".into());
                out.push_str(&format!(" {v:>12} {e:>6}"));
            }
            match (&l.summary, &l.error) {
                (Some(s), _) => out.push_str(&format!(
                    "  {:>9}  {}\n",
                    if s.condition.holds { "holds" } else { "fails" },
                    match s.gronwall.e_bar {
                        Saturating::Finite(v) => fmt_short(v),
                        Saturating::Saturated { log } => format!("exp({log:.3e}) saturated"),
                    }
                )),
                (None, Some(e)) => out.push_str(&format!("  failed: {e}\n")),
                (None, None) => out.push('\n'),
            }
        }
        out
    }
}
