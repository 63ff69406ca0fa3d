//! Command-line front end: `run`, `study`, `check-condition`, `snapshot`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::ConfigFile;
use crate::error::{Error, Result};
use crate::estimators::{summarize, Saturating};
use crate::harness::{run_study, StudyConfig};
use crate::output::{
    fmt_full, read_estimator_log, summary_line, write_atomic, write_estimator_log, write_snapshot, SummaryFile,
    EFFECTIVE_CONFIG_FILE, LOG_FILE, SUMMARY_FILE,
};
use crate::timestepper::{run, RunOutput};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "ksdg", version, about = "DG solver and a posteriori estimators for Keller-Segel")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one trajectory and write the estimator log, snapshots and summary.
    Run {
        config: PathBuf,
        /// Overrides `[output] directory`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Convergence study over levels `imin..=imax`.
    Study {
        config: PathBuf,
        #[arg(long, visible_alias = "kmin")]
        imin: u32,
        #[arg(long, visible_alias = "kmax")]
        imax: u32,
        /// Overrides `[space] degree`.
        #[arg(long)]
        degree: Option<usize>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Re-evaluate the existence condition from an estimator log.
    CheckCondition {
        log: PathBuf,
        config: PathBuf,
        /// `||rho_0 - rho_h(0)||`; read from the run summary next to the log when omitted.
        #[arg(long)]
        initial_error: Option<f64>,
    },
    /// Run a trajectory and write snapshots at the given times only.
    Snapshot {
        config: PathBuf,
        #[arg(long, num_args = 1.., required = true)]
        times: Vec<f64>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", single_line(&e.to_string()));
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_USAGE
    }
}

fn single_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Run { config, output } => cmd_run(&config, output.as_deref()).map(|_| EXIT_OK),
        Command::Study {
            config,
            imin,
            imax,
            degree,
            output,
        } => cmd_study(&config, imin, imax, degree, output.as_deref()),
        Command::CheckCondition {
            log,
            config,
            initial_error,
        } => cmd_check_condition(&log, &config, initial_error).map(|_| EXIT_OK),
        Command::Snapshot { config, times, output } => {
            cmd_snapshot(&config, &times, output.as_deref()).map(|_| EXIT_OK)
        }
    }
}

fn summary_file(cfg: &ConfigFile, out: &RunOutput) -> SummaryFile {
    let s = &out.summary;
    SummaryFile {
        level: cfg.mesh.level,
        degree: cfg.space.degree,
        t_final: s.t_final,
        steps: out.samples.len() - 1,
        initial_error: s.initial_error,
        e0_initial: s.e0_initial,
        sup_e0: s.sup_e0,
        l2_e1: s.l2_e1,
        l2_errho: s.l2_errho,
        l2_e1_tilde: s.l2_e1_tilde,
        a_bar: s.gronwall.a_bar,
        log_e_bar: s.gronwall.abar_integral,
        e_bar_saturated: s.gronwall.e_bar.is_saturated(),
        condition_holds: s.condition.holds,
        log_margin: s.condition.log_margin,
        full_estimator_log: s.full.value.ln(),
        full_estimator_saturated: s.full.value.is_saturated(),
        certified: s.full.certified,
        mass_drift: out.mass_drift,
        max_clamped_fraction: out.max_clamped_fraction,
    }
}

/// Runs the configured trajectory and writes every output file into the
/// output directory.
pub fn cmd_run(config: &Path, output: Option<&Path>) -> Result<RunOutput> {
    let cfg = ConfigFile::load(config)?;
    let dir = output.map(Path::to_path_buf).unwrap_or_else(|| cfg.output.directory.clone());
    let effective = cfg.effective()?;
    let out = run(&effective.run_config()?)?;
    write_atomic(&dir.join(EFFECTIVE_CONFIG_FILE), effective.to_toml().as_bytes())?;
    write_estimator_log(&dir.join(LOG_FILE), &out.samples)?;
    for s in &out.snapshots {
        write_snapshot(&dir, s, cfg.output.grid_samples)?;
    }
    summary_file(&cfg, &out).write(&dir.join(SUMMARY_FILE))?;
    println!("{}", summary_line(&out.summary, out.mass_drift, out.max_clamped_fraction));
    Ok(out)
}

pub fn cmd_study(config: &Path, i_min: u32, i_max: u32, degree: Option<usize>, output: Option<&Path>) -> Result<i32> {
    let cfg = ConfigFile::load(config)?;
    let dir = output.map(Path::to_path_buf).unwrap_or_else(|| cfg.output.directory.clone());
    let degree = degree.unwrap_or(cfg.space.degree);
    let study = StudyConfig::new(cfg, degree, i_min, i_max);
    let result = run_study(&study)?;
    result.write(&dir)?;
    print!("{}", result.human_table());
    Ok(if result.levels.iter().any(|l| l.error.is_some()) {
        EXIT_NUMERICAL
    } else {
        EXIT_OK
    })
}

/// Outcome printed by `check-condition`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionOutcome {
    pub t_final: f64,
    pub holds: bool,
    pub log_margin: f64,
    pub margin: Saturating,
}

/// The final time is the last time in the log.
pub fn cmd_check_condition(log: &Path, config: &Path, initial_error: Option<f64>) -> Result<ConditionOutcome> {
    let cfg = ConfigFile::load(config)?;
    cfg.constants.validate()?;
    let samples = read_estimator_log(log)?;
    let initial_error = match initial_error {
        Some(e) => e,
        None => {
            let sidecar = log.with_file_name(SUMMARY_FILE);
            if !sidecar.exists() {
                return Err(Error::Config(format!(
                    "no --initial-error given and no {} next to the log",
                    SUMMARY_FILE
                )));
            }
            SummaryFile::load(&sidecar)?.initial_error
        }
    };
    if !(initial_error >= 0.0 && initial_error.is_finite()) {
        return Err(Error::Config(format!("initial error must be finite and nonnegative, got {initial_error}")));
    }
    let t_final = samples.last().map_or(0.0, |s| s.t);
    let s = summarize(&samples, initial_error, t_final, &cfg.constants)?;
    let c = s.condition;
    let margin_text = match c.margin {
        Saturating::Finite(m) if m > 0.0 => fmt_full(m),
        Saturating::Finite(_) => "0 (log margin -inf, saturated)".to_string(),
        Saturating::Saturated { log } => format!("exp({}) (saturated)", fmt_full(log)),
    };
    println!(
        "condition {} T={} a_bar={} log_e_bar={} log_margin={} margin={}",
        if c.holds { "holds" } else { "fails" },
        fmt_full(t_final),
        fmt_full(s.gronwall.a_bar),
        fmt_full(s.gronwall.abar_integral),
        fmt_full(c.log_margin),
        margin_text,
    );
    if c.holds {
        println!(
            "certified: the weak solution exists at least until T={} and the full estimator {} bounds the error",
            fmt_full(t_final),
            fmt_full(s.full.value.value()),
        );
    }
    Ok(ConditionOutcome {
        t_final,
        holds: c.holds,
        log_margin: c.log_margin,
        margin: c.margin,
    })
}

/// Runs the configured trajectory with the snapshot times replaced.
pub fn cmd_snapshot(config: &Path, times: &[f64], output: Option<&Path>) -> Result<Vec<PathBuf>> {
    let mut cfg = ConfigFile::load(config)?;
    cfg.output.snapshot_times = times.to_vec();
    let dir = output.map(Path::to_path_buf).unwrap_or_else(|| cfg.output.directory.clone());
    let out = run(&cfg.run_config()?)?;
    let paths = out
        .snapshots
        .iter()
        .map(|s| write_snapshot(&dir, s, cfg.output.grid_samples))
        .collect::<Result<Vec<_>>>()?;
    for p in &paths {
        println!("{}", p.display());
    }
    Ok(paths)
}
