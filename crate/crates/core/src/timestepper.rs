//! Implicit Euler time stepping with lagged wSIP weights.
//!
//! Each step solves the coupled linear system
//! `[[M/tau + S, -W(rho^n)], [-M, S + M]] (rho, c) = (M rho^n / tau, 0)`
//! by GMRES, right-preconditioned with the block lower-triangular part whose
//! diagonal blocks are approximated by multigrid V-cycles.

use std::sync::Arc;

use crate::discretization::Discretization;
use crate::error::{Error, Result};
use crate::estimators::{compute_sample, summarize, ConstantsSet, EstimatorOptions, EstimatorSample, RunSummary};
use crate::forms::{assemble_wsip, PenaltyConfig};
use crate::mesh::{Mesh, Point, Rectangle};
use crate::projection::elliptic_project_with;
use crate::quadrature::TriangleRule;
use crate::solver::{gmres_with_floor, KrylovSettings, SolveInfo};
use crate::space::{DgField, DgSpace};
use crate::sparse::norm;

/// Relative residual a step must reach to be accepted.
pub const STEP_RESIDUAL_LIMIT: f64 = 1e-9;
const ROUNDOFF_FACTOR: f64 = 64.0;

/// Quadrature degree of the initial-error integral.
const INITIAL_ERROR_DEGREE: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialData {
    /// `amplitude * exp(-|x - center|^2 / width)`.
    Gaussian { amplitude: f64, center: Point, width: f64 },
    Constant { value: f64 },
}

impl InitialData {
    pub fn evaluate(&self, p: Point) -> f64 {
        match *self {
            InitialData::Gaussian {
                amplitude,
                center,
                width,
            } => {
                let r2 = (p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2);
                amplitude * (-r2 / width).exp()
            }
            InitialData::Constant { value } => value,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub level: u32,
    pub degree: usize,
    pub rectangle: Rectangle,
    pub t_final: f64,
    pub tau: f64,
    pub penalty: PenaltyConfig,
    pub constants: ConstantsSet,
    pub initial: InitialData,
    pub snapshot_times: Vec<f64>,
    pub estimators: EstimatorOptions,
    pub krylov: KrylovSettings,
}

/// `tau = 2^{2 - i}`.
pub fn default_tau(level: u32) -> f64 {
    2f64.powi(2 - level as i32)
}

impl RunConfig {
    /// The Gaussian experiment on the unit square with default parameters.
    pub fn gaussian(level: u32, degree: usize, amplitude: f64) -> RunConfig {
        RunConfig {
            level,
            degree,
            rectangle: Rectangle::UNIT,
            t_final: 1e-4,
            tau: default_tau(level),
            penalty: PenaltyConfig::for_degree(degree),
            constants: ConstantsSet::default(),
            initial: InitialData::Gaussian {
                amplitude,
                center: [0.5, 0.5],
                width: 1e-2,
            },
            snapshot_times: Vec::new(),
            estimators: EstimatorOptions::default(),
            krylov: KrylovSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.level < 1 {
            return Err(Error::Config("mesh level must be at least 1".into()));
        }
        if !(1..=2).contains(&self.degree) {
            return Err(Error::Config(format!("degree must be 1 or 2, got {}", self.degree)));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::Config(format!("T must be positive, got {}", self.t_final)));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::Config(format!("tau must be positive, got {}", self.tau)));
        }
        self.penalty.validate()?;
        self.constants.validate()?;
        if let InitialData::Gaussian { width, .. } = self.initial {
            if !(width > 0.0) {
                return Err(Error::Config(format!("initial width must be positive, got {width}")));
            }
        }
        for &t in &self.snapshot_times {
            if !(0.0..=self.t_final).contains(&t) {
                return Err(Error::Config(format!("snapshot time {t} outside [0, {}]", self.t_final)));
            }
        }
        Ok(())
    }
}

/// Step end points `0 = t_0 < ... < t_N = T`. The interval is split at the
/// snapshot times and every piece of length `L` gets `max(1, ceil(L / tau))`
/// uniform steps, so that snapshots fall on step boundaries.
pub fn time_partition(t_final: f64, tau: f64, snapshot_times: &[f64]) -> Vec<f64> {
    let mut breaks: Vec<f64> = snapshot_times.iter().copied().filter(|&t| t > 0.0 && t < t_final).collect();
    breaks.push(t_final);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let mut times = vec![0.0];
    let mut start = 0.0;
    for end in breaks {
        let len = end - start;
        let steps = ((len / tau) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        for s in 1..steps {
            times.push(start + len * s as f64 / steps as f64);
        }
        times.push(end);
        start = end;
    }
    times
}

#[derive(Debug, Clone)]
pub struct State {
    pub t: f64,
    pub rho: DgField,
    pub c: DgField,
    pub step: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub solve: SolveInfo,
    /// `||b - A x|| / ||b||` recomputed after the solve.
    pub residual: f64,
    /// Fraction of face quadrature points where the wSIP weights were clamped.
    pub clamped_fraction: f64,
}

pub struct Simulation {
    config: RunConfig,
    disc: Arc<Discretization>,
}

impl Simulation {
    pub fn new(config: RunConfig) -> Result<Simulation> {
        config.validate()?;
        let mesh = Arc::new(Mesh::uniform(config.level, config.rectangle)?);
        let space = DgSpace::new(mesh, config.degree);
        let mut disc = Discretization::new(space, config.penalty)?;
        disc.krylov = config.krylov;
        Ok(Simulation {
            config,
            disc: Arc::new(disc),
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn discretization(&self) -> &Arc<Discretization> {
        &self.disc
    }

    pub fn space(&self) -> &Arc<DgSpace> {
        self.disc.space()
    }

    /// Chemical concentration of a given density: `(S + M) c = M rho`.
    pub fn solve_chemical(&self, rho: &DgField) -> Result<DgField> {
        let b = self.disc.mass().apply(rho.coeffs());
        let mut x = rho.coeffs().to_vec();
        self.disc.solve_elliptic(&b, &mut x)?;
        self.space().field(x)
    }

    pub fn init_state(&self) -> Result<State> {
        let initial = self.config.initial;
        let rho = elliptic_project_with(|p| initial.evaluate(p), &self.disc)?;
        let c = self.solve_chemical(&rho)?;
        Ok(State { t: 0.0, rho, c, step: 0 })
    }

    /// `||rho_0 - rho_h||_{L2}` by over-integration.
    pub fn initial_error(&self, rho: &DgField) -> f64 {
        let space = self.space();
        let rule = TriangleRule::new(INITIAL_ERROR_DEGREE);
        let mut total = 0.0;
        for cell in 0..space.num_cells() {
            let g = space.geometry(cell);
            let mut s = 0.0;
            for (xi, w) in rule.points.iter().zip(&rule.weights) {
                let d = self.config.initial.evaluate(g.to_physical(*xi)) - rho.value_ref(cell, *xi);
                s += w * d * d;
            }
            total += s * g.det.abs();
        }
        total.sqrt()
    }

    pub fn step(&self, state: &State, tau: f64) -> Result<(State, StepReport)> {
        let n = self.space().num_dofs();
        let mass = self.disc.mass().clone();
        let wsip = assemble_wsip(&state.rho, self.config.penalty.sigma, self.config.penalty.eps_w);
        let w = &wsip.operator;
        let mg11 = self.disc.parabolic_multigrid(tau)?;
        let a11 = mg11.operator().clone();
        let mg22 = self.disc.elliptic_multigrid();
        let a22 = mg22.operator().clone();

        let apply = |x: &[f64], y: &mut [f64]| {
            let (xr, xc) = x.split_at(n);
            let (yr, yc) = y.split_at_mut(n);
            a11.apply_into(xr, yr);
            let mut t = vec![0.0; n];
            w.apply_into(xc, &mut t);
            yr.iter_mut().zip(&t).for_each(|(a, b)| *a -= b);
            a22.apply_into(xc, yc);
            mass.apply_into(xr, &mut t);
            yc.iter_mut().zip(&t).for_each(|(a, b)| *a -= b);
        };
        let precondition = |r: &[f64], z: &mut [f64]| {
            let (rr, rc) = r.split_at(n);
            let (zr, zc) = z.split_at_mut(n);
            mg11.apply(rr, zr);
            let mut t = mass.apply(zr);
            t.iter_mut().zip(rc).for_each(|(a, b)| *a += b);
            mg22.apply(&t, zc);
        };

        let mut b = mass.apply(state.rho.coeffs());
        b.iter_mut().for_each(|v| *v /= tau);
        b.resize(2 * n, 0.0);
        let mut x = Vec::with_capacity(2 * n);
        x.extend_from_slice(state.rho.coeffs());
        x.extend_from_slice(state.c.coeffs());
        // Rounding level of `b - A x0`: residuals below it carry no information,
        // so an initial guess that already solves the system is kept as is.
        let floor = {
            let (xr, xc) = x.split_at(n);
            let mut s = vec![0.0; 2 * n];
            let mut t = vec![0.0; n];
            let (sr, sc) = s.split_at_mut(n);
            a11.apply_abs_into(xr, sr);
            w.apply_abs_into(xc, &mut t);
            sr.iter_mut().zip(&t).for_each(|(a, b)| *a += b);
            a22.apply_abs_into(xc, sc);
            mass.apply_abs_into(xr, &mut t);
            sc.iter_mut().zip(&t).for_each(|(a, b)| *a += b);
            s.iter_mut().zip(&b).for_each(|(a, b)| *a += b.abs());
            ROUNDOFF_FACTOR * f64::EPSILON * norm(&s)
        };
        // A stalled solve is still accepted if its true residual meets the limit.
        let solve = match gmres_with_floor(&apply, &precondition, &b, &mut x, self.config.krylov, floor) {
            Ok(info) => info,
            Err(Error::Solver { iterations, residual, .. }) => SolveInfo {
                iterations,
                relative_residual: residual,
            },
            Err(e) => return Err(e),
        };

        let mut r = vec![0.0; 2 * n];
        apply(&x, &mut r);
        r.iter_mut().zip(&b).for_each(|(a, b)| *a = b - *a);
        let residual = norm(&r) / norm(&b).max(f64::MIN_POSITIVE);
        let step = state.step + 1;
        if !x.iter().all(|v| v.is_finite()) {
            let field = if x[..n].iter().all(|v| v.is_finite()) { "c" } else { "rho" };
            return Err(Error::NonFinite { field, step });
        }
        if residual > STEP_RESIDUAL_LIMIT {
            return Err(Error::Solver {
                what: "coupled step solve",
                iterations: solve.iterations,
                residual,
            });
        }
        let c = self.space().field(x.split_off(n))?;
        let rho = self.space().field(x)?;
        Ok((
            State {
                t: state.t + tau,
                rho,
                c,
                step,
            },
            StepReport {
                solve,
                residual,
                clamped_fraction: wsip.clamped_fraction(),
            },
        ))
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub samples: Vec<EstimatorSample>,
    pub summary: RunSummary,
    pub snapshots: Vec<State>,
    pub reports: Vec<StepReport>,
    pub initial_mass: f64,
    /// `max_n |int rho^n - int rho^0| / |int rho^0|` (absolute when the mass is 0).
    pub mass_drift: f64,
    /// Largest clamping fraction over all steps.
    pub max_clamped_fraction: f64,
    pub final_state: State,
}

pub fn run(config: &RunConfig) -> Result<RunOutput> {
    let sim = Simulation::new(config.clone())?;
    run_simulation(&sim)
}

pub fn run_simulation(sim: &Simulation) -> Result<RunOutput> {
    let config = sim.config();
    let disc = sim.discretization();
    let times = time_partition(config.t_final, config.tau, &config.snapshot_times);
    let mut state = sim.init_state()?;
    let initial_error = sim.initial_error(&state.rho);
    let initial_mass = state.rho.integral();
    let sample = |s: &State, d: Option<&DgField>| {
        compute_sample(disc, &config.constants, &config.estimators, s.t, &s.rho, &s.c, d)
    };
    let mut samples = vec![sample(&state, None)?];
    let is_snapshot = |t: f64| config.snapshot_times.iter().any(|&s| (s - t).abs() <= 1e-12 * config.t_final.max(1.0));
    let mut snapshots = Vec::new();
    if is_snapshot(0.0) {
        snapshots.push(state.clone());
    }
    let mut reports = Vec::with_capacity(times.len() - 1);
    let mut mass_drift: f64 = 0.0;
    for w in times.windows(2) {
        let tau = w[1] - w[0];
        let (mut next, report) = sim.step(&state, tau)?;
        next.t = w[1];
        let drho = next.rho.add_scaled(-1.0, &state.rho).scaled(1.0 / tau);
        samples.push(sample(&next, Some(&drho))?);
        let drift = (next.rho.integral() - initial_mass).abs();
        mass_drift = mass_drift.max(if initial_mass != 0.0 { drift / initial_mass.abs() } else { drift });
        reports.push(report);
        if is_snapshot(next.t) {
            snapshots.push(next.clone());
        }
        state = next;
    }
    let summary = summarize(&samples, initial_error, config.t_final, &config.constants)?;
    Ok(RunOutput {
        max_clamped_fraction: reports.iter().map(|r| r.clamped_fraction).fold(0.0, f64::max),
        samples,
        summary,
        snapshots,
        reports,
        initial_mass,
        mass_drift,
        final_state: state,
    })
}
