//! A posteriori estimators: elliptic residual estimators, the residual
//! bound `E_Rrho`, the Gronwall quantities and the conditional bound.

use serde::{Deserialize, Serialize};

use crate::discretization::Discretization;
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::norms::{broken_norms, sampled_gradient_linf, sampled_linf};
use crate::space::DgField;

/// Analytic constants of the estimates. All default to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstantsSet {
    /// `H1 -> L6` embedding.
    pub c_s: f64,
    /// `H1 -> L3` embedding.
    pub c_s_prime: f64,
    /// `H2 -> Linf` embedding.
    pub c_s_dprime: f64,
    /// Elliptic regularity.
    pub c_ell: f64,
    pub c0: f64,
    pub c1: f64,
    pub c_minus1: f64,
    pub c1_tilde: f64,
    pub c_app_prime: f64,
    pub c_app_dprime: f64,
    /// Carried for completeness; no implemented bound uses it.
    pub c_app_tprime: f64,
    /// Trace inequality.
    pub c_tr: f64,
}

impl Default for ConstantsSet {
    fn default() -> Self {
        ConstantsSet {
            c_s: 1.0,
            c_s_prime: 1.0,
            c_s_dprime: 1.0,
            c_ell: 1.0,
            c0: 1.0,
            c1: 1.0,
            c_minus1: 1.0,
            c1_tilde: 1.0,
            c_app_prime: 1.0,
            c_app_dprime: 1.0,
            c_app_tprime: 1.0,
            c_tr: 1.0,
        }
    }
}

impl ConstantsSet {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("c_s", self.c_s),
            ("c_s_prime", self.c_s_prime),
            ("c_s_dprime", self.c_s_dprime),
            ("c_ell", self.c_ell),
            ("c0", self.c0),
            ("c1", self.c1),
            ("c_minus1", self.c_minus1),
            ("c1_tilde", self.c1_tilde),
            ("c_app_prime", self.c_app_prime),
            ("c_app_dprime", self.c_app_dprime),
            ("c_app_tprime", self.c_app_tprime),
            ("c_tr", self.c_tr),
        ];
        for (name, v) in all {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("constant {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// `B = 2 C_S' C_S C_ell`.
    pub fn b(&self) -> f64 {
        2.0 * self.c_s_prime * self.c_s * self.c_ell
    }

    /// `C_max = max{1, N C_app'', N (C_app''^2 / delta + C_tr^2)}`.
    pub fn c_max(&self, n_partial: usize, delta: f64) -> f64 {
        let n = n_partial as f64;
        1f64.max(n * self.c_app_dprime)
            .max(n * (self.c_app_dprime * self.c_app_dprime / delta + self.c_tr * self.c_tr))
    }
}

/// Squared residuals `R_T` per cell and `R_F^1`, `R_F^0` per interior face.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementalResiduals {
    /// `||Lap u + f||^2_T`.
    pub cell: Vec<f64>,
    /// `||[grad u] . n||^2_F`.
    pub face_gradient: Vec<f64>,
    /// `||[u]||^2_F`.
    pub face_jump: Vec<f64>,
}

fn same_space(a: &DgField, b: &DgField) -> Result<()> {
    let (sa, sb) = (a.space(), b.space());
    if std::sync::Arc::ptr_eq(sa, sb) || (std::sync::Arc::ptr_eq(sa.mesh(), sb.mesh()) && sa.degree() == sb.degree()) {
        Ok(())
    } else {
        Err(Error::Incompatible("fields live on different dG spaces".into()))
    }
}

pub fn elemental_residuals(u: &DgField, f: &DgField) -> Result<ElementalResiduals> {
    same_space(u, f)?;
    let space = u.space();
    let n = space.dofs_per_cell();
    let tab = space.data_tabulation();
    let hessians: Vec<Vec<[f64; 3]>> = tab.rule.points.iter().map(|xi| space.basis().hessians(*xi)).collect();
    let mut lap_basis = vec![0.0; n];
    let cell = (0..space.num_cells())
        .map(|c| {
            let g = space.geometry(c);
            let (uc, fc) = (u.cell_coeffs(c), f.cell_coeffs(c));
            let mut r = 0.0;
            for (q, &w) in tab.rule.weights.iter().enumerate() {
                for (l, h) in lap_basis.iter_mut().zip(&hessians[q]) {
                    *l = g.physical_laplacian(*h);
                }
                let vals = &tab.values[q * n..(q + 1) * n];
                let value: f64 = (0..n).map(|i| uc[i] * lap_basis[i] + fc[i] * vals[i]).sum();
                r += w * value * value;
            }
            r * g.det.abs()
        })
        .collect();
    let faces = space.mesh().interior_faces();
    let mut face_gradient = Vec::with_capacity(faces.len());
    let mut face_jump = Vec::with_capacity(faces.len());
    let mut vals = vec![0.0; n];
    let mut grads = vec![[0.0; 2]; n];
    for face in faces {
        let (pts, wts) = space.interior_face_quadrature(face);
        let (mut rg, mut rj) = (0.0, 0.0);
        for (p, w) in pts.iter().zip(wts) {
            let mut value = [0.0; 2];
            let mut normal_grad = [0.0; 2];
            for side in 0..2 {
                let cell = face.cells[side];
                space.basis_at(cell, *p, &mut vals, &mut grads);
                for (i, coef) in u.cell_coeffs(cell).iter().enumerate() {
                    value[side] += coef * vals[i];
                    normal_grad[side] += coef * (grads[i][0] * face.normal[0] + grads[i][1] * face.normal[1]);
                }
            }
            let (jg, jv) = (normal_grad[0] - normal_grad[1], value[0] - value[1]);
            rg += w * jg * jg;
            rj += w * jv * jv;
        }
        face_gradient.push(rg);
        face_jump.push(rj);
    }
    Ok(ElementalResiduals {
        cell,
        face_gradient,
        face_jump,
    })
}

impl ElementalResiduals {
    /// `sum h_T^a R_T + sum h_F^b R_F^1 + penalty^2 sum h_F^c R_F^0`.
    pub fn weighted_sum(&self, mesh: &Mesh, powers: [i32; 3], penalty: f64) -> f64 {
        let cells: f64 = self
            .cell
            .iter()
            .zip(mesh.cell_diameters())
            .map(|(r, h)| h.powi(powers[0]) * r)
            .sum();
        let (mut grad, mut jump) = (0.0, 0.0);
        for ((face, rg), rj) in mesh.interior_faces().iter().zip(&self.face_gradient).zip(&self.face_jump) {
            grad += face.length.powi(powers[1]) * rg;
            jump += face.length.powi(powers[2]) * rj;
        }
        cells + grad + penalty * penalty * jump
    }
}

const E0_POWERS: [i32; 3] = [4, 3, 1];
const E1_POWERS: [i32; 3] = [2, 1, -1];
const E_MINUS1_POWERS: [i32; 3] = [6, 5, 3];

fn estimator(u: &DgField, f: &DgField, eta: f64, powers: [i32; 3]) -> Result<f64> {
    Ok(elemental_residuals(u, f)?.weighted_sum(u.space().mesh(), powers, eta).sqrt())
}

/// `E_0[u, f]`; pass `f = A_h u` for `E_0[u]`.
pub fn e0(u: &DgField, f: &DgField, eta: f64) -> Result<f64> {
    estimator(u, f, eta, E0_POWERS)
}

pub fn e1(u: &DgField, f: &DgField, eta: f64) -> Result<f64> {
    estimator(u, f, eta, E1_POWERS)
}

pub fn e_minus1(u: &DgField, f: &DgField, eta: f64) -> Result<f64> {
    estimator(u, f, eta, E_MINUS1_POWERS)
}

/// `E~_1[c, rho]`, the residual estimator of the chemical equation.
pub fn e1_tilde(c: &DgField, rho: &DgField, sigma: f64) -> Result<f64> {
    same_space(c, rho)?;
    estimator(c, &rho.add_scaled(-1.0, c), sigma, E1_POWERS)
}

/// Everything `E_Rrho` is built from.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ERrhoInputs {
    /// `E_{-1}[d_t rho]`.
    pub e_minus1_dt: f64,
    pub e0: f64,
    pub e1: f64,
    /// `sum_T |rho|^2_{H1(T)}`.
    pub rho_h1_sq: f64,
    pub rho_linf: f64,
    pub e1_tilde: f64,
    pub gradc_linf: f64,
    /// `sum_F h_F ||[rho]||^2_F`.
    pub jump_sum_face: f64,
    /// `sum_F h_T ||[rho]||^2_F` with the larger adjacent `h_T`.
    pub jump_sum_cell: f64,
    /// Projection residual `(sum_T C_app'^2 h_T^2 ||g - pi g||^2_T)^{1/2}`,
    /// `g = div_h(rho grad_h c)`.
    pub projection_residual: f64,
    pub degree: usize,
    pub n_partial: usize,
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ERrhoBreakdown {
    pub terms: [f64; 5],
    pub value: f64,
    /// Term 5 with `h_T` in place of `h_F`.
    pub term5_cell_weight: f64,
    /// Computed projection residual; term 3 reports zero for `k <= 2`.
    pub term3_diagnostic: f64,
}

pub fn e_rrho_from(inp: &ERrhoInputs, k: &ConstantsSet) -> ERrhoBreakdown {
    let n = inp.n_partial as f64;
    let t1 = k.c_minus1 * inp.e_minus1_dt;
    let t2 = 2.0 * k.c_s_dprime * k.c_ell * k.c0 * inp.e0 * (k.c1 * k.c1 * inp.e1 * inp.e1 + inp.rho_h1_sq).sqrt();
    let t3 = if inp.degree <= 2 { 0.0 } else { inp.projection_residual };
    let ca = k.c_app_prime + 1.0;
    let t4 = 2f64.sqrt()
        * n.sqrt()
        * (ca * ca + 1.0).sqrt()
        * k.c_max(inp.n_partial, inp.delta).sqrt()
        * inp.rho_linf
        * ((k.c_ell * k.c0 * inp.e0).powi(2) + (k.c1_tilde * inp.e1_tilde).powi(2)).sqrt();
    let t5_factor = n * k.c_app_dprime * inp.gradc_linf;
    let t5 = t5_factor * inp.jump_sum_face.sqrt();
    let terms = [t1, t2, t3, t4, t5];
    ERrhoBreakdown {
        terms,
        value: terms.iter().sum(),
        term5_cell_weight: t5_factor * inp.jump_sum_cell.sqrt(),
        term3_diagnostic: inp.projection_residual,
    }
}

/// `(sum_T C_app'^2 h_T^2 ||g - pi_h g||^2_T)^{1/2}` with `g = grad rho . grad c + rho Lap c`.
pub fn projection_residual(rho: &DgField, c: &DgField, c_app_prime: f64) -> Result<f64> {
    same_space(rho, c)?;
    let space = rho.space();
    let n = space.dofs_per_cell();
    let tab = space.data_tabulation();
    let mut total = 0.0;
    let mut g = vec![0.0; tab.rule.len()];
    for cell in 0..space.num_cells() {
        for (q, xi) in tab.rule.points.iter().enumerate() {
            let gr = rho.gradient_ref(cell, *xi);
            let gc = c.gradient_ref(cell, *xi);
            g[q] = gr[0] * gc[0] + gr[1] * gc[1] + rho.value_ref(cell, *xi) * c.laplacian_ref(cell, *xi);
        }
        // Orthonormal reference basis: the local projection coefficients
        // are plain reference moments.
        let mut coef = vec![0.0; n];
        for (q, &w) in tab.rule.weights.iter().enumerate() {
            for i in 0..n {
                coef[i] += w * g[q] * tab.values[q * n + i];
            }
        }
        let mut r = 0.0;
        for (q, &w) in tab.rule.weights.iter().enumerate() {
            let proj: f64 = (0..n).map(|i| coef[i] * tab.values[q * n + i]).sum();
            r += w * (g[q] - proj).powi(2);
        }
        let h = space.mesh().cell_diameter(cell);
        total += (c_app_prime * h).powi(2) * r * space.geometry(cell).det.abs();
    }
    Ok(total.sqrt())
}

/// `E_Rrho` for the state `(rho, c)` with backward difference quotient `drho`.
pub fn e_rrho(
    rho: &DgField,
    c: &DgField,
    drho: &DgField,
    constants: &ConstantsSet,
    disc: &Discretization,
) -> Result<ERrhoBreakdown> {
    let eta = disc.penalty().eta;
    let a_rho = disc.laplacian().apply(rho)?;
    let a_drho = disc.laplacian().apply(drho)?;
    let res = elemental_residuals(rho, &a_rho)?;
    let mesh = rho.space().mesh();
    let stats = mesh.statistics();
    let (jump_sum_face, jump_sum_cell) = jump_sums(mesh, &res.face_jump);
    let inputs = ERrhoInputs {
        e_minus1_dt: e_minus1(drho, &a_drho, eta)?,
        e0: res.weighted_sum(mesh, E0_POWERS, eta).sqrt(),
        e1: res.weighted_sum(mesh, E1_POWERS, eta).sqrt(),
        rho_h1_sq: broken_norms(rho).h1_seminorm_squared(),
        rho_linf: sampled_linf(rho, 0),
        e1_tilde: e1_tilde(c, rho, disc.penalty().sigma)?,
        gradc_linf: sampled_gradient_linf(c, 0),
        jump_sum_face,
        jump_sum_cell,
        projection_residual: projection_residual(rho, c, constants.c_app_prime)?,
        degree: rho.degree(),
        n_partial: stats.max_faces_per_cell,
        delta: stats.delta,
    };
    Ok(e_rrho_from(&inputs, constants))
}

fn jump_sums(mesh: &Mesh, face_jump: &[f64]) -> (f64, f64) {
    let (mut by_face, mut by_cell) = (0.0, 0.0);
    for (face, j) in mesh.interior_faces().iter().zip(face_jump) {
        by_face += face.length * j;
        let h_t = mesh.cell_diameter(face.cells[0]).max(mesh.cell_diameter(face.cells[1]));
        by_cell += h_t * j;
    }
    (by_face, by_cell)
}

/// Stability integrand `a_bar` from the norms of `rho` and its estimators.
pub fn abar(e0: f64, e1: f64, rho_l2_sq: f64, rho_h1_sq: f64, k: &ConstantsSet) -> f64 {
    let sobolev = 6.0 * (k.c_s * k.c_s_prime * k.c_ell).powi(2);
    let first = (k.c0 * e0).powi(2) + (k.c1 * e1).powi(2) + rho_l2_sq + rho_h1_sq;
    let second = 6.0 * k.c_s_dprime * k.c_ell * k.c_ell * ((k.c1 * e1).powi(2) + rho_h1_sq);
    sobolev * first + second + 1.0 / 3.0
}

/// Extra per-sample diagnostics not written to the estimator log.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SampleDiagnostics {
    pub rho_l2_sq: f64,
    pub rho_h1_sq: f64,
    pub rho_dg: f64,
    pub mass: f64,
    pub term5_cell_weight: f64,
    pub term3_diagnostic: f64,
    /// Smallest `||[c]||^2_F` over interior faces.
    pub c_jump_sq_min: f64,
    /// Interior faces whose `||[c]||^2_F` is at most `f64::EPSILON`.
    pub c_jump_sq_tiny: usize,
    pub interior_faces: usize,
}

/// One row of the estimator log.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EstimatorSample {
    pub t: f64,
    pub e0: f64,
    pub e1: f64,
    pub e_minus1: f64,
    pub e1_tilde: f64,
    pub errho: f64,
    pub errho_terms: [f64; 5],
    pub abar: f64,
    pub rho_linf: f64,
    pub gradc_linf: f64,
    pub diagnostics: SampleDiagnostics,
}

pub const LOG_HEADER: [&str; 14] = [
    "t", "E0", "E1", "Eminus1", "E1tilde", "ERrho", "ERrho_t1", "ERrho_t2", "ERrho_t3", "ERrho_t4", "ERrho_t5", "abar",
    "rho_Linf", "gradc_Linf",
];

impl EstimatorSample {
    pub fn log_row(&self) -> [f64; 14] {
        let t = self.errho_terms;
        [
            self.t,
            self.e0,
            self.e1,
            self.e_minus1,
            self.e1_tilde,
            self.errho,
            t[0],
            t[1],
            t[2],
            t[3],
            t[4],
            self.abar,
            self.rho_linf,
            self.gradc_linf,
        ]
    }

    pub fn from_log_row(row: [f64; 14]) -> EstimatorSample {
        EstimatorSample {
            t: row[0],
            e0: row[1],
            e1: row[2],
            e_minus1: row[3],
            e1_tilde: row[4],
            errho: row[5],
            errho_terms: [row[6], row[7], row[8], row[9], row[10]],
            abar: row[11],
            rho_linf: row[12],
            gradc_linf: row[13],
            diagnostics: SampleDiagnostics::default(),
        }
    }

    pub fn is_valid(&self) -> bool {
        self.log_row().iter().all(|v| v.is_finite() && *v >= 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorOptions {
    /// Evaluate `E_{-1}` for `k = 1` as well.
    pub e_minus1_for_k1: bool,
    /// Extra lattice refinement of the `L_inf` sampling set.
    pub linf_refinement: u32,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        EstimatorOptions {
            e_minus1_for_k1: true,
            linf_refinement: 0,
        }
    }
}

/// All estimators of the state `(rho, c)` at time `t`. Without a difference
/// quotient the time-derivative term is zero.
pub fn compute_sample(
    disc: &Discretization,
    constants: &ConstantsSet,
    options: &EstimatorOptions,
    t: f64,
    rho: &DgField,
    c: &DgField,
    drho: Option<&DgField>,
) -> Result<EstimatorSample> {
    let mesh = rho.space().mesh();
    let penalty = disc.penalty();
    let stats = mesh.statistics();
    let a_rho = disc.laplacian().apply(rho)?;
    let res = elemental_residuals(rho, &a_rho)?;
    let e0 = res.weighted_sum(mesh, E0_POWERS, penalty.eta).sqrt();
    let e1 = res.weighted_sum(mesh, E1_POWERS, penalty.eta).sqrt();
    let e_minus1_dt = match drho {
        Some(d) if rho.degree() >= 2 || options.e_minus1_for_k1 => e_minus1(d, &disc.laplacian().apply(d)?, penalty.eta)?,
        _ => 0.0,
    };
    let c_res = elemental_residuals(c, &rho.add_scaled(-1.0, c))?;
    let e1_tilde = c_res.weighted_sum(mesh, E1_POWERS, penalty.sigma).sqrt();
    let norms = broken_norms(rho);
    let rho_linf = sampled_linf(rho, options.linf_refinement);
    let gradc_linf = sampled_gradient_linf(c, options.linf_refinement);
    let (jump_sum_face, jump_sum_cell) = jump_sums(mesh, &res.face_jump);
    let inputs = ERrhoInputs {
        e_minus1_dt,
        e0,
        e1,
        rho_h1_sq: norms.h1_seminorm_squared(),
        rho_linf,
        e1_tilde,
        gradc_linf,
        jump_sum_face,
        jump_sum_cell,
        projection_residual: projection_residual(rho, c, constants.c_app_prime)?,
        degree: rho.degree(),
        n_partial: stats.max_faces_per_cell,
        delta: stats.delta,
    };
    let br = e_rrho_from(&inputs, constants);
    let rho_l2_sq = norms.l2_squared();
    let rho_h1_sq = norms.h1_seminorm_squared();
    Ok(EstimatorSample {
        t,
        e0,
        e1,
        e_minus1: e_minus1_dt,
        e1_tilde,
        errho: br.value,
        errho_terms: br.terms,
        abar: abar(e0, e1, rho_l2_sq, rho_h1_sq, constants),
        rho_linf,
        gradc_linf,
        diagnostics: SampleDiagnostics {
            rho_l2_sq,
            rho_h1_sq,
            rho_dg: norms.dg,
            mass: rho.integral(),
            term5_cell_weight: br.term5_cell_weight,
            term3_diagnostic: br.term3_diagnostic,
            c_jump_sq_min: c_res.face_jump.iter().copied().fold(f64::INFINITY, f64::min),
            c_jump_sq_tiny: c_res.face_jump.iter().filter(|j| **j <= f64::EPSILON).count(),
            interior_faces: c_res.face_jump.len(),
        },
    })
}

/// A nonnegative quantity that may exceed the `f64` range, kept in log form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Saturating {
    Finite(f64),
    Saturated { log: f64 },
}

impl Saturating {
    pub fn from_log(log: f64) -> Saturating {
        if log < f64::MAX.ln() {
            Saturating::Finite(log.exp())
        } else {
            Saturating::Saturated { log }
        }
    }

    /// The value, or `+inf` when saturated.
    pub fn value(&self) -> f64 {
        match *self {
            Saturating::Finite(v) => v,
            Saturating::Saturated { .. } => f64::INFINITY,
        }
    }

    pub fn ln(&self) -> f64 {
        match *self {
            Saturating::Finite(v) => v.ln(),
            Saturating::Saturated { log } => log,
        }
    }

    pub fn is_saturated(&self) -> bool {
        matches!(self, Saturating::Saturated { .. })
    }
}

/// `int_0^T q dt` by the rectangle rule with the sample at `t_{n+1}` on
/// `(t_n, t_{n+1}]`; a lone sample is taken as constant on `[0, T]`.
pub fn time_integral(samples: &[EstimatorSample], t_final: f64, q: impl Fn(&EstimatorSample) -> f64) -> Result<f64> {
    match samples {
        [] => Err(Error::EmptySeries),
        [only] => Ok(t_final * q(only)),
        _ => Ok(samples.windows(2).map(|w| (w[1].t - w[0].t) * q(&w[1])).sum()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GronwallBounds {
    /// `A_bar`.
    pub a_bar: f64,
    /// `int_0^T a_bar dt = ln E_bar`.
    pub abar_integral: f64,
    pub e_bar: Saturating,
    pub errho_sq_integral: f64,
}

pub fn abar_ebar(
    samples: &[EstimatorSample],
    initial_error: f64,
    t_final: f64,
    _constants: &ConstantsSet,
) -> Result<GronwallBounds> {
    let first = samples.first().ok_or(Error::EmptySeries)?;
    let errho_sq_integral = time_integral(samples, t_final, |s| s.errho * s.errho)?;
    let abar_integral = time_integral(samples, t_final, |s| s.abar)?;
    Ok(GronwallBounds {
        a_bar: 2.0 * initial_error * initial_error + 2.0 * first.e0 * first.e0 + errho_sq_integral,
        abar_integral,
        e_bar: Saturating::from_log(abar_integral),
        errho_sq_integral,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionReport {
    pub holds: bool,
    /// `2^9 A_bar E_bar^3 (B (1 + T))^2`.
    pub margin: Saturating,
    pub log_margin: f64,
}

pub fn condition_check(a_bar: f64, e_bar: Saturating, t_final: f64, constants: &ConstantsSet) -> ConditionReport {
    let bt = constants.b() * (1.0 + t_final);
    let log_margin = 512f64.ln() + a_bar.ln() + 3.0 * e_bar.ln() + 2.0 * bt.ln();
    let margin = match e_bar {
        _ if a_bar == 0.0 => Saturating::Finite(0.0),
        Saturating::Finite(e) => {
            let m = 512.0 * a_bar * e * e * e * bt * bt;
            if m.is_finite() {
                Saturating::Finite(m)
            } else {
                Saturating::Saturated { log: log_margin }
            }
        }
        Saturating::Saturated { .. } => Saturating::Saturated { log: log_margin },
    };
    ConditionReport {
        holds: !e_bar.is_saturated() && !margin.is_saturated() && margin.value() <= 1.0,
        margin,
        log_margin,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FullEstimate {
    pub value: Saturating,
    /// `32 A_bar E_bar`, `2 C_0^2 sup E_0^2`, `2 C_1^2 ||E_1||^2_{L2(0,T)}`.
    pub components: [Saturating; 3],
    /// Whether the condition held, so that the value is a certified bound.
    pub certified: bool,
}

pub fn full_estimator(
    a_bar: f64,
    e_bar: Saturating,
    sup_e0: f64,
    l2t_e1: f64,
    constants: &ConstantsSet,
    condition_holds: bool,
) -> FullEstimate {
    let gronwall = if a_bar == 0.0 {
        Saturating::Finite(0.0)
    } else {
        match e_bar {
            Saturating::Finite(e) if (32.0 * a_bar * e).is_finite() => Saturating::Finite(32.0 * a_bar * e),
            _ => Saturating::Saturated {
                log: 32f64.ln() + a_bar.ln() + e_bar.ln(),
            },
        }
    };
    let c0 = 2.0 * (constants.c0 * sup_e0).powi(2);
    let c1 = 2.0 * (constants.c1 * l2t_e1).powi(2);
    let value = match gronwall {
        Saturating::Finite(g) => Saturating::Finite(g + c0 + c1),
        Saturating::Saturated { log } => Saturating::Saturated {
            log: log + (1.0 + (c0 + c1) * (-log).exp()).ln(),
        },
    };
    FullEstimate {
        value,
        components: [gronwall, Saturating::Finite(c0), Saturating::Finite(c1)],
        certified: condition_holds,
    }
}

/// Time-aggregated quantities of one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSummary {
    pub t_final: f64,
    pub initial_error: f64,
    pub e0_initial: f64,
    pub abar_initial: f64,
    /// `||E_0||_{L_inf(0,T)}` including `t = 0`.
    pub sup_e0: f64,
    pub l2_e1: f64,
    pub l2_errho: f64,
    pub l2_e1_tilde: f64,
    pub gronwall: GronwallBounds,
    pub condition: ConditionReport,
    pub full: FullEstimate,
}

pub fn summarize(
    samples: &[EstimatorSample],
    initial_error: f64,
    t_final: f64,
    constants: &ConstantsSet,
) -> Result<RunSummary> {
    let first = samples.first().ok_or(Error::EmptySeries)?;
    let gronwall = abar_ebar(samples, initial_error, t_final, constants)?;
    let condition = condition_check(gronwall.a_bar, gronwall.e_bar, t_final, constants);
    let sup_e0 = samples.iter().map(|s| s.e0).fold(0.0, f64::max);
    let l2_e1 = time_integral(samples, t_final, |s| s.e1 * s.e1)?.sqrt();
    Ok(RunSummary {
        t_final,
        initial_error,
        e0_initial: first.e0,
        abar_initial: first.abar,
        sup_e0,
        l2_e1,
        l2_errho: gronwall.errho_sq_integral.sqrt(),
        l2_e1_tilde: time_integral(samples, t_final, |s| s.e1_tilde * s.e1_tilde)?.sqrt(),
        gronwall,
        condition,
        full: full_estimator(gronwall.a_bar, gronwall.e_bar, sup_e0, l2_e1, constants, condition.holds),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_constants() {
        let k = ConstantsSet::default();
        assert_eq!(k.b(), 2.0);
        let delta = 1.0 / 2f64.sqrt();
        assert!((k.c_max(3, delta) - 3.0 * (2f64.sqrt() + 1.0)).abs() < 1e-14);
    }

    #[test]
    fn condition_mechanics() {
        let k = ConstantsSet::default();
        let r = condition_check(1.0, Saturating::Finite(1.0), 0.0, &k);
        assert_eq!(r.margin, Saturating::Finite(2048.0));
        assert!(!r.holds);
        let zero = condition_check(0.0, Saturating::Finite(1.0), 0.0, &k);
        assert!(zero.holds && zero.margin == Saturating::Finite(0.0));
        assert_eq!(zero.log_margin, f64::NEG_INFINITY);
        let sat = condition_check(1e-300, Saturating::from_log(1e4), 1e-4, &k);
        assert!(sat.margin.is_saturated() && !sat.holds);
    }

    #[test]
    fn full_estimator_formula() {
        let k = ConstantsSet::default();
        let f = full_estimator(0.0, Saturating::Finite(1.0), 3.0, 4.0, &k, true);
        assert_eq!(f.value, Saturating::Finite(2.0 * 9.0 + 2.0 * 16.0));
        let s = full_estimator(1.0, Saturating::from_log(1000.0), 3.0, 4.0, &k, false);
        match s.value {
            Saturating::Saturated { log } => assert!((log - (32f64.ln() + 1000.0)).abs() < 1e-12),
            _ => panic!("expected saturation"),
        }
    }

    #[test]
    fn gronwall_of_zero_trajectory() {
        let k = ConstantsSet::default();
        let s = EstimatorSample {
            abar: 1.0 / 3.0,
            ..Default::default()
        };
        let g = abar_ebar(&[s], 0.0, 0.3, &k).unwrap();
        assert_eq!(g.a_bar, 0.0);
        assert!((g.e_bar.value() - (0.1f64).exp()).abs() < 1e-15);
        assert!(matches!(abar_ebar(&[], 0.0, 1.0, &k), Err(Error::EmptySeries)));
    }
}
