//! Mass matrix, symmetric interior penalty (SIP) and weighted SIP forms.
//!
//! Both penalty forms only carry interior-face terms: the boundary condition
//! is homogeneous Neumann.

use crate::error::{Error, Result};
use crate::mesh::InteriorFace;
use crate::quadrature::{EdgeRule, TriangleRule};
use crate::space::{DgField, DgSpace};
use crate::sparse::{norm, SparseOperator};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyConfig {
    /// SIP penalty.
    pub eta: f64,
    /// wSIP penalty.
    pub sigma: f64,
    /// Lower bound applied to the traces that define the wSIP weights.
    pub eps_w: f64,
}

impl PenaltyConfig {
    /// `eta = sigma = 10 k^2`, `eps_w = 1e-12`.
    pub fn for_degree(k: usize) -> PenaltyConfig {
        let p = 10.0 * (k * k) as f64;
        PenaltyConfig {
            eta: p,
            sigma: p,
            eps_w: 1e-12,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("eta", self.eta), ("sigma", self.sigma), ("eps_w", self.eps_w)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("penalty {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

pub fn assemble_mass(space: &DgSpace) -> SparseOperator {
    let n = space.dofs_per_cell();
    let tab = space.volume_tabulation();
    let mut m = SparseOperator::block_diagonal(space.num_cells(), n);
    for c in 0..space.num_cells() {
        let det = space.geometry(c).det.abs();
        let blk = m.block_mut(c, c);
        for (q, &w) in tab.rule.weights.iter().enumerate() {
            let v = &tab.values[q * n..(q + 1) * n];
            for i in 0..n {
                for j in 0..n {
                    blk[i * n + j] += w * det * v[i] * v[j];
                }
            }
        }
    }
    m
}

/// Basis data of both cells of a face at one edge quadrature point.
struct FacePoint {
    weight: f64,
    values: [[f64; 32]; 2],
    normal_grads: [[f64; 32]; 2],
}

fn face_points(space: &DgSpace, face: &InteriorFace) -> Vec<FacePoint> {
    let n = space.dofs_per_cell();
    let (pts, wts) = space.interior_face_quadrature(face);
    let mut grads = vec![[0.0; 2]; n];
    pts.iter()
        .zip(wts)
        .map(|(p, weight)| {
            let mut fp = FacePoint {
                weight,
                values: [[0.0; 32]; 2],
                normal_grads: [[0.0; 32]; 2],
            };
            for side in 0..2 {
                space.basis_at(face.cells[side], *p, &mut fp.values[side][..n], &mut grads);
                for i in 0..n {
                    fp.normal_grads[side][i] = grads[i][0] * face.normal[0] + grads[i][1] * face.normal[1];
                }
            }
            fp
        })
        .collect()
}

/// Adds `-int_F ( [u] avg_w(grad phi).n + [phi] avg_w(grad u).n - penalty [u][phi] )`
/// where `avg_w(q) = coef[0] q|T1 + coef[1] q|T2`.
fn add_face_terms(op: &mut SparseOperator, face: &InteriorFace, n: usize, fp: &FacePoint, coef: [f64; 2], penalty: f64) {
    const SIGN: [f64; 2] = [1.0, -1.0];
    for a in 0..2 {
        for b in 0..2 {
            let blk = op.block_mut(face.cells[a], face.cells[b]);
            let (sa, sb) = (SIGN[a], SIGN[b]);
            for i in 0..n {
                let (vi, gi) = (fp.values[a][i], fp.normal_grads[a][i]);
                for j in 0..n {
                    let (uj, gj) = (fp.values[b][j], fp.normal_grads[b][j]);
                    let integrand = sb * uj * coef[a] * gi + sa * vi * coef[b] * gj - penalty * sa * sb * vi * uj;
                    blk[i * n + j] -= fp.weight * integrand;
                }
            }
        }
    }
}

fn add_volume_terms(op: &mut SparseOperator, space: &DgSpace, cell: usize, coefficient: impl Fn(usize) -> f64) {
    let n = space.dofs_per_cell();
    let tab = space.volume_tabulation();
    let g = space.geometry(cell);
    let det = g.det.abs();
    let mut grads = [[0.0; 2]; 32];
    let blk = op.block_mut(cell, cell);
    for (q, &w) in tab.rule.weights.iter().enumerate() {
        for i in 0..n {
            grads[i] = g.physical_gradient(tab.gradients[q * n + i]);
        }
        let scale = w * det * coefficient(q);
        for i in 0..n {
            for j in 0..n {
                blk[i * n + j] += scale * (grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1]);
            }
        }
    }
}

/// Matrix of `a_sip(u, phi)`; rows index test functions.
pub fn assemble_sip(space: &DgSpace, eta: f64) -> SparseOperator {
    let n = space.dofs_per_cell();
    let mut op = SparseOperator::dg_pattern(space.mesh(), n, true);
    for c in 0..space.num_cells() {
        add_volume_terms(&mut op, space, c, |_| 1.0);
    }
    for face in space.mesh().interior_faces() {
        let penalty = eta / face.length;
        for fp in face_points(space, face) {
            add_face_terms(&mut op, face, n, &fp, [0.5, 0.5], penalty);
        }
    }
    op
}

/// Face quantities of the weighted average at one point, from the raw traces
/// of the diffusion field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedTraces {
    /// `omega+`, `omega-`.
    pub omega: [f64; 2],
    /// Harmonic-mean penalty `2 v+ v- / (v+ + v-)`.
    pub gamma: f64,
    /// Whether either trace was raised to the positivity floor.
    pub clamped: bool,
}

pub fn weighted_traces(v_plus: f64, v_minus: f64, eps_w: f64) -> WeightedTraces {
    let clamped = v_plus < eps_w || v_minus < eps_w;
    let (p, m) = (v_plus.max(eps_w), v_minus.max(eps_w));
    let s = p + m;
    WeightedTraces {
        omega: [m / s, p / s],
        gamma: 2.0 * p * m / s,
        clamped,
    }
}

#[derive(Debug, Clone)]
pub struct WsipAssembly {
    pub operator: SparseOperator,
    /// Face quadrature points where a trace hit the positivity floor.
    pub clamped_points: usize,
    pub face_points: usize,
}

impl WsipAssembly {
    pub fn clamped_fraction(&self) -> f64 {
        if self.face_points == 0 {
            0.0
        } else {
            self.clamped_points as f64 / self.face_points as f64
        }
    }
}

/// Matrix of `a_wsip(v; u, psi)`, rows index test functions `psi`.
pub fn assemble_wsip(v: &DgField, sigma: f64, eps_w: f64) -> WsipAssembly {
    let space = v.space().as_ref();
    let n = space.dofs_per_cell();
    let mut op = SparseOperator::dg_pattern(space.mesh(), n, true);
    let tab = space.volume_tabulation();
    for c in 0..space.num_cells() {
        let vc = v.cell_coeffs(c);
        add_volume_terms(&mut op, space, c, |q| {
            tab.values[q * n..(q + 1) * n].iter().zip(vc).map(|(a, b)| a * b).sum()
        });
    }
    let mut clamped_points = 0;
    let mut total = 0;
    for face in space.mesh().interior_faces() {
        for fp in face_points(space, face) {
            let raw = [0, 1].map(|s| {
                fp.values[s][..n]
                    .iter()
                    .zip(v.cell_coeffs(face.cells[s]))
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
            });
            let wt = weighted_traces(raw[0], raw[1], eps_w);
            total += 1;
            clamped_points += usize::from(wt.clamped);
            let coef = [wt.omega[0] * raw[0], wt.omega[1] * raw[1]];
            add_face_terms(&mut op, face, n, &fp, coef, sigma * wt.gamma / face.length);
        }
    }
    WsipAssembly {
        operator: op,
        clamped_points,
        face_points: total,
    }
}

/// `a_sip(u, phi_i)` for every test basis function of `test`, where `u` may
/// live in a space of any degree on the same mesh.
pub fn sip_action(u: &DgField, test: &DgSpace, eta: f64) -> Vec<f64> {
    let n = test.dofs_per_cell();
    let degree = u.degree() + test.degree();
    let rule = TriangleRule::new(degree.max(2));
    let edge = EdgeRule::new(degree);
    let mut out = vec![0.0; test.num_dofs()];
    let mut vals = vec![0.0; n];
    let mut grads = vec![[0.0; 2]; n];
    for c in 0..test.num_cells() {
        let g = test.geometry(c);
        let det = g.det.abs();
        for (xi, &w) in rule.points.iter().zip(&rule.weights) {
            let p = g.to_physical(*xi);
            let gu = u.gradient_in_cell_at(c, p);
            test.basis_at(c, p, &mut vals, &mut grads);
            for i in 0..n {
                out[c * n + i] += w * det * (gu[0] * grads[i][0] + gu[1] * grads[i][1]);
            }
        }
    }
    const SIGN: [f64; 2] = [1.0, -1.0];
    for face in test.mesh().interior_faces() {
        let penalty = eta / face.length;
        for (&s, &w) in edge.points.iter().zip(&edge.weights) {
            let p = face.point_at(s);
            let w = w * face.length;
            let u_tr = face.cells.map(|c| u.value_in_cell_at(c, p));
            let gu = face.cells.map(|c| u.gradient_in_cell_at(c, p));
            let jump_u = u_tr[0] - u_tr[1];
            let avg_gu_n = 0.5 * ((gu[0][0] + gu[1][0]) * face.normal[0] + (gu[0][1] + gu[1][1]) * face.normal[1]);
            for a in 0..2 {
                let cell = face.cells[a];
                test.basis_at(cell, p, &mut vals, &mut grads);
                for i in 0..n {
                    let gn = grads[i][0] * face.normal[0] + grads[i][1] * face.normal[1];
                    let integrand = jump_u * 0.5 * gn + SIGN[a] * vals[i] * avg_gu_n - penalty * jump_u * SIGN[a] * vals[i];
                    out[cell * n + i] -= w * integrand;
                }
            }
        }
    }
    out
}

/// Discrete Laplacian `A_h` defined by `(A_h v, w) = a_sip(v, w)`, applied
/// as a mass solve of the stiffness action.
#[derive(Debug, Clone)]
pub struct DiscreteLaplacian {
    stiffness: std::sync::Arc<SparseOperator>,
    mass: std::sync::Arc<SparseOperator>,
    mass_inverse: Vec<f64>,
}

impl DiscreteLaplacian {
    pub fn new(mass: std::sync::Arc<SparseOperator>, stiffness: std::sync::Arc<SparseOperator>) -> Result<Self> {
        let mass_inverse = mass.inverse_diagonal_blocks().ok_or(Error::Solver {
            what: "mass matrix inversion",
            iterations: 0,
            residual: f64::INFINITY,
        })?;
        Ok(DiscreteLaplacian {
            stiffness,
            mass,
            mass_inverse,
        })
    }

    pub fn apply(&self, u: &DgField) -> Result<DgField> {
        let su = self.stiffness.apply(u.coeffs());
        let b = self.mass.block_size();
        let bb = b * b;
        let mut out = vec![0.0; su.len()];
        for (r, (o, s)) in out.chunks_exact_mut(b).zip(su.chunks_exact(b)).enumerate() {
            let inv = &self.mass_inverse[r * bb..(r + 1) * bb];
            for i in 0..b {
                o[i] = inv[i * b..(i + 1) * b].iter().zip(s).map(|(a, v)| a * v).sum();
            }
        }
        let check = self.mass.apply(&out);
        let defect: Vec<f64> = check.iter().zip(&su).map(|(a, b)| a - b).collect();
        let scale = norm(&su);
        let rel = if scale > 0.0 { norm(&defect) / scale } else { norm(&defect) };
        if rel > 1e-10 {
            return Err(Error::Solver {
                what: "discrete Laplacian mass solve",
                iterations: 1,
                residual: rel,
            });
        }
        u.space().field(out)
    }
}

/// One-shot `A_h u`.
pub fn apply_discrete_laplacian(u: &DgField, mass: &SparseOperator, stiffness: &SparseOperator) -> Result<DgField> {
    DiscreteLaplacian::new(std::sync::Arc::new(mass.clone()), std::sync::Arc::new(stiffness.clone()))?.apply(u)
}
