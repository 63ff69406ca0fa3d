//! Broken polynomial spaces `P^k(T_h)` and fields living in them.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::basis::ReferenceBasis;
use crate::error::{Error, Result};
use crate::mesh::{BoundaryFace, InteriorFace, Mesh, Point};
use crate::quadrature::{EdgeRule, TriangleRule};

/// Affine map `x = origin + J xi` of one cell.
#[derive(Debug, Clone, Copy)]
pub struct CellGeometry {
    pub origin: Point,
    pub jac: [[f64; 2]; 2],
    pub inv: [[f64; 2]; 2],
    pub det: f64,
}

impl CellGeometry {
    fn new(v: [Point; 3]) -> CellGeometry {
        let jac = [[v[1][0] - v[0][0], v[2][0] - v[0][0]], [v[1][1] - v[0][1], v[2][1] - v[0][1]]];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let inv = [[jac[1][1] / det, -jac[0][1] / det], [-jac[1][0] / det, jac[0][0] / det]];
        CellGeometry {
            origin: v[0],
            jac,
            inv,
            det,
        }
    }

    pub fn to_physical(&self, xi: [f64; 2]) -> Point {
        [
            self.origin[0] + self.jac[0][0] * xi[0] + self.jac[0][1] * xi[1],
            self.origin[1] + self.jac[1][0] * xi[0] + self.jac[1][1] * xi[1],
        ]
    }

    pub fn to_reference(&self, p: Point) -> [f64; 2] {
        let d = [p[0] - self.origin[0], p[1] - self.origin[1]];
        [
            self.inv[0][0] * d[0] + self.inv[0][1] * d[1],
            self.inv[1][0] * d[0] + self.inv[1][1] * d[1],
        ]
    }

    /// `J^{-T} g`.
    #[inline]
    pub fn physical_gradient(&self, g: [f64; 2]) -> [f64; 2] {
        [
            self.inv[0][0] * g[0] + self.inv[1][0] * g[1],
            self.inv[0][1] * g[0] + self.inv[1][1] * g[1],
        ]
    }

    /// Trace of `J^{-T} H J^{-1}` for a reference Hessian `[h_xx, h_xy, h_yy]`.
    pub fn physical_laplacian(&self, h: [f64; 3]) -> f64 {
        let hm = [[h[0], h[1]], [h[1], h[2]]];
        let mut lap = 0.0;
        for r in 0..2 {
            for c in 0..2 {
                for d in 0..2 {
                    lap += self.inv[c][r] * hm[c][d] * self.inv[d][r];
                }
            }
        }
        lap
    }
}

/// Basis values and reference gradients tabulated on a triangle rule.
#[derive(Debug, Clone)]
pub struct Tabulation {
    pub rule: TriangleRule,
    /// `values[q * n + i]`
    pub values: Vec<f64>,
    /// `gradients[q * n + i]` in reference coordinates.
    pub gradients: Vec<[f64; 2]>,
}

impl Tabulation {
    fn new(basis: &ReferenceBasis, rule: TriangleRule) -> Tabulation {
        let n = basis.len();
        let mut values = vec![0.0; rule.len() * n];
        let mut gradients = vec![[0.0; 2]; rule.len() * n];
        for (q, p) in rule.points.iter().enumerate() {
            basis.values_into(*p, &mut values[q * n..(q + 1) * n]);
            basis.gradients_into(*p, &mut gradients[q * n..(q + 1) * n]);
        }
        Tabulation { rule, values, gradients }
    }
}

#[derive(Debug)]
pub struct DgSpace {
    mesh: Arc<Mesh>,
    basis: ReferenceBasis,
    geometry: Vec<CellGeometry>,
    volume: Tabulation,
    data: Tabulation,
    edge_rule: EdgeRule,
}

impl DgSpace {
    /// Volume rules are exact to degree `max(2k + 2, 4)`, data rules to `2k + 4`
    /// and edge rules to `2k + 2`.
    pub fn new(mesh: Arc<Mesh>, degree: usize) -> Arc<DgSpace> {
        let basis = ReferenceBasis::new(degree);
        let geometry = (0..mesh.num_cells()).map(|c| CellGeometry::new(mesh.cell_vertices(c))).collect();
        let volume = Tabulation::new(&basis, TriangleRule::new((2 * degree + 2).max(4)));
        let data = Tabulation::new(&basis, TriangleRule::new(2 * degree + 4));
        Arc::new(DgSpace {
            mesh,
            basis,
            geometry,
            volume,
            data,
            edge_rule: EdgeRule::new(2 * degree + 2),
        })
    }

    /// A space of another degree on the same mesh.
    pub fn with_degree(&self, degree: usize) -> Arc<DgSpace> {
        DgSpace::new(self.mesh.clone(), degree)
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn basis(&self) -> &ReferenceBasis {
        &self.basis
    }

    pub fn degree(&self) -> usize {
        self.basis.degree()
    }

    pub fn dofs_per_cell(&self) -> usize {
        self.basis.len()
    }

    pub fn num_cells(&self) -> usize {
        self.mesh.num_cells()
    }

    pub fn num_dofs(&self) -> usize {
        self.num_cells() * self.dofs_per_cell()
    }

    pub fn geometry(&self, cell: usize) -> &CellGeometry {
        &self.geometry[cell]
    }

    pub fn volume_tabulation(&self) -> &Tabulation {
        &self.volume
    }

    pub fn data_tabulation(&self) -> &Tabulation {
        &self.data
    }

    pub fn edge_rule(&self) -> &EdgeRule {
        &self.edge_rule
    }

    pub fn zero_field(self: &Arc<Self>) -> DgField {
        DgField {
            space: self.clone(),
            coeffs: vec![0.0; self.num_dofs()],
        }
    }

    pub fn constant_field(self: &Arc<Self>, value: f64) -> DgField {
        let mut f = self.zero_field();
        let n = self.dofs_per_cell();
        // The first basis function is the constant sqrt(2).
        for c in 0..self.num_cells() {
            f.coeffs[c * n] = value / 2f64.sqrt();
        }
        f
    }

    pub fn field(self: &Arc<Self>, coeffs: Vec<f64>) -> Result<DgField> {
        if coeffs.len() != self.num_dofs() {
            return Err(Error::OutOfRange {
                index: coeffs.len(),
                len: self.num_dofs(),
            });
        }
        Ok(DgField {
            space: self.clone(),
            coeffs,
        })
    }

    /// `L^2` projection cellwise. The local mass matrix is `|det J| I`, so the
    /// local systems reduce to scaling the load vector.
    pub fn l2_project<F: Fn(Point) -> f64>(self: &Arc<Self>, f: F) -> DgField {
        self.l2_project_with(&self.data, f)
    }

    /// `L^2` projection using a caller-provided triangle rule.
    pub fn l2_project_with_rule<F: Fn(Point) -> f64>(self: &Arc<Self>, rule: TriangleRule, f: F) -> DgField {
        let tab = Tabulation::new(&self.basis, rule);
        self.l2_project_with(&tab, f)
    }

    fn l2_project_with<F: Fn(Point) -> f64>(self: &Arc<Self>, tab: &Tabulation, f: F) -> DgField {
        let n = self.dofs_per_cell();
        let mut out = self.zero_field();
        for c in 0..self.num_cells() {
            let g = &self.geometry[c];
            let block = &mut out.coeffs[c * n..(c + 1) * n];
            for (q, (p, &w)) in tab.rule.points.iter().zip(&tab.rule.weights).enumerate() {
                let fx = w * f(g.to_physical(*p));
                for (b, v) in block.iter_mut().zip(&tab.values[q * n..(q + 1) * n]) {
                    *b += fx * v;
                }
            }
        }
        out
    }

    /// Cellwise Lagrange interpolation on the equispaced lattice of this
    /// space's degree. The lattice includes the edge nodes, so the
    /// interpolant of a continuous function is continuous.
    pub fn lagrange_interpolate<F: Fn(Point) -> f64>(self: &Arc<Self>, f: F) -> DgField {
        let k = self.degree();
        let n = self.dofs_per_cell();
        let nodes: Vec<[f64; 2]> = (0..=k)
            .flat_map(|b| (0..=(k - b)).map(move |a| [a as f64 / k as f64, b as f64 / k as f64]))
            .collect();
        let mut vandermonde = DMatrix::<f64>::zeros(n, n);
        for (r, xi) in nodes.iter().enumerate() {
            for (j, v) in self.basis.values(*xi).into_iter().enumerate() {
                vandermonde[(r, j)] = v;
            }
        }
        let lu = vandermonde.lu();
        let mut out = self.zero_field();
        for c in 0..self.num_cells() {
            let g = &self.geometry[c];
            let rhs = DVector::from_iterator(n, nodes.iter().map(|xi| f(g.to_physical(*xi))));
            let sol = lu.solve(&rhs).expect("equispaced Vandermonde matrix is nonsingular");
            out.coeffs[c * n..(c + 1) * n].copy_from_slice(sol.as_slice());
        }
        out
    }

    /// `int_Omega f` with a cellwise collapsed Gauss rule of the given degree.
    pub fn integrate<F: Fn(Point) -> f64>(&self, f: F, degree: usize) -> f64 {
        let rule = TriangleRule::new(degree);
        let mut total = 0.0;
        for g in &self.geometry {
            let mut cell = 0.0;
            for (p, &w) in rule.points.iter().zip(&rule.weights) {
                cell += w * f(g.to_physical(*p));
            }
            total += cell * g.det.abs();
        }
        total
    }

    /// Physical edge quadrature of an interior face: points and weights
    /// (including the face length).
    pub fn interior_face_quadrature(&self, face: &InteriorFace) -> (Vec<Point>, Vec<f64>) {
        let pts = self.edge_rule.points.iter().map(|&s| face.point_at(s)).collect();
        let wts = self.edge_rule.weights.iter().map(|&w| w * face.length).collect();
        (pts, wts)
    }

    pub fn boundary_face_quadrature(&self, face: &BoundaryFace) -> (Vec<Point>, Vec<f64>) {
        let pts = self.edge_rule.points.iter().map(|&s| face.point_at(s)).collect();
        let wts = self.edge_rule.weights.iter().map(|&w| w * face.length).collect();
        (pts, wts)
    }

    /// Basis values and physical gradients of `cell` at a physical point.
    pub fn basis_at(&self, cell: usize, p: Point, values: &mut [f64], grads: &mut [[f64; 2]]) {
        let g = &self.geometry[cell];
        let xi = g.to_reference(p);
        self.basis.values_into(xi, values);
        self.basis.gradients_into(xi, grads);
        for gr in grads.iter_mut() {
            *gr = g.physical_gradient(*gr);
        }
    }
}

/// Coefficients of a piecewise polynomial, one block of `n_k` per cell.
#[derive(Debug, Clone)]
pub struct DgField {
    space: Arc<DgSpace>,
    coeffs: Vec<f64>,
}

/// Traces of a field on both sides of a face, sampled at the edge quadrature.
#[derive(Debug, Clone)]
pub struct FaceTraces {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    pub first: Vec<f64>,
    pub second: Vec<f64>,
}

impl FaceTraces {
    pub fn jump(&self) -> Vec<f64> {
        self.first.iter().zip(&self.second).map(|(a, b)| a - b).collect()
    }

    pub fn average(&self) -> Vec<f64> {
        self.first.iter().zip(&self.second).map(|(a, b)| 0.5 * (a + b)).collect()
    }
}

impl DgField {
    pub fn space(&self) -> &Arc<DgSpace> {
        &self.space
    }

    pub fn degree(&self) -> usize {
        self.space.degree()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn cell_coeffs(&self, cell: usize) -> &[f64] {
        let n = self.space.dofs_per_cell();
        &self.coeffs[cell * n..(cell + 1) * n]
    }

    fn check_cell(&self, cell: usize) -> Result<()> {
        if cell >= self.space.num_cells() {
            return Err(Error::OutOfRange {
                index: cell,
                len: self.space.num_cells(),
            });
        }
        Ok(())
    }

    /// Value of the cell polynomial at reference coordinates `xi`.
    pub fn evaluate_in_cell(&self, cell: usize, xi: [f64; 2]) -> Result<f64> {
        self.check_cell(cell)?;
        Ok(self.value_ref(cell, xi))
    }

    pub(crate) fn value_ref(&self, cell: usize, xi: [f64; 2]) -> f64 {
        let mut v = [0.0; 32];
        let n = self.space.dofs_per_cell();
        self.space.basis.values_into(xi, &mut v[..n]);
        self.cell_coeffs(cell).iter().zip(&v[..n]).map(|(c, v)| c * v).sum()
    }

    /// Value of the polynomial of `cell` at a physical point (which may lie on its boundary).
    pub fn value_in_cell_at(&self, cell: usize, p: Point) -> f64 {
        self.value_ref(cell, self.space.geometry[cell].to_reference(p))
    }

    pub fn gradient_in_cell_at(&self, cell: usize, p: Point) -> [f64; 2] {
        let g = &self.space.geometry[cell];
        self.gradient_ref(cell, g.to_reference(p))
    }

    pub(crate) fn gradient_ref(&self, cell: usize, xi: [f64; 2]) -> [f64; 2] {
        let n = self.space.dofs_per_cell();
        let mut grads = [[0.0; 2]; 32];
        self.space.basis.gradients_into(xi, &mut grads[..n]);
        let mut out = [0.0; 2];
        for (c, gr) in self.cell_coeffs(cell).iter().zip(&grads[..n]) {
            out[0] += c * gr[0];
            out[1] += c * gr[1];
        }
        self.space.geometry[cell].physical_gradient(out)
    }

    /// Cellwise Laplacian at reference coordinates.
    pub fn laplacian_ref(&self, cell: usize, xi: [f64; 2]) -> f64 {
        let g = &self.space.geometry[cell];
        self.space
            .basis
            .hessians(xi)
            .into_iter()
            .zip(self.cell_coeffs(cell))
            .map(|(h, c)| c * g.physical_laplacian(h))
            .sum()
    }

    /// Value at a physical point, using the cell located by the mesh.
    pub fn evaluate_at(&self, p: Point) -> f64 {
        let cell = self.space.mesh.locate(p);
        self.value_in_cell_at(cell, p)
    }

    pub fn integral(&self) -> f64 {
        let n = self.space.dofs_per_cell();
        (0..self.space.num_cells())
            .map(|c| self.space.geometry[c].det.abs() * self.coeffs[c * n] / 2f64.sqrt())
            .sum()
    }

    pub fn interior_traces(&self, face: &InteriorFace) -> FaceTraces {
        let (points, weights) = self.space.interior_face_quadrature(face);
        let first = points.iter().map(|&p| self.value_in_cell_at(face.cells[0], p)).collect();
        let second = points.iter().map(|&p| self.value_in_cell_at(face.cells[1], p)).collect();
        FaceTraces {
            points,
            weights,
            first,
            second,
        }
    }

    /// On a boundary face both sides carry the single interior trace.
    pub fn boundary_traces(&self, face: &BoundaryFace) -> FaceTraces {
        let (points, weights) = self.space.boundary_face_quadrature(face);
        let first: Vec<f64> = points.iter().map(|&p| self.value_in_cell_at(face.cell, p)).collect();
        FaceTraces {
            points,
            weights,
            second: first.clone(),
            first,
        }
    }

    pub fn scaled(&self, factor: f64) -> DgField {
        DgField {
            space: self.space.clone(),
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    /// `self + alpha * other`.
    pub fn add_scaled(&self, alpha: f64, other: &DgField) -> DgField {
        debug_assert_eq!(self.coeffs.len(), other.coeffs.len());
        DgField {
            space: self.space.clone(),
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + alpha * b).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Rectangle;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn space(level: u32, k: usize) -> Arc<DgSpace> {
        DgSpace::new(Arc::new(Mesh::uniform(level, Rectangle::UNIT).unwrap()), k)
    }

    #[test]
    fn constant_and_affine_fields() {
        let s = space(2, 2);
        let c = s.constant_field(3.5);
        let x = s.l2_project(|p| p[0]);
        for cell in 0..s.num_cells() {
            for xi in [[0.1, 0.2], [0.0, 0.0], [0.5, 0.5]] {
                assert!((c.evaluate_in_cell(cell, xi).unwrap() - 3.5).abs() < 1e-14);
                let p = s.geometry(cell).to_physical(xi);
                assert!((x.evaluate_in_cell(cell, xi).unwrap() - p[0]).abs() < 1e-14);
            }
        }
        assert!((c.integral() - 3.5).abs() < 1e-14);
        assert!(c.evaluate_in_cell(s.num_cells(), [0.0, 0.0]).is_err());
    }

    #[test]
    fn random_polynomial_matches_monomial_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for k in 1..=2usize {
            let s = space(2, k);
            let exps: Vec<(i32, i32)> = (0..=k as i32).flat_map(|t| (0..=t).map(move |a| (a, t - a))).collect();
            let coef: Vec<f64> = exps.iter().map(|_| rng.gen_range(-1.0..1.0)).collect();
            let poly = |p: Point| -> f64 {
                exps.iter()
                    .zip(&coef)
                    .map(|(&(a, b), c)| c * p[0].powi(a) * p[1].powi(b))
                    .sum()
            };
            let field = s.l2_project(poly);
            for _ in 0..50 {
                let p = [rng.gen::<f64>(), rng.gen::<f64>()];
                assert!((field.evaluate_at(p) - poly(p)).abs() < 1e-13);
            }
            let interp = s.lagrange_interpolate(poly);
            for (a, b) in interp.coeffs().iter().zip(field.coeffs()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn traces_jumps_and_averages() {
        let s = space(2, 1);
        let x = s.l2_project(|p| p[0]);
        for f in s.mesh().interior_faces() {
            assert!(x.interior_traces(f).jump().iter().all(|j| j.abs() < 1e-14));
        }
        // Indicator of the first cell of a face.
        let f = &s.mesh().interior_faces()[3];
        let mut ind = s.zero_field();
        ind.coeffs_mut()[f.cells[0] * 3] = 1.0 / 2f64.sqrt();
        let tr = ind.interior_traces(f);
        assert!(tr.jump().iter().all(|j| (j - 1.0).abs() < 1e-14));
        assert!(tr.average().iter().all(|j| (j - 0.5).abs() < 1e-14));
    }

    #[test]
    fn jump_matches_in_cell_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = space(1, 2);
        let u = s.field((0..s.num_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        for f in s.mesh().interior_faces() {
            let g0 = s.geometry(f.cells[0]);
            let g1 = s.geometry(f.cells[1]);
            let tr = u.interior_traces(f);
            for (p, j) in tr.points.iter().zip(tr.jump()) {
                let expected = u.evaluate_in_cell(f.cells[0], g0.to_reference(*p)).unwrap()
                    - u.evaluate_in_cell(f.cells[1], g1.to_reference(*p)).unwrap();
                assert!((j - expected).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn jump_times_normal_is_orientation_free() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = space(2, 2);
        let u = s.field((0..s.num_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        for f in s.mesh().interior_faces() {
            let g = f.flipped();
            let a = u.interior_traces(f);
            let b = u.interior_traces(&g);
            let n_a = a.jump();
            // Flipping reverses the edge parametrisation.
            let n_b: Vec<f64> = b.jump().into_iter().rev().collect();
            for (ja, jb) in n_a.iter().zip(&n_b) {
                for d in 0..2 {
                    assert!((ja * f.normal[d] - jb * g.normal[d]).abs() < 1e-13);
                }
            }
        }
    }
}
