//! Broken norms of dG fields.

use crate::mesh::Point;
use crate::space::DgField;

#[derive(Debug, Clone, PartialEq)]
pub struct BrokenNorms {
    /// `||u||_{L2(T)}` per cell.
    pub l2_cell: Vec<f64>,
    /// `|u|_{H1(T)}` per cell.
    pub h1_cell: Vec<f64>,
    /// Sampled maximum of `|u|`.
    pub linf: f64,
    /// `||[u]||_{L2(F)}` per interior face.
    pub face_jump: Vec<f64>,
    /// `(||grad_h u||^2 + sum_F h_F^{-1} ||[u]||_F^2)^{1/2}`.
    pub dg: f64,
}

impl BrokenNorms {
    pub fn l2(&self) -> f64 {
        self.l2_squared().sqrt()
    }

    pub fn l2_squared(&self) -> f64 {
        self.l2_cell.iter().map(|v| v * v).sum()
    }

    pub fn h1_seminorm_squared(&self) -> f64 {
        self.h1_cell.iter().map(|v| v * v).sum()
    }
}

pub fn broken_norms(u: &DgField) -> BrokenNorms {
    let space = u.space();
    let n = space.dofs_per_cell();
    let tab = space.data_tabulation();
    let mut l2_cell = Vec::with_capacity(space.num_cells());
    let mut h1_cell = Vec::with_capacity(space.num_cells());
    for c in 0..space.num_cells() {
        let g = space.geometry(c);
        let coeffs = u.cell_coeffs(c);
        let (mut l2, mut h1) = (0.0, 0.0);
        for (q, &w) in tab.rule.weights.iter().enumerate() {
            let mut v = 0.0;
            let mut gr = [0.0; 2];
            for i in 0..n {
                v += coeffs[i] * tab.values[q * n + i];
                gr[0] += coeffs[i] * tab.gradients[q * n + i][0];
                gr[1] += coeffs[i] * tab.gradients[q * n + i][1];
            }
            let gp = g.physical_gradient(gr);
            l2 += w * v * v;
            h1 += w * (gp[0] * gp[0] + gp[1] * gp[1]);
        }
        l2_cell.push((l2 * g.det.abs()).sqrt());
        h1_cell.push((h1 * g.det.abs()).sqrt());
    }
    let mut face_jump = Vec::with_capacity(space.mesh().interior_faces().len());
    let mut penalty = 0.0;
    for face in space.mesh().interior_faces() {
        let tr = u.interior_traces(face);
        let j2: f64 = tr.weights.iter().zip(tr.jump()).map(|(w, j)| w * j * j).sum();
        face_jump.push(j2.sqrt());
        penalty += j2 / face.length;
    }
    let h1: f64 = h1_cell.iter().map(|v| v * v).sum();
    BrokenNorms {
        linf: sampled_linf(u, 0),
        l2_cell,
        h1_cell,
        face_jump,
        dg: (h1 + penalty).sqrt(),
    }
}

/// Sample points of one cell in reference coordinates: the data quadrature
/// nodes, the vertices, the edge quadrature nodes and, for `refinement > 0`,
/// the lattice `{(a, b) / m : a + b <= m}` with `m = 2^refinement * (k + 1)`.
/// Refining only adds points.
pub fn reference_samples(u: &DgField, refinement: u32) -> Vec<[f64; 2]> {
    let space = u.space();
    let mut pts: Vec<[f64; 2]> = space.data_tabulation().rule.points.clone();
    pts.extend([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
    for &s in &space.edge_rule().points {
        pts.extend([[s, 0.0], [1.0 - s, s], [0.0, s]]);
    }
    if refinement > 0 {
        let m = (1usize << refinement) * (space.degree() + 1);
        for a in 0..=m {
            for b in 0..=m - a {
                pts.push([a as f64 / m as f64, b as f64 / m as f64]);
            }
        }
    }
    pts
}

/// Maximum of `|u|` over the sample set of every cell.
pub fn sampled_linf(u: &DgField, refinement: u32) -> f64 {
    let pts = reference_samples(u, refinement);
    let mut max = 0.0f64;
    for c in 0..u.space().num_cells() {
        for &xi in &pts {
            max = max.max(u.value_ref(c, xi).abs());
        }
    }
    max
}

/// Maximum of the Euclidean norm of the broken gradient over the samples.
pub fn sampled_gradient_linf(u: &DgField, refinement: u32) -> f64 {
    let pts = reference_samples(u, refinement);
    let mut max = 0.0f64;
    for c in 0..u.space().num_cells() {
        for &xi in &pts {
            let g = u.gradient_ref(c, xi);
            max = max.max(g[0].hypot(g[1]));
        }
    }
    max
}

/// Sampled maximum of `u` on a uniform `m x m` grid of physical points.
pub fn grid_max(u: &DgField, m: usize) -> f64 {
    grid_points(u.space().mesh().rectangle(), m)
        .map(|p| u.evaluate_at(p))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Row-major `m x m` grid including the rectangle's corners.
pub fn grid_points(r: crate::mesh::Rectangle, m: usize) -> impl Iterator<Item = Point> {
    let step = |len: f64| if m > 1 { len / (m - 1) as f64 } else { 0.0 };
    let (dx, dy) = (step(r.width()), step(r.height()));
    (0..m).flat_map(move |j| (0..m).map(move |i| [r.x_min + i as f64 * dx, r.y_min + j as f64 * dy]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{Mesh, Rectangle};
    use crate::space::DgSpace;
    use std::sync::Arc;

    fn space(level: u32, k: usize) -> Arc<DgSpace> {
        DgSpace::new(Arc::new(Mesh::uniform(level, Rectangle::UNIT).unwrap()), k)
    }

    #[test]
    fn norms_of_simple_fields() {
        let s = space(2, 2);
        let c = broken_norms(&s.constant_field(-3.0));
        assert!((c.l2() - 3.0).abs() < 1e-13);
        assert!(c.h1_seminorm_squared() < 1e-24);
        assert!(c.dg < 1e-12);
        assert!((c.linf - 3.0).abs() < 1e-13);
        let x = broken_norms(&s.l2_project(|p| p[0]));
        assert!((x.h1_seminorm_squared() - 1.0).abs() < 1e-13);
        assert!((x.dg - 1.0).abs() < 1e-12);
        assert!(x.face_jump.iter().all(|j| *j < 1e-13));
        assert!((x.linf - 1.0).abs() < 1e-13);
    }

    #[test]
    fn refinement_never_decreases_linf() {
        let s = space(2, 2);
        let u = s.l2_project(|p| (7.0 * p[0]).sin() * (5.0 * p[1]).cos());
        let mut last = 0.0;
        for r in 0..4 {
            let v = sampled_linf(&u, r);
            assert!(v >= last);
            last = v;
        }
    }

    #[test]
    fn grid_covers_corners() {
        let pts: Vec<_> = grid_points(Rectangle::UNIT, 3).collect();
        assert_eq!(pts.len(), 9);
        assert_eq!(pts[0], [0.0, 0.0]);
        assert_eq!(pts[8], [1.0, 1.0]);
        assert_eq!(pts[1], [0.5, 0.0]);
    }
}
