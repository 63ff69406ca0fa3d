//! Elliptic projection onto the dG space.
//!
//! `a_sip(P f, phi) = a_sip(f_I, phi)` for all test functions, where `f_I`
//! is the cellwise degree-(k+2) Lagrange interpolant of `f` (continuous, so
//! the form is well defined), and the constant kernel is fixed by
//! `int P f = int f`.

use std::sync::Arc;

use crate::discretization::Discretization;
use crate::error::Result;
use crate::forms::{sip_action, PenaltyConfig};
use crate::mesh::Point;
use crate::space::{DgField, DgSpace};

/// Quadrature degree used for `int f`.
const MEAN_DEGREE: usize = 20;

pub fn elliptic_project_with(f: impl Fn(Point) -> f64, disc: &Discretization) -> Result<DgField> {
    let space = disc.space();
    let interpolant = space.with_degree(space.degree() + 2).lagrange_interpolate(&f);
    let rhs = sip_action(&interpolant, space, disc.penalty().eta);
    let mut x = vec![0.0; space.num_dofs()];
    disc.solve_stiffness(&rhs, &mut x)?;
    let mut u = space.field(x)?;
    let target = space.integrate(&f, MEAN_DEGREE);
    let area = space.mesh().rectangle().area();
    let shift = (target - u.integral()) / area;
    let one = space.constant_field(1.0);
    for (c, o) in u.coeffs_mut().iter_mut().zip(one.coeffs()) {
        *c += shift * o;
    }
    Ok(u)
}

pub fn elliptic_project(f: impl Fn(Point) -> f64, space: &Arc<DgSpace>, eta: f64) -> Result<DgField> {
    let penalty = PenaltyConfig {
        eta,
        ..PenaltyConfig::for_degree(space.degree())
    };
    elliptic_project_with(f, &Discretization::new(space.clone(), penalty)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{Mesh, Rectangle};

    fn space(level: u32, k: usize) -> Arc<DgSpace> {
        DgSpace::new(Arc::new(Mesh::uniform(level, Rectangle::UNIT).unwrap()), k)
    }

    #[test]
    fn constants_and_affine_are_reproduced() {
        for k in [1, 2] {
            let s = space(3, k);
            let c = elliptic_project(|_| 2.5, &s, 10.0 * (k * k) as f64).unwrap();
            let expected = s.constant_field(2.5);
            for (a, b) in c.coeffs().iter().zip(expected.coeffs()) {
                assert!((a - b).abs() < 1e-10);
            }
            let f = |p: Point| 1.0 + 2.0 * p[0] - 0.5 * p[1];
            let u = elliptic_project(f, &s, 10.0 * (k * k) as f64).unwrap();
            let expected = s.l2_project(f);
            for (a, b) in u.coeffs().iter().zip(expected.coeffs()) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn mean_is_preserved_for_gaussian() {
        let s = space(4, 1);
        let f = |p: Point| ((-(p[0] - 0.5).powi(2) - (p[1] - 0.5).powi(2)) / 1e-2).exp();
        let u = elliptic_project(f, &s, 10.0).unwrap();
        // (sqrt(pi eps) erf(5))^2 with erfc(5) = 1.5374597944280349e-12.
        let exact = std::f64::consts::PI * 1e-2 * (1.0 - 1.5374597944280349e-12f64).powi(2);
        assert!((u.integral() - exact).abs() < 1e-12 * exact);
    }
}
