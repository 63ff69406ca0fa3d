//! Orthonormal polynomial basis on the reference triangle.

use nalgebra::DMatrix;

use crate::quadrature::TriangleRule;

const CENTROID: f64 = 1.0 / 3.0;

/// `P_k` basis that is orthonormal in `L^2` of the reference triangle, so
/// every physical mass block is `|det J| * I`.
///
/// Built by Cholesky-orthogonalising monomials centred at the reference
/// centroid; `coefficients[(i, j)]` is the weight of monomial `j` in basis
/// function `i`.
#[derive(Debug, Clone)]
pub struct ReferenceBasis {
    degree: usize,
    exponents: Vec<(i32, i32)>,
    coefficients: DMatrix<f64>,
}

pub fn dimension(degree: usize) -> usize {
    (degree + 1) * (degree + 2) / 2
}

impl ReferenceBasis {
    pub fn new(degree: usize) -> ReferenceBasis {
        assert!((1..=6).contains(&degree), "polynomial degree must be in 1..=6");
        let exponents: Vec<(i32, i32)> = (0..=degree as i32)
            .flat_map(|total| (0..=total).rev().map(move |a| (a, total - a)))
            .collect();
        let n = exponents.len();
        let rule = TriangleRule::new(2 * degree);
        let mut gram = DMatrix::<f64>::zeros(n, n);
        let mut m = vec![0.0; n];
        for (p, &w) in rule.points.iter().zip(&rule.weights) {
            for (mi, &(a, b)) in m.iter_mut().zip(&exponents) {
                *mi = (p[0] - CENTROID).powi(a) * (p[1] - CENTROID).powi(b);
            }
            for i in 0..n {
                for j in 0..n {
                    gram[(i, j)] += w * m[i] * m[j];
                }
            }
        }
        let l = gram.cholesky().expect("monomial Gram matrix is SPD").unpack();
        let coefficients = l
            .solve_lower_triangular(&DMatrix::identity(n, n))
            .expect("Cholesky factor is nonsingular");
        ReferenceBasis {
            degree,
            exponents,
            coefficients,
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Values of all basis functions at `xi`.
    pub fn values_into(&self, xi: [f64; 2], out: &mut [f64]) {
        let n = self.len();
        let mut m = [0.0; 32];
        for (j, &(a, b)) in self.exponents.iter().enumerate() {
            m[j] = pow(xi[0] - CENTROID, a) * pow(xi[1] - CENTROID, b);
        }
        for (i, o) in out.iter_mut().enumerate().take(n) {
            *o = (0..=i).map(|j| self.coefficients[(i, j)] * m[j]).sum();
        }
    }

    pub fn values(&self, xi: [f64; 2]) -> Vec<f64> {
        let mut v = vec![0.0; self.len()];
        self.values_into(xi, &mut v);
        v
    }

    /// Reference gradients of all basis functions at `xi`.
    pub fn gradients_into(&self, xi: [f64; 2], out: &mut [[f64; 2]]) {
        let n = self.len();
        let (x, y) = (xi[0] - CENTROID, xi[1] - CENTROID);
        let mut dx = [0.0; 32];
        let mut dy = [0.0; 32];
        for (j, &(a, b)) in self.exponents.iter().enumerate() {
            dx[j] = if a > 0 { a as f64 * pow(x, a - 1) * pow(y, b) } else { 0.0 };
            dy[j] = if b > 0 { b as f64 * pow(x, a) * pow(y, b - 1) } else { 0.0 };
        }
        for (i, o) in out.iter_mut().enumerate().take(n) {
            let mut g = [0.0; 2];
            for j in 0..=i {
                let c = self.coefficients[(i, j)];
                g[0] += c * dx[j];
                g[1] += c * dy[j];
            }
            *o = g;
        }
    }

    pub fn gradients(&self, xi: [f64; 2]) -> Vec<[f64; 2]> {
        let mut g = vec![[0.0; 2]; self.len()];
        self.gradients_into(xi, &mut g);
        g
    }

    /// Reference Hessians `[d_xx, d_xy, d_yy]` of all basis functions at `xi`.
    pub fn hessians(&self, xi: [f64; 2]) -> Vec<[f64; 3]> {
        let (x, y) = (xi[0] - CENTROID, xi[1] - CENTROID);
        let second = |a: i32, b: i32| -> [f64; 3] {
            let fa = a as f64;
            let fb = b as f64;
            let dxx = if a > 1 { fa * (fa - 1.0) * pow(x, a - 2) * pow(y, b) } else { 0.0 };
            let dxy = if a > 0 && b > 0 { fa * fb * pow(x, a - 1) * pow(y, b - 1) } else { 0.0 };
            let dyy = if b > 1 { fb * (fb - 1.0) * pow(x, a) * pow(y, b - 2) } else { 0.0 };
            [dxx, dxy, dyy]
        };
        let mono: Vec<[f64; 3]> = self.exponents.iter().map(|&(a, b)| second(a, b)).collect();
        (0..self.len())
            .map(|i| {
                let mut h = [0.0; 3];
                for (j, mj) in mono.iter().enumerate().take(i + 1) {
                    let c = self.coefficients[(i, j)];
                    for d in 0..3 {
                        h[d] += c * mj[d];
                    }
                }
                h
            })
            .collect()
    }
}

#[inline]
fn pow(x: f64, e: i32) -> f64 {
    match e {
        0 => 1.0,
        1 => x,
        2 => x * x,
        _ => x.powi(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthonormal_on_reference() {
        for k in 1..=4 {
            let basis = ReferenceBasis::new(k);
            assert_eq!(basis.len(), dimension(k));
            let rule = TriangleRule::new(2 * k);
            let n = basis.len();
            let mut gram = vec![0.0; n * n];
            for (p, &w) in rule.points.iter().zip(&rule.weights) {
                let v = basis.values(*p);
                for i in 0..n {
                    for j in 0..n {
                        gram[i * n + j] += w * v[i] * v[j];
                    }
                }
            }
            for i in 0..n {
                for j in 0..n {
                    let expected = if i == j { 1.0 } else { 0.0 };
                    assert!((gram[i * n + j] - expected).abs() < 1e-12, "k={k} ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn first_function_is_constant() {
        let basis = ReferenceBasis::new(2);
        let c = basis.values([0.1, 0.2])[0];
        assert!((c - 2f64.sqrt()).abs() < 1e-14);
        assert!(basis.gradients([0.3, 0.3])[0].iter().all(|g| g.abs() < 1e-14));
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let basis = ReferenceBasis::new(3);
        let xi = [0.21, 0.37];
        let h = 1e-5;
        let g = basis.gradients(xi);
        let hs = basis.hessians(xi);
        let vx = |dx: f64, dy: f64| basis.values([xi[0] + dx, xi[1] + dy]);
        let gx = |dx: f64, dy: f64| basis.gradients([xi[0] + dx, xi[1] + dy]);
        for i in 0..basis.len() {
            let fd_x = (vx(h, 0.0)[i] - vx(-h, 0.0)[i]) / (2.0 * h);
            let fd_y = (vx(0.0, h)[i] - vx(0.0, -h)[i]) / (2.0 * h);
            assert!((fd_x - g[i][0]).abs() < 1e-7);
            assert!((fd_y - g[i][1]).abs() < 1e-7);
            let fd_xx = (gx(h, 0.0)[i][0] - gx(-h, 0.0)[i][0]) / (2.0 * h);
            let fd_xy = (gx(0.0, h)[i][0] - gx(0.0, -h)[i][0]) / (2.0 * h);
            let fd_yy = (gx(0.0, h)[i][1] - gx(0.0, -h)[i][1]) / (2.0 * h);
            assert!((fd_xx - hs[i][0]).abs() < 1e-6);
            assert!((fd_xy - hs[i][1]).abs() < 1e-6);
            assert!((fd_yy - hs[i][2]).abs() < 1e-6);
        }
    }
}
