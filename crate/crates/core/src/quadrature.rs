//! Gauss rules on the reference edge `[0, 1]` and the reference triangle
//! `{(x, y) : x, y >= 0, x + y <= 1}`.

use std::f64::consts::PI;

#[derive(Debug, Clone)]
pub struct EdgeRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        dp = if d != 0.0 { d } else { dp };
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let dp = n as f64 * (z * p - p0) / (z * z - 1.0);
    (p, dp)
}

impl EdgeRule {
    /// Gauss rule on `[0, 1]` exact for polynomials of degree `degree`.
    pub fn new(degree: usize) -> EdgeRule {
        let n = degree / 2 + 1;
        let (x, w) = gauss_legendre(n);
        EdgeRule {
            points: x.iter().map(|&t| 0.5 * (t + 1.0)).collect(),
            weights: w.iter().map(|&w| 0.5 * w).collect(),
            degree: 2 * n - 1,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl TriangleRule {
    /// Collapsed (Duffy) tensor Gauss rule exact for total degree `degree`.
    ///
    /// The weights are positive and sum to the reference area 1/2.
    pub fn new(degree: usize) -> TriangleRule {
        // The collapse adds one degree in the first direction through the Jacobian.
        let n = (degree + 1) / 2 + 1;
        let (x, w) = gauss_legendre(n);
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for (&xu, &wu) in x.iter().zip(&w) {
            let u = 0.5 * (xu + 1.0);
            for (&xv, &wv) in x.iter().zip(&w) {
                let v = 0.5 * (xv + 1.0);
                points.push([u, v * (1.0 - u)]);
                weights.push(0.25 * wu * wv * (1.0 - u));
            }
        }
        TriangleRule {
            points,
            weights,
            degree: (2 * n - 2).max(degree),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}
