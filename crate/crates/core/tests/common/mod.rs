//! Brute-force reference implementations used as independent oracles.
//!
//! Everything here works on physical points only: fields are evaluated
//! through `value_in_cell_at` / `gradient_in_cell_at`, integrals use a
//! collapsed tensor Gauss rule, and Laplacians come from central second
//! differences (exact for the quadratic fields the oracles are used with).

#![allow(dead_code)]

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ksdg::estimators::{e0, e1, e1_tilde, e_minus1};
use ksdg::forms::{assemble_mass, assemble_sip, assemble_wsip, sip_action, PenaltyConfig};
use ksdg::mesh::{Mesh, Point, Rectangle};
use ksdg::space::{DgField, DgSpace};

/// Gauss-Legendre nodes and weights on `[0, 1]` by Newton iteration.
pub fn gauss01(n: usize) -> Vec<(f64, f64)> {
    (1..=n)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                let p = if n == 0 { 1.0 } else { p1 };
                dp = n as f64 * (x * p - p0) / (x * x - 1.0);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            (0.5 * (1.0 + x), 0.5 * w)
        })
        .collect()
}

/// Points and weights on a physical triangle (Duffy transform).
pub fn triangle_rule(v: [Point; 3], n: usize) -> Vec<(Point, f64)> {
    let g = gauss01(n);
    let e1 = [v[1][0] - v[0][0], v[1][1] - v[0][1]];
    let e2 = [v[2][0] - v[0][0], v[2][1] - v[0][1]];
    let area2 = (e1[0] * e2[1] - e1[1] * e2[0]).abs();
    let mut out = Vec::new();
    for &(s, ws) in &g {
        for &(t, wt) in &g {
            let (a, b) = (s, t * (1.0 - s));
            let p = [v[0][0] + a * e1[0] + b * e2[0], v[0][1] + a * e1[1] + b * e2[1]];
            out.push((p, ws * wt * (1.0 - s) * area2));
        }
    }
    out
}

pub fn segment_rule(a: Point, b: Point, n: usize) -> Vec<(Point, f64)> {
    let len = (b[0] - a[0]).hypot(b[1] - a[1]);
    gauss01(n)
        .into_iter()
        .map(|(s, w)| ([a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])], w * len))
        .collect()
}

pub fn diameter(v: [Point; 3]) -> f64 {
    let d = |a: Point, b: Point| (a[0] - b[0]).hypot(a[1] - b[1]);
    d(v[0], v[1]).max(d(v[1], v[2])).max(d(v[0], v[2]))
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

const N: usize = 8;

pub fn mass(u: &DgField, v: &DgField) -> f64 {
    let mesh = u.space().mesh();
    (0..mesh.num_cells())
        .map(|c| {
            triangle_rule(mesh.cell_vertices(c), N)
                .iter()
                .map(|(p, w)| w * u.value_in_cell_at(c, *p) * v.value_in_cell_at(c, *p))
                .sum::<f64>()
        })
        .sum()
}

/// `a(u, v)` with an optional diffusion field. Without one this is SIP with
/// penalty `eta / h_F`; with one it is wSIP with weights `w-/(w+ + w-)`,
/// `w+/(w+ + w-)` and penalty `eta * 2 w+ w- / (w+ + w-) / h_F`.
pub fn penalty_form(u: &DgField, v: &DgField, weight: Option<(&DgField, f64)>, eta: f64) -> f64 {
    let mesh = u.space().mesh();
    let mut total = 0.0;
    for c in 0..mesh.num_cells() {
        for (p, w) in triangle_rule(mesh.cell_vertices(c), N) {
            let k = weight.map_or(1.0, |(d, _)| d.value_in_cell_at(c, p));
            total += w * k * dot(u.gradient_in_cell_at(c, p), v.gradient_in_cell_at(c, p));
        }
    }
    for f in mesh.interior_faces() {
        let [c0, c1] = f.cells;
        for (p, w) in segment_rule(f.endpoints[0], f.endpoints[1], N) {
            let (om, gamma) = match weight {
                None => ([0.5, 0.5], 1.0),
                Some((d, eps)) => {
                    let (a, b) = (d.value_in_cell_at(c0, p), d.value_in_cell_at(c1, p));
                    let (a, b) = (a.max(eps), b.max(eps));
                    ([b / (a + b), a / (a + b)], 2.0 * a * b / (a + b))
                }
            };
            let k = |c: usize| weight.map_or(1.0, |(d, _)| d.value_in_cell_at(c, p));
            let avg = |q: &DgField| {
                om[0] * k(c0) * dot(q.gradient_in_cell_at(c0, p), f.normal)
                    + om[1] * k(c1) * dot(q.gradient_in_cell_at(c1, p), f.normal)
            };
            let jump = |q: &DgField| q.value_in_cell_at(c0, p) - q.value_in_cell_at(c1, p);
            total -= w * (avg(u) * jump(v) + avg(v) * jump(u));
            total += w * eta * gamma / f.length * jump(u) * jump(v);
        }
    }
    total
}

/// Laplacian of the cell polynomial by central second differences.
pub fn laplacian(u: &DgField, c: usize, p: Point) -> f64 {
    let d = 0.05;
    let f = |x: f64, y: f64| u.value_in_cell_at(c, [x, y]);
    let u0 = f(p[0], p[1]);
    (f(p[0] + d, p[1]) + f(p[0] - d, p[1]) + f(p[0], p[1] + d) + f(p[0], p[1] - d) - 4.0 * u0) / (d * d)
}

/// `sum h_T^a ||Lap u + f||^2 + sum h_F^b ||[grad u].n||^2 + pen^2 sum h_F^c ||[u]||^2`.
pub fn residual_estimator(u: &DgField, f: &DgField, powers: [i32; 3], pen: f64) -> f64 {
    let mesh: &Mesh = u.space().mesh();
    let mut total = 0.0;
    for c in 0..mesh.num_cells() {
        let v = mesh.cell_vertices(c);
        let h = diameter(v);
        let r: f64 = triangle_rule(v, N)
            .iter()
            .map(|(p, w)| w * (laplacian(u, c, *p) + f.value_in_cell_at(c, *p)).powi(2))
            .sum();
        total += h.powi(powers[0]) * r;
    }
    for face in mesh.interior_faces() {
        let [c0, c1] = face.cells;
        let (mut rg, mut rj) = (0.0, 0.0);
        for (p, w) in segment_rule(face.endpoints[0], face.endpoints[1], N) {
            let jg = dot(u.gradient_in_cell_at(c0, p), face.normal) - dot(u.gradient_in_cell_at(c1, p), face.normal);
            let jv = u.value_in_cell_at(c0, p) - u.value_in_cell_at(c1, p);
            rg += w * jg * jg;
            rj += w * jv * jv;
        }
        let hf = (face.endpoints[0][0] - face.endpoints[1][0]).hypot(face.endpoints[0][1] - face.endpoints[1][1]);
        total += hf.powi(powers[1]) * rg + pen * pen * hf.powi(powers[2]) * rj;
    }
    total.sqrt()
}

/// `|a - b| <= tol * scale`, with a message.
pub fn assert_close(a: f64, b: f64, scale: f64, tol: f64, what: &str) {
    assert!(
        (a - b).abs() <= tol * scale.max(f64::MIN_POSITIVE),
        "{what}: {a} vs {b} (difference {:.3e}, scale {scale:.3e})",
        (a - b).abs()
    );
}

pub fn random_field(space: &Arc<DgSpace>, rng: &mut ChaCha8Rng) -> DgField {
    space.field((0..space.num_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

/// Largest relative deviation between the library and the brute-force
/// oracles over `pairs` random field pairs per degree.
pub fn oracle_deviation(pairs: usize) -> Result<f64, String> {
    let mesh = Arc::new(Mesh::uniform(1, Rectangle::UNIT).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    let mut check = |lib: f64, oracle: f64, scale: f64, what: &str| -> Result<(), String> {
        let dev = (lib - oracle).abs() / scale.max(f64::MIN_POSITIVE);
        worst = worst.max(dev);
        if dev > 1e-12 {
            return Err(format!("{what}: library {lib:e} oracle {oracle:e}"));
        }
        Ok(())
    };
    for k in [1, 2] {
        let space = DgSpace::new(mesh.clone(), k);
        let pen = PenaltyConfig::for_degree(k);
        let m = assemble_mass(&space);
        let s = assemble_sip(&space, pen.eta);
        for _ in 0..pairs {
            let (u, v) = (random_field(&space, &mut rng), random_field(&space, &mut rng));
            // Cellwise constant, positive and discontinuous: the weighted
            // averages and the harmonic-mean penalty stay polynomial on
            // every face, so both quadratures are exact.
            let mut w = space.constant_field(1.0);
            let n = space.dofs_per_cell();
            for (i, c) in w.coeffs_mut().iter_mut().enumerate() {
                if i % n == 0 {
                    *c *= rng.gen_range(0.2..3.0);
                }
            }
            let (uc, vc) = (u.coeffs(), v.coeffs());

            let o = mass(&u, &v);
            let scale = (mass(&u, &u) * mass(&v, &v)).sqrt();
            check(m.bilinear(vc, uc), o, scale, "mass")?;

            let o = penalty_form(&u, &v, None, pen.eta);
            let scale = o.abs().max(penalty_form(&u, &u, None, pen.eta)).max(penalty_form(&v, &v, None, pen.eta));
            check(s.bilinear(vc, uc), o, scale, "sip")?;
            let action: f64 = sip_action(&u, &space, pen.eta).iter().zip(vc).map(|(a, b)| a * b).sum();
            check(action, o, scale, "sip action")?;

            let ww = assemble_wsip(&w, pen.sigma, pen.eps_w).operator;
            let o = penalty_form(&u, &v, Some((&w, pen.eps_w)), pen.sigma);
            let scale = o
                .abs()
                .max(penalty_form(&u, &u, Some((&w, pen.eps_w)), pen.sigma).abs())
                .max(penalty_form(&v, &v, Some((&w, pen.eps_w)), pen.sigma).abs());
            check(ww.bilinear(vc, uc), o, scale, "wsip")?;

            for (lib, powers, name) in [
                (e0(&u, &v, pen.eta).unwrap(), [4, 3, 1], "E0"),
                (e1(&u, &v, pen.eta).unwrap(), [2, 1, -1], "E1"),
                (e_minus1(&u, &v, pen.eta).unwrap(), [6, 5, 3], "E-1"),
            ] {
                let o = residual_estimator(&u, &v, powers, pen.eta);
                check(lib, o, o, name)?;
            }
            let o = residual_estimator(&u, &v.add_scaled(-1.0, &u), [2, 1, -1], pen.sigma);
            check(e1_tilde(&u, &v, pen.sigma).unwrap(), o, o, "E1 tilde")?;
        }
    }
    Ok(worst)
}
