//! Krylov solvers used by the projections and the time stepper.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::sparse::{dot, norm};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveInfo {
    pub iterations: usize,
    /// `||b - A x|| / ||b||` as tracked by the method.
    pub relative_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovSettings {
    pub relative_tolerance: f64,
    pub max_iterations: usize,
    pub restart: usize,
}

impl Default for KrylovSettings {
    fn default() -> Self {
        KrylovSettings {
            relative_tolerance: 1e-12,
            max_iterations: 2000,
            restart: 60,
        }
    }
}

/// Preconditioned conjugate gradients. `precondition(r, z)` must apply a
/// symmetric positive definite operator. Converges for consistent singular
/// systems as long as `b` lies in the range of `A`.
pub fn conjugate_gradient(
    apply: impl Fn(&[f64], &mut [f64]),
    precondition: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    settings: KrylovSettings,
) -> Result<SolveInfo> {
    let n = b.len();
    let b_norm = norm(b);
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveInfo {
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let mut r = vec![0.0; n];
    apply(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut z = vec![0.0; n];
    precondition(&r, &mut z);
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut rel = norm(&r) / b_norm;
    for it in 0..settings.max_iterations {
        if rel <= settings.relative_tolerance {
            return Ok(SolveInfo {
                iterations: it,
                relative_residual: rel,
            });
        }
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        rel = norm(&r) / b_norm;
        precondition(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    if rel <= settings.relative_tolerance {
        return Ok(SolveInfo {
            iterations: settings.max_iterations,
            relative_residual: rel,
        });
    }
    Err(Error::Solver {
        what: "conjugate gradient",
        iterations: settings.max_iterations,
        residual: rel,
    })
}

/// Restarted GMRES with right preconditioning.
pub fn gmres(
    apply: impl Fn(&[f64], &mut [f64]),
    precondition: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    settings: KrylovSettings,
) -> Result<SolveInfo> {
    gmres_with_floor(apply, precondition, b, x, settings, 0.0)
}

/// GMRES that also accepts any iterate whose residual norm is at most
/// `floor`, typically the rounding error level of evaluating `A x`. Below
/// that level further iterations only fit noise.
pub fn gmres_with_floor(
    apply: impl Fn(&[f64], &mut [f64]),
    precondition: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    settings: KrylovSettings,
    floor: f64,
) -> Result<SolveInfo> {
    let n = b.len();
    let b_norm = norm(b);
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveInfo {
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let m = settings.restart.max(1);
    let mut total = 0;
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut rel;
    let mut previous_cycle = f64::INFINITY;
    loop {
        // True residual at the start of every cycle.
        let mut r = vec![0.0; n];
        apply(x, &mut r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        let beta = norm(&r);
        rel = beta / b_norm;
        // Stop when a whole restart cycle no longer makes progress (roundoff floor).
        if rel <= settings.relative_tolerance
            || beta <= floor
            || total >= settings.max_iterations
            || rel > 0.9 * previous_cycle
        {
            break;
        }
        previous_cycle = rel;
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        basis.push(r.iter().map(|v| v / beta).collect());
        let mut h = vec![vec![0.0; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut used = 0;
        for j in 0..m {
            precondition(&basis[j], &mut z);
            apply(&z, &mut w);
            for (i, v) in basis.iter().enumerate() {
                h[i][j] = dot(&w, v);
                for (wk, vk) in w.iter_mut().zip(v) {
                    *wk -= h[i][j] * vk;
                }
            }
            // Second Gram-Schmidt pass.
            for (i, v) in basis.iter().enumerate() {
                let c = dot(&w, v);
                h[i][j] += c;
                for (wk, vk) in w.iter_mut().zip(v) {
                    *wk -= c * vk;
                }
            }
            let wn = norm(&w);
            h[j + 1][j] = wn;
            for i in 0..j {
                let t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t;
            }
            let denom = h[j][j].hypot(h[j + 1][j]);
            cs[j] = h[j][j] / denom;
            sn[j] = h[j + 1][j] / denom;
            h[j][j] = denom;
            h[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            used = j + 1;
            total += 1;
            let est = g[j + 1].abs() / b_norm;
            if est <= 0.1 * settings.relative_tolerance
                || g[j + 1].abs() <= 0.1 * floor
                || total >= settings.max_iterations
                || wn == 0.0
            {
                break;
            }
            basis.push(w.iter().map(|v| v / wn).collect());
        }
        // Back substitution for the least-squares coefficients.
        let mut y = vec![0.0; used];
        for i in (0..used).rev() {
            let s: f64 = (i + 1..used).map(|k| h[i][k] * y[k]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        let mut update = vec![0.0; n];
        for (yi, v) in y.iter().zip(&basis) {
            for (u, vk) in update.iter_mut().zip(v) {
                *u += yi * vk;
            }
        }
        precondition(&update, &mut z);
        for (xi, zi) in x.iter_mut().zip(&z) {
            *xi += zi;
        }
    }
    if (rel <= settings.relative_tolerance || rel * b_norm <= floor) && rel.is_finite() {
        Ok(SolveInfo {
            iterations: total,
            relative_residual: rel,
        })
    } else {
        Err(Error::Solver {
            what: "GMRES",
            iterations: total,
            residual: rel,
        })
    }
}

/// Dense LU solve; used for coarse grids and small reference problems.
pub fn dense_solve(matrix: &DMatrix<f64>, rhs: &[f64]) -> Result<Vec<f64>> {
    let lu = matrix.clone().lu();
    lu.solve(&DVector::from_column_slice(rhs))
        .map(|v| v.as_slice().to_vec())
        .ok_or(Error::Solver {
            what: "dense LU",
            iterations: 0,
            residual: f64::INFINITY,
        })
}
