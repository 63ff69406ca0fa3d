//! Geometric multigrid on the nested family of uniform triangulations.
//!
//! Refining level `l` to `l + 1` splits every triangle into its four
//! midpoint children, so the dG spaces are nested and prolongation is exact
//! polynomial injection. Coarse operators are re-assembled on each level.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::Result;
use crate::mesh::Mesh;
use crate::quadrature::TriangleRule;
use crate::solver::dense_solve;
use crate::space::DgSpace;
use crate::sparse::SparseOperator;

/// Injection from level `l - 1` to level `l`.
#[derive(Debug)]
struct Prolongation {
    parent: Vec<u32>,
    /// One row-major `n x n` block per fine cell.
    blocks: Vec<f64>,
    n: usize,
}

impl Prolongation {
    fn new(coarse: &DgSpace, fine: &DgSpace) -> Prolongation {
        let n = fine.dofs_per_cell();
        let rule = TriangleRule::new(2 * fine.degree());
        let mut parent = Vec::with_capacity(fine.num_cells());
        let mut blocks = Vec::with_capacity(fine.num_cells() * n * n);
        let mut vf = vec![0.0; n];
        let mut vc = vec![0.0; n];
        for c in 0..fine.num_cells() {
            let p = coarse.mesh().locate(fine.mesh().centroid(c));
            parent.push(p as u32);
            let gf = fine.geometry(c);
            let gc = coarse.geometry(p);
            let mut blk = vec![0.0; n * n];
            for (xi, &w) in rule.points.iter().zip(&rule.weights) {
                fine.basis().values_into(*xi, &mut vf);
                coarse.basis().values_into(gc.to_reference(gf.to_physical(*xi)), &mut vc);
                for i in 0..n {
                    for j in 0..n {
                        blk[i * n + j] += w * vf[i] * vc[j];
                    }
                }
            }
            blocks.extend(blk);
        }
        Prolongation { parent, blocks, n }
    }

    /// `fine += P coarse`.
    fn prolong_add(&self, coarse: &[f64], fine: &mut [f64]) {
        let n = self.n;
        for (c, &p) in self.parent.iter().enumerate() {
            let blk = &self.blocks[c * n * n..(c + 1) * n * n];
            let src = &coarse[p as usize * n..(p as usize + 1) * n];
            for i in 0..n {
                fine[c * n + i] += blk[i * n..(i + 1) * n].iter().zip(src).map(|(a, v)| a * v).sum::<f64>();
            }
        }
    }

    /// `coarse = P^T fine`.
    fn restrict(&self, fine: &[f64], coarse: &mut [f64]) {
        let n = self.n;
        coarse.iter_mut().for_each(|v| *v = 0.0);
        for (c, &p) in self.parent.iter().enumerate() {
            let blk = &self.blocks[c * n * n..(c + 1) * n * n];
            let src = &fine[c * n..(c + 1) * n];
            for j in 0..n {
                let mut s = 0.0;
                for i in 0..n {
                    s += blk[i * n + j] * src[i];
                }
                coarse[p as usize * n + j] += s;
            }
        }
    }
}

/// Spaces of one degree on levels `1..=finest` of a rectangle.
#[derive(Debug)]
pub struct SpaceHierarchy {
    spaces: Vec<Arc<DgSpace>>,
    prolongations: Vec<Prolongation>,
}

impl SpaceHierarchy {
    pub fn new(finest: &Arc<DgSpace>) -> Result<SpaceHierarchy> {
        let mesh = finest.mesh();
        let mut spaces = Vec::new();
        for level in 1..mesh.level() {
            let m = Arc::new(Mesh::uniform(level, mesh.rectangle())?);
            spaces.push(DgSpace::new(m, finest.degree()));
        }
        spaces.push(finest.clone());
        let prolongations = spaces.windows(2).map(|w| Prolongation::new(&w[0], &w[1])).collect();
        Ok(SpaceHierarchy { spaces, prolongations })
    }

    pub fn spaces(&self) -> &[Arc<DgSpace>] {
        &self.spaces
    }

    pub fn finest(&self) -> &Arc<DgSpace> {
        self.spaces.last().expect("hierarchy is never empty")
    }
}

#[derive(Debug)]
struct Level {
    op: Arc<SparseOperator>,
    inv_diag: Vec<f64>,
}

/// Symmetric V-cycle preconditioner with block Gauss-Seidel smoothing
/// (forward before, backward after the coarse correction).
#[derive(Debug)]
pub struct Multigrid {
    hierarchy: Arc<SpaceHierarchy>,
    levels: Vec<Level>,
    coarse: DMatrix<f64>,
    smoothing_steps: usize,
}

impl Multigrid {
    /// `finest_op` must be assembled on the finest space of `hierarchy`;
    /// `assemble` rebuilds the same operator on coarser spaces.
    pub fn new(
        hierarchy: Arc<SpaceHierarchy>,
        finest_op: Arc<SparseOperator>,
        assemble: impl Fn(&Arc<DgSpace>) -> SparseOperator,
    ) -> Result<Multigrid> {
        let count = hierarchy.spaces.len();
        let mut levels = Vec::with_capacity(count);
        for (l, space) in hierarchy.spaces.iter().enumerate() {
            let op = if l + 1 == count {
                finest_op.clone()
            } else {
                Arc::new(assemble(space))
            };
            let inv_diag = op.inverse_diagonal_blocks().ok_or(crate::Error::Solver {
                what: "multigrid smoother setup",
                iterations: 0,
                residual: f64::INFINITY,
            })?;
            levels.push(Level { op, inv_diag });
        }
        let coarse = levels[0].op.to_dense();
        Ok(Multigrid {
            hierarchy,
            levels,
            coarse,
            smoothing_steps: 2,
        })
    }

    pub fn operator(&self) -> &Arc<SparseOperator> {
        &self.levels.last().expect("at least one level").op
    }

    /// `z = V(r)`, one V-cycle from a zero initial guess.
    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.iter_mut().for_each(|v| *v = 0.0);
        self.cycle(self.levels.len() - 1, r, z);
    }

    fn cycle(&self, l: usize, b: &[f64], x: &mut [f64]) {
        if l == 0 {
            let sol = dense_solve(&self.coarse, b).expect("coarse operator is nonsingular");
            x.copy_from_slice(&sol);
            return;
        }
        let level = &self.levels[l];
        for _ in 0..self.smoothing_steps {
            level.op.gauss_seidel_sweep(&level.inv_diag, b, x, true);
        }
        let mut r = level.op.apply(x);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        let prolong = &self.hierarchy.prolongations[l - 1];
        let mut rc = vec![0.0; self.levels[l - 1].op.dim()];
        prolong.restrict(&r, &mut rc);
        let mut ec = vec![0.0; rc.len()];
        self.cycle(l - 1, &rc, &mut ec);
        prolong.prolong_add(&ec, x);
        for _ in 0..self.smoothing_steps {
            level.op.gauss_seidel_sweep(&level.inv_diag, b, x, false);
        }
    }
}
