//! Cell-block sparse matrices for dG operators.
//!
//! Every dG operator couples the `n_k` coefficients of a cell with those of
//! the cell itself and of its face neighbours, so the matrix is stored as
//! dense `n_k x n_k` blocks in a block-CSR layout.

use nalgebra::DMatrix;

use crate::mesh::Mesh;

#[derive(Debug, Clone)]
pub struct SparseOperator {
    block: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    values: Vec<f64>,
    symmetric: bool,
}

impl SparseOperator {
    /// Zero operator with the cell-plus-neighbours pattern of `mesh`.
    pub fn dg_pattern(mesh: &Mesh, block: usize, symmetric: bool) -> SparseOperator {
        let mut row_ptr = Vec::with_capacity(mesh.num_cells() + 1);
        let mut cols = Vec::with_capacity(4 * mesh.num_cells());
        row_ptr.push(0);
        for c in 0..mesh.num_cells() {
            let mut row: Vec<u32> = std::iter::once(c).chain(mesh.neighbors(c)).map(|v| v as u32).collect();
            row.sort_unstable();
            cols.extend(row);
            row_ptr.push(cols.len());
        }
        let nnz = cols.len() * block * block;
        SparseOperator {
            block,
            row_ptr,
            cols,
            values: vec![0.0; nnz],
            symmetric,
        }
    }

    /// Zero block-diagonal operator.
    pub fn block_diagonal(num_blocks: usize, block: usize) -> SparseOperator {
        SparseOperator {
            block,
            row_ptr: (0..=num_blocks).collect(),
            cols: (0..num_blocks as u32).collect(),
            values: vec![0.0; num_blocks * block * block],
            symmetric: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.num_block_rows() * self.block
    }

    pub fn block_size(&self) -> usize {
        self.block
    }

    pub fn num_block_rows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    fn find(&self, row: usize, col: usize) -> Option<usize> {
        let range = self.row_ptr[row]..self.row_ptr[row + 1];
        self.cols[range.clone()]
            .binary_search(&(col as u32))
            .ok()
            .map(|k| range.start + k)
    }

    /// Mutable view of block `(row, col)`, row-major. Panics if the block is
    /// outside the pattern.
    pub fn block_mut(&mut self, row: usize, col: usize) -> &mut [f64] {
        let k = self
            .find(row, col)
            .unwrap_or_else(|| panic!("block ({row}, {col}) outside sparsity pattern"));
        let bb = self.block * self.block;
        &mut self.values[k * bb..(k + 1) * bb]
    }

    pub fn block(&self, row: usize, col: usize) -> Option<&[f64]> {
        let bb = self.block * self.block;
        self.find(row, col).map(|k| &self.values[k * bb..(k + 1) * bb])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let b = self.block;
        self.block(i / b, j / b).map_or(0.0, |blk| blk[(i % b) * b + j % b])
    }

    /// `y = A x`.
    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let b = self.block;
        let bb = b * b;
        for (r, yr) in y.chunks_exact_mut(b).enumerate() {
            yr.iter_mut().for_each(|v| *v = 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.cols[k] as usize;
                let xc = &x[c * b..(c + 1) * b];
                let blk = &self.values[k * bb..(k + 1) * bb];
                for (i, yi) in yr.iter_mut().enumerate() {
                    let row = &blk[i * b..(i + 1) * b];
                    *yi += row.iter().zip(xc).map(|(a, v)| a * v).sum::<f64>();
                }
            }
        }
    }

    /// `y = |A| |x|`, the scale against which the rounding error of `A x`
    /// is measured.
    pub fn apply_abs_into(&self, x: &[f64], y: &mut [f64]) {
        let b = self.block;
        let bb = b * b;
        for (r, yr) in y.chunks_exact_mut(b).enumerate() {
            yr.iter_mut().for_each(|v| *v = 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.cols[k] as usize;
                let xc = &x[c * b..(c + 1) * b];
                let blk = &self.values[k * bb..(k + 1) * bb];
                for (i, yi) in yr.iter_mut().enumerate() {
                    let row = &blk[i * b..(i + 1) * b];
                    *yi += row.iter().zip(xc).map(|(a, v)| (a * v).abs()).sum::<f64>();
                }
            }
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.apply_into(x, &mut y);
        y
    }

    /// `u^T A v`.
    pub fn bilinear(&self, u: &[f64], v: &[f64]) -> f64 {
        dot(u, &self.apply(v))
    }

    /// `sum_i alpha_i A_i` over operators with the same block size; the
    /// result's pattern is the union of the input patterns.
    pub fn linear_combination(terms: &[(f64, &SparseOperator)]) -> SparseOperator {
        assert!(!terms.is_empty());
        let b = terms[0].1.block;
        let rows = terms[0].1.num_block_rows();
        assert!(terms.iter().all(|(_, a)| a.block == b && a.num_block_rows() == rows));
        let bb = b * b;
        let mut row_ptr = Vec::with_capacity(rows + 1);
        let mut cols: Vec<u32> = Vec::new();
        row_ptr.push(0);
        for r in 0..rows {
            let mut row: Vec<u32> = terms
                .iter()
                .flat_map(|(_, a)| a.cols[a.row_ptr[r]..a.row_ptr[r + 1]].iter().copied())
                .collect();
            row.sort_unstable();
            row.dedup();
            cols.extend(row);
            row_ptr.push(cols.len());
        }
        let mut out = SparseOperator {
            block: b,
            row_ptr,
            cols,
            values: vec![0.0; 0],
            symmetric: terms.iter().all(|(_, a)| a.symmetric),
        };
        out.values = vec![0.0; out.cols.len() * bb];
        for (alpha, a) in terms {
            for r in 0..rows {
                for k in a.row_ptr[r]..a.row_ptr[r + 1] {
                    let c = a.cols[k] as usize;
                    let src = &a.values[k * bb..(k + 1) * bb];
                    let dst = out.block_mut(r, c);
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += alpha * s;
                    }
                }
            }
        }
        out
    }

    /// `max |A_ij - A_ji| / max |A_ij|`.
    pub fn symmetry_defect(&self) -> f64 {
        let b = self.block;
        let bb = b * b;
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for r in 0..self.num_block_rows() {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.cols[k] as usize;
                let blk = &self.values[k * bb..(k + 1) * bb];
                let Some(t) = self.block(c, r) else {
                    worst = worst.max(blk.iter().fold(0.0f64, |m, v| m.max(v.abs())));
                    continue;
                };
                for i in 0..b {
                    for j in 0..b {
                        worst = worst.max((blk[i * b + j] - t[j * b + i]).abs());
                    }
                }
            }
        }
        worst / scale
    }

    /// Inverses of the diagonal blocks, row-major, concatenated.
    pub fn inverse_diagonal_blocks(&self) -> Option<Vec<f64>> {
        let b = self.block;
        let mut out = Vec::with_capacity(self.num_block_rows() * b * b);
        for r in 0..self.num_block_rows() {
            let blk = self.block(r, r)?;
            let m = DMatrix::from_row_slice(b, b, blk);
            let inv = m.try_inverse()?;
            for i in 0..b {
                for j in 0..b {
                    out.push(inv[(i, j)]);
                }
            }
        }
        Some(out)
    }

    /// One block Gauss-Seidel sweep for `A x = rhs`.
    pub fn gauss_seidel_sweep(&self, inv_diag: &[f64], rhs: &[f64], x: &mut [f64], forward: bool) {
        let b = self.block;
        let bb = b * b;
        let rows = self.num_block_rows();
        let mut r = [0.0f64; 32];
        for step in 0..rows {
            let row = if forward { step } else { rows - 1 - step };
            r[..b].copy_from_slice(&rhs[row * b..(row + 1) * b]);
            for k in self.row_ptr[row]..self.row_ptr[row + 1] {
                let c = self.cols[k] as usize;
                if c == row {
                    continue;
                }
                let blk = &self.values[k * bb..(k + 1) * bb];
                let xc = &x[c * b..(c + 1) * b];
                for i in 0..b {
                    r[i] -= blk[i * b..(i + 1) * b].iter().zip(xc).map(|(a, v)| a * v).sum::<f64>();
                }
            }
            let inv = &inv_diag[row * bb..(row + 1) * bb];
            for i in 0..b {
                x[row * b + i] = inv[i * b..(i + 1) * b].iter().zip(&r[..b]).map(|(a, v)| a * v).sum();
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let b = self.block;
        let bb = b * b;
        let mut m = DMatrix::zeros(n, n);
        for r in 0..self.num_block_rows() {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.cols[k] as usize;
                let blk = &self.values[k * bb..(k + 1) * bb];
                for i in 0..b {
                    for j in 0..b {
                        m[(r * b + i, c * b + j)] = blk[i * b + j];
                    }
                }
            }
        }
        m
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Rectangle;

    fn sample(mesh: &Mesh) -> SparseOperator {
        let mut a = SparseOperator::dg_pattern(mesh, 2, false);
        for r in 0..mesh.num_cells() {
            let blk = a.block_mut(r, r);
            blk.copy_from_slice(&[4.0 + r as f64, 1.0, 0.5, 3.0]);
            for n in mesh.neighbors(r).collect::<Vec<_>>() {
                let blk = a.block_mut(r, n);
                blk.copy_from_slice(&[-0.25, 0.1 * n as f64, 0.0, -0.5]);
            }
        }
        a
    }

    #[test]
    fn apply_matches_dense() {
        let mesh = Mesh::uniform(2, Rectangle::UNIT).unwrap();
        let a = sample(&mesh);
        let x: Vec<f64> = (0..a.dim()).map(|i| (i as f64 * 0.37).sin()).collect();
        let dense = a.to_dense() * nalgebra::DVector::from_column_slice(&x);
        for (u, v) in a.apply(&x).iter().zip(dense.iter()) {
            assert!((u - v).abs() < 1e-13);
        }
        assert_eq!(a.get(0, 1), 1.0);
    }

    #[test]
    fn linear_combination_merges_patterns() {
        let mesh = Mesh::uniform(2, Rectangle::UNIT).unwrap();
        let a = sample(&mesh);
        let mut d = SparseOperator::block_diagonal(mesh.num_cells(), 2);
        for r in 0..mesh.num_cells() {
            d.block_mut(r, r).copy_from_slice(&[1.0, 0.0, 0.0, 1.0]);
        }
        let c = SparseOperator::linear_combination(&[(2.0, &a), (-3.0, &d)]);
        let expected = a.to_dense() * 2.0 - d.to_dense() * 3.0;
        assert!((c.to_dense() - expected).abs().max() < 1e-15);
    }

    #[test]
    fn gauss_seidel_converges_for_dominant_matrix() {
        let mesh = Mesh::uniform(2, Rectangle::UNIT).unwrap();
        let a = sample(&mesh);
        let inv = a.inverse_diagonal_blocks().unwrap();
        let rhs: Vec<f64> = (0..a.dim()).map(|i| i as f64).collect();
        let mut x = vec![0.0; a.dim()];
        for i in 0..60 {
            a.gauss_seidel_sweep(&inv, &rhs, &mut x, i % 2 == 0);
        }
        let r: Vec<f64> = a.apply(&x).iter().zip(&rhs).map(|(u, v)| u - v).collect();
        assert!(norm(&r) < 1e-10 * norm(&rhs));
    }
}
