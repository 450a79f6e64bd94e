//! Block-sparse matrices with 16×1 blocks (16 consecutive rows, one column).
//!
//! A whole block is either stored or pruned, so the kernel streams 16 weights
//! per input element and keeps the accumulators in registers.

use super::dense::Matrix;
use super::sparse::{check_target, kept_count, SparseMatrix};
use crate::error::{ensure_len, Error, Result};

pub const BLOCK: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct BlockSparse {
    rows: usize,
    cols: usize,
    /// Per block-row offsets into `block_cols`, length `rows / BLOCK + 1`.
    offsets: Vec<u32>,
    block_cols: Vec<u32>,
    /// `BLOCK` values per stored block, in row order.
    values: Vec<f32>,
}

impl BlockSparse {
    fn check_rows(rows: usize) -> Result<()> {
        if rows == 0 || rows % BLOCK != 0 {
            return Err(Error::Config(format!(
                "block-sparse rows must be a positive multiple of {BLOCK}, got {rows}"
            )));
        }
        Ok(())
    }

    /// Keeps the `⌈target·blocks⌉` blocks with the largest L2 norm, ties going
    /// to the earlier `(block_row, col)` position.
    pub fn prune(dense: &Matrix, target: f64) -> Result<Self> {
        check_target(target)?;
        Self::check_rows(dense.rows)?;
        dense.check_finite()?;
        let brows = dense.rows / BLOCK;
        let total = brows * dense.cols;
        let norms: Vec<f64> = (0..total)
            .map(|i| {
                let (br, c) = (i / dense.cols, i % dense.cols);
                (0..BLOCK)
                    .map(|k| (dense.get(br * BLOCK + k, c) as f64).powi(2))
                    .sum()
            })
            .collect();
        let keep = kept_count(target, total);
        let mut order: Vec<u32> = (0..total as u32).collect();
        if keep < total {
            order.select_nth_unstable_by(keep - 1, |a, b| {
                norms[*b as usize].total_cmp(&norms[*a as usize]).then(a.cmp(b))
            });
        }
        let mut mask = vec![false; total];
        for &i in &order[..keep] {
            mask[i as usize] = true;
        }
        Ok(Self::from_mask(dense, |br, c| mask[br * dense.cols + c]))
    }

    fn from_mask(dense: &Matrix, keep: impl Fn(usize, usize) -> bool) -> Self {
        let brows = dense.rows / BLOCK;
        let mut offsets = vec![0u32];
        let mut block_cols = Vec::new();
        let mut values = Vec::new();
        for br in 0..brows {
            for c in 0..dense.cols {
                if keep(br, c) {
                    block_cols.push(c as u32);
                    values.extend((0..BLOCK).map(|k| dense.get(br * BLOCK + k, c)));
                }
            }
            offsets.push(block_cols.len() as u32);
        }
        Self {
            rows: dense.rows,
            cols: dense.cols,
            offsets,
            block_cols,
            values,
        }
    }

    /// Regroups a CSR matrix into blocks. A block is stored when any of its
    /// 16 rows has an entry in that column; missing entries become zeros.
    pub fn from_csr(m: &SparseMatrix) -> Result<Self> {
        Self::check_rows(m.rows())?;
        let mut present = vec![false; m.rows() / BLOCK * m.cols()];
        for r in 0..m.rows() {
            for (c, _) in m.row(r) {
                present[r / BLOCK * m.cols() + c] = true;
            }
        }
        let dense = m.to_dense();
        Ok(Self::from_mask(&dense, |br, c| present[br * m.cols() + c]))
    }

    /// Expands every stored block into explicit CSR entries, zeros included,
    /// so that `from_csr(to_csr())` reproduces the same block set.
    pub fn to_csr(&self) -> SparseMatrix {
        let mut offsets = vec![0u32];
        let mut cols = Vec::with_capacity(self.values.len());
        let mut vals = Vec::with_capacity(self.values.len());
        for r in 0..self.rows {
            let br = r / BLOCK;
            let k = r % BLOCK;
            for e in self.offsets[br] as usize..self.offsets[br + 1] as usize {
                cols.push(self.block_cols[e]);
                vals.push(self.values[e * BLOCK + k]);
            }
            offsets.push(cols.len() as u32);
        }
        SparseMatrix::from_parts(self.rows, self.cols, offsets, cols, vals)
            .expect("block layout yields valid CSR")
    }

    pub fn to_dense(&self) -> Matrix {
        self.to_csr().to_dense()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn density(&self) -> f64 {
        self.values.len() as f64 / (self.rows * self.cols) as f64
    }

    /// `y += A x`.
    #[inline]
    pub fn spmv_acc(&self, x: &[f32], y: &mut [f32]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(y.len(), self.rows);
        #[cfg(target_arch = "x86_64")]
        if super::simd::has_avx2_fma() {
            // SAFETY: the required CPU features were detected at runtime.
            unsafe { self.spmv_acc_fma(x, y) };
            return;
        }
        self.kernel::<false>(x, y);
    }

    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "avx2,fma")]
    unsafe fn spmv_acc_fma(&self, x: &[f32], y: &mut [f32]) {
        self.kernel::<true>(x, y);
    }

    #[inline(always)]
    fn kernel<const FMA: bool>(&self, x: &[f32], y: &mut [f32]) {
        for (br, out) in y.chunks_exact_mut(BLOCK).enumerate() {
            let (a, b) = (self.offsets[br] as usize, self.offsets[br + 1] as usize);
            // two accumulators hide the FMA latency
            let mut acc = [[0.0f32; BLOCK]; 2];
            let cols = &self.block_cols[a..b];
            let vals = &self.values[a * BLOCK..b * BLOCK];
            let mut c2 = cols.chunks_exact(2);
            let mut v2 = vals.chunks_exact(2 * BLOCK);
            for (c, w) in c2.by_ref().zip(v2.by_ref()) {
                for j in 0..2 {
                    let xv = x[c[j] as usize];
                    let w: &[f32; BLOCK] = w[j * BLOCK..(j + 1) * BLOCK].try_into().unwrap();
                    for k in 0..BLOCK {
                        acc[j][k] = super::simd::madd::<FMA>(w[k], xv, acc[j][k]);
                    }
                }
            }
            for (&c, w) in c2.remainder().iter().zip(v2.remainder().chunks_exact(BLOCK)) {
                let xv = x[c as usize];
                for k in 0..BLOCK {
                    acc[0][k] = super::simd::madd::<FMA>(w[k], xv, acc[0][k]);
                }
            }
            for k in 0..BLOCK {
                out[k] += acc[0][k] + acc[1][k];
            }
        }
    }

    #[inline]
    pub fn spmv_into(&self, x: &[f32], y: &mut [f32]) {
        y.fill(0.0);
        self.spmv_acc(x, y);
    }

    pub fn spmv(&self, x: &[f32]) -> Result<Vec<f32>> {
        ensure_len("block spmv input", self.cols, x.len())?;
        let mut y = vec![0.0; self.rows];
        self.spmv_acc(x, &mut y);
        Ok(y)
    }
}
