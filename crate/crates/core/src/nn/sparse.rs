use serde::{Deserialize, Serialize};

use super::dense::Matrix;
use crate::error::{ensure_len, Error, Result};

/// Compressed-sparse-row matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_offsets: Vec<u32>,
    col_indices: Vec<u32>,
    values: Vec<f32>,
    density: f64,
}

impl SparseMatrix {
    /// Builds a matrix from raw CSR arrays and validates every invariant.
    pub fn from_parts(
        rows: usize,
        cols: usize,
        row_offsets: Vec<u32>,
        col_indices: Vec<u32>,
        values: Vec<f32>,
    ) -> Result<Self> {
        ensure_len("csr row_offsets", rows + 1, row_offsets.len())?;
        ensure_len("csr values", col_indices.len(), values.len())?;
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidInput("sparse matrix with zero extent".into()));
        }
        if row_offsets[0] != 0 || row_offsets[rows] as usize != col_indices.len() {
            return Err(Error::InvalidInput("csr row_offsets do not span the entries".into()));
        }
        for r in 0..rows {
            let (a, b) = (row_offsets[r] as usize, row_offsets[r + 1] as usize);
            if a > b {
                return Err(Error::InvalidInput(format!("csr row_offsets decrease at row {r}")));
            }
            let row = &col_indices[a..b];
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidInput(format!(
                    "csr column indices not strictly increasing in row {r}"
                )));
            }
            if row.last().is_some_and(|&c| c as usize >= cols) {
                return Err(Error::InvalidInput(format!("csr column out of range in row {r}")));
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite sparse value".into()));
        }
        let density = values.len() as f64 / (rows * cols) as f64;
        Ok(Self {
            rows,
            cols,
            row_offsets,
            col_indices,
            values,
            density,
        })
    }

    /// Keeps every entry of `dense` for which `keep(row, col)` holds.
    pub fn from_dense_filter(dense: &Matrix, mut keep: impl FnMut(usize, usize) -> bool) -> Result<Self> {
        let mut offsets = Vec::with_capacity(dense.rows + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        offsets.push(0);
        for r in 0..dense.rows {
            for c in 0..dense.cols {
                if keep(r, c) {
                    cols.push(c as u32);
                    vals.push(dense.get(r, c));
                }
            }
            offsets.push(cols.len() as u32);
        }
        Self::from_parts(dense.rows, dense.cols, offsets, cols, vals)
    }

    pub fn from_dense(dense: &Matrix) -> Result<Self> {
        Self::from_dense_filter(dense, |_, _| true)
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
        self.density
    }

    pub fn row_offsets(&self) -> &[u32] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[u32] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    /// Iterates `(col, value)` pairs of row `r`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f32)> + '_ {
        let (a, b) = (self.row_offsets[r] as usize, self.row_offsets[r + 1] as usize);
        self.col_indices[a..b]
            .iter()
            .zip(&self.values[a..b])
            .map(|(&c, &v)| (c as usize, v))
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                m.set(r, c, v);
            }
        }
        m
    }

    /// `y = A x`, shape-checked in debug builds only.
    #[inline]
    pub fn spmv_into(&self, x: &[f32], y: &mut [f32]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(y.len(), self.rows);
        for (r, yr) in y.iter_mut().enumerate() {
            *yr = self.row_dot(r, x);
        }
    }

    /// `y += A x`.
    #[inline]
    pub fn spmv_acc(&self, x: &[f32], y: &mut [f32]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(y.len(), self.rows);
        for (r, yr) in y.iter_mut().enumerate() {
            *yr += self.row_dot(r, x);
        }
    }

    #[inline]
    fn row_dot(&self, r: usize, x: &[f32]) -> f32 {
        let (a, b) = (self.row_offsets[r] as usize, self.row_offsets[r + 1] as usize);
        let idx = &self.col_indices[a..b];
        let val = &self.values[a..b];
        let mut acc = [0.0f32; 4];
        let ci = idx.chunks_exact(4);
        let cv = val.chunks_exact(4);
        let (ri, rv) = (ci.remainder(), cv.remainder());
        for (i, v) in ci.zip(cv) {
            for k in 0..4 {
                acc[k] += v[k] * x[i[k] as usize];
            }
        }
        let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
        for (&i, &v) in ri.iter().zip(rv) {
            s += v * x[i as usize];
        }
        s
    }

    pub fn spmv(&self, x: &[f32]) -> Result<Vec<f32>> {
        ensure_len("spmv input", self.cols, x.len())?;
        let mut y = vec![0.0; self.rows];
        self.spmv_into(x, &mut y);
        Ok(y)
    }
}

/// Number of entries kept at `target` density. Products that land within
/// 1e-9 of an integer are treated as exact so that e.g. 0.3·10 keeps 3.
pub(crate) fn kept_count(target: f64, total: usize) -> usize {
    let exact = target * total as f64;
    let k = if (exact - exact.round()).abs() < 1e-9 {
        exact.round()
    } else {
        exact.ceil()
    };
    (k as usize).clamp(1, total)
}

pub(crate) fn check_target(target: f64) -> Result<()> {
    if target.is_finite() && target > 0.0 && target <= 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("target density {target} outside (0, 1]")))
    }
}

/// One-shot magnitude pruning: keeps the `⌈target·rows·cols⌉` largest
/// magnitudes, ties going to the earlier `(row, col)` position.
pub fn sparsify(dense: &Matrix, target: f64) -> Result<SparseMatrix> {
    check_target(target)?;
    dense.check_finite()?;
    let total = dense.rows * dense.cols;
    if total == 0 {
        return Err(Error::InvalidInput("cannot sparsify an empty matrix".into()));
    }
    let keep = kept_count(target, total);
    let mut order: Vec<u32> = (0..total as u32).collect();
    let by_rank = |a: &u32, b: &u32| {
        let (va, vb) = (dense.data[*a as usize].abs(), dense.data[*b as usize].abs());
        vb.total_cmp(&va).then(a.cmp(b))
    };
    if keep < total {
        order.select_nth_unstable_by(keep - 1, by_rank);
    }
    let mut mask = vec![false; total];
    for &i in &order[..keep] {
        mask[i as usize] = true;
    }
    SparseMatrix::from_dense_filter(dense, |r, c| mask[r * dense.cols + c])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use proptest::prelude::*;

    fn masked_oracle(m: &SparseMatrix, x: &[f32]) -> Vec<f64> {
        let d = m.to_dense();
        (0..d.rows)
            .map(|r| (0..d.cols).map(|c| d.get(r, c) as f64 * x[c] as f64).sum())
            .collect()
    }

    #[test]
    fn identity_pattern() {
        let m = sparsify(&Matrix::identity(5), 1.0 / 5.0).unwrap();
        assert_eq!(m.nnz(), 5);
        let x = [1.0, -2.0, 3.0, 0.5, 7.0];
        assert_eq!(m.spmv(&x).unwrap(), x.to_vec());
        assert_eq!(m.spmv(&[0.0; 5]).unwrap(), vec![0.0; 5]);
    }

    #[test]
    fn spmv_dimension_error() {
        let m = SparseMatrix::from_dense(&Matrix::identity(3)).unwrap();
        assert!(matches!(m.spmv(&[1.0; 4]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn random_64_at_0_3_matches_dense() {
        let mut rng = RngStream::with_stream_id(11, 0);
        let d = Matrix::random(64, 64, 1.0, &mut rng);
        let m = sparsify(&d, 0.3).unwrap();
        let x: Vec<f32> = (0..64).map(|_| rng.symmetric(1.0)).collect();
        let y = m.spmv(&x).unwrap();
        for (a, b) in y.iter().zip(masked_oracle(&m, &x)) {
            assert!((*a as f64 - b).abs() < 1e-6);
        }
    }

    #[test]
    fn full_density_keeps_everything() {
        let mut rng = RngStream::with_stream_id(1, 0);
        let d = Matrix::random(7, 9, 1.0, &mut rng);
        let m = sparsify(&d, 1.0).unwrap();
        assert_eq!(m.nnz(), 63);
        assert_eq!(m.to_dense(), d);
    }

    #[test]
    fn top_eight_of_sixteen() {
        // distinct magnitudes, shuffled signs and positions
        let vals = [
            3.0, -14.0, 7.0, 1.0, -9.0, 12.0, -2.0, 16.0, 5.0, -11.0, 4.0, 8.0, -13.0, 6.0, 10.0,
            -15.0,
        ];
        let d = Matrix::from_vec(4, 4, vals.to_vec()).unwrap();
        let m = sparsify(&d, 0.5).unwrap();
        let mut mags: Vec<f32> = vals.iter().map(|v: &f32| v.abs()).collect();
        mags.sort_by(|a, b| b.total_cmp(a));
        let threshold = mags[7];
        let expected: Vec<f32> = vals.iter().copied().filter(|v| v.abs() >= threshold).collect();
        assert_eq!(m.values(), &expected[..]);
    }

    #[test]
    fn ties_prefer_earlier_positions() {
        let d = Matrix::from_vec(2, 2, vec![1.0, -1.0, 1.0, 1.0]).unwrap();
        let m = sparsify(&d, 0.5).unwrap();
        assert_eq!(m.row(0).collect::<Vec<_>>(), vec![(0, 1.0), (1, -1.0)]);
        assert_eq!(m.row(1).count(), 0);
    }

    #[test]
    fn per_gate_densities_combine_to_three_quarters() {
        let mut rng = RngStream::with_stream_id(5, 0);
        let h = 96;
        let mut nnz = 0;
        for t in [0.685, 0.685, 0.88] {
            nnz += sparsify(&Matrix::random(h, h, 1.0, &mut rng), t).unwrap().nnz();
        }
        let combined = nnz as f64 / (3 * h * h) as f64;
        assert!((combined - 0.75).abs() <= 1.0 / (h * h) as f64);
    }

    #[test]
    fn rejects_bad_input() {
        let mut d = Matrix::identity(3);
        assert!(sparsify(&d, 0.0).is_err());
        assert!(sparsify(&d, 1.5).is_err());
        d.set(1, 1, f32::NAN);
        assert!(sparsify(&d, 0.5).is_err());
        assert!(SparseMatrix::from_parts(1, 3, vec![0, 2], vec![2, 1], vec![1.0, 1.0]).is_err());
        assert!(SparseMatrix::from_parts(1, 3, vec![0, 1], vec![3], vec![1.0]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn spmv_matches_masked_dense(rows in 1usize..40, cols in 1usize..40,
                                     density in 0.01f64..=1.0, seed in any::<u64>()) {
            let mut rng = RngStream::with_stream_id(seed, 0);
            let d = Matrix::random(rows, cols, 1.0, &mut rng);
            let m = sparsify(&d, density).unwrap();
            let x: Vec<f32> = (0..cols).map(|_| rng.symmetric(2.0)).collect();
            let y = m.spmv(&x).unwrap();
            for (a, b) in y.iter().zip(masked_oracle(&m, &x)) {
                prop_assert!((*a as f64 - b).abs() < 1e-6);
            }
            let total = (rows * cols) as f64;
            prop_assert!((m.density() - density).abs() <= 1.0 / total + 1e-12);
            // kept values are copied verbatim and dominate every dropped one
            let min_kept = m.values().iter().map(|v| v.abs()).fold(f32::INFINITY, f32::min);
            let dense = m.to_dense();
            for r in 0..rows {
                for c in 0..cols {
                    let v = dense.get(r, c);
                    if v != 0.0 { prop_assert_eq!(v, d.get(r, c)); }
                }
            }
            let dropped_max = (0..rows * cols)
                .filter(|&i| m.row(i / cols).all(|(c, _)| c != i % cols))
                .map(|i| d.data[i].abs())
                .fold(0.0f32, f32::max);
            prop_assert!(dropped_max <= min_kept);
        }
    }
}
