use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};
use crate::rng::RngStream;

/// Dot product with 16 independent partial sums so the loop vectorises.
#[inline]
pub fn dot(a: &[f32], b: &[f32]) -> f32 {
    #[cfg(target_arch = "x86_64")]
    if super::simd::has_avx2_fma() {
        // SAFETY: the required CPU features were detected at runtime.
        return unsafe { dot_fma(a, b) };
    }
    dot_kernel::<false>(a, b)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn dot_fma(a: &[f32], b: &[f32]) -> f32 {
    dot_kernel::<true>(a, b)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn matvec_fma<const ACC: bool>(m: &Matrix, x: &[f32], y: &mut [f32]) {
    for (yr, row) in y.iter_mut().zip(m.data.chunks_exact(m.cols.max(1))) {
        let d = dot_kernel::<true>(row, x);
        *yr = if ACC { *yr + d } else { d };
    }
}

#[inline(always)]
fn dot_kernel<const FMA: bool>(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f32; 16];
    let ca = a.chunks_exact(16);
    let cb = b.chunks_exact(16);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for i in 0..16 {
            acc[i] = super::simd::madd::<FMA>(x[i], y[i], acc[i]);
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    let mut s = 0.0;
    for v in acc {
        s += v;
    }
    s + tail
}

/// `y += a·x`.
#[inline]
pub fn axpy(a: f32, x: &[f32], y: &mut [f32]) {
    #[cfg(target_arch = "x86_64")]
    if super::simd::has_avx2_fma() {
        // SAFETY: the required CPU features were detected at runtime.
        unsafe { axpy_fma(a, x, y) };
        return;
    }
    axpy_kernel::<false>(a, x, y);
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn axpy_fma(a: f32, x: &[f32], y: &mut [f32]) {
    axpy_kernel::<true>(a, x, y);
}

#[inline(always)]
fn axpy_kernel<const FMA: bool>(a: f32, x: &[f32], y: &mut [f32]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = super::simd::madd::<FMA>(a, xi, *yi);
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f32>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        ensure_len("matrix data", rows * cols, data.len())?;
        Ok(Self { rows, cols, data })
    }

    /// Uniform in `[-scale, scale)` with `scale = gain / sqrt(cols)`.
    pub fn random(rows: usize, cols: usize, gain: f32, rng: &mut RngStream) -> Self {
        let scale = gain / (cols.max(1) as f32).sqrt();
        Self {
            rows,
            cols,
            data: (0..rows * cols).map(|_| rng.symmetric(scale)).collect(),
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        t
    }

    /// `y += Wᵀ x`, i.e. one axpy per row. Faster than [`Matrix::matvec_acc`]
    /// on the transpose when the product has few inputs and many outputs.
    #[inline]
    pub fn transposed_matvec_acc(&self, x: &[f32], y: &mut [f32]) {
        debug_assert_eq!(x.len(), self.rows);
        debug_assert_eq!(y.len(), self.cols);
        for (r, &xr) in x.iter().enumerate() {
            axpy(xr, self.row(r), y);
        }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f32 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f32) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Rows `start..end` as a new matrix.
    pub fn row_block(&self, start: usize, end: usize) -> Self {
        Self {
            rows: end - start,
            cols: self.cols,
            data: self.data[start * self.cols..end * self.cols].to_vec(),
        }
    }

    /// `y = W x` without shape checks beyond debug assertions.
    #[inline]
    pub fn matvec_into(&self, x: &[f32], y: &mut [f32]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(y.len(), self.rows);
        #[cfg(target_arch = "x86_64")]
        if super::simd::has_avx2_fma() {
            // SAFETY: the required CPU features were detected at runtime.
            unsafe { matvec_fma::<false>(self, x, y) };
            return;
        }
        for (yr, row) in y.iter_mut().zip(self.data.chunks_exact(self.cols.max(1))) {
            *yr = dot_kernel::<false>(row, x);
        }
    }

    /// `y += W x`.
    #[inline]
    pub fn matvec_acc(&self, x: &[f32], y: &mut [f32]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(y.len(), self.rows);
        #[cfg(target_arch = "x86_64")]
        if super::simd::has_avx2_fma() {
            // SAFETY: the required CPU features were detected at runtime.
            unsafe { matvec_fma::<true>(self, x, y) };
            return;
        }
        for (yr, row) in y.iter_mut().zip(self.data.chunks_exact(self.cols.max(1))) {
            *yr += dot_kernel::<false>(row, x);
        }
    }

    pub fn matvec(&self, x: &[f32]) -> Result<Vec<f32>> {
        ensure_len("matvec input", self.cols, x.len())?;
        let mut y = vec![0.0; self.rows];
        self.matvec_into(x, &mut y);
        Ok(y)
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(Error::InvalidInput(format!(
                "non-finite weight at ({}, {})",
                i / self.cols,
                i % self.cols
            ))),
            None => Ok(()),
        }
    }
}

/// Affine map `W x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Matrix,
    pub bias: Vec<f32>,
}

impl Linear {
    pub fn new(weight: Matrix, bias: Vec<f32>) -> Result<Self> {
        ensure_len("linear bias", weight.rows, bias.len())?;
        Ok(Self { weight, bias })
    }

    pub fn zeros(out_dim: usize, in_dim: usize) -> Self {
        Self {
            weight: Matrix::zeros(out_dim, in_dim),
            bias: vec![0.0; out_dim],
        }
    }

    pub fn random(out_dim: usize, in_dim: usize, rng: &mut RngStream) -> Self {
        let weight = Matrix::random(out_dim, in_dim, 1.0, rng);
        let bias = (0..out_dim).map(|_| rng.symmetric(0.1)).collect();
        Self { weight, bias }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.cols
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows
    }

    #[inline]
    pub fn forward_into(&self, x: &[f32], y: &mut [f32]) {
        y.copy_from_slice(&self.bias);
        self.weight.matvec_acc(x, y);
    }

    pub fn forward(&self, x: &[f32]) -> Result<Vec<f32>> {
        ensure_len("linear input", self.in_dim(), x.len())?;
        let mut y = vec![0.0; self.out_dim()];
        self.forward_into(x, &mut y);
        Ok(y)
    }
}
