use super::activation::{sigmoid_in_place, tanh_in_place};
use super::block_sparse::BlockSparse;
use super::dense::Matrix;
use super::sparse::{sparsify, SparseMatrix};
use crate::error::{ensure_len, Error, Result};
use crate::rng::RngStream;

/// Hidden-to-hidden kernel of one gate.
#[derive(Debug, Clone, PartialEq)]
pub enum Recurrent {
    Dense(Matrix),
    Sparse(SparseMatrix),
    Block(BlockSparse),
}

impl Recurrent {
    pub fn rows(&self) -> usize {
        match self {
            Recurrent::Dense(m) => m.rows,
            Recurrent::Sparse(m) => m.rows(),
            Recurrent::Block(m) => m.rows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            Recurrent::Dense(m) => m.cols,
            Recurrent::Sparse(m) => m.cols(),
            Recurrent::Block(m) => m.cols(),
        }
    }

    pub fn nnz(&self) -> usize {
        match self {
            Recurrent::Dense(m) => m.data.len(),
            Recurrent::Sparse(m) => m.nnz(),
            Recurrent::Block(m) => m.nnz(),
        }
    }

    pub fn density(&self) -> f64 {
        self.nnz() as f64 / (self.rows() * self.cols()) as f64
    }

    pub fn to_dense(&self) -> Matrix {
        match self {
            Recurrent::Dense(m) => m.clone(),
            Recurrent::Sparse(m) => m.to_dense(),
            Recurrent::Block(m) => m.to_dense(),
        }
    }

    #[inline]
    pub fn apply_into(&self, h: &[f32], y: &mut [f32]) {
        match self {
            Recurrent::Dense(m) => m.matvec_into(h, y),
            Recurrent::Sparse(m) => m.spmv_into(h, y),
            Recurrent::Block(m) => m.spmv_into(h, y),
        }
    }
}

/// Gate order used throughout: reset, update, candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct GruWeights {
    pub w: [Matrix; 3],
    pub u: [Recurrent; 3],
    pub b: [Vec<f32>; 3],
    pub b_hn: Vec<f32>,
}

/// Work buffers for one cell, so the per-step path does not allocate.
#[derive(Debug, Clone)]
pub struct GruScratch {
    gx: [Vec<f32>; 3],
    gh: [Vec<f32>; 3],
}

impl GruScratch {
    pub fn new(hidden: usize) -> Self {
        let v = || vec![0.0; hidden];
        Self {
            gx: [v(), v(), v()],
            gh: [v(), v(), v()],
        }
    }
}

impl GruWeights {
    pub fn new(w: [Matrix; 3], u: [Recurrent; 3], b: [Vec<f32>; 3], b_hn: Vec<f32>) -> Result<Self> {
        let h = w[0].rows;
        let d = w[0].cols;
        for g in 0..3 {
            ensure_len("gru input kernel rows", h, w[g].rows)?;
            ensure_len("gru input kernel cols", d, w[g].cols)?;
            ensure_len("gru recurrent kernel rows", h, u[g].rows())?;
            ensure_len("gru recurrent kernel cols", h, u[g].cols())?;
            ensure_len("gru bias", h, b[g].len())?;
        }
        ensure_len("gru recurrent bias", h, b_hn.len())?;
        Ok(Self { w, u, b, b_hn })
    }

    pub fn zeros(hidden: usize, input: usize) -> Self {
        let z = || vec![0.0; hidden];
        Self {
            w: std::array::from_fn(|_| Matrix::zeros(hidden, input)),
            u: std::array::from_fn(|_| Recurrent::Dense(Matrix::zeros(hidden, hidden))),
            b: [z(), z(), z()],
            b_hn: z(),
        }
    }

    pub fn random(hidden: usize, input: usize, rng: &mut RngStream) -> Self {
        let w = std::array::from_fn(|_| Matrix::random(hidden, input, 1.0, rng));
        let u = std::array::from_fn(|_| Recurrent::Dense(Matrix::random(hidden, hidden, 1.0, rng)));
        let b = std::array::from_fn(|_| (0..hidden).map(|_| rng.symmetric(0.1)).collect());
        let b_hn = (0..hidden).map(|_| rng.symmetric(0.1)).collect();
        Self { w, u, b, b_hn }
    }

    pub fn hidden(&self) -> usize {
        self.w[0].rows
    }

    pub fn input_dim(&self) -> usize {
        self.w[0].cols
    }

    /// Overall density of the three recurrent kernels.
    pub fn recurrent_density(&self) -> f64 {
        let nnz: usize = self.u.iter().map(Recurrent::nnz).sum();
        nnz as f64 / (3 * self.hidden() * self.hidden()) as f64
    }

    /// Magnitude-prunes each recurrent kernel to its own CSR density.
    pub fn sparsify_recurrent(&mut self, densities: [f64; 3]) -> Result<()> {
        for (u, d) in self.u.iter_mut().zip(densities) {
            *u = Recurrent::Sparse(sparsify(&u.to_dense(), d)?);
        }
        Ok(())
    }

    /// Block-prunes each recurrent kernel (16×1 blocks).
    pub fn block_sparsify_recurrent(&mut self, densities: [f64; 3]) -> Result<()> {
        for (u, d) in self.u.iter_mut().zip(densities) {
            *u = Recurrent::Block(BlockSparse::prune(&u.to_dense(), d)?);
        }
        Ok(())
    }

    /// Projects `x` through the input kernels. `out` holds three `hidden`-sized
    /// slices back to back.
    pub fn input_projection_into(&self, x: &[f32], out: &mut [f32]) {
        let h = self.hidden();
        for (g, chunk) in out.chunks_exact_mut(h).enumerate() {
            self.w[g].matvec_into(x, chunk);
        }
    }

    /// One step given a precomputed input projection (without biases).
    #[inline]
    pub fn step_projected(
        &self,
        h: &[f32],
        gx: [&[f32]; 3],
        s: &mut GruScratch,
        out: &mut [f32],
    ) {
        for g in 0..3 {
            self.u[g].apply_into(h, &mut s.gh[g]);
        }
        let [hr, hz, hn] = &mut s.gh;
        let [br, bz, bn] = &self.b;
        for i in 0..out.len() {
            hr[i] += gx[0][i] + br[i];
            hz[i] += gx[1][i] + bz[i];
        }
        sigmoid_in_place(hr);
        sigmoid_in_place(hz);
        for i in 0..out.len() {
            hn[i] = gx[2][i] + hr[i] * (hn[i] + self.b_hn[i]) + bn[i];
        }
        tanh_in_place(hn);
        for i in 0..out.len() {
            out[i] = (1.0 - hz[i]) * hn[i] + hz[i] * h[i];
        }
    }

    /// One step; `out` must not alias `h`.
    #[inline]
    pub fn step_into(&self, h: &[f32], x: &[f32], s: &mut GruScratch, out: &mut [f32]) {
        let mut gx = std::mem::take(&mut s.gx);
        for g in 0..3 {
            self.w[g].matvec_into(x, &mut gx[g]);
        }
        self.step_projected(h, [&gx[0], &gx[1], &gx[2]], s, out);
        s.gx = gx;
    }
}

/// Shape-checked, allocating single step.
pub fn gru_step(w: &GruWeights, h: &[f32], x: &[f32]) -> Result<Vec<f32>> {
    ensure_len("gru state", w.hidden(), h.len())?;
    ensure_len("gru input", w.input_dim(), x.len())?;
    if h.iter().chain(x).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite gru operand".into()));
    }
    let mut s = GruScratch::new(w.hidden());
    let mut out = vec![0.0; w.hidden()];
    w.step_into(h, x, &mut s, &mut out);
    Ok(out)
}
