use crate::error::{ensure_len, Result};
use crate::nn::{GruScratch, GruWeights, Linear, LookaheadWindow, SegConvSpec};
use crate::rng::RngStream;

/// Segmental convolution, one GRU layer and a linear head.
#[derive(Debug, Clone, PartialEq)]
pub struct SegGru {
    pub conv: SegConvSpec,
    pub gru: GruWeights,
    pub head: Linear,
}

/// Recurrent state and work buffers of one [`SegGru`].
#[derive(Debug, Clone)]
pub struct SegGruState {
    conv: Vec<f32>,
    h: Vec<f32>,
    next: Vec<f32>,
    scratch: GruScratch,
    out: Vec<f32>,
}

impl SegGruState {
    pub fn hidden(&self) -> &[f32] {
        &self.h
    }

    pub fn output(&self) -> &[f32] {
        &self.out
    }
}

impl SegGru {
    pub fn new(conv: SegConvSpec, gru: GruWeights, head: Linear) -> Result<Self> {
        ensure_len("segconv output / gru input", conv.out_dim, gru.input_dim())?;
        ensure_len("gru hidden / head input", gru.hidden(), head.in_dim())?;
        Ok(Self { conv, gru, head })
    }

    pub fn zeros(p: usize, n: usize, in_dim: usize, conv_dim: usize, hidden: usize, out_dim: usize) -> Self {
        Self {
            conv: SegConvSpec::zeros(p, n, in_dim, conv_dim),
            gru: GruWeights::zeros(hidden, conv_dim),
            head: Linear::zeros(out_dim, hidden),
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn random(
        p: usize,
        n: usize,
        in_dim: usize,
        conv_dim: usize,
        hidden: usize,
        out_dim: usize,
        rng: &mut RngStream,
    ) -> Self {
        Self {
            conv: SegConvSpec::random(p, n, in_dim, conv_dim, rng),
            gru: GruWeights::random(hidden, conv_dim, rng),
            head: Linear::random(out_dim, hidden, rng),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.conv.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.head.out_dim()
    }

    pub fn hidden(&self) -> usize {
        self.gru.hidden()
    }

    pub fn window(&self) -> LookaheadWindow {
        self.conv.window()
    }

    pub fn state(&self) -> SegGruState {
        let h = self.hidden();
        SegGruState {
            conv: vec![0.0; self.conv.out_dim],
            h: vec![0.0; h],
            next: vec![0.0; h],
            scratch: GruScratch::new(h),
            out: vec![0.0; self.out_dim()],
        }
    }

    /// One frame from a concatenated `(p+1+n)`-frame window.
    pub fn forward<'s>(&self, st: &'s mut SegGruState, concat: &[f32]) -> Result<&'s [f32]> {
        ensure_len("segconv window", self.conv.width(), concat.len())?;
        self.conv.apply_concat(concat, &mut st.conv);
        self.gru.step_into(&st.h, &st.conv, &mut st.scratch, &mut st.next);
        std::mem::swap(&mut st.h, &mut st.next);
        self.head.forward_into(&st.h, &mut st.out);
        Ok(&st.out)
    }
}
