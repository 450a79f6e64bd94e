use super::config::VocoderConfig;
use crate::dsp::{MuLaw, Pqmf};
use crate::error::{ensure_len, Result};
use crate::nn::{GruWeights, Linear, Matrix, Recurrent, SegConvSpec};
use crate::rng::RngStream;

/// Trainable tensors of the vocoder.
#[derive(Debug, Clone, PartialEq)]
pub struct VocoderWeights {
    pub config: VocoderConfig,
    pub cond_conv: SegConvSpec,
    pub cond_gru: GruWeights,
    /// One `[bins × emb_dim]` table per band.
    pub embeddings: Vec<Matrix>,
    /// Input is `[conditioning, emb_band_0, …, emb_band_M-1]`.
    pub gru: GruWeights,
    pub gru2: GruWeights,
    /// Per band: `bins` residual logits followed by `lp_order` coefficients.
    pub head: Linear,
    /// One `[bins × bins]` basis table per band; row `b` is the basis vector
    /// of a past sample in bin `b`.
    pub logit_bases: Vec<Matrix>,
}

impl VocoderWeights {
    pub fn zeros(config: VocoderConfig) -> Self {
        let c = &config;
        Self {
            cond_conv: SegConvSpec::zeros(c.cond_p, c.cond_n, c.mel_dim, c.cond_conv_dim),
            cond_gru: GruWeights::zeros(c.cond_hidden, c.cond_conv_dim),
            embeddings: (0..c.bands).map(|_| Matrix::zeros(c.bins, c.emb_dim)).collect(),
            gru: GruWeights::zeros(c.hidden, c.gru_input_dim()),
            gru2: GruWeights::zeros(c.hidden2, c.hidden),
            head: Linear::zeros(c.bands * c.head_stride(), c.hidden2),
            logit_bases: (0..c.bands).map(|_| Matrix::zeros(c.bins, c.bins)).collect(),
            config,
        }
    }

    /// Deterministic random weights; the main GRU is block-pruned to the
    /// configured densities.
    pub fn random(config: VocoderConfig, rng: &mut RngStream) -> Result<Self> {
        config.validate()?;
        let c = &config;
        let cond_conv = SegConvSpec::random(c.cond_p, c.cond_n, c.mel_dim, c.cond_conv_dim, rng);
        let cond_gru = GruWeights::random(c.cond_hidden, c.cond_conv_dim, rng);
        let embeddings = (0..c.bands)
            .map(|_| Matrix::random(c.bins, c.emb_dim, (c.emb_dim as f32).sqrt(), rng))
            .collect();
        let mut gru = GruWeights::random(c.hidden, c.gru_input_dim(), rng);
        gru.block_sparsify_recurrent(c.gru_density)?;
        let gru2 = GruWeights::random(c.hidden2, c.hidden, rng);
        let head = Linear::random(c.bands * c.head_stride(), c.hidden2, rng);
        let logit_bases = (0..c.bands)
            .map(|_| Matrix::random(c.bins, c.bins, 0.5 * (c.bins as f32).sqrt(), rng))
            .collect();
        Ok(Self {
            config,
            cond_conv,
            cond_gru,
            embeddings,
            gru,
            gru2,
            head,
            logit_bases,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let c = &self.config;
        c.validate()?;
        ensure_len("vocoder conv p", c.cond_p, self.cond_conv.p)?;
        ensure_len("vocoder conv n", c.cond_n, self.cond_conv.n)?;
        ensure_len("vocoder conv input", c.mel_dim, self.cond_conv.in_dim)?;
        ensure_len("vocoder conv output", c.cond_conv_dim, self.cond_conv.out_dim)?;
        ensure_len("vocoder cond gru input", c.cond_conv_dim, self.cond_gru.input_dim())?;
        ensure_len("vocoder cond gru hidden", c.cond_hidden, self.cond_gru.hidden())?;
        ensure_len("vocoder embedding tables", c.bands, self.embeddings.len())?;
        for e in &self.embeddings {
            ensure_len("vocoder embedding rows", c.bins, e.rows)?;
            ensure_len("vocoder embedding width", c.emb_dim, e.cols)?;
        }
        ensure_len("vocoder gru input", c.gru_input_dim(), self.gru.input_dim())?;
        ensure_len("vocoder gru hidden", c.hidden, self.gru.hidden())?;
        ensure_len("vocoder gru2 input", c.hidden, self.gru2.input_dim())?;
        ensure_len("vocoder gru2 hidden", c.hidden2, self.gru2.hidden())?;
        ensure_len("vocoder head input", c.hidden2, self.head.in_dim())?;
        ensure_len("vocoder head output", c.bands * c.head_stride(), self.head.out_dim())?;
        ensure_len("vocoder basis tables", c.bands, self.logit_bases.len())?;
        for r in &self.logit_bases {
            ensure_len("vocoder basis rows", c.bins, r.rows)?;
            ensure_len("vocoder basis width", c.bins, r.cols)?;
        }
        Ok(())
    }
}

/// A vocoder ready for inference: the weights plus tables derived from them.
#[derive(Debug, Clone)]
pub struct Vocoder {
    pub(super) w: VocoderWeights,
    /// Conditioning columns of the main GRU input kernels, per gate.
    pub(super) cond_w: [Matrix; 3],
    /// Per band `[bins × 3·hidden]`: the main GRU input projection of every
    /// bin's embedding, gates back to back.
    pub(super) emb_tables: Vec<Vec<f32>>,
    /// Transposed head kernel: the head has few inputs and many outputs.
    pub(super) head_t: Matrix,
    pub(super) mulaw: MuLaw,
    pub(super) pqmf: Pqmf,
}

impl Vocoder {
    pub fn new(w: VocoderWeights) -> Result<Self> {
        w.validate()?;
        let c = &w.config;
        let h = c.hidden;
        let cond_w = std::array::from_fn(|g| {
            let src = &w.gru.w[g];
            let mut m = Matrix::zeros(h, c.cond_hidden);
            for i in 0..h {
                m.data[i * c.cond_hidden..(i + 1) * c.cond_hidden]
                    .copy_from_slice(&src.row(i)[..c.cond_hidden]);
            }
            m
        });
        let emb_tables = (0..c.bands)
            .map(|m| {
                let c0 = c.cond_hidden + m * c.emb_dim;
                let mut table = vec![0.0f32; c.bins * 3 * h];
                for b in 0..c.bins {
                    let e = w.embeddings[m].row(b);
                    let dst = &mut table[b * 3 * h..(b + 1) * 3 * h];
                    for g in 0..3 {
                        for i in 0..h {
                            let row = &w.gru.w[g].row(i)[c0..c0 + c.emb_dim];
                            dst[g * h + i] = crate::nn::dense::dot(row, e);
                        }
                    }
                }
                table
            })
            .collect();
        let mulaw = MuLaw::new(c.bins)?;
        let pqmf = Pqmf::new(c.bands)?;
        let head_t = w.head.weight.transpose();
        Ok(Self {
            w,
            cond_w,
            emb_tables,
            head_t,
            mulaw,
            pqmf,
        })
    }

    pub fn weights(&self) -> &VocoderWeights {
        &self.w
    }

    pub fn into_weights(self) -> VocoderWeights {
        self.w
    }

    pub fn config(&self) -> &VocoderConfig {
        &self.w.config
    }

    pub fn mulaw(&self) -> &MuLaw {
        &self.mulaw
    }

    pub fn pqmf(&self) -> &Pqmf {
        &self.pqmf
    }

    /// Frames of lookahead on the mel input.
    pub fn lookahead(&self) -> usize {
        self.w.config.cond_n
    }

    /// Per-gate density of the main GRU's recurrent kernels.
    pub fn recurrent_densities(&self) -> [f64; 3] {
        std::array::from_fn(|g| self.w.gru.u[g].density())
    }

    pub fn uses_block_sparse(&self) -> bool {
        self.w.gru.u.iter().all(|u| matches!(u, Recurrent::Block(_)))
    }
}
