use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::block_sparse::BLOCK;

/// Vocoder hyper-parameters. Both presets are engineering choices; only
/// `lp_order = 8` and the conditioning window `p = 5, n = 1` are fixed by the
/// model description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VocoderConfig {
    pub bands: usize,
    pub lp_order: usize,
    pub bins: usize,
    pub mel_dim: usize,
    pub hop_samples: usize,
    pub cond_p: usize,
    pub cond_n: usize,
    pub cond_conv_dim: usize,
    pub cond_hidden: usize,
    pub hidden: usize,
    pub hidden2: usize,
    pub emb_dim: usize,
    /// Per-gate block density of the main GRU's recurrent kernels.
    pub gru_density: [f64; 3],
}

impl VocoderConfig {
    pub fn paper_scale() -> Self {
        Self {
            bands: 6,
            lp_order: 8,
            bins: 256,
            mel_dim: 80,
            hop_samples: 240,
            cond_p: 5,
            cond_n: 1,
            cond_conv_dim: 256,
            cond_hidden: 256,
            hidden: 1024,
            hidden2: 32,
            emb_dim: 32,
            gru_density: [0.1, 0.1, 0.1],
        }
    }

    pub fn toy() -> Self {
        Self {
            bands: 6,
            lp_order: 8,
            bins: 64,
            mel_dim: 80,
            hop_samples: 240,
            cond_p: 5,
            cond_n: 1,
            cond_conv_dim: 16,
            cond_hidden: 16,
            hidden: 32,
            hidden2: 16,
            emb_dim: 8,
            gru_density: [0.5, 0.5, 0.5],
        }
    }

    /// Band-level steps per frame.
    pub fn steps_per_frame(&self) -> usize {
        self.hop_samples / self.bands
    }

    /// Input width of the main GRU: conditioning plus one embedding per band.
    pub fn gru_input_dim(&self) -> usize {
        self.cond_hidden + self.bands * self.emb_dim
    }

    /// Output width of the head per band: `bins` residual logits then
    /// `lp_order` coefficients.
    pub fn head_stride(&self) -> usize {
        self.bins + self.lp_order
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.bins < 4 || self.bins % 2 != 0 {
            return fail(format!("vocoder bins must be even and >= 4, got {}", self.bins));
        }
        if self.bands == 0 || self.hop_samples % self.bands != 0 {
            return fail(format!(
                "hop of {} samples is not divisible by {} bands",
                self.hop_samples, self.bands
            ));
        }
        if self.hidden == 0 || self.hidden % BLOCK != 0 {
            return fail(format!("vocoder hidden size must be a multiple of {BLOCK}"));
        }
        if [self.mel_dim, self.cond_conv_dim, self.cond_hidden, self.hidden2, self.emb_dim]
            .contains(&0)
        {
            return fail("vocoder layer sizes must be positive".into());
        }
        for d in self.gru_density {
            if !(d > 0.0 && d <= 1.0) {
                return fail(format!("vocoder density {d} outside (0, 1]"));
            }
        }
        Ok(())
    }
}
