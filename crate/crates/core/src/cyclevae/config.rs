use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Recurrent densities of the reset, update and candidate gates.
pub const GATE_DENSITIES: [f64; 3] = [0.685, 0.685, 0.88];

/// Excitation layout: `[log_f0, voicing, aperiodicity…]`.
pub const EXCITATION_DIM: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleVaeConfig {
    pub mel_dim: usize,
    pub z_dim: usize,
    pub zt_dim: usize,
    pub n_speakers: usize,
    pub spk_emb_dim: usize,
    pub enc_p: usize,
    pub enc_n: usize,
    /// Past frames of the decoder convolutions; decoders see no future frames.
    pub dec_p: usize,
    /// Output width of every segmental convolution.
    pub conv_dim: usize,
    pub enc_hidden: usize,
    pub dec_hidden: usize,
    pub exc_hidden: usize,
    pub cls_hidden: usize,
    pub densities: [f64; 3],
    /// Fine-tuned wiring: no excitation decoder, no excitation input.
    pub fine_tuned: bool,
}

impl CycleVaeConfig {
    pub fn paper_scale() -> Self {
        Self {
            mel_dim: 80,
            z_dim: 32,
            zt_dim: 32,
            n_speakers: 14,
            spk_emb_dim: 64,
            enc_p: 3,
            enc_n: 1,
            dec_p: 4,
            conv_dim: 256,
            enc_hidden: 512,
            dec_hidden: 640,
            exc_hidden: 128,
            cls_hidden: 32,
            densities: GATE_DENSITIES,
            fine_tuned: true,
        }
    }

    pub fn toy() -> Self {
        Self {
            mel_dim: 80,
            z_dim: 4,
            zt_dim: 4,
            n_speakers: 3,
            spk_emb_dim: 8,
            enc_p: 3,
            enc_n: 1,
            dec_p: 4,
            conv_dim: 16,
            enc_hidden: 16,
            dec_hidden: 16,
            exc_hidden: 8,
            cls_hidden: 8,
            densities: GATE_DENSITIES,
            fine_tuned: true,
        }
    }

    pub fn aperiodicity_dim(&self) -> usize {
        EXCITATION_DIM - 2
    }

    /// Encoder head: `[μ, raw σ]` of the latent, then speaker logits.
    pub fn enc_out_dim(&self, latent: usize) -> usize {
        2 * latent + self.n_speakers
    }

    pub fn dec_in_dim(&self) -> usize {
        let base = self.z_dim + self.zt_dim + self.spk_emb_dim;
        if self.fine_tuned {
            base
        } else {
            base + EXCITATION_DIM
        }
    }

    pub fn exc_in_dim(&self) -> usize {
        self.zt_dim + self.spk_emb_dim
    }

    /// Excitation head: log-F0 `μ, raw σ`, voicing logit, then `μ` and raw
    /// `σ` of each aperiodicity coefficient.
    pub fn exc_out_dim(&self) -> usize {
        3 + 2 * self.aperiodicity_dim()
    }

    /// Frames of lookahead of the spectral model.
    pub fn lookahead(&self) -> usize {
        self.enc_n
    }

    pub fn validate(&self) -> Result<()> {
        let sizes = [
            self.mel_dim,
            self.z_dim,
            self.zt_dim,
            self.n_speakers,
            self.spk_emb_dim,
            self.conv_dim,
            self.enc_hidden,
            self.dec_hidden,
            self.exc_hidden,
            self.cls_hidden,
        ];
        if sizes.contains(&0) {
            return Err(Error::Config("cyclevae layer sizes must be positive".into()));
        }
        for d in self.densities {
            if !(d > 0.0 && d <= 1.0) {
                return Err(Error::Config(format!("density {d} outside (0, 1]")));
            }
        }
        Ok(())
    }
}
