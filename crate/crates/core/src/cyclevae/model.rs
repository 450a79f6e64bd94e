use super::config::CycleVaeConfig;
use super::net::{SegGru, SegGruState};
use super::types::{ExcitationEstimate, ExcitationFrame, LatentPair, Lf0Stats, SpeakerCode};
use crate::error::{ensure_len, Error, Result};
use crate::nn::{gaussian_sample_into, laplace_sample_into, sigmoid, softmax, softplus, LookaheadWindow, Matrix};
use crate::rng::RngStream;

/// Lower bound on every predicted scale.
pub const SIGMA_FLOOR: f32 = 1e-6;

fn scale(raw: f32) -> f32 {
    softplus(raw).max(SIGMA_FLOOR)
}

/// Encoders, decoders, speaker classifier and speaker tables.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleVaeModel {
    pub config: CycleVaeConfig,
    /// Spectral latent encoder; head `[μ, raw σ, speaker logits]`.
    pub enc_phi: SegGru,
    /// Excitation latent encoder, same head layout.
    pub enc_phi_tilde: SegGru,
    /// Mel decoder; head `[μ, raw σ]`.
    pub dec_theta: SegGru,
    /// Excitation decoder, absent in the fine-tuned wiring.
    pub dec_theta_tilde: Option<SegGru>,
    pub classifier: SegGru,
    /// `[spk_emb_dim × n_speakers]`, applied to the one-hot code.
    pub speaker_table: Matrix,
    pub lf0_stats: Vec<Lf0Stats>,
}

/// Output of both encoders for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoded {
    pub latents: LatentPair,
    pub spk_post_phi: Vec<f32>,
    pub spk_post_phi_tilde: Vec<f32>,
}

/// Gaussian mel parameters and one draw.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFrame {
    pub mu: Vec<f32>,
    pub sigma: Vec<f32>,
    pub sample: Vec<f32>,
}

#[derive(Debug, Clone)]
pub struct EncoderState {
    phi: SegGruState,
    phi_tilde: SegGruState,
}

/// Input window and recurrent state of one decoder.
#[derive(Debug, Clone)]
pub struct DecoderState {
    window: LookaheadWindow,
    net: SegGruState,
    input: Vec<f32>,
}

impl CycleVaeModel {
    /// Zero weights with the configured shapes.
    pub fn zeros(config: CycleVaeConfig) -> Result<Self> {
        config.validate()?;
        let c = &config;
        let enc = |lat| SegGru::zeros(c.enc_p, c.enc_n, c.mel_dim, c.conv_dim, c.enc_hidden, c.enc_out_dim(lat));
        Ok(Self {
            enc_phi: enc(c.z_dim),
            enc_phi_tilde: enc(c.zt_dim),
            dec_theta: SegGru::zeros(c.dec_p, 0, c.dec_in_dim(), c.conv_dim, c.dec_hidden, 2 * c.mel_dim),
            dec_theta_tilde: (!c.fine_tuned)
                .then(|| SegGru::zeros(c.dec_p, 0, c.exc_in_dim(), c.conv_dim, c.exc_hidden, c.exc_out_dim())),
            classifier: SegGru::zeros(c.enc_p, c.enc_n, c.mel_dim, c.conv_dim, c.cls_hidden, c.n_speakers),
            speaker_table: Matrix::zeros(c.spk_emb_dim, c.n_speakers),
            lf0_stats: vec![Lf0Stats { mean: 0.0, std: 1.0 }; c.n_speakers],
            config,
        })
    }

    /// Deterministic random weights; encoder and decoder recurrences are
    /// magnitude-pruned to the configured per-gate densities.
    pub fn random(config: CycleVaeConfig, rng: &mut RngStream) -> Result<Self> {
        config.validate()?;
        let c = &config;
        let enc = |lat, rng: &mut RngStream| -> Result<SegGru> {
            let mut net = SegGru::random(c.enc_p, c.enc_n, c.mel_dim, c.conv_dim, c.enc_hidden, c.enc_out_dim(lat), rng);
            net.gru.sparsify_recurrent(c.densities)?;
            Ok(net)
        };
        let enc_phi = enc(c.z_dim, rng)?;
        let enc_phi_tilde = enc(c.zt_dim, rng)?;
        let mut dec_theta = SegGru::random(c.dec_p, 0, c.dec_in_dim(), c.conv_dim, c.dec_hidden, 2 * c.mel_dim, rng);
        dec_theta.gru.sparsify_recurrent(c.densities)?;
        let dec_theta_tilde = (!c.fine_tuned)
            .then(|| SegGru::random(c.dec_p, 0, c.exc_in_dim(), c.conv_dim, c.exc_hidden, c.exc_out_dim(), rng));
        let classifier = SegGru::random(c.enc_p, c.enc_n, c.mel_dim, c.conv_dim, c.cls_hidden, c.n_speakers, rng);
        let speaker_table = Matrix::random(c.spk_emb_dim, c.n_speakers, 1.0, rng);
        let lf0_stats = (0..c.n_speakers)
            .map(|s| Lf0Stats {
                mean: (100.0 + 15.0 * s as f32).ln(),
                std: 0.15 + 0.01 * s as f32,
            })
            .collect();
        Ok(Self {
            config,
            enc_phi,
            enc_phi_tilde,
            dec_theta,
            dec_theta_tilde,
            classifier,
            speaker_table,
            lf0_stats,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let c = &self.config;
        c.validate()?;
        let check = |what: &'static str, net: &SegGru, p: usize, n: usize, inp: usize, hidden: usize, out: usize| -> Result<()> {
            ensure_len(what, p, net.conv.p)?;
            ensure_len(what, n, net.conv.n)?;
            ensure_len(what, inp, net.in_dim())?;
            ensure_len(what, c.conv_dim, net.conv.out_dim)?;
            ensure_len(what, c.conv_dim, net.gru.input_dim())?;
            ensure_len(what, hidden, net.hidden())?;
            ensure_len(what, hidden, net.head.in_dim())?;
            ensure_len(what, out, net.out_dim())
        };
        check("encoder phi", &self.enc_phi, c.enc_p, c.enc_n, c.mel_dim, c.enc_hidden, c.enc_out_dim(c.z_dim))?;
        check("encoder phi~", &self.enc_phi_tilde, c.enc_p, c.enc_n, c.mel_dim, c.enc_hidden, c.enc_out_dim(c.zt_dim))?;
        check("decoder theta", &self.dec_theta, c.dec_p, 0, c.dec_in_dim(), c.dec_hidden, 2 * c.mel_dim)?;
        check("classifier", &self.classifier, c.enc_p, c.enc_n, c.mel_dim, c.cls_hidden, c.n_speakers)?;
        match (&self.dec_theta_tilde, c.fine_tuned) {
            (Some(_), true) => {
                return Err(Error::Config("fine-tuned model must not carry an excitation decoder".into()))
            }
            (None, false) => return Err(Error::Config("pretraining wiring needs an excitation decoder".into())),
            (Some(net), false) => check("decoder theta~", net, c.dec_p, 0, c.exc_in_dim(), c.exc_hidden, c.exc_out_dim())?,
            (None, true) => {}
        }
        ensure_len("speaker table rows", c.spk_emb_dim, self.speaker_table.rows)?;
        ensure_len("speaker table cols", c.n_speakers, self.speaker_table.cols)?;
        ensure_len("speaker lf0 stats", c.n_speakers, self.lf0_stats.len())?;
        Ok(())
    }

    /// Drops the excitation decoder and its decoder input, giving the
    /// fine-tuned wiring. The excitation columns of the decoder input kernel
    /// are removed.
    pub fn into_fine_tuned(mut self) -> Result<Self> {
        if self.config.fine_tuned {
            return Ok(self);
        }
        let c = &self.config;
        let keep = c.z_dim + c.zt_dim + c.spk_emb_dim;
        let full = c.dec_in_dim();
        let k = &self.dec_theta.conv.kernel;
        let frames = self.dec_theta.conv.frames();
        let mut data = Vec::with_capacity(k.rows * frames * keep);
        for r in 0..k.rows {
            let row = k.row(r);
            for f in 0..frames {
                data.extend_from_slice(&row[f * full..f * full + keep]);
            }
        }
        self.dec_theta.conv.kernel = Matrix::from_vec(k.rows, frames * keep, data)?;
        self.dec_theta.conv.in_dim = keep;
        self.dec_theta_tilde = None;
        self.config.fine_tuned = true;
        self.validate()?;
        Ok(self)
    }

    pub fn code(&self, id: usize) -> Result<SpeakerCode> {
        SpeakerCode::new(id, self.config.n_speakers)
    }

    pub fn speaker_embedding(&self, code: &SpeakerCode) -> Result<Vec<f32>> {
        self.speaker_table.matvec(code.one_hot())
    }

    pub fn lf0_stats(&self, code: &SpeakerCode) -> Lf0Stats {
        self.lf0_stats[code.id()]
    }

    /// Encoder input window: `enc_p` past frames, current, `enc_n` future.
    pub fn encoder_window(&self) -> LookaheadWindow {
        self.enc_phi.window()
    }

    pub fn encoder_state(&self) -> EncoderState {
        EncoderState {
            phi: self.enc_phi.state(),
            phi_tilde: self.enc_phi_tilde.state(),
        }
    }

    pub fn decoder_state(&self) -> DecoderState {
        DecoderState {
            window: self.dec_theta.window(),
            net: self.dec_theta.state(),
            input: Vec::with_capacity(self.config.dec_in_dim()),
        }
    }

    pub fn excitation_state(&self) -> Result<DecoderState> {
        let net = self.excitation_decoder()?;
        Ok(DecoderState {
            window: net.window(),
            net: net.state(),
            input: Vec::with_capacity(self.config.exc_in_dim()),
        })
    }

    pub fn classifier_state(&self) -> SegGruState {
        self.classifier.state()
    }

    fn excitation_decoder(&self) -> Result<&SegGru> {
        self.dec_theta_tilde
            .as_ref()
            .ok_or_else(|| Error::Config("fine-tuned model has no excitation decoder".into()))
    }

    /// Runs both encoders on a concatenated mel window and draws both latents.
    pub fn encode(
        &self,
        st: &mut EncoderState,
        window: &[f32],
        rng_z: &mut RngStream,
        rng_zt: &mut RngStream,
    ) -> Result<Encoded> {
        let (mu_z, sigma_z, spk_post_phi) = posterior(&self.enc_phi, &mut st.phi, window, self.config.z_dim)?;
        let (mu_zt, sigma_zt, spk_post_phi_tilde) =
            posterior(&self.enc_phi_tilde, &mut st.phi_tilde, window, self.config.zt_dim)?;
        let mut z = vec![0.0; mu_z.len()];
        let mut eps_z = vec![0.0; mu_z.len()];
        laplace_sample_into(&mu_z, &sigma_z, rng_z, &mut z, &mut eps_z)?;
        let mut z_tilde = vec![0.0; mu_zt.len()];
        let mut eps_zt = vec![0.0; mu_zt.len()];
        laplace_sample_into(&mu_zt, &sigma_zt, rng_zt, &mut z_tilde, &mut eps_zt)?;
        Ok(Encoded {
            latents: LatentPair {
                z,
                z_tilde,
                mu_z,
                sigma_z,
                mu_zt,
                sigma_zt,
                eps_z,
                eps_zt,
            },
            spk_post_phi,
            spk_post_phi_tilde,
        })
    }

    /// One mel frame from both latents and a speaker code. The excitation
    /// must be given in the pretraining wiring and omitted when fine-tuned.
    pub fn decode_spectral(
        &self,
        st: &mut DecoderState,
        z: &[f32],
        z_tilde: &[f32],
        code: &SpeakerCode,
        excitation: Option<&ExcitationFrame>,
        rng: &mut RngStream,
    ) -> Result<SpectralFrame> {
        let c = &self.config;
        match (c.fine_tuned, excitation) {
            (true, Some(_)) => return Err(Error::Config("fine-tuned decoder takes no excitation input".into())),
            (false, None) => return Err(Error::Config("pretraining decoder needs an excitation input".into())),
            _ => {}
        }
        ensure_len("z", c.z_dim, z.len())?;
        ensure_len("z_tilde", c.zt_dim, z_tilde.len())?;
        ensure_len("speaker code", c.n_speakers, code.one_hot().len())?;
        st.input.clear();
        st.input.extend_from_slice(z);
        st.input.extend_from_slice(z_tilde);
        st.input.extend(self.speaker_embedding(code)?);
        if let Some(e) = excitation {
            st.input.extend_from_slice(&e.to_vector());
        }
        let out = run_causal(&self.dec_theta, st)?;
        let d = c.mel_dim;
        let mu = out[..d].to_vec();
        let sigma: Vec<f32> = out[d..].iter().map(|&r| scale(r)).collect();
        let mut sample = vec![0.0; d];
        gaussian_sample_into(&mu, &sigma, rng, &mut sample)?;
        Ok(SpectralFrame { mu, sigma, sample })
    }

    /// Excitation distribution from the excitation latent and a speaker code.
    pub fn decode_excitation(
        &self,
        st: &mut DecoderState,
        z_tilde: &[f32],
        code: &SpeakerCode,
    ) -> Result<ExcitationEstimate> {
        let net = self.excitation_decoder()?;
        let c = &self.config;
        ensure_len("z_tilde", c.zt_dim, z_tilde.len())?;
        ensure_len("speaker code", c.n_speakers, code.one_hot().len())?;
        st.input.clear();
        st.input.extend_from_slice(z_tilde);
        st.input.extend(self.speaker_embedding(code)?);
        let out = run_causal(net, st)?;
        let na = c.aperiodicity_dim();
        Ok(ExcitationEstimate {
            lf0_mu: out[0],
            lf0_sigma: scale(out[1]),
            voicing_prob: sigmoid(out[2]),
            ap_mu: out[3..3 + na].to_vec(),
            ap_sigma: out[3 + na..3 + 2 * na].iter().map(|&r| scale(r)).collect(),
        })
    }

    /// Speaker posterior from a concatenated encoder-shaped window.
    pub fn classify_speaker(&self, st: &mut SegGruState, window: &[f32]) -> Result<Vec<f32>> {
        Ok(softmax(self.classifier.forward(st, window)?))
    }
}

fn posterior(
    net: &SegGru,
    st: &mut SegGruState,
    window: &[f32],
    dim: usize,
) -> Result<(Vec<f32>, Vec<f32>, Vec<f32>)> {
    let out = net.forward(st, window)?;
    let mu = out[..dim].to_vec();
    let sigma = out[dim..2 * dim].iter().map(|&r| scale(r)).collect();
    Ok((mu, sigma, softmax(&out[2 * dim..])))
}

fn run_causal<'s>(net: &SegGru, st: &'s mut DecoderState) -> Result<&'s [f32]> {
    // decoders have no lookahead, so every push yields the current frame
    let t = st.window.push(&st.input)?;
    debug_assert!(t.is_some());
    net.forward(&mut st.net, st.window.concat())
}
