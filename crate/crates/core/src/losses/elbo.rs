use serde::{Deserialize, Serialize};

use super::spectral::{excitation_nll, fullres_magnitude_loss, gaussian_nll, kl_laplace_standard, mel_l1};
use crate::cyclevae::{CycleVaeModel, CyclicOutput, ExcitationFrame};
use crate::dsp::{MelFilterbank, MelFrame};
use crate::error::{ensure_len, Error, Result};

/// Weight of each term in the total; all default to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub recon: f64,
    pub kl: f64,
    pub excitation: f64,
    pub cyclic: f64,
    pub speaker: f64,
    pub sampled_mel: f64,
    pub fullres: f64,
    pub waveform_ce: f64,
    pub stft: f64,
    pub layerwise: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            recon: 1.0,
            kl: 1.0,
            excitation: 1.0,
            cyclic: 1.0,
            speaker: 1.0,
            sampled_mel: 1.0,
            fullres: 1.0,
            waveform_ce: 1.0,
            stft: 1.0,
            layerwise: 1.0,
        }
    }
}

/// Negative objective terms summed over frames. Every term is a loss, so the
/// total is their weighted sum.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ElboReport {
    pub frames: usize,
    pub recon_nll: f64,
    pub kl_z: f64,
    pub kl_zt: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub excitation_nll: Option<f64>,
    pub cyclic_recon_nll: f64,
    pub cyclic_kl_z: f64,
    pub cyclic_kl_zt: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cyclic_excitation_nll: Option<f64>,
    pub speaker_ce: f64,
    pub sampled_mel_l1: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fullres_magnitude: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub waveform_ce: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stft: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layerwise: Option<f64>,
    pub total: f64,
}

impl ElboReport {
    pub fn weighted_total(&self, w: &LossWeights) -> f64 {
        let o = |v: Option<f64>| v.unwrap_or(0.0);
        w.recon * self.recon_nll
            + w.kl * (self.kl_z + self.kl_zt)
            + w.excitation * o(self.excitation_nll)
            + w.cyclic * (self.cyclic_recon_nll + self.cyclic_kl_z + self.cyclic_kl_zt)
            + w.cyclic * w.excitation * o(self.cyclic_excitation_nll)
            + w.speaker * self.speaker_ce
            + w.sampled_mel * self.sampled_mel_l1
            + w.fullres * o(self.fullres_magnitude)
            + w.waveform_ce * o(self.waveform_ce)
            + w.stft * o(self.stft)
            + w.layerwise * o(self.layerwise)
    }

    /// Flat `(key, value)` pairs, absent terms omitted.
    pub fn key_values(&self) -> Vec<(&'static str, f64)> {
        let mut kv = vec![
            ("frames", self.frames as f64),
            ("recon_nll", self.recon_nll),
            ("kl_z", self.kl_z),
            ("kl_zt", self.kl_zt),
        ];
        let opt = [
            ("excitation_nll", self.excitation_nll),
            ("cyclic_excitation_nll", self.cyclic_excitation_nll),
        ];
        kv.extend(opt.iter().filter_map(|(k, v)| v.map(|v| (*k, v))));
        kv.extend([
            ("cyclic_recon_nll", self.cyclic_recon_nll),
            ("cyclic_kl_z", self.cyclic_kl_z),
            ("cyclic_kl_zt", self.cyclic_kl_zt),
            ("speaker_ce", self.speaker_ce),
            ("sampled_mel_l1", self.sampled_mel_l1),
        ]);
        let opt = [
            ("fullres_magnitude", self.fullres_magnitude),
            ("waveform_ce", self.waveform_ce),
            ("stft", self.stft),
            ("layerwise", self.layerwise),
        ];
        kv.extend(opt.iter().filter_map(|(k, v)| v.map(|v| (*k, v))));
        kv.push(("total", self.total));
        kv
    }
}

/// Vocoder-side terms computed by the caller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveformTerms {
    pub ce: f64,
    pub stft: f64,
    pub layerwise: f64,
}

pub struct ElboInputs<'a> {
    /// Source mel frames `x`.
    pub mels: &'a [MelFrame],
    pub source: usize,
    pub target: usize,
    /// One cycle; the first pass must carry the reconstruction.
    pub cyclic: &'a CyclicOutput,
    /// Ground-truth excitation of `x`, pretraining wiring only.
    pub excitation: Option<&'a [ExcitationFrame]>,
    /// Filterbank and reference full-resolution magnitudes per frame.
    pub fullres: Option<(&'a MelFilterbank, &'a [Vec<f32>])>,
    pub waveform: Option<WaveformTerms>,
}

fn speaker_nll(post: &[f32], id: usize) -> f64 {
    -(post[id] as f64).max(1e-12).ln()
}

pub fn elbo_report(model: &CycleVaeModel, inp: &ElboInputs, w: &LossWeights) -> Result<ElboReport> {
    let n = inp.mels.len();
    if inp.cyclic.passes.len() < 2 {
        return Err(Error::InvalidInput("cyclic output needs at least one full cycle".into()));
    }
    let (conv, cyc) = (inp.cyclic.converted(), inp.cyclic.reconstructed());
    ensure_len("converted frames", n, conv.len())?;
    ensure_len("cyclic frames", n, cyc.len())?;
    let pretrain = !model.config.fine_tuned;
    let excitation = match (pretrain, inp.excitation) {
        (true, Some(e)) => {
            ensure_len("excitation frames", n, e.len())?;
            Some(e)
        }
        (true, None) => return Err(Error::InvalidInput("pretraining wiring needs ground-truth excitation".into())),
        (false, Some(_)) => return Err(Error::Config("fine-tuned wiring has no excitation likelihood".into())),
        (false, None) => None,
    };
    let src = model.code(inp.source)?;
    model.code(inp.target)?;

    let mut r = ElboReport {
        frames: n,
        ..Default::default()
    };
    let mut exc_state = if pretrain { Some(model.excitation_state()?) } else { None };
    let (mut exc_nll, mut cyc_exc_nll) = (0.0, 0.0);
    let mut fullres = 0.0;
    for t in 0..n {
        let x = &inp.mels[t].values;
        let (a, b) = (&conv[t], &cyc[t]);
        let rec = a
            .reconstructed
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("first pass was run without reconstruction".into()))?;
        r.recon_nll += gaussian_nll(x, &rec.mu, &rec.sigma)?;
        r.kl_z += kl_laplace_standard(&a.latents.mu_z, &a.latents.sigma_z)?;
        r.kl_zt += kl_laplace_standard(&a.latents.mu_zt, &a.latents.sigma_zt)?;
        r.cyclic_recon_nll += gaussian_nll(x, &b.converted.mu, &b.converted.sigma)?;
        r.cyclic_kl_z += kl_laplace_standard(&b.latents.mu_z, &b.latents.sigma_z)?;
        r.cyclic_kl_zt += kl_laplace_standard(&b.latents.mu_zt, &b.latents.sigma_zt)?;

        r.speaker_ce += speaker_nll(&a.spk_post_phi, inp.source) + speaker_nll(&a.spk_post_phi_tilde, inp.source);
        r.speaker_ce += speaker_nll(&b.spk_post_phi, inp.target) + speaker_nll(&b.spk_post_phi_tilde, inp.target);
        if let Some(p) = &a.spk_post_cls {
            r.speaker_ce += speaker_nll(p, inp.source);
        }
        if let Some(p) = &b.spk_post_cls {
            r.speaker_ce += speaker_nll(p, inp.target);
        }

        r.sampled_mel_l1 += mel_l1(&rec.sample, x)? + mel_l1(&b.converted.sample, x)?;

        if let (Some(e), Some(st)) = (excitation, exc_state.as_mut()) {
            exc_nll += excitation_nll(&e[t], a.excitation.as_ref())?;
            // excitation of x predicted from the latent of the converted frame
            let est = model.decode_excitation(st, &b.latents.z_tilde, &src)?;
            cyc_exc_nll += excitation_nll(&e[t], Some(&est))?;
        }
        if let Some((fb, mags)) = inp.fullres {
            ensure_len("reference magnitude frames", n, mags.len())?;
            let m = MelFrame {
                values: rec.sample.clone(),
                frame_index: t,
            };
            fullres += fullres_magnitude_loss(fb, &m, &mags[t])?;
        }
    }
    if pretrain {
        r.excitation_nll = Some(exc_nll);
        r.cyclic_excitation_nll = Some(cyc_exc_nll);
    }
    if inp.fullres.is_some() {
        r.fullres_magnitude = Some(fullres);
    }
    if let Some(wt) = inp.waveform {
        r.waveform_ce = Some(wt.ce);
        r.stft = Some(wt.stft);
        r.layerwise = Some(wt.layerwise);
    }
    r.total = r.weighted_total(w);
    Ok(r)
}
