use serde::{Deserialize, Serialize};

use super::config::EXCITATION_DIM;
use crate::error::{ensure_len, Error, Result};

/// Target or source speaker identity.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerCode {
    id: usize,
    one_hot: Vec<f32>,
}

impl SpeakerCode {
    pub fn new(id: usize, n_speakers: usize) -> Result<Self> {
        if id >= n_speakers {
            return Err(Error::InvalidInput(format!(
                "speaker {id} out of range for {n_speakers} speakers"
            )));
        }
        let mut one_hot = vec![0.0; n_speakers];
        one_hot[id] = 1.0;
        Ok(Self { id, one_hot })
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn one_hot(&self) -> &[f32] {
        &self.one_hot
    }
}

/// Posterior parameters and draws of both latents. `z = μ − σ⊙ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentPair {
    pub z: Vec<f32>,
    pub z_tilde: Vec<f32>,
    pub mu_z: Vec<f32>,
    pub sigma_z: Vec<f32>,
    pub mu_zt: Vec<f32>,
    pub sigma_zt: Vec<f32>,
    pub eps_z: Vec<f32>,
    pub eps_zt: Vec<f32>,
}

/// Log-F0, voicing decision and aperiodicity of one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcitationFrame {
    pub log_f0: f32,
    pub voiced: bool,
    pub aperiodicity: Vec<f32>,
}

impl ExcitationFrame {
    pub fn new(log_f0: f32, voiced: bool, aperiodicity: Vec<f32>) -> Result<Self> {
        ensure_len("aperiodicity", EXCITATION_DIM - 2, aperiodicity.len())?;
        if voiced && !log_f0.is_finite() {
            return Err(Error::InvalidInput("voiced frame with non-finite log-F0".into()));
        }
        Ok(Self {
            log_f0,
            voiced,
            aperiodicity,
        })
    }

    /// Decoder input layout; unvoiced frames carry log-F0 0.
    pub fn to_vector(&self) -> [f32; EXCITATION_DIM] {
        let mut v = [0.0; EXCITATION_DIM];
        v[0] = if self.voiced { self.log_f0 } else { 0.0 };
        v[1] = if self.voiced { 1.0 } else { 0.0 };
        v[2..].copy_from_slice(&self.aperiodicity);
        v
    }
}

/// Distribution predicted by the excitation decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct ExcitationEstimate {
    pub lf0_mu: f32,
    pub lf0_sigma: f32,
    pub voicing_prob: f32,
    pub ap_mu: Vec<f32>,
    pub ap_sigma: Vec<f32>,
}

impl ExcitationEstimate {
    /// Point estimate: means, voiced when the probability exceeds one half.
    pub fn frame(&self) -> ExcitationFrame {
        ExcitationFrame {
            log_f0: self.lf0_mu,
            voiced: self.voicing_prob > 0.5,
            aperiodicity: self.ap_mu.clone(),
        }
    }
}

/// Per-speaker log-F0 mean and standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lf0Stats {
    pub mean: f32,
    pub std: f32,
}

/// Linear log-F0 conversion between speakers; voicing and aperiodicity pass
/// through, unvoiced frames are returned unchanged.
pub fn convert_lf0(e: &ExcitationFrame, src: Lf0Stats, trg: Lf0Stats) -> Result<ExcitationFrame> {
    if !(src.std > 0.0) {
        return Err(Error::InvalidInput(format!("source log-F0 std {} must be positive", src.std)));
    }
    let mut out = e.clone();
    if e.voiced {
        out.log_f0 = (e.log_f0 - src.mean) * (trg.std / src.std) + trg.mean;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn speaker_code_is_one_hot() {
        let c = SpeakerCode::new(2, 5).unwrap();
        assert_eq!(c.one_hot(), &[0.0, 0.0, 1.0, 0.0, 0.0]);
        assert!(SpeakerCode::new(5, 5).is_err());
    }

    #[test]
    fn lf0_conversion() {
        let e = ExcitationFrame::new(4.2, true, vec![0.1, 0.2]).unwrap();
        let s = Lf0Stats { mean: 4.0, std: 0.2 };
        let t = Lf0Stats { mean: 5.0, std: 0.3 };
        assert!((convert_lf0(&e, s, t).unwrap().log_f0 - 5.3).abs() < 1e-5);
        assert_eq!(convert_lf0(&e, s, s).unwrap(), e);
        let u = ExcitationFrame::new(f32::NAN, false, vec![0.0, 0.0]).unwrap();
        let out = convert_lf0(&u, s, t).unwrap();
        assert!(out.log_f0.is_nan() && !out.voiced);
        assert!(convert_lf0(&e, Lf0Stats { mean: 4.0, std: 0.0 }, t).is_err());
    }

    #[test]
    fn unvoiced_vector_layout() {
        let u = ExcitationFrame::new(f32::NAN, false, vec![0.3, 0.4]).unwrap();
        assert_eq!(u.to_vector(), [0.0, 0.0, 0.3, 0.4]);
    }
}
