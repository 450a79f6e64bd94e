//! Mel filterbank projection and its Moore-Penrose inverse.
//!
//! The filterbank uses the Slaney mel scale with area-normalised triangles and
//! operates on magnitude (not power) spectra.

use nalgebra::DMatrix;
use rustfft::num_complex::Complex32;
use serde::{Deserialize, Serialize};

use super::AudioConfig;
use crate::error::{ensure_len, Error, Result};

/// Floor applied to mel energies before taking the log.
pub const LOG_FLOOR: f64 = 1e-9;

/// One log-mel column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MelFrame {
    pub values: Vec<f32>,
    pub frame_index: usize,
}

impl MelFrame {
    pub fn new(values: Vec<f32>, frame_index: usize) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite mel value at dim {i}")));
        }
        Ok(Self {
            values,
            frame_index,
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

fn hz_to_mel(hz: f64) -> f64 {
    let f_sp = 200.0 / 3.0;
    let min_log_hz = 1000.0;
    if hz < min_log_hz {
        hz / f_sp
    } else {
        min_log_hz / f_sp + (hz / min_log_hz).ln() / (6.4f64.ln() / 27.0)
    }
}

fn mel_to_hz(mel: f64) -> f64 {
    let f_sp = 200.0 / 3.0;
    let min_log_mel = 1000.0 / f_sp;
    if mel < min_log_mel {
        mel * f_sp
    } else {
        1000.0 * ((mel - min_log_mel) * (6.4f64.ln() / 27.0)).exp()
    }
}

/// Triangular mel filterbank, its row support and its pseudo-inverse.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    n_mels: usize,
    n_bins: usize,
    /// Row-major `[n_mels x n_bins]`.
    weights: Vec<f64>,
    /// Half-open nonzero bin range per row.
    support: Vec<(usize, usize)>,
    /// Row-major `[n_bins x n_mels]`.
    pinv: Vec<f64>,
}

impl MelFilterbank {
    pub fn new(cfg: &AudioConfig) -> Result<Self> {
        cfg.validate(None)?;
        let n_mels = cfg.mel_dim;
        let n_bins = cfg.n_bins();
        let (lo, hi) = (hz_to_mel(cfg.fmin_hz), hz_to_mel(cfg.fmax_hz));
        let pts: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (n_mels + 1) as f64))
            .collect();
        let bin_hz = cfg.sample_rate_hz as f64 / cfg.fft_len as f64;
        let mut weights = vec![0.0; n_mels * n_bins];
        let mut support = Vec::with_capacity(n_mels);
        for m in 0..n_mels {
            let (f0, f1, f2) = (pts[m], pts[m + 1], pts[m + 2]);
            let norm = 2.0 / (f2 - f0);
            let row = &mut weights[m * n_bins..(m + 1) * n_bins];
            for (k, w) in row.iter_mut().enumerate() {
                let f = k as f64 * bin_hz;
                let up = (f - f0) / (f1 - f0);
                let down = (f2 - f) / (f2 - f1);
                *w = up.min(down).max(0.0) * norm;
            }
            let first = row.iter().position(|&w| w > 0.0);
            let last = row.iter().rposition(|&w| w > 0.0);
            match (first, last) {
                (Some(a), Some(b)) => support.push((a, b + 1)),
                _ => {
                    return Err(Error::Config(format!(
                        "mel filter {m} covers no FFT bin; increase fft_len or reduce mel_dim"
                    )))
                }
            }
        }
        let dense = DMatrix::from_row_slice(n_mels, n_bins, &weights);
        let pinv = dense
            .pseudo_inverse(1e-12)
            .map_err(|e| Error::Config(format!("mel pseudo-inverse failed: {e}")))?;
        let mut pinv_rm = vec![0.0; n_bins * n_mels];
        for k in 0..n_bins {
            for m in 0..n_mels {
                pinv_rm[k * n_mels + m] = pinv[(k, m)];
            }
        }
        Ok(Self {
            n_mels,
            n_bins,
            weights,
            support,
            pinv: pinv_rm,
        })
    }

    pub fn n_mels(&self) -> usize {
        self.n_mels
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn row(&self, m: usize) -> &[f64] {
        &self.weights[m * self.n_bins..(m + 1) * self.n_bins]
    }

    pub fn support(&self, m: usize) -> (usize, usize) {
        self.support[m]
    }

    /// Linear mel energies `F * mag`.
    pub fn project_linear(&self, mag: &[f32]) -> Result<Vec<f64>> {
        ensure_len("mel_project input", self.n_bins, mag.len())?;
        Ok((0..self.n_mels)
            .map(|m| {
                let (a, b) = self.support[m];
                self.row(m)[a..b]
                    .iter()
                    .zip(&mag[a..b])
                    .map(|(w, &x)| w * x as f64)
                    .sum()
            })
            .collect())
    }

    /// Unclamped minimum-norm magnitudes `pinv(F) * energies`.
    pub fn invert_linear(&self, energies: &[f64]) -> Result<Vec<f64>> {
        ensure_len("mel_invert input", self.n_mels, energies.len())?;
        Ok(self
            .pinv
            .chunks_exact(self.n_mels)
            .map(|row| row.iter().zip(energies).map(|(p, e)| p * e).sum())
            .collect())
    }

    /// Log-mel projection of a magnitude spectrum.
    pub fn project(&self, mag: &[f32], frame_index: usize) -> Result<MelFrame> {
        if let Some(i) = mag.iter().position(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "magnitude at bin {i} is negative or non-finite"
            )));
        }
        let values = self
            .project_linear(mag)?
            .into_iter()
            .map(|e| e.max(LOG_FLOOR).ln() as f32)
            .collect();
        Ok(MelFrame {
            values,
            frame_index,
        })
    }

    /// Log-mel projection straight from a complex spectrum.
    pub fn project_complex(&self, spec: &[Complex32], frame_index: usize) -> Result<MelFrame> {
        let mag: Vec<f32> = spec.iter().map(|c| c.norm()).collect();
        self.project(&mag, frame_index)
    }

    /// Full-resolution magnitudes recovered from a log-mel frame, clamped at 0.
    pub fn invert(&self, frame: &MelFrame) -> Result<Vec<f32>> {
        let energies: Vec<f64> = frame.values.iter().map(|&v| (v as f64).exp()).collect();
        Ok(self
            .invert_linear(&energies)?
            .into_iter()
            .map(|v| v.max(0.0) as f32)
            .collect())
    }
}
