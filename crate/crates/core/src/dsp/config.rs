use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Analysis parameters shared by the front end and the vocoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioConfig {
    pub sample_rate_hz: u32,
    pub window_ms: f64,
    pub hop_ms: f64,
    pub fft_len: usize,
    pub mel_dim: usize,
    pub fmin_hz: f64,
    pub fmax_hz: f64,
}

impl Default for AudioConfig {
    fn default() -> Self {
        Self {
            sample_rate_hz: 24_000,
            window_ms: 27.5,
            hop_ms: 10.0,
            fft_len: 2048,
            mel_dim: 80,
            fmin_hz: 0.0,
            fmax_hz: 12_000.0,
        }
    }
}

impl AudioConfig {
    pub fn window_samples(&self) -> usize {
        (self.window_ms * self.sample_rate_hz as f64 / 1000.0).round() as usize
    }

    pub fn hop_samples(&self) -> usize {
        (self.hop_ms * self.sample_rate_hz as f64 / 1000.0).round() as usize
    }

    pub fn n_bins(&self) -> usize {
        self.fft_len / 2 + 1
    }

    /// Checks the internal invariants and, when `bands` is given, that one hop
    /// holds a whole number of band-level samples.
    pub fn validate(&self, bands: Option<usize>) -> Result<()> {
        if self.sample_rate_hz == 0 || self.hop_ms <= 0.0 || self.window_ms <= 0.0 {
            return Err(Error::Config("sample rate, hop and window must be positive".into()));
        }
        if self.window_samples() > self.fft_len {
            return Err(Error::Config(format!(
                "window of {} samples exceeds fft length {}",
                self.window_samples(),
                self.fft_len
            )));
        }
        if self.mel_dim == 0 {
            return Err(Error::Config("mel_dim must be positive".into()));
        }
        if !(self.fmin_hz >= 0.0 && self.fmax_hz > self.fmin_hz) {
            return Err(Error::Config("mel range must satisfy 0 <= fmin < fmax".into()));
        }
        if self.fmax_hz > self.sample_rate_hz as f64 / 2.0 + 1e-9 {
            return Err(Error::Config("fmax above Nyquist".into()));
        }
        if let Some(m) = bands {
            if m == 0 || self.hop_samples() % m != 0 {
                return Err(Error::Config(format!(
                    "hop of {} samples is not divisible by {m} bands",
                    self.hop_samples()
                )));
            }
        }
        Ok(())
    }
}
