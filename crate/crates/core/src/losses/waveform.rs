use std::sync::Arc;

use rustfft::num_complex::Complex32;
use rustfft::{Fft, FftPlanner};

use crate::dsp::stft::hann_window;
use crate::error::{ensure_len, Error, Result};

/// Floor on a target probability before the log.
pub const PROB_FLOOR: f64 = 1e-12;

/// FFT sizes and hops of the multi-resolution STFT loss.
pub const STFT_RESOLUTIONS: [(usize, usize); 3] = [(512, 80), (1024, 160), (2048, 240)];

/// Running waveform cross-entropy.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WaveformCe {
    pub total: f64,
    pub steps: usize,
    /// Number of targets whose probability was below [`PROB_FLOOR`].
    pub clamped: usize,
}

impl WaveformCe {
    pub fn add(&mut self, probs: &[f32], target: usize) -> Result<()> {
        if target >= probs.len() {
            return Err(Error::InvalidInput(format!(
                "target bin {target} out of range for {} bins",
                probs.len()
            )));
        }
        let p = probs[target] as f64;
        if !(p >= PROB_FLOOR) {
            self.clamped += 1;
        }
        self.total -= p.max(PROB_FLOOR).ln();
        self.steps += 1;
        Ok(())
    }

    /// Adds a `steps × bands × bins` block against `steps × bands` targets.
    pub fn add_block(&mut self, probs: &[f32], targets: &[usize], bins: usize) -> Result<()> {
        ensure_len("waveform probabilities", targets.len() * bins, probs.len())?;
        for (p, &t) in probs.chunks_exact(bins).zip(targets) {
            self.add(p, t)?;
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &WaveformCe) {
        self.total += other.total;
        self.steps += other.steps;
        self.clamped += other.clamped;
    }
}

/// `−Σ ln p[target]` over a sequence of probability vectors.
pub fn waveform_ce(probs: &[&[f32]], targets: &[usize]) -> Result<WaveformCe> {
    ensure_len("waveform targets", probs.len(), targets.len())?;
    let mut acc = WaveformCe::default();
    for (p, &t) in probs.iter().zip(targets) {
        acc.add(p, t)?;
    }
    Ok(acc)
}

/// Spectral convergence and log-magnitude L1 at one resolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StftTerms {
    pub fft_len: usize,
    pub hop: usize,
    pub spectral_convergence: f64,
    pub log_magnitude: f64,
}

const MAG_FLOOR: f64 = 1e-7;

/// Magnitudes of non-centred Hann frames; short signals give one zero-padded
/// frame.
pub(crate) fn stft_magnitudes(x: &[f32], fft_len: usize, hop: usize, fft: &Arc<dyn Fft<f32>>) -> Vec<Vec<f64>> {
    let win = hann_window(fft_len);
    let frames = if x.len() <= fft_len { 1 } else { 1 + (x.len() - fft_len).div_ceil(hop) };
    let mut buf = vec![Complex32::new(0.0, 0.0); fft_len];
    (0..frames)
        .map(|t| {
            for (i, b) in buf.iter_mut().enumerate() {
                let v = x.get(t * hop + i).copied().unwrap_or(0.0);
                *b = Complex32::new(v * win[i], 0.0);
            }
            fft.process(&mut buf);
            buf[..fft_len / 2 + 1].iter().map(|c| c.norm() as f64).collect()
        })
        .collect()
}

pub fn stft_terms(gen: &[f32], reference: &[f32]) -> Result<Vec<StftTerms>> {
    let n = gen.len().min(reference.len());
    if n == 0 {
        return Err(Error::InvalidInput("stft loss needs non-empty signals".into()));
    }
    let (g, r) = (&gen[..n], &reference[..n]);
    let mut planner = FftPlanner::new();
    Ok(STFT_RESOLUTIONS
        .iter()
        .map(|&(fft_len, hop)| {
            let fft = planner.plan_fft_forward(fft_len);
            let sg = stft_magnitudes(g, fft_len, hop, &fft);
            let sr = stft_magnitudes(r, fft_len, hop, &fft);
            let (mut num, mut den, mut log_l1, mut count) = (0.0, 0.0, 0.0, 0usize);
            for (fg, fr) in sg.iter().zip(&sr) {
                for (&a, &b) in fg.iter().zip(fr) {
                    num += (b - a) * (b - a);
                    den += b * b;
                    log_l1 += (b.max(MAG_FLOOR).ln() - a.max(MAG_FLOOR).ln()).abs();
                    count += 1;
                }
            }
            let spectral_convergence = if num == 0.0 { 0.0 } else { num.sqrt() / den.sqrt().max(1e-12) };
            StftTerms {
                fft_len,
                hop,
                spectral_convergence,
                log_magnitude: log_l1 / count as f64,
            }
        })
        .collect())
}

/// Multi-resolution STFT loss: spectral convergence plus log-magnitude L1,
/// averaged over resolutions. Signals are trimmed to the shorter length.
pub fn stft_loss(gen: &[f32], reference: &[f32]) -> Result<f64> {
    let terms = stft_terms(gen, reference)?;
    Ok(terms.iter().map(|t| t.spectral_convergence + t.log_magnitude).sum::<f64>() / terms.len() as f64)
}

/// Sum over layers of the mean absolute activation difference.
pub fn layerwise_loss(a: &[Vec<f32>], b: &[Vec<f32>]) -> Result<f64> {
    let mut acc = LayerwiseLoss::new(a.len());
    acc.add(a, b)?;
    Ok(acc.value())
}

/// Running layer-wise loss over frames.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerwiseLoss {
    sums: Vec<f64>,
    counts: Vec<usize>,
}

impl LayerwiseLoss {
    pub fn new(layers: usize) -> Self {
        Self {
            sums: vec![0.0; layers],
            counts: vec![0; layers],
        }
    }

    pub fn add(&mut self, a: &[Vec<f32>], b: &[Vec<f32>]) -> Result<()> {
        ensure_len("layer count", self.sums.len(), a.len())?;
        ensure_len("layer count", self.sums.len(), b.len())?;
        for (l, (x, y)) in a.iter().zip(b).enumerate() {
            ensure_len("layer width", x.len(), y.len())?;
            self.sums[l] += x.iter().zip(y).map(|(p, q)| (*p as f64 - *q as f64).abs()).sum::<f64>();
            self.counts[l] += x.len();
        }
        Ok(())
    }

    pub fn per_layer(&self) -> Vec<f64> {
        self.sums
            .iter()
            .zip(&self.counts)
            .map(|(s, &c)| if c == 0 { 0.0 } else { s / c as f64 })
            .collect()
    }

    pub fn value(&self) -> f64 {
        self.per_layer().iter().sum()
    }
}
