//! Objective conversion metrics on aligned feature tracks.
//!
//! Frames are paired one to one; any alignment is the caller's job.

use serde::{Deserialize, Serialize};

use crate::dsp::features::FeatureMatrix;
use crate::error::{ensure_len, Error, Result};

/// Number of cepstral coefficients, `c0..c27`.
pub const N_CEPSTRA: usize = 28;

const VAR_FLOOR: f64 = 1e-12;

/// Per-frame cepstra with F0 and voicing.
#[derive(Debug, Clone, PartialEq)]
pub struct CepstraTrack {
    /// `frames × dims`, `c0` first.
    pub cepstra: Vec<Vec<f32>>,
    pub voiced: Vec<bool>,
    pub f0_hz: Vec<f32>,
}

impl CepstraTrack {
    pub fn new(cepstra: Vec<Vec<f32>>, voiced: Vec<bool>, f0_hz: Vec<f32>) -> Result<Self> {
        ensure_len("voicing flags", cepstra.len(), voiced.len())?;
        ensure_len("f0 track", cepstra.len(), f0_hz.len())?;
        if let Some(d) = cepstra.first().map(Vec::len) {
            if d == 0 || cepstra.iter().any(|c| c.len() != d) {
                return Err(Error::InvalidInput("cepstra rows must share a positive width".into()));
            }
        }
        Ok(Self { cepstra, voiced, f0_hz })
    }

    /// Track with cepstra only; every frame unvoiced.
    pub fn from_cepstra(cepstra: Vec<Vec<f32>>) -> Result<Self> {
        let n = cepstra.len();
        Self::new(cepstra, vec![false; n], vec![0.0; n])
    }

    /// Rows laid out as `[f0_hz, voicing, c0, c1, …]`.
    pub fn from_features(f: &FeatureMatrix) -> Result<Self> {
        if f.dim < 3 {
            return Err(Error::InvalidInput(format!(
                "feature rows need f0, voicing and cepstra, got width {}",
                f.dim
            )));
        }
        let mut c = Vec::with_capacity(f.frames());
        let mut v = Vec::with_capacity(f.frames());
        let mut f0 = Vec::with_capacity(f.frames());
        for row in f.rows() {
            f0.push(row[0]);
            v.push(row[1] > 0.5);
            c.push(row[2..].to_vec());
        }
        Self::new(c, v, f0)
    }

    pub fn frames(&self) -> usize {
        self.cepstra.len()
    }
}

fn check_pair(a: &CepstraTrack, b: &CepstraTrack) -> Result<()> {
    ensure_len("frame count", a.frames(), b.frames())?;
    if let (Some(x), Some(y)) = (a.cepstra.first(), b.cepstra.first()) {
        ensure_len("cepstral order", x.len(), y.len())?;
    }
    Ok(())
}

/// Mel-cepstral distortion in dB, mean over frames, `c0` excluded.
pub fn mcd(a: &CepstraTrack, b: &CepstraTrack) -> Result<f64> {
    check_pair(a, b)?;
    if a.frames() == 0 {
        return Err(Error::InvalidInput("mcd needs at least one frame".into()));
    }
    let k = 10.0 / std::f64::consts::LN_10;
    let total: f64 = a
        .cepstra
        .iter()
        .zip(&b.cepstra)
        .map(|(x, y)| {
            let s: f64 = x[1..].iter().zip(&y[1..]).map(|(p, q)| (*p as f64 - *q as f64).powi(2)).sum();
            k * (2.0 * s).sqrt()
        })
        .sum();
    Ok(total / a.frames() as f64)
}

/// Per-dimension variance over frames, `c0` excluded.
pub fn global_variance(t: &CepstraTrack) -> Vec<f64> {
    let n = t.frames() as f64;
    let dims = t.cepstra.first().map_or(0, Vec::len);
    (1..dims)
        .map(|d| {
            let mean = t.cepstra.iter().map(|c| c[d] as f64).sum::<f64>() / n;
            t.cepstra.iter().map(|c| (c[d] as f64 - mean).powi(2)).sum::<f64>() / n
        })
        .collect()
}

/// Mean absolute difference of log10 global variances, `c0` excluded.
pub fn lgd(a: &CepstraTrack, b: &CepstraTrack) -> Result<f64> {
    if a.frames() < 2 || b.frames() < 2 {
        return Err(Error::InvalidInput("lgd needs at least two frames per track".into()));
    }
    if let (Some(x), Some(y)) = (a.cepstra.first(), b.cepstra.first()) {
        ensure_len("cepstral order", x.len(), y.len())?;
        if x.len() < 2 {
            return Err(Error::InvalidInput("lgd needs coefficients beyond c0".into()));
        }
    }
    let (ga, gb) = (global_variance(a), global_variance(b));
    let sum: f64 = ga
        .iter()
        .zip(&gb)
        .map(|(p, q)| (p.max(VAR_FLOOR).log10() - q.max(VAR_FLOOR).log10()).abs())
        .sum();
    Ok(sum / ga.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F0Metrics {
    /// `None` when no frame is voiced in both tracks.
    pub rmse_hz: Option<f64>,
    pub uv_error_pct: f64,
    pub mutually_voiced: usize,
}

pub fn f0_metrics(a: &CepstraTrack, b: &CepstraTrack) -> Result<F0Metrics> {
    ensure_len("frame count", a.frames(), b.frames())?;
    if a.frames() == 0 {
        return Err(Error::InvalidInput("f0 metrics need at least one frame".into()));
    }
    let (mut sq, mut both, mut flips) = (0.0, 0usize, 0usize);
    for t in 0..a.frames() {
        match (a.voiced[t], b.voiced[t]) {
            (true, true) => {
                sq += (a.f0_hz[t] as f64 - b.f0_hz[t] as f64).powi(2);
                both += 1;
            }
            (x, y) if x != y => flips += 1,
            _ => {}
        }
    }
    Ok(F0Metrics {
        rmse_hz: (both > 0).then(|| (sq / both as f64).sqrt()),
        uv_error_pct: 100.0 * flips as f64 / a.frames() as f64,
        mutually_voiced: both,
    })
}

/// First `n` coefficients of the orthonormal DCT-II of a log-mel frame. An
/// approximation of mel-cepstra for self-contained evaluation; values are
/// not comparable with vocoder-analysis mel-cepstra.
pub fn dct_cepstra(log_mel: &[f32], n: usize) -> Vec<f32> {
    let m = log_mel.len();
    let pi = std::f64::consts::PI;
    (0..n.min(m))
        .map(|k| {
            let s: f64 = log_mel
                .iter()
                .enumerate()
                .map(|(i, &v)| v as f64 * (pi * k as f64 * (i as f64 + 0.5) / m as f64).cos())
                .sum();
            let norm = if k == 0 { (1.0 / m as f64).sqrt() } else { (2.0 / m as f64).sqrt() };
            (s * norm) as f32
        })
        .collect()
}

/// Summary written by the metrics CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub frames: usize,
    pub mcd_db: f64,
    pub lgd: f64,
    pub f0_rmse_hz: Option<f64>,
    pub uv_error_pct: Option<f64>,
    /// True when cepstra came from the DCT approximation.
    pub approximate_cepstra: bool,
}

/// All metrics; F0 terms are skipped when `with_f0` is false.
pub fn report(a: &CepstraTrack, b: &CepstraTrack, with_f0: bool, approximate_cepstra: bool) -> Result<MetricReport> {
    let f0 = if with_f0 { Some(f0_metrics(a, b)?) } else { None };
    Ok(MetricReport {
        frames: a.frames(),
        mcd_db: mcd(a, b)?,
        lgd: lgd(a, b)?,
        f0_rmse_hz: f0.and_then(|f| f.rmse_hz),
        uv_error_pct: f0.map(|f| f.uv_error_pct),
        approximate_cepstra,
    })
}
