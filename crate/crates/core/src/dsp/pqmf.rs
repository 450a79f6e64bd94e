//! Pseudo-QMF cosine-modulated filterbank with polyphase analysis and
//! overlap-add polyphase synthesis.
//!
//! The prototype is a Kaiser-windowed sinc of order `16 * bands`; its cutoff is
//! chosen by a 1-D search that makes `p * p` as close as possible to a
//! `2M`-th band Nyquist filter, which is the near-perfect-reconstruction
//! condition for cosine modulation. Analysis followed by synthesis reproduces
//! the input delayed by [`Pqmf::group_delay_samples`].

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Taps per band of the prototype order.
pub const TAPS_PER_BAND: usize = 16;
/// Kaiser window shape parameter.
pub const KAISER_BETA: f64 = 9.0;

fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn kaiser_sinc(order: usize, cutoff: f64, beta: f64) -> Vec<f64> {
    let half = order as f64 / 2.0;
    let i0b = bessel_i0(beta);
    (0..=order)
        .map(|n| {
            let t = n as f64 - half;
            let ideal = if t == 0.0 {
                cutoff
            } else {
                (PI * cutoff * t).sin() / (PI * t)
            };
            let r = 2.0 * n as f64 / order as f64 - 1.0;
            ideal * bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / i0b
        })
        .collect()
}

/// Worst normalised deviation of `p * p` from a `2M`-th band Nyquist filter.
fn nyquist_deviation(p: &[f64], bands: usize) -> f64 {
    let n = p.len() - 1;
    let g = |lag: usize| -> f64 { p[lag..].iter().zip(p).map(|(a, b)| a * b).sum() };
    let g0 = g(0);
    let mut worst: f64 = 0.0;
    let mut lag = 2 * bands;
    while lag <= n {
        worst = worst.max((g(lag) / g0).abs());
        lag += 2 * bands;
    }
    worst
}

fn search_cutoff(order: usize, bands: usize, beta: f64) -> f64 {
    let nominal = 1.0 / (2.0 * bands as f64);
    let cost = |c: f64| nyquist_deviation(&kaiser_sinc(order, c, beta), bands);
    let (lo, hi) = (0.6 * nominal, 1.6 * nominal);
    let steps = 400;
    let mut best = (f64::INFINITY, nominal);
    for i in 0..=steps {
        let c = lo + (hi - lo) * i as f64 / steps as f64;
        let v = cost(c);
        if v < best.0 {
            best = (v, c);
        }
    }
    // golden-section refinement inside the best grid cell
    let h = (hi - lo) / steps as f64;
    let (mut a, mut b) = (best.1 - h, best.1 + h);
    let gr = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - gr * (b - a);
    let mut d = a + gr * (b - a);
    for _ in 0..60 {
        if cost(c) < cost(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - gr * (b - a);
        d = a + gr * (b - a);
    }
    let refined = (a + b) / 2.0;
    if cost(refined) < best.0 {
        refined
    } else {
        best.1
    }
}

/// Filterbank coefficients shared by analysis and synthesis states.
#[derive(Debug, Clone)]
pub struct Pqmf {
    bands: usize,
    cutoff: f64,
    prototype: Vec<f64>,
    /// `p[n] * (-1)^(n / 2M)`.
    analysis_poly: Vec<f64>,
    /// `gain * M * p[n] * (-1)^(n / 2M)`.
    synthesis_poly: Vec<f64>,
    /// `[M x 2M]`, `2 cos(theta_k (j - N/2) + phi_k)`.
    analysis_mod: Vec<f64>,
    /// `[2M x M]`, `2 cos(theta_k (j - N/2) - phi_k)`.
    synthesis_mod: Vec<f64>,
}

impl Pqmf {
    pub fn new(bands: usize) -> Result<Self> {
        if bands < 2 {
            return Err(Error::Config(format!("PQMF needs at least 2 bands, got {bands}")));
        }
        let order = TAPS_PER_BAND * bands;
        let cutoff = search_cutoff(order, bands, KAISER_BETA);
        let prototype = kaiser_sinc(order, cutoff, KAISER_BETA);
        let two_m = 2 * bands;
        let half = order as f64 / 2.0;
        let phase = |k: usize, j: usize, sign: f64| {
            let theta = (2 * k + 1) as f64 * PI / two_m as f64;
            let phi = if k % 2 == 0 { PI / 4.0 } else { -PI / 4.0 };
            2.0 * (theta * (j as f64 - half) + sign * phi).cos()
        };
        let mut analysis_mod = vec![0.0; bands * two_m];
        let mut synthesis_mod = vec![0.0; two_m * bands];
        for k in 0..bands {
            for j in 0..two_m {
                analysis_mod[k * two_m + j] = phase(k, j, 1.0);
                synthesis_mod[j * bands + k] = phase(k, j, -1.0);
            }
        }
        let sign = |n: usize| if (n / two_m) % 2 == 0 { 1.0 } else { -1.0 };
        let analysis_poly: Vec<f64> = prototype.iter().enumerate().map(|(n, p)| p * sign(n)).collect();

        // Distortion transfer t = sum_k f_k * h_k; normalise its main tap to 1.
        let filt = |k: usize, s: f64| -> Vec<f64> {
            prototype
                .iter()
                .enumerate()
                .map(|(n, p)| p * phase(k, n, s))
                .collect()
        };
        let mut peak = 0.0;
        for k in 0..bands {
            let (h, f) = (filt(k, 1.0), filt(k, -1.0));
            peak += (0..=order).map(|i| h[i] * f[order - i]).sum::<f64>();
        }
        let gain = 1.0 / peak;
        let synthesis_poly = analysis_poly.iter().map(|p| p * bands as f64 * gain).collect();
        Ok(Self {
            bands,
            cutoff,
            prototype,
            analysis_poly,
            synthesis_poly,
            analysis_mod,
            synthesis_mod,
        })
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn prototype(&self) -> &[f64] {
        &self.prototype
    }

    /// Normalised prototype cutoff (fraction of Nyquist).
    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn order(&self) -> usize {
        self.prototype.len() - 1
    }

    /// Delay of analysis followed by synthesis, in full-rate samples.
    pub fn group_delay_samples(&self) -> usize {
        self.order()
    }

    /// Splits `pcm` into `M` critically sampled bands. The input is zero padded
    /// to a multiple of `M`.
    pub fn analyze(&self, pcm: &[f32]) -> Vec<Vec<f32>> {
        let mut st = PqmfAnalyzer::new(self.clone());
        let blocks = pcm.len().div_ceil(self.bands);
        let mut out = vec![Vec::with_capacity(blocks); self.bands];
        let mut frame = vec![0.0f32; self.bands];
        for b in 0..blocks {
            for (i, slot) in frame.iter_mut().enumerate() {
                *slot = pcm.get(b * self.bands + i).copied().unwrap_or(0.0);
            }
            st.push_block(&frame, |k, v| out[k].push(v));
        }
        out
    }

    /// Recombines band streams into one full-rate stream of `M * len` samples.
    pub fn synthesize(&self, bands: &[Vec<f32>]) -> Result<Vec<f32>> {
        if bands.len() != self.bands {
            return Err(Error::Config(format!(
                "expected {} band streams, got {}",
                self.bands,
                bands.len()
            )));
        }
        let len = bands[0].len();
        if bands.iter().any(|b| b.len() != len) {
            return Err(Error::InvalidInput("band streams differ in length".into()));
        }
        let mut st = PqmfSynthesizer::new(self.clone());
        let mut out = Vec::with_capacity(len * self.bands);
        let mut block = vec![0.0f32; self.bands];
        let mut pcm = vec![0.0f32; self.bands];
        for t in 0..len {
            for (k, b) in bands.iter().enumerate() {
                block[k] = b[t];
            }
            st.push_block(&block, &mut pcm);
            out.extend_from_slice(&pcm);
        }
        Ok(out)
    }
}

/// Streaming polyphase analysis.
#[derive(Debug, Clone)]
pub struct PqmfAnalyzer {
    fb: Pqmf,
    history: Vec<f64>,
    pos: usize,
    partial: Vec<f64>,
}

impl PqmfAnalyzer {
    pub fn new(fb: Pqmf) -> Self {
        let len = fb.prototype.len() + fb.bands;
        let two_m = 2 * fb.bands;
        Self {
            fb,
            history: vec![0.0; len],
            pos: 0,
            partial: vec![0.0; two_m],
        }
    }

    /// Consumes the `M` samples `x[mM..mM+M]` and emits one sample per band
    /// through `sink(k, y)`, where `y_k[m] = sum_n h_k[n] x[mM - n]`.
    pub fn push_block(&mut self, samples: &[f32], mut sink: impl FnMut(usize, f32)) {
        debug_assert_eq!(samples.len(), self.fb.bands);
        let len = self.history.len();
        let two_m = 2 * self.fb.bands;
        for &s in samples {
            self.history[self.pos] = s as f64;
            self.pos = (self.pos + 1) % len;
        }
        // slot of x[mM]: M samples back from the write position
        let anchor = (self.pos + len - samples.len()) % len;
        self.partial.iter_mut().for_each(|u| *u = 0.0);
        for (n, &c) in self.fb.analysis_poly.iter().enumerate() {
            let x = self.history[(anchor + len - n) % len];
            self.partial[n % two_m] += c * x;
        }
        for k in 0..self.fb.bands {
            let row = &self.fb.analysis_mod[k * two_m..(k + 1) * two_m];
            let y: f64 = row.iter().zip(&self.partial).map(|(a, u)| a * u).sum();
            sink(k, y as f32);
        }
    }
}

/// Streaming overlap-add polyphase synthesis.
#[derive(Debug, Clone)]
pub struct PqmfSynthesizer {
    fb: Pqmf,
    acc: Vec<f64>,
    head: usize,
    mixed: Vec<f64>,
}

impl PqmfSynthesizer {
    pub fn new(fb: Pqmf) -> Self {
        let len = fb.prototype.len() + fb.bands;
        let two_m = 2 * fb.bands;
        Self {
            fb,
            acc: vec![0.0; len],
            head: 0,
            mixed: vec![0.0; two_m],
        }
    }

    pub fn bands(&self) -> usize {
        self.fb.bands
    }

    /// Consumes one sample per band and writes `M` finished full-rate samples.
    pub fn push_block(&mut self, block: &[f32], out: &mut [f32]) {
        let m = self.fb.bands;
        let two_m = 2 * m;
        let len = self.acc.len();
        for r in 0..two_m {
            let row = &self.fb.synthesis_mod[r * m..(r + 1) * m];
            self.mixed[r] = row.iter().zip(block).map(|(s, &y)| s * y as f64).sum();
        }
        for (n, &c) in self.fb.synthesis_poly.iter().enumerate() {
            let slot = (self.head + n) % len;
            self.acc[slot] += c * self.mixed[n % two_m];
        }
        for (i, o) in out.iter_mut().take(m).enumerate() {
            let slot = (self.head + i) % len;
            *o = self.acc[slot] as f32;
            self.acc[slot] = 0.0;
        }
        self.head = (self.head + m) % len;
    }
}
