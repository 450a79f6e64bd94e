//! Short-time Fourier analysis with a periodic Hann window.
//!
//! Frame `t` is centred on sample `t * hop`; samples before the start of the
//! stream and after its end read as zero. The windowed frame occupies the first
//! `window` slots of an `fft_len` buffer, the rest is zero padding.

use std::sync::Arc;

use rustfft::num_complex::Complex32;
use rustfft::{Fft, FftPlanner};

use super::AudioConfig;
use crate::error::{Error, Result};

/// Periodic Hann window of length `n`.
pub fn hann_window(n: usize) -> Vec<f32> {
    (0..n)
        .map(|i| {
            let x = std::f64::consts::PI * i as f64 / n as f64;
            (x.sin() * x.sin()) as f32
        })
        .collect()
}

/// Precomputed window and FFT plan for one [`AudioConfig`].
#[derive(Clone)]
pub struct StftPlan {
    window: Vec<f32>,
    hop: usize,
    fft_len: usize,
    fft: Arc<dyn Fft<f32>>,
    buf: Vec<Complex32>,
    scratch: Vec<Complex32>,
}

impl std::fmt::Debug for StftPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StftPlan")
            .field("window", &self.window.len())
            .field("hop", &self.hop)
            .field("fft_len", &self.fft_len)
            .finish()
    }
}

impl StftPlan {
    pub fn new(cfg: &AudioConfig) -> Result<Self> {
        cfg.validate(None)?;
        Ok(Self::with_sizes(cfg.window_samples(), cfg.hop_samples(), cfg.fft_len))
    }

    pub(crate) fn with_sizes(window: usize, hop: usize, fft_len: usize) -> Self {
        let fft = FftPlanner::<f32>::new().plan_fft_forward(fft_len);
        let scratch = vec![Complex32::default(); fft.get_inplace_scratch_len()];
        Self {
            window: hann_window(window),
            hop,
            fft_len,
            fft,
            buf: vec![Complex32::default(); fft_len],
            scratch,
        }
    }

    pub fn window_len(&self) -> usize {
        self.window.len()
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn n_bins(&self) -> usize {
        self.fft_len / 2 + 1
    }

    /// First sample index (possibly negative) covered by frame `t`.
    pub fn frame_start(&self, t: usize) -> isize {
        (t * self.hop) as isize - (self.window.len() / 2) as isize
    }

    /// Transforms one frame whose samples are provided by `sample(i)` for
    /// `i in 0..window`; returns the non-negative frequency half.
    pub(crate) fn transform(&mut self, sample: impl Fn(usize) -> f32) -> &[Complex32] {
        for (i, w) in self.window.iter().enumerate() {
            self.buf[i] = Complex32::new(sample(i) * w, 0.0);
        }
        for c in &mut self.buf[self.window.len()..] {
            *c = Complex32::default();
        }
        self.fft.process_with_scratch(&mut self.buf, &mut self.scratch);
        &self.buf[..self.fft_len / 2 + 1]
    }
}

fn check_finite(pcm: &[f32]) -> Result<()> {
    match pcm.iter().position(|s| !s.is_finite()) {
        Some(i) => Err(Error::InvalidInput(format!("non-finite sample at index {i}"))),
        None => Ok(()),
    }
}

/// Offline STFT: one spectrum per hop, `ceil(len / hop)` frames in total.
pub fn frame_stft(pcm: &[f32], cfg: &AudioConfig) -> Result<Vec<Vec<Complex32>>> {
    check_finite(pcm)?;
    let mut plan = StftPlan::new(cfg)?;
    let frames = pcm.len().div_ceil(plan.hop);
    let mut out = Vec::with_capacity(frames);
    for t in 0..frames {
        let start = plan.frame_start(t);
        let spec = plan.transform(|i| {
            let idx = start + i as isize;
            if idx >= 0 && (idx as usize) < pcm.len() {
                pcm[idx as usize]
            } else {
                0.0
            }
        });
        out.push(spec.to_vec());
    }
    Ok(out)
}

/// Incremental STFT producing the same spectra as [`frame_stft`].
///
/// A frame is emitted as soon as the last sample of its window has been pushed;
/// [`StreamingStft::finish`] flushes the trailing frames with zero padding.
#[derive(Debug, Clone)]
pub struct StreamingStft {
    plan: StftPlan,
    ring: Vec<f32>,
    pushed: usize,
    next_frame: usize,
}

impl StreamingStft {
    pub fn new(cfg: &AudioConfig) -> Result<Self> {
        let plan = StftPlan::new(cfg)?;
        let cap = plan.window_len().max(1);
        Ok(Self {
            plan,
            ring: vec![0.0; cap],
            pushed: 0,
            next_frame: 0,
        })
    }

    pub fn samples_pushed(&self) -> usize {
        self.pushed
    }

    pub fn frames_emitted(&self) -> usize {
        self.next_frame
    }

    fn frame_end(&self, t: usize) -> isize {
        self.plan.frame_start(t) + self.plan.window_len() as isize
    }

    fn emit(&mut self, limit: usize, sink: &mut dyn FnMut(usize, &[Complex32])) {
        let t = self.next_frame;
        let start = self.plan.frame_start(t);
        let cap = self.ring.len();
        let ring = &self.ring;
        let spec = self.plan.transform(|i| {
            let idx = start + i as isize;
            if idx >= 0 && (idx as usize) < limit {
                ring[idx as usize % cap]
            } else {
                0.0
            }
        });
        sink(t, spec);
        self.next_frame += 1;
    }

    /// Appends samples, calling `sink(frame_index, spectrum)` for every frame
    /// whose window became complete.
    pub fn push(&mut self, pcm: &[f32], sink: &mut dyn FnMut(usize, &[Complex32])) -> Result<()> {
        check_finite(pcm)?;
        let cap = self.ring.len();
        let mut rest = pcm;
        while !rest.is_empty() {
            let need = self.frame_end(self.next_frame);
            let until = if need > self.pushed as isize {
                (need as usize - self.pushed).min(rest.len())
            } else {
                0
            };
            for &s in &rest[..until] {
                self.ring[self.pushed % cap] = s;
                self.pushed += 1;
            }
            rest = &rest[until..];
            while self.frame_end(self.next_frame) <= self.pushed as isize {
                self.emit(self.pushed, sink);
            }
        }
        Ok(())
    }

    /// Emits the remaining frames (`ceil(pushed / hop)` in total) with zeros
    /// beyond the end of the stream.
    pub fn finish(&mut self, sink: &mut dyn FnMut(usize, &[Complex32])) {
        let total = self.pushed.div_ceil(self.plan.hop());
        while self.next_frame < total {
            self.emit(self.pushed, sink);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dft_mag(x: &[f64], n: usize) -> Vec<f64> {
        (0..=n / 2)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (i, &v) in x.iter().enumerate() {
                    let ph = -2.0 * std::f64::consts::PI * (k * i) as f64 / n as f64;
                    re += v * ph.cos();
                    im += v * ph.sin();
                }
                (re * re + im * im).sqrt()
            })
            .collect()
    }

    #[test]
    fn paper_geometry() {
        let cfg = AudioConfig::default();
        let plan = StftPlan::new(&cfg).unwrap();
        assert_eq!(plan.window_len(), 660);
        assert_eq!(plan.hop(), 240);
        assert_eq!(plan.n_bins(), 1025);
    }

    #[test]
    fn zero_input_gives_zero_spectra() {
        let cfg = AudioConfig::default();
        let spec = frame_stft(&vec![0.0; 2000], &cfg).unwrap();
        assert_eq!(spec.len(), 9);
        assert!(spec.iter().flatten().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn empty_stream_gives_no_frames() {
        assert!(frame_stft(&[], &AudioConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn rejects_non_finite() {
        let mut pcm = vec![0.0; 1000];
        pcm[10] = f32::NAN;
        assert!(matches!(
            frame_stft(&pcm, &AudioConfig::default()),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn impulse_matches_direct_dft() {
        // small config so the O(N^2) oracle stays cheap
        let cfg = AudioConfig {
            sample_rate_hz: 8000,
            window_ms: 8.0,
            hop_ms: 4.0,
            fft_len: 128,
            mel_dim: 8,
            fmin_hz: 0.0,
            fmax_hz: 4000.0,
        };
        let plan = StftPlan::new(&cfg).unwrap();
        let (win, hop) = (plan.window_len(), plan.hop());
        let mut pcm = vec![0.0f32; hop * 6];
        // impulse at the centre of frame 2's window, then one off-centre
        pcm[2 * hop] = 1.0;
        pcm[2 * hop + 5] = 0.5;
        let spec = frame_stft(&pcm, &cfg).unwrap();
        let start = 2 * hop - win / 2;
        let window = hann_window(win);
        let framed: Vec<f64> = (0..win).map(|i| (pcm[start + i] * window[i]) as f64).collect();
        let oracle = dft_mag(&framed, cfg.fft_len);
        for (k, c) in spec[2].iter().enumerate() {
            assert!((c.norm() as f64 - oracle[k]).abs() < 1e-5, "bin {k}");
        }
        // centred impulse alone is flat with magnitude w[win/2] = 1
        let mut only = vec![0.0f32; hop * 6];
        only[2 * hop] = 1.0;
        let flat = frame_stft(&only, &cfg).unwrap();
        for c in &flat[2] {
            assert!((c.norm() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn streaming_matches_offline_for_any_chunking() {
        let cfg = AudioConfig::default();
        let pcm: Vec<f32> = (0..5000).map(|i| ((i as f32) * 0.037).sin() * 0.5).collect();
        let offline = frame_stft(&pcm, &cfg).unwrap();
        for chunk in [1usize, 7, 240, 1000, 5000] {
            let mut st = StreamingStft::new(&cfg).unwrap();
            let mut got: Vec<Vec<Complex32>> = Vec::new();
            let mut sink = |t: usize, s: &[Complex32]| {
                assert_eq!(t, got.len());
                got.push(s.to_vec());
            };
            for c in pcm.chunks(chunk) {
                st.push(c, &mut sink).unwrap();
            }
            st.finish(&mut sink);
            assert_eq!(got, offline, "chunk {chunk}");
        }
    }

    #[test]
    fn frames_are_emitted_once_window_fills() {
        let cfg = AudioConfig::default();
        let mut st = StreamingStft::new(&cfg).unwrap();
        let mut n = 0;
        // frame 0 spans [-330, 330): needs 330 samples
        st.push(&[0.0; 329], &mut |_, _| n += 1).unwrap();
        assert_eq!(n, 0);
        st.push(&[0.0; 1], &mut |_, _| n += 1).unwrap();
        assert_eq!(n, 1);
        st.push(&[0.0; 240], &mut |_, _| n += 1).unwrap();
        assert_eq!(n, 2);
    }
}
