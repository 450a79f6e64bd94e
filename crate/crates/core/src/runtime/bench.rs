use std::f64::consts::TAU;

use super::bundle::ModelBundle;
use super::engine::{Session, SessionOptions};
use super::report::LatencyReport;
use crate::error::Result;
use crate::rng::RngStream;

/// Deterministic speech-like test signal: a harmonic source with slow pitch
/// drift, syllable-rate amplitude modulation, short pauses and a noise floor.
pub fn synthetic_speech(seconds: f64, sample_rate: u32, seed: u64) -> Vec<f32> {
    let n = (seconds * sample_rate as f64).round() as usize;
    let fs = sample_rate as f64;
    let mut rng = RngStream::with_stream_id(seed, 0xbe7c);
    let mut phase = 0.0f64;
    (0..n)
        .map(|i| {
            let t = i as f64 / fs;
            let f0 = 120.0 + 25.0 * (TAU * 0.7 * t).sin() + 8.0 * (TAU * 5.5 * t).sin();
            phase = (phase + TAU * f0 / fs) % TAU;
            let env = (0.5 + 0.5 * (TAU * 4.0 * t).sin()).powi(2) * if t % 1.7 < 1.4 { 1.0 } else { 0.0 };
            let voiced: f64 = (1..=20).map(|k| (k as f64 * phase).sin() / k as f64).sum();
            (0.15 * env * voiced + 0.003 * rng.symmetric(1.0) as f64) as f32
        })
        .collect()
}

/// Streams `seconds` of synthetic input through a session in hop-sized
/// chunks, the same way a live source would deliver it.
pub fn bench(bundle: &ModelBundle, seconds: f64, seed: u64) -> Result<LatencyReport> {
    let pcm = synthetic_speech(seconds, bundle.audio.sample_rate_hz, seed);
    let mut s = Session::new(bundle, SessionOptions::new(0, seed))?;
    let mut out = Vec::with_capacity(4 * bundle.audio.hop_samples());
    for c in pcm.chunks(bundle.audio.hop_samples()) {
        out.clear();
        s.push(c, &mut out)?;
    }
    out.clear();
    s.finish(&mut out)?;
    Ok(s.report())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runtime::{init_random, Preset};

    #[test]
    fn toy_bench_reports_consistent_breakdown() {
        let b = init_random(0, Preset::Toy).unwrap();
        let r = bench(&b, 1.0, 0).unwrap();
        assert_eq!(r.frames, 100);
        assert!((r.audio_seconds - 1.0).abs() < 1e-12);
        assert!((r.stage_rtf.sum() - r.total_rtf).abs() < 1e-9);
        assert_eq!(r.algorithmic_delay_ms, 23.75);
    }

    #[test]
    fn signal_is_deterministic_and_bounded() {
        let a = synthetic_speech(0.5, 24_000, 3);
        assert_eq!(a, synthetic_speech(0.5, 24_000, 3));
        assert_eq!(a.len(), 12_000);
        assert!(a.iter().all(|s| s.abs() < 1.0));
    }
}
