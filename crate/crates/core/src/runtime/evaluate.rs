//! Whole-utterance loss and metric evaluation behind `loss-eval` and
//! `metrics`.

use super::bundle::ModelBundle;
use crate::cyclevae::{cyclic_path, ConvertOptions};
use crate::dsp::{frame_stft, AudioConfig, MelFilterbank, MelFrame};
use crate::error::Result;
use crate::losses::{elbo_report, stft_loss, ElboInputs, ElboReport, LayerwiseLoss, LossWeights, WaveformCe, WaveformTerms};
use crate::metrics::{dct_cepstra, CepstraTrack, N_CEPSTRA};
use crate::mwdlp::TeacherForcer;

/// Log-mel frames and full-resolution magnitudes of a signal.
pub fn analyze(cfg: &AudioConfig, fb: &MelFilterbank, pcm: &[f32]) -> Result<(Vec<MelFrame>, Vec<Vec<f32>>)> {
    let spectra = frame_stft(pcm, cfg)?;
    let mut mels = Vec::with_capacity(spectra.len());
    let mut mags = Vec::with_capacity(spectra.len());
    for (t, s) in spectra.iter().enumerate() {
        let mag: Vec<f32> = s.iter().map(|c| c.norm()).collect();
        mels.push(fb.project(&mag, t)?);
        mags.push(mag);
    }
    Ok((mels, mags))
}

/// DCT-of-log-mel cepstra of a signal, every frame unvoiced.
pub fn approximate_track(cfg: &AudioConfig, pcm: &[f32]) -> Result<CepstraTrack> {
    let fb = MelFilterbank::new(cfg)?;
    let (mels, _) = analyze(cfg, &fb, pcm)?;
    CepstraTrack::from_cepstra(mels.iter().map(|m| dct_cepstra(&m.values, N_CEPSTRA)).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossEvalOptions {
    pub source: usize,
    pub target: usize,
    pub seed: u64,
    pub weights: LossWeights,
}

/// Spectral-model terms on the reference utterance plus vocoder terms:
/// teacher-forced cross-entropy of the reference band samples under
/// reconstructed-mel conditioning, the layer-wise distance between
/// reconstructed-mel and reference-mel activations, and the STFT loss
/// between `gen` and `reference`.
pub fn loss_eval(bundle: &ModelBundle, gen: &[f32], reference: &[f32], opts: &LossEvalOptions) -> Result<ElboReport> {
    let m = &bundle.cyclevae;
    let (mels, mags) = analyze(&bundle.audio, bundle.filterbank(), reference)?;
    let mut copts = ConvertOptions::new(Some(m.code(opts.source)?), m.code(opts.target)?);
    copts.reconstruct = true;
    let cyclic = cyclic_path(m, &mels, &copts, opts.seed, 1)?;
    let recon: Vec<MelFrame> = cyclic
        .converted()
        .iter()
        .filter_map(|f| {
            f.reconstructed.as_ref().map(|r| MelFrame {
                values: r.sample.clone(),
                frame_index: f.frame_index,
            })
        })
        .collect();

    let voc = &bundle.vocoder;
    let c = voc.config();
    let mut padded = reference.to_vec();
    padded.resize(mels.len() * c.hop_samples, 0.0);
    let targets: Vec<Vec<usize>> = voc
        .pqmf()
        .analyze(&padded)
        .iter()
        .map(|band| band.iter().map(|&x| voc.mulaw().encode(x)).collect())
        .collect();

    let mut ce = WaveformCe::default();
    let mut layers = LayerwiseLoss::new(crate::mwdlp::LAYER_NAMES.len());
    let mut on_recon = TeacherForcer::new(voc, targets.clone())?;
    let mut on_ref = TeacherForcer::new(voc, targets)?;
    let mut step = |a: Option<&crate::mwdlp::FrameActivations>, b: Option<&crate::mwdlp::FrameActivations>| -> Result<()> {
        if let (Some(a), Some(b)) = (a, b) {
            ce.add_block(&a.probs, &a.targets, c.bins)?;
            layers.add(&a.layers, &b.layers)?;
        }
        Ok(())
    };
    for (r, x) in recon.iter().zip(&mels) {
        let a = on_recon.push(&r.values)?.cloned();
        let b = on_ref.push(&x.values)?;
        step(a.as_ref(), b)?;
    }
    loop {
        let a = on_recon.flush()?.cloned();
        let b = on_ref.flush()?;
        if a.is_none() {
            break;
        }
        step(a.as_ref(), b)?;
    }

    let inputs = ElboInputs {
        mels: &mels,
        source: opts.source,
        target: opts.target,
        cyclic: &cyclic,
        excitation: None,
        fullres: Some((bundle.filterbank(), &mags)),
        waveform: Some(WaveformTerms {
            ce: ce.total,
            stft: stft_loss(gen, reference)?,
            layerwise: layers.value(),
        }),
    };
    elbo_report(m, &inputs, &opts.weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runtime::{convert_offline, init_random, synthetic_speech, Preset, SessionOptions};

    #[test]
    fn loss_eval_on_toy_bundle() {
        let b = init_random(2, Preset::Toy).unwrap();
        let reference = synthetic_speech(0.3, 24_000, 5);
        let gen = convert_offline(&b, &reference, &SessionOptions::new(0, 1)).unwrap();
        let opts = LossEvalOptions {
            source: 0,
            target: 1,
            seed: 3,
            weights: LossWeights::default(),
        };
        let r = loss_eval(&b, &gen, &reference, &opts).unwrap();
        assert_eq!(r.frames, 30);
        assert!(r.excitation_nll.is_none());
        assert!(r.waveform_ce.unwrap() > 0.0);
        assert!(r.layerwise.unwrap() > 0.0);
        assert!((r.total - r.weighted_total(&opts.weights)).abs() < 1e-9 * r.total.abs().max(1.0));
        assert_eq!(loss_eval(&b, &gen, &reference, &opts).unwrap(), r);
        let same = loss_eval(&b, &reference, &reference, &opts).unwrap();
        assert_eq!(same.stft, Some(0.0));
    }

    #[test]
    fn approximate_track_of_identical_signals_gives_zero_distortion() {
        let cfg = AudioConfig::default();
        let x = synthetic_speech(0.2, 24_000, 1);
        let a = approximate_track(&cfg, &x).unwrap();
        assert_eq!(a.frames(), 20);
        assert_eq!(crate::metrics::mcd(&a, &a).unwrap(), 0.0);
    }
}
