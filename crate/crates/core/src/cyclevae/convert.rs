use std::time::{Duration, Instant};

use super::model::{CycleVaeModel, DecoderState, EncoderState, SpectralFrame};
use super::net::SegGruState;
use super::types::{convert_lf0, ExcitationEstimate, ExcitationFrame, LatentPair, SpeakerCode};
use crate::dsp::MelFrame;
use crate::error::{ensure_len, Error, Result};
use crate::nn::LookaheadWindow;
use crate::rng::{RngStream, Site};

/// Random stream ids of one pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathSites {
    pub z: u64,
    pub z_tilde: u64,
    pub mel: u64,
    pub recon: u64,
}

impl PathSites {
    pub const CONVERT: Self = Self {
        z: Site::EncoderZ as u64,
        z_tilde: Site::EncoderZTilde as u64,
        mel: Site::DecoderMel as u64,
        recon: Site::ReconDecoderMel as u64,
    };

    /// Sites of pass `k` of a cyclic run; pass 0 is the plain conversion.
    pub fn pass(k: usize) -> Self {
        if k == 0 {
            return Self::CONVERT;
        }
        let off = 1000 * (k as u64 - 1);
        Self {
            z: Site::CycleEncoderZ as u64 + off,
            z_tilde: Site::CycleEncoderZTilde as u64 + off,
            mel: Site::CycleDecoderMel as u64 + off,
            recon: Site::ReconDecoderMel as u64 + 1000 * k as u64,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConvertOptions {
    /// Required in the pretraining wiring and for reconstruction.
    pub source: Option<SpeakerCode>,
    pub target: SpeakerCode,
    pub sites: PathSites,
    /// Also decode with the source code from the same latents.
    pub reconstruct: bool,
    /// Also run the speaker classifier on the input window.
    pub classify: bool,
}

impl ConvertOptions {
    pub fn new(source: Option<SpeakerCode>, target: SpeakerCode) -> Self {
        Self {
            source,
            target,
            sites: PathSites::CONVERT,
            reconstruct: false,
            classify: false,
        }
    }
}

/// Everything computed for one input frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvertedFrame {
    pub frame_index: usize,
    pub latents: LatentPair,
    pub spk_post_phi: Vec<f32>,
    pub spk_post_phi_tilde: Vec<f32>,
    pub spk_post_cls: Option<Vec<f32>>,
    pub converted: SpectralFrame,
    pub reconstructed: Option<SpectralFrame>,
    /// Excitation decoded with the source code (pretraining wiring).
    pub excitation: Option<ExcitationEstimate>,
    /// The same after log-F0 conversion to the target speaker.
    pub converted_excitation: Option<ExcitationFrame>,
}

impl ConvertedFrame {
    /// The sampled converted mel frame.
    pub fn mel(&self) -> MelFrame {
        MelFrame {
            values: self.converted.sample.clone(),
            frame_index: self.frame_index,
        }
    }
}

/// Frame-synchronous conversion: one output per input after one frame of
/// lookahead, the last one produced by [`Converter::flush`].
#[derive(Debug, Clone)]
pub struct Converter<'m> {
    model: &'m CycleVaeModel,
    opts: ConvertOptions,
    window: LookaheadWindow,
    enc: EncoderState,
    dec: DecoderState,
    recon: Option<DecoderState>,
    exc: Option<DecoderState>,
    cls: Option<SegGruState>,
    rng_z: RngStream,
    rng_zt: RngStream,
    rng_mel: RngStream,
    rng_recon: RngStream,
    encoder_time: Duration,
    decoder_time: Duration,
}

impl<'m> Converter<'m> {
    pub fn new(model: &'m CycleVaeModel, opts: ConvertOptions, seed: u64) -> Result<Self> {
        model.validate()?;
        let n = model.config.n_speakers;
        ensure_len("target code", n, opts.target.one_hot().len())?;
        if let Some(s) = &opts.source {
            ensure_len("source code", n, s.one_hot().len())?;
        } else if !model.config.fine_tuned || opts.reconstruct {
            return Err(Error::Config(
                "source speaker required for the pretraining wiring and for reconstruction".into(),
            ));
        }
        let pretrain = !model.config.fine_tuned;
        Ok(Self {
            window: model.encoder_window(),
            enc: model.encoder_state(),
            dec: model.decoder_state(),
            recon: opts.reconstruct.then(|| model.decoder_state()),
            exc: if pretrain { Some(model.excitation_state()?) } else { None },
            cls: opts.classify.then(|| model.classifier_state()),
            rng_z: RngStream::with_stream_id(seed, opts.sites.z),
            rng_zt: RngStream::with_stream_id(seed, opts.sites.z_tilde),
            rng_mel: RngStream::with_stream_id(seed, opts.sites.mel),
            rng_recon: RngStream::with_stream_id(seed, opts.sites.recon),
            encoder_time: Duration::ZERO,
            decoder_time: Duration::ZERO,
            model,
            opts,
        })
    }

    /// Frames of lookahead before the first output.
    pub fn lookahead(&self) -> usize {
        self.window.lookahead()
    }

    /// Accumulated wall-clock time in the encoders and in the decoders.
    pub fn stage_times(&self) -> (Duration, Duration) {
        (self.encoder_time, self.decoder_time)
    }

    pub fn push(&mut self, mel: &[f32]) -> Result<Option<ConvertedFrame>> {
        ensure_len("mel frame", self.model.config.mel_dim, mel.len())?;
        match self.window.push(mel)? {
            Some(t) => self.process(t).map(Some),
            None => Ok(None),
        }
    }

    /// Ends the stream, padding the lookahead with the last frame.
    pub fn flush(&mut self) -> Result<Vec<ConvertedFrame>> {
        let mut out = Vec::new();
        while let Some(t) = self.window.flush() {
            out.push(self.process(t)?);
        }
        Ok(out)
    }

    fn process(&mut self, t: usize) -> Result<ConvertedFrame> {
        let m = self.model;
        let start = Instant::now();
        let concat = self.window.concat();
        let enc = m.encode(&mut self.enc, concat, &mut self.rng_z, &mut self.rng_zt)?;
        let spk_post_cls = match &mut self.cls {
            Some(st) => Some(m.classify_speaker(st, concat)?),
            None => None,
        };
        let mid = Instant::now();
        self.encoder_time += mid - start;

        let lat = &enc.latents;
        let (excitation, converted_excitation) = match (&mut self.exc, &self.opts.source) {
            (Some(st), Some(src)) => {
                let est = m.decode_excitation(st, &lat.z_tilde, src)?;
                let conv = convert_lf0(&est.frame(), m.lf0_stats(src), m.lf0_stats(&self.opts.target))?;
                (Some(est), Some(conv))
            }
            _ => (None, None),
        };
        let converted = m.decode_spectral(
            &mut self.dec,
            &lat.z,
            &lat.z_tilde,
            &self.opts.target,
            converted_excitation.as_ref(),
            &mut self.rng_mel,
        )?;
        let reconstructed = match (&mut self.recon, &self.opts.source) {
            (Some(st), Some(src)) => {
                let own = excitation.as_ref().map(ExcitationEstimate::frame);
                Some(m.decode_spectral(st, &lat.z, &lat.z_tilde, src, own.as_ref(), &mut self.rng_recon)?)
            }
            _ => None,
        };
        self.decoder_time += mid.elapsed();
        Ok(ConvertedFrame {
            frame_index: t,
            latents: enc.latents,
            spk_post_phi: enc.spk_post_phi,
            spk_post_phi_tilde: enc.spk_post_phi_tilde,
            spk_post_cls,
            converted,
            reconstructed,
            excitation,
            converted_excitation,
        })
    }
}

/// Offline conversion of a whole mel sequence.
pub fn convert_path(
    model: &CycleVaeModel,
    mels: &[MelFrame],
    opts: &ConvertOptions,
    seed: u64,
) -> Result<Vec<ConvertedFrame>> {
    let mut conv = Converter::new(model, opts.clone(), seed)?;
    let mut out = Vec::with_capacity(mels.len());
    for m in mels {
        if let Some(f) = conv.push(&m.values)? {
            out.push(f);
        }
    }
    out.extend(conv.flush()?);
    Ok(out)
}

/// Passes of a cyclic run: `passes[0]` converts source to target,
/// `passes[1]` re-encodes its sampled frames and decodes with the source code,
/// and so on, alternating.
#[derive(Debug, Clone, PartialEq)]
pub struct CyclicOutput {
    pub passes: Vec<Vec<ConvertedFrame>>,
}

impl CyclicOutput {
    pub fn converted(&self) -> &[ConvertedFrame] {
        &self.passes[0]
    }

    /// Output of the first cycle back to the source speaker.
    pub fn reconstructed(&self) -> &[ConvertedFrame] {
        &self.passes[1]
    }
}

/// Conversion followed by `cycles` round trips through the opposite speaker.
/// `opts.source` is required.
pub fn cyclic_path(
    model: &CycleVaeModel,
    mels: &[MelFrame],
    opts: &ConvertOptions,
    seed: u64,
    cycles: usize,
) -> Result<CyclicOutput> {
    let src = opts
        .source
        .clone()
        .ok_or_else(|| Error::Config("cyclic path needs a source speaker".into()))?;
    if cycles == 0 {
        return Err(Error::Config("cyclic path needs at least one cycle".into()));
    }
    let trg = opts.target.clone();
    let mut passes = Vec::with_capacity(2 * cycles);
    let mut input = mels.to_vec();
    for k in 0..2 * cycles {
        let (from, to) = if k % 2 == 0 { (&src, &trg) } else { (&trg, &src) };
        let o = ConvertOptions {
            source: Some(from.clone()),
            target: to.clone(),
            sites: PathSites::pass(k),
            reconstruct: k == 0 && opts.reconstruct,
            classify: opts.classify,
        };
        let frames = convert_path(model, &input, &o, seed)?;
        input = frames.iter().map(ConvertedFrame::mel).collect();
        passes.push(frames);
    }
    Ok(CyclicOutput { passes })
}
