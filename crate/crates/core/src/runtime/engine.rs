//! Frame-synchronous conversion engine.
//!
//! Every input hop completes at most one STFT frame, which is pushed through
//! the mel projection, the converter and the vocoder in turn. The converter
//! and the vocoder each hold one frame of lookahead, so output frame `t`
//! leaves the engine once input frame `t + 2` is complete.

use std::sync::mpsc::{sync_channel, Receiver, SyncSender};
use std::time::{Duration, Instant};

use rustfft::num_complex::Complex32;
use serde::{Deserialize, Serialize};

use super::bundle::ModelBundle;
use super::delay::delay_budget_lookup;
use super::report::{LatencyReport, Timings};
use crate::cyclevae::{convert_path, ConvertOptions, ConvertedFrame, Converter};
use crate::dsp::{frame_stft, MelFrame, StreamingStft};
use crate::error::{Error, Result};
use crate::mwdlp::VocoderState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionOptions {
    pub target: usize,
    /// Needed only by models still in the pretraining wiring.
    pub source: Option<usize>,
    pub seed: u64,
    /// Condition the vocoder on the decoder mean instead of its sample.
    pub condition_on_mean: bool,
}

impl SessionOptions {
    pub fn new(target: usize, seed: u64) -> Self {
        Self {
            target,
            source: None,
            seed,
            condition_on_mean: false,
        }
    }

    fn convert_options(&self, bundle: &ModelBundle) -> Result<ConvertOptions> {
        let m = &bundle.cyclevae;
        let source = self.source.map(|s| m.code(s)).transpose()?;
        Ok(ConvertOptions::new(source, m.code(self.target)?))
    }

    fn vocoder_input<'f>(&self, f: &'f ConvertedFrame) -> &'f [f32] {
        if self.condition_on_mean {
            &f.converted.mu
        } else {
            &f.converted.sample
        }
    }
}

fn algorithmic_delay(bundle: &ModelBundle) -> f64 {
    delay_budget_lookup(&bundle.audio, bundle.lookahead_frames())
}

/// One streaming conversion. Memory use is fixed after construction apart
/// from per-frame temporaries.
pub struct Session<'b> {
    bundle: &'b ModelBundle,
    opts: SessionOptions,
    stft: StreamingStft,
    converter: Converter<'b>,
    voc: VocoderState,
    timings: Timings,
    samples_in: usize,
    hop_time: Duration,
}

impl<'b> Session<'b> {
    pub fn new(bundle: &'b ModelBundle, opts: SessionOptions) -> Result<Self> {
        let converter = Converter::new(&bundle.cyclevae, opts.convert_options(bundle)?, opts.seed)?;
        Ok(Self {
            stft: StreamingStft::new(&bundle.audio)?,
            voc: bundle.vocoder.state(opts.seed),
            converter,
            timings: Timings::default(),
            samples_in: 0,
            hop_time: Duration::from_secs_f64(bundle.audio.hop_ms / 1e3),
            bundle,
            opts,
        })
    }

    /// Feeds samples and appends every completed output sample to `out`.
    pub fn push(&mut self, pcm: &[f32], out: &mut Vec<f32>) -> Result<()> {
        let start = Instant::now();
        let mut err = None;
        let Self {
            bundle,
            opts,
            stft,
            converter,
            voc,
            timings,
            hop_time,
            ..
        } = self;
        let res = stft.push(pcm, &mut |t, spec| {
            if err.is_none() {
                let t0 = Instant::now();
                let r = bundle.filterbank().project_complex(spec, t).and_then(|mel| {
                    timings.frontend += t0.elapsed();
                    let conv = converter.push(&mel.values)?;
                    match conv {
                        Some(f) => vocode(bundle, opts, voc, timings, Some(&f), out),
                        None => Ok(()),
                    }
                });
                frame_done(timings, t0.elapsed(), *hop_time);
                err = r.err();
            }
        });
        self.samples_in += pcm.len();
        self.finish_timing(start);
        res?;
        err.map_or(Ok(()), Err)
    }

    /// Flushes the stream tail: zero-padded STFT frames, then the converter
    /// and vocoder lookahead.
    pub fn finish(&mut self, out: &mut Vec<f32>) -> Result<()> {
        let start = Instant::now();
        let mut err = None;
        let Self {
            bundle,
            opts,
            stft,
            converter,
            voc,
            timings,
            hop_time,
            ..
        } = self;
        stft.finish(&mut |t, spec| {
            if err.is_none() {
                let t0 = Instant::now();
                let r = bundle.filterbank().project_complex(spec, t).and_then(|mel| {
                    timings.frontend += t0.elapsed();
                    match converter.push(&mel.values)? {
                        Some(f) => vocode(bundle, opts, voc, timings, Some(&f), out),
                        None => Ok(()),
                    }
                });
                frame_done(timings, t0.elapsed(), *hop_time);
                err = r.err();
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
        let tail = converter.flush()?;
        for f in &tail {
            vocode(bundle, opts, voc, timings, Some(f), out)?;
        }
        vocode(bundle, opts, voc, timings, None, out)?;
        self.finish_timing(start);
        Ok(())
    }

    fn finish_timing(&mut self, start: Instant) {
        self.timings.total += start.elapsed();
        let (e, d) = self.converter.stage_times();
        self.timings.encoders = e;
        self.timings.decoder = d;
    }

    pub fn samples_in(&self) -> usize {
        self.samples_in
    }

    pub fn report(&self) -> LatencyReport {
        let audio = self.samples_in as f64 / self.bundle.audio.sample_rate_hz as f64;
        self.timings
            .report(audio, self.bundle.lookahead_frames(), algorithmic_delay(self.bundle))
    }
}

fn frame_done(t: &mut Timings, elapsed: Duration, hop: Duration) {
    t.frames += 1;
    t.max_frame = t.max_frame.max(elapsed);
    if elapsed > hop {
        t.overrun_frames += 1;
    }
}

/// Pushes one converted frame into the vocoder, or flushes it with `None`.
fn vocode(
    bundle: &ModelBundle,
    opts: &SessionOptions,
    st: &mut VocoderState,
    t: &mut Timings,
    frame: Option<&ConvertedFrame>,
    out: &mut Vec<f32>,
) -> Result<()> {
    let v0 = Instant::now();
    let mut sink = |_: usize, s: &[f32]| out.extend_from_slice(s);
    match frame {
        Some(f) => bundle.vocoder.push_frame(st, opts.vocoder_input(f), &mut sink)?,
        None => bundle.vocoder.finish(st, &mut sink),
    }
    t.vocoder += v0.elapsed();
    Ok(())
}

/// Whole-signal conversion: offline STFT, offline converter, offline
/// vocoder. Produces exactly the bytes a [`Session`] does.
pub fn convert_offline(bundle: &ModelBundle, pcm: &[f32], opts: &SessionOptions) -> Result<Vec<f32>> {
    let mels = frame_stft(pcm, &bundle.audio)?
        .iter()
        .enumerate()
        .map(|(t, s)| bundle.filterbank().project_complex(s, t))
        .collect::<Result<Vec<_>>>()?;
    let conv = convert_path(&bundle.cyclevae, &mels, &opts.convert_options(bundle)?, opts.seed)?;
    let cond: Vec<MelFrame> = conv
        .iter()
        .map(|f| MelFrame {
            values: opts.vocoder_input(f).to_vec(),
            frame_index: f.frame_index,
        })
        .collect();
    bundle.vocoder.synthesize(&cond, opts.seed)
}

/// Streams a signal through a [`Session`] in chunks of `chunk` samples.
pub fn convert_streaming(
    bundle: &ModelBundle,
    pcm: &[f32],
    opts: &SessionOptions,
    chunk: usize,
) -> Result<(Vec<f32>, LatencyReport)> {
    let mut s = Session::new(bundle, opts.clone())?;
    let mut out = Vec::with_capacity(pcm.len() + 2 * bundle.audio.hop_samples());
    for c in pcm.chunks(chunk.max(1)) {
        s.push(c, &mut out)?;
    }
    s.finish(&mut out)?;
    Ok((out, s.report()))
}

/// Three-stage pipelined conversion: front end, spectral model and vocoder
/// run on their own threads, joined by bounded queues of `depth` frames.
/// Each stage is sequential, so the output matches [`Session`] exactly.
/// Stage times are per-thread busy times and may overlap, so `other` can be
/// negative. Frame times and overruns are measured on the vocoder thread.
pub fn convert_pipelined<I>(
    bundle: &ModelBundle,
    input: I,
    opts: &SessionOptions,
    depth: usize,
    emit: &mut dyn FnMut(&[f32]) -> Result<()>,
) -> Result<LatencyReport>
where
    I: Iterator<Item = Result<Vec<f32>>> + Send,
{
    let start = Instant::now();
    let depth = depth.max(1);
    let conv_opts = opts.convert_options(bundle)?;
    let (mel_tx, mel_rx) = sync_channel::<Vec<f32>>(depth);
    let (cond_tx, cond_rx) = sync_channel::<Vec<f32>>(depth);
    let mut timings = Timings::default();
    let mut samples = 0usize;

    let result = std::thread::scope(|scope| -> Result<()> {
        // owned here so an early return unblocks the model thread
        let cond_rx = cond_rx;
        let front = scope.spawn(|| frontend_stage(bundle, input, mel_tx));
        let model = scope.spawn(|| model_stage(bundle, conv_opts, opts, mel_rx, cond_tx));
        let mut st = bundle.vocoder.state(opts.seed);
        let mut failed: Option<Error> = None;
        let mut sink = |_: usize, s: &[f32]| {
            if failed.is_none() {
                failed = emit(s).err();
            }
        };
        // per-frame times are the vocoder thread's, the slowest stage
        let hop = Duration::from_secs_f64(bundle.audio.hop_ms / 1e3);
        for mel in cond_rx.iter() {
            let t0 = Instant::now();
            bundle.vocoder.push_frame(&mut st, &mel, &mut sink)?;
            let dt = t0.elapsed();
            timings.vocoder += dt;
            frame_done(&mut timings, dt, hop);
        }
        let t0 = Instant::now();
        bundle.vocoder.finish(&mut st, &mut sink);
        timings.vocoder += t0.elapsed();
        let (n, frames, fe) = front.join().expect("front-end thread panicked")?;
        let (enc, dec) = model.join().expect("model thread panicked")?;
        samples = n;
        timings.frames = frames;
        timings.frontend = fe;
        timings.encoders = enc;
        timings.decoder = dec;
        failed.map_or(Ok(()), Err)
    });
    result?;
    timings.total = start.elapsed();
    let audio = samples as f64 / bundle.audio.sample_rate_hz as f64;
    Ok(timings.report(audio, bundle.lookahead_frames(), algorithmic_delay(bundle)))
}

fn frontend_stage<I>(bundle: &ModelBundle, input: I, tx: SyncSender<Vec<f32>>) -> Result<(usize, usize, Duration)>
where
    I: Iterator<Item = Result<Vec<f32>>>,
{
    let mut stft = StreamingStft::new(&bundle.audio)?;
    let mut busy = Duration::ZERO;
    let mut frames = 0;
    let mut err = None;
    let mut send = |t: usize, spec: &[Complex32]| {
        if err.is_none() {
            match bundle.filterbank().project_complex(spec, t) {
                // a closed receiver means a later stage failed and reports it
                Ok(m) => {
                    frames += 1;
                    let _ = tx.send(m.values);
                }
                Err(e) => err = Some(e),
            }
        }
    };
    for chunk in input {
        let chunk = chunk?;
        let t0 = Instant::now();
        stft.push(&chunk, &mut send)?;
        busy += t0.elapsed();
    }
    let t0 = Instant::now();
    stft.finish(&mut send);
    busy += t0.elapsed();
    if let Some(e) = err {
        return Err(e);
    }
    Ok((stft.samples_pushed(), frames, busy))
}

fn model_stage(
    bundle: &ModelBundle,
    conv_opts: ConvertOptions,
    opts: &SessionOptions,
    rx: Receiver<Vec<f32>>,
    tx: SyncSender<Vec<f32>>,
) -> Result<(Duration, Duration)> {
    let mut conv = Converter::new(&bundle.cyclevae, conv_opts, opts.seed)?;
    for mel in rx.iter() {
        if let Some(f) = conv.push(&mel)? {
            let _ = tx.send(opts.vocoder_input(&f).to_vec());
        }
    }
    for f in conv.flush()? {
        let _ = tx.send(opts.vocoder_input(&f).to_vec());
    }
    Ok(conv.stage_times())
}
