use super::lp::LogitBases;
use super::model::Vocoder;
use crate::dsp::{MelFrame, PqmfSynthesizer};
use crate::error::{ensure_len, Error, Result};
use crate::nn::{categorical_from_uniform, softmax_f32_into, GruScratch, LookaheadWindow};
use crate::rng::{RngStream, Site};

/// Names of the layers reported by the teacher-forced pass, in order.
pub const LAYER_NAMES: [&str; 5] = ["cond_conv", "cond_gru", "gru", "gru2", "logits"];

#[derive(Debug, Clone)]
struct CondState {
    conv_out: Vec<f32>,
    h: Vec<f32>,
    next: Vec<f32>,
    scratch: GruScratch,
    /// Main GRU input projection of `h`, gates back to back.
    proj: Vec<f32>,
}

/// Recurrent state of one output stream.
#[derive(Debug, Clone)]
pub struct VocoderState {
    window: LookaheadWindow,
    cond: CondState,
    gx: Vec<f32>,
    h1: Vec<f32>,
    h1_next: Vec<f32>,
    s1: GruScratch,
    h2: Vec<f32>,
    h2_next: Vec<f32>,
    s2: GruScratch,
    head_out: Vec<f32>,
    logits: Vec<f32>,
    probs: Vec<f32>,
    history: LogitBases,
    prev: Vec<usize>,
    bins: Vec<usize>,
    band: Vec<f32>,
    frame_pcm: Vec<f32>,
    synth: PqmfSynthesizer,
    rng: RngStream,
}

impl VocoderState {
    /// Bins sampled by the most recent step, one per band.
    pub fn last_bins(&self) -> &[usize] {
        &self.bins
    }

    /// Probability vector of band `m` at the most recent step.
    pub fn last_probs(&self, m: usize) -> &[f32] {
        let b = self.logits.len() / self.bins.len();
        &self.probs[m * b..(m + 1) * b]
    }

    /// Bin sampled `lag` steps ago in band `m`.
    pub fn history(&self, m: usize, lag: usize) -> usize {
        self.history.past(m, lag)
    }

    /// Conditioning vector of the current frame.
    pub fn conditioning(&self) -> &[f32] {
        &self.cond.h
    }
}

impl Vocoder {
    pub fn state(&self, seed: u64) -> VocoderState {
        let c = &self.w.config;
        let h3 = 3 * c.hidden;
        VocoderState {
            window: self.w.cond_conv.window(),
            cond: CondState {
                conv_out: vec![0.0; c.cond_conv_dim],
                h: vec![0.0; c.cond_hidden],
                next: vec![0.0; c.cond_hidden],
                scratch: GruScratch::new(c.cond_hidden),
                proj: vec![0.0; h3],
            },
            gx: vec![0.0; h3],
            h1: vec![0.0; c.hidden],
            h1_next: vec![0.0; c.hidden],
            s1: GruScratch::new(c.hidden),
            h2: vec![0.0; c.hidden2],
            h2_next: vec![0.0; c.hidden2],
            s2: GruScratch::new(c.hidden2),
            head_out: vec![0.0; c.bands * c.head_stride()],
            logits: vec![0.0; c.bands * c.bins],
            probs: vec![0.0; c.bands * c.bins],
            history: LogitBases::new(c.bands, c.lp_order, self.mulaw.center()),
            prev: vec![self.mulaw.center(); c.bands],
            bins: vec![self.mulaw.center(); c.bands],
            band: vec![0.0; c.bands],
            frame_pcm: vec![0.0; c.hop_samples],
            synth: PqmfSynthesizer::new(self.pqmf.clone()),
            rng: RngStream::new(seed, Site::Vocoder),
        }
    }

    /// Runs the conditioning network on a concatenated `(p+1+n)`-frame window
    /// and caches the main GRU's conditioning projection for the frame.
    fn condition_concat(&self, cs: &mut CondState, concat: &[f32]) {
        let c = &self.w.config;
        self.w.cond_conv.apply_concat(concat, &mut cs.conv_out);
        self.w
            .cond_gru
            .step_into(&cs.h, &cs.conv_out, &mut cs.scratch, &mut cs.next);
        std::mem::swap(&mut cs.h, &mut cs.next);
        for (g, chunk) in cs.proj.chunks_exact_mut(c.hidden).enumerate() {
            self.cond_w[g].matvec_into(&cs.h, chunk);
        }
    }

    /// Shape-checked conditioning on an explicit window of mel frames. The
    /// returned vector is used for every band-level step of the frame.
    pub fn condition(&self, st: &mut VocoderState, window: &[&[f32]]) -> Result<Vec<f32>> {
        let spec = &self.w.cond_conv;
        if window.len() != spec.frames() {
            return Err(Error::dim("conditioning window", spec.frames(), window.len()));
        }
        let mut concat = Vec::with_capacity(spec.width());
        for f in window {
            ensure_len("conditioning frame", spec.in_dim, f.len())?;
            concat.extend_from_slice(f);
        }
        self.condition_concat(&mut st.cond, &concat);
        Ok(st.cond.h.clone())
    }

    /// One band-level step: every band gets a new bin. With `teacher` the
    /// given bins are recorded instead of sampling.
    fn step(&self, st: &mut VocoderState, teacher: Option<&[usize]>) {
        let c = &self.w.config;
        let (h, b) = (c.hidden, c.bins);
        st.gx.copy_from_slice(&st.cond.proj);
        for (m, &prev) in st.prev.iter().enumerate() {
            let row = &self.emb_tables[m][prev * 3 * h..(prev + 1) * 3 * h];
            for (g, &r) in st.gx.iter_mut().zip(row) {
                *g += r;
            }
        }
        let (gr, rest) = st.gx.split_at(h);
        let (gz, gn) = rest.split_at(h);
        self.w
            .gru
            .step_projected(&st.h1, [gr, gz, gn], &mut st.s1, &mut st.h1_next);
        std::mem::swap(&mut st.h1, &mut st.h1_next);
        self.w.gru2.step_into(&st.h2, &st.h1, &mut st.s2, &mut st.h2_next);
        std::mem::swap(&mut st.h2, &mut st.h2_next);
        st.head_out.copy_from_slice(&self.w.head.bias);
        self.head_t.transposed_matvec_acc(&st.h2, &mut st.head_out);
        let stride = c.head_stride();
        for m in 0..c.bands {
            let out = &st.head_out[m * stride..(m + 1) * stride];
            let (o, a) = out.split_at(b);
            let logits = &mut st.logits[m * b..(m + 1) * b];
            st.history.combine(m, &self.w.logit_bases[m], o, a, logits);
            let probs = &mut st.probs[m * b..(m + 1) * b];
            softmax_f32_into(logits, probs);
            st.bins[m] = match teacher {
                Some(t) => t[m],
                None => categorical_from_uniform(probs, st.rng.uniform()),
            };
        }
        st.history.advance(&st.bins);
        st.prev.copy_from_slice(&st.bins);
    }

    /// Samples one bin per band from the current conditioning.
    pub fn ar_step<'s>(&self, st: &'s mut VocoderState) -> &'s [usize] {
        self.step(st, None);
        &st.bins
    }

    /// Runs `hop / M` steps on the current conditioning and writes `hop`
    /// full-rate samples, clamped to `[-1, 1]`.
    fn render_frame(&self, st: &mut VocoderState) {
        let m = self.w.config.bands;
        for j in 0..self.w.config.steps_per_frame() {
            self.step(st, None);
            for (s, &bin) in st.band.iter_mut().zip(&st.bins) {
                *s = self.mulaw.decode(bin);
            }
            st.synth.push_block(&st.band, &mut st.frame_pcm[j * m..(j + 1) * m]);
        }
        for s in &mut st.frame_pcm {
            *s = s.clamp(-1.0, 1.0);
        }
    }

    /// Streams one mel frame in. Once the lookahead is satisfied, `sink`
    /// receives the index and the `hop` samples of the newly completed frame.
    pub fn push_frame(
        &self,
        st: &mut VocoderState,
        mel: &[f32],
        sink: &mut dyn FnMut(usize, &[f32]),
    ) -> Result<()> {
        if let Some(t) = st.window.push(mel)? {
            self.emit(st, t, sink);
        }
        Ok(())
    }

    /// Completes the frames still waiting on lookahead.
    pub fn finish(&self, st: &mut VocoderState, sink: &mut dyn FnMut(usize, &[f32])) {
        while let Some(t) = st.window.flush() {
            self.emit(st, t, sink);
        }
    }

    fn emit(&self, st: &mut VocoderState, t: usize, sink: &mut dyn FnMut(usize, &[f32])) {
        self.condition_concat(&mut st.cond, st.window.concat());
        self.render_frame(st);
        sink(t, &st.frame_pcm);
    }

    /// Offline synthesis: `frames · hop` samples, bit-identical to streaming.
    pub fn synthesize(&self, mels: &[MelFrame], seed: u64) -> Result<Vec<f32>> {
        let mut st = self.state(seed);
        let mut pcm = Vec::with_capacity(mels.len() * self.w.config.hop_samples);
        let mut sink = |_: usize, s: &[f32]| pcm.extend_from_slice(s);
        for f in mels {
            self.push_frame(&mut st, &f.values, &mut sink)?;
        }
        self.finish(&mut st, &mut sink);
        Ok(pcm)
    }
}

/// Activations of one frame under teacher forcing. Frame-level layers hold
/// one vector; step-level layers hold `hop / M` vectors back to back.
#[derive(Debug, Clone, Default)]
pub struct FrameActivations {
    pub frame: usize,
    pub layers: Vec<Vec<f32>>,
    /// `steps × bands × bins` probabilities.
    pub probs: Vec<f32>,
    /// `steps × bands` target bins.
    pub targets: Vec<usize>,
}

/// Teacher-forced, rng-free pass that exposes every layer.
pub struct TeacherForcer<'v> {
    voc: &'v Vocoder,
    st: VocoderState,
    targets: Vec<Vec<usize>>,
    acts: FrameActivations,
}

impl<'v> TeacherForcer<'v> {
    /// `targets[m]` is the ground-truth bin sequence of band `m`.
    pub fn new(voc: &'v Vocoder, targets: Vec<Vec<usize>>) -> Result<Self> {
        let c = voc.config();
        ensure_len("teacher bands", c.bands, targets.len())?;
        let len = targets[0].len();
        for t in &targets {
            ensure_len("teacher band length", len, t.len())?;
            if let Some(&b) = t.iter().find(|&&b| b >= c.bins) {
                return Err(Error::InvalidInput(format!("target bin {b} out of range")));
            }
        }
        Ok(Self {
            voc,
            st: voc.state(0),
            targets,
            acts: FrameActivations::default(),
        })
    }

    pub fn push(&mut self, mel: &[f32]) -> Result<Option<&FrameActivations>> {
        match self.st.window.push(mel)? {
            Some(t) => self.run(t).map(Some),
            None => Ok(None),
        }
    }

    pub fn flush(&mut self) -> Result<Option<&FrameActivations>> {
        match self.st.window.flush() {
            Some(t) => self.run(t).map(Some),
            None => Ok(None),
        }
    }

    fn run(&mut self, t: usize) -> Result<&FrameActivations> {
        let voc = self.voc;
        let c = voc.config();
        let steps = c.steps_per_frame();
        let need = (t + 1) * steps;
        if self.targets[0].len() < need {
            return Err(Error::dim("teacher history", need, self.targets[0].len()));
        }
        let st = &mut self.st;
        voc.condition_concat(&mut st.cond, st.window.concat());
        let a = &mut self.acts;
        a.frame = t;
        a.layers = vec![
            st.cond.conv_out.clone(),
            st.cond.h.clone(),
            Vec::new(),
            Vec::new(),
            Vec::new(),
        ];
        a.probs.clear();
        a.targets.clear();
        let mut tf = vec![0usize; c.bands];
        for j in 0..steps {
            for (m, b) in tf.iter_mut().enumerate() {
                *b = self.targets[m][t * steps + j];
            }
            voc.step(st, Some(&tf));
            a.layers[2].extend_from_slice(&st.h1);
            a.layers[3].extend_from_slice(&st.h2);
            a.layers[4].extend_from_slice(&st.logits);
            a.probs.extend_from_slice(&st.probs);
            a.targets.extend_from_slice(&tf);
        }
        Ok(&self.acts)
    }
}

/// Whole-utterance activations, one flat stream per entry of [`LAYER_NAMES`].
#[derive(Debug, Clone, PartialEq)]
pub struct LayerActivations {
    pub layers: Vec<Vec<f32>>,
}

impl Vocoder {
    /// Teacher-forced activations of every layer. Each band needs exactly
    /// `frames · hop / M` target bins.
    pub fn layer_activations(&self, mels: &[MelFrame], targets: &[Vec<usize>]) -> Result<LayerActivations> {
        let steps = mels.len() * self.config().steps_per_frame();
        for t in targets {
            ensure_len("teacher history", steps, t.len())?;
        }
        let mut tf = TeacherForcer::new(self, targets.to_vec())?;
        let mut layers = vec![Vec::new(); LAYER_NAMES.len()];
        let mut collect = |a: &FrameActivations| {
            for (dst, src) in layers.iter_mut().zip(&a.layers) {
                dst.extend_from_slice(src);
            }
        };
        for f in mels {
            if let Some(a) = tf.push(&f.values)? {
                collect(a);
            }
        }
        while let Some(a) = tf.flush()? {
            collect(a);
        }
        Ok(LayerActivations { layers })
    }
}
