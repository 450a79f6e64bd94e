//! Complete model bundles: front-end config, spectral model and vocoder.

use std::collections::HashMap;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::container::{read_container, write_container, Tensor};
use crate::cyclevae::{CycleVaeConfig, CycleVaeModel, Lf0Stats, SegGru};
use crate::dsp::{AudioConfig, MelFilterbank};
use crate::error::{ensure_len, ContainerError, Error, Result};
use crate::mwdlp::{Vocoder, VocoderConfig, VocoderWeights};
use crate::nn::{GruWeights, Linear, Matrix, Recurrent, SegConvSpec};
use crate::rng::{RngStream, Site};

/// Architecture description stored in the container metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleConfig {
    pub audio: AudioConfig,
    pub cyclevae: CycleVaeConfig,
    pub vocoder: VocoderConfig,
}

impl BundleConfig {
    pub fn preset(p: Preset) -> Self {
        match p {
            Preset::Toy => Self {
                audio: AudioConfig {
                    mel_dim: CycleVaeConfig::toy().mel_dim,
                    ..AudioConfig::default()
                },
                cyclevae: CycleVaeConfig::toy(),
                vocoder: VocoderConfig::toy(),
            },
            Preset::PaperScale => Self {
                audio: AudioConfig::default(),
                cyclevae: CycleVaeConfig::paper_scale(),
                vocoder: VocoderConfig::paper_scale(),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.audio.validate(Some(self.vocoder.bands))?;
        self.cyclevae.validate()?;
        self.vocoder.validate()?;
        ensure_len("spectral model mel dim", self.audio.mel_dim, self.cyclevae.mel_dim)?;
        ensure_len("vocoder mel dim", self.audio.mel_dim, self.vocoder.mel_dim)?;
        ensure_len("vocoder hop", self.audio.hop_samples(), self.vocoder.hop_samples)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Toy,
    PaperScale,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "toy" => Ok(Preset::Toy),
            "paper-scale" => Ok(Preset::PaperScale),
            _ => Err(Error::InvalidInput(format!("unknown preset {s:?}, expected toy or paper-scale"))),
        }
    }
}

/// Everything needed to run a conversion session.
#[derive(Debug, Clone)]
pub struct ModelBundle {
    pub audio: AudioConfig,
    pub cyclevae: CycleVaeModel,
    pub vocoder: Vocoder,
    filterbank: MelFilterbank,
}

impl ModelBundle {
    pub fn new(audio: AudioConfig, cyclevae: CycleVaeModel, vocoder: Vocoder) -> Result<Self> {
        let cfg = BundleConfig {
            audio,
            cyclevae: cyclevae.config.clone(),
            vocoder: vocoder.config().clone(),
        };
        cfg.validate()?;
        cyclevae.validate()?;
        let filterbank = MelFilterbank::new(&cfg.audio)?;
        Ok(Self {
            audio: cfg.audio,
            cyclevae,
            vocoder,
            filterbank,
        })
    }

    pub fn config(&self) -> BundleConfig {
        BundleConfig {
            audio: self.audio.clone(),
            cyclevae: self.cyclevae.config.clone(),
            vocoder: self.vocoder.config().clone(),
        }
    }

    pub fn filterbank(&self) -> &MelFilterbank {
        &self.filterbank
    }

    /// Frames of input needed beyond the frame being converted: spectral
    /// encoder lookahead plus vocoder conditioning lookahead.
    pub fn lookahead_frames(&self) -> usize {
        self.cyclevae.config.lookahead() + self.vocoder.lookahead()
    }

    /// Prunes the spectral-model recurrences to `densities` (CSR, per gate)
    /// and block-prunes the vocoder's main GRU to its configured densities.
    pub fn sparsify(self, densities: [f64; 3]) -> Result<Self> {
        let mut m = self.cyclevae;
        for net in [&mut m.enc_phi, &mut m.enc_phi_tilde, &mut m.dec_theta] {
            net.gru.sparsify_recurrent(densities)?;
        }
        m.config.densities = densities;
        let mut w = self.vocoder.into_weights();
        let vd = w.config.gru_density;
        w.gru.block_sparsify_recurrent(vd)?;
        Self::new(self.audio, m, Vocoder::new(w)?)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut t = TensorSink::default();
        t.cyclevae(&self.cyclevae);
        t.vocoder(self.vocoder.weights());
        write_container(&serde_json::to_value(self.config())?, &t.0)
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let (meta, tensors) = read_container(buf)?;
        let cfg: BundleConfig = serde_json::from_value(meta)
            .map_err(|e| ContainerError::Malformed(format!("architecture config: {e}")))?;
        cfg.validate()?;
        let mut src = TensorSource(tensors.into_iter().collect());
        let cyclevae = src.cyclevae(cfg.cyclevae)?;
        let vocoder = src.vocoder(cfg.vocoder)?;
        src.finish()?;
        Self::new(cfg.audio, cyclevae, Vocoder::new(vocoder)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()?).map_err(|source| Error::File {
            path: path.to_owned(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let buf = std::fs::read(path).map_err(|source| Error::File {
            path: path.to_owned(),
            source,
        })?;
        Self::from_bytes(&buf)
    }
}

/// Deterministic random bundle; recurrences are pruned to the preset's
/// densities.
pub fn init_random(seed: u64, preset: Preset) -> Result<ModelBundle> {
    let cfg = BundleConfig::preset(preset);
    let cyclevae = CycleVaeModel::random(cfg.cyclevae, &mut RngStream::new(seed, Site::WeightInit))?;
    let mut vrng = RngStream::with_stream_id(seed, Site::WeightInit as u64 + 1);
    let vocoder = Vocoder::new(VocoderWeights::random(cfg.vocoder, &mut vrng)?)?;
    ModelBundle::new(cfg.audio, cyclevae, vocoder)
}

/// Same weights as [`init_random`] before pruning: every recurrence dense.
/// `init_dense(s, p)?.sparsify(d)` with the preset densities reproduces
/// `init_random(s, p)`.
pub fn init_dense(seed: u64, preset: Preset) -> Result<ModelBundle> {
    let cfg = BundleConfig::preset(preset);
    let full = CycleVaeConfig {
        densities: [1.0; 3],
        ..cfg.cyclevae.clone()
    };
    let mut cyclevae = CycleVaeModel::random(full, &mut RngStream::new(seed, Site::WeightInit))?;
    for net in [&mut cyclevae.enc_phi, &mut cyclevae.enc_phi_tilde, &mut cyclevae.dec_theta] {
        densify(&mut net.gru);
    }
    cyclevae.config = cfg.cyclevae;
    let mut vrng = RngStream::with_stream_id(seed, Site::WeightInit as u64 + 1);
    let vfull = VocoderConfig {
        gru_density: [1.0; 3],
        ..cfg.vocoder.clone()
    };
    let mut w = VocoderWeights::random(vfull, &mut vrng)?;
    densify(&mut w.gru);
    w.config = cfg.vocoder;
    ModelBundle::new(cfg.audio, cyclevae, Vocoder::new(w)?)
}

fn densify(g: &mut GruWeights) {
    for u in g.u.iter_mut() {
        *u = Recurrent::Dense(u.to_dense());
    }
}

const GATES: [&str; 3] = ["r", "z", "n"];

fn arr<T>(v: Vec<T>) -> [T; 3] {
    v.try_into().unwrap_or_else(|_| unreachable!("three gates"))
}

#[derive(Default)]
struct TensorSink(Vec<(String, Tensor)>);

impl TensorSink {
    fn matrix(&mut self, name: String, m: &Matrix) {
        self.0.push((name, Tensor::Dense(m.clone())));
    }

    fn vector(&mut self, name: String, v: &[f32]) {
        self.0.push((name, Tensor::Dense(Matrix::from_vec(1, v.len(), v.to_vec()).unwrap())));
    }

    fn recurrent(&mut self, name: String, u: &Recurrent) {
        let t = match u {
            Recurrent::Dense(m) => Tensor::Dense(m.clone()),
            Recurrent::Sparse(m) => Tensor::Csr(m.clone()),
            Recurrent::Block(m) => Tensor::Block(m.clone()),
        };
        self.0.push((name, t));
    }

    fn segconv(&mut self, p: &str, c: &SegConvSpec) {
        self.matrix(format!("{p}.conv.kernel"), &c.kernel);
        self.vector(format!("{p}.conv.bias"), &c.bias);
    }

    fn gru(&mut self, p: &str, g: &GruWeights) {
        for (i, gate) in GATES.iter().enumerate() {
            self.matrix(format!("{p}.gru.w_{gate}"), &g.w[i]);
            self.recurrent(format!("{p}.gru.u_{gate}"), &g.u[i]);
            self.vector(format!("{p}.gru.b_{gate}"), &g.b[i]);
        }
        self.vector(format!("{p}.gru.b_hn"), &g.b_hn);
    }

    fn linear(&mut self, p: &str, l: &Linear) {
        self.matrix(format!("{p}.weight"), &l.weight);
        self.vector(format!("{p}.bias"), &l.bias);
    }

    fn seggru(&mut self, p: &str, n: &SegGru) {
        self.segconv(p, &n.conv);
        self.gru(p, &n.gru);
        self.linear(&format!("{p}.head"), &n.head);
    }

    fn cyclevae(&mut self, m: &CycleVaeModel) {
        self.seggru("cyclevae.enc_phi", &m.enc_phi);
        self.seggru("cyclevae.enc_phi_tilde", &m.enc_phi_tilde);
        self.seggru("cyclevae.dec_theta", &m.dec_theta);
        if let Some(d) = &m.dec_theta_tilde {
            self.seggru("cyclevae.dec_theta_tilde", d);
        }
        self.seggru("cyclevae.classifier", &m.classifier);
        self.matrix("cyclevae.speaker_table".into(), &m.speaker_table);
        let stats: Vec<f32> = m.lf0_stats.iter().flat_map(|s| [s.mean, s.std]).collect();
        self.matrix(
            "cyclevae.lf0_stats".into(),
            &Matrix::from_vec(m.lf0_stats.len(), 2, stats).unwrap(),
        );
    }

    fn vocoder(&mut self, w: &VocoderWeights) {
        self.segconv("vocoder.cond", &w.cond_conv);
        self.gru("vocoder.cond", &w.cond_gru);
        for (m, e) in w.embeddings.iter().enumerate() {
            self.matrix(format!("vocoder.embeddings.{m}"), e);
        }
        self.gru("vocoder.main", &w.gru);
        self.gru("vocoder.second", &w.gru2);
        self.linear("vocoder.head", &w.head);
        for (m, b) in w.logit_bases.iter().enumerate() {
            self.matrix(format!("vocoder.logit_bases.{m}"), b);
        }
    }
}

struct TensorSource(HashMap<String, Tensor>);

fn shape_error(name: &str, want: [usize; 2], got: [usize; 2]) -> Error {
    ContainerError::Malformed(format!("tensor {name:?} has shape {got:?}, expected {want:?}")).into()
}

impl TensorSource {
    fn take(&mut self, name: &str, shape: [usize; 2]) -> Result<Tensor> {
        let t = self
            .0
            .remove(name)
            .ok_or_else(|| ContainerError::MissingTensor(name.to_owned()))?;
        if t.shape() != shape {
            return Err(shape_error(name, shape, t.shape()));
        }
        Ok(t)
    }

    fn matrix(&mut self, name: String, rows: usize, cols: usize) -> Result<Matrix> {
        match self.take(&name, [rows, cols])? {
            Tensor::Dense(m) => Ok(m),
            _ => Err(ContainerError::Malformed(format!("tensor {name:?} must be dense")).into()),
        }
    }

    fn vector(&mut self, name: String, len: usize) -> Result<Vec<f32>> {
        Ok(self.matrix(name, 1, len)?.data)
    }

    fn recurrent(&mut self, name: String, h: usize) -> Result<Recurrent> {
        Ok(match self.take(&name, [h, h])? {
            Tensor::Dense(m) => Recurrent::Dense(m),
            Tensor::Csr(m) => Recurrent::Sparse(m),
            Tensor::Block(m) => Recurrent::Block(m),
        })
    }

    fn segconv(&mut self, p: &str, spec: &SegConvSpec) -> Result<SegConvSpec> {
        let kernel = self.matrix(format!("{p}.conv.kernel"), spec.kernel.rows, spec.kernel.cols)?;
        let bias = self.vector(format!("{p}.conv.bias"), spec.out_dim)?;
        SegConvSpec::new(spec.p, spec.n, spec.in_dim, kernel, bias)
    }

    fn gru(&mut self, p: &str, hidden: usize, input: usize) -> Result<GruWeights> {
        let mut w = Vec::with_capacity(3);
        let mut u = Vec::with_capacity(3);
        let mut b = Vec::with_capacity(3);
        for gate in GATES {
            w.push(self.matrix(format!("{p}.gru.w_{gate}"), hidden, input)?);
            u.push(self.recurrent(format!("{p}.gru.u_{gate}"), hidden)?);
            b.push(self.vector(format!("{p}.gru.b_{gate}"), hidden)?);
        }
        let b_hn = self.vector(format!("{p}.gru.b_hn"), hidden)?;
        GruWeights::new(arr(w), arr(u), arr(b), b_hn)
    }

    fn linear(&mut self, p: &str, out: usize, inp: usize) -> Result<Linear> {
        let weight = self.matrix(format!("{p}.weight"), out, inp)?;
        let bias = self.vector(format!("{p}.bias"), out)?;
        Linear::new(weight, bias)
    }

    /// Reads a network shaped like `like`.
    fn seggru(&mut self, p: &str, like: &SegGru) -> Result<SegGru> {
        let conv = self.segconv(p, &like.conv)?;
        let gru = self.gru(p, like.hidden(), like.conv.out_dim)?;
        let head = self.linear(&format!("{p}.head"), like.out_dim(), like.hidden())?;
        SegGru::new(conv, gru, head)
    }

    fn cyclevae(&mut self, cfg: CycleVaeConfig) -> Result<CycleVaeModel> {
        let shape = CycleVaeModel::zeros(cfg)?;
        let c = &shape.config;
        let lf0 = self.matrix("cyclevae.lf0_stats".into(), c.n_speakers, 2)?;
        let m = CycleVaeModel {
            enc_phi: self.seggru("cyclevae.enc_phi", &shape.enc_phi)?,
            enc_phi_tilde: self.seggru("cyclevae.enc_phi_tilde", &shape.enc_phi_tilde)?,
            dec_theta: self.seggru("cyclevae.dec_theta", &shape.dec_theta)?,
            dec_theta_tilde: match &shape.dec_theta_tilde {
                Some(d) => Some(self.seggru("cyclevae.dec_theta_tilde", d)?),
                None => None,
            },
            classifier: self.seggru("cyclevae.classifier", &shape.classifier)?,
            speaker_table: self.matrix("cyclevae.speaker_table".into(), c.spk_emb_dim, c.n_speakers)?,
            lf0_stats: lf0
                .data
                .chunks_exact(2)
                .map(|s| Lf0Stats { mean: s[0], std: s[1] })
                .collect(),
            config: shape.config,
        };
        m.validate()?;
        Ok(m)
    }

    fn vocoder(&mut self, cfg: VocoderConfig) -> Result<VocoderWeights> {
        let shape = VocoderWeights::zeros(cfg);
        let c = &shape.config;
        let w = VocoderWeights {
            cond_conv: self.segconv("vocoder.cond", &shape.cond_conv)?,
            cond_gru: self.gru("vocoder.cond", c.cond_hidden, c.cond_conv_dim)?,
            embeddings: (0..c.bands)
                .map(|m| self.matrix(format!("vocoder.embeddings.{m}"), c.bins, c.emb_dim))
                .collect::<Result<_>>()?,
            gru: self.gru("vocoder.main", c.hidden, c.gru_input_dim())?,
            gru2: self.gru("vocoder.second", c.hidden2, c.hidden)?,
            head: self.linear("vocoder.head", c.bands * c.head_stride(), c.hidden2)?,
            logit_bases: (0..c.bands)
                .map(|m| self.matrix(format!("vocoder.logit_bases.{m}"), c.bins, c.bins))
                .collect::<Result<_>>()?,
            config: shape.config,
        };
        w.validate()?;
        Ok(w)
    }

    fn finish(self) -> Result<()> {
        let mut extra: Vec<_> = self.0.into_keys().collect();
        extra.sort();
        match extra.first() {
            None => Ok(()),
            Some(_) => Err(ContainerError::Malformed(format!("unexpected tensors {extra:?}")).into()),
        }
    }
}
