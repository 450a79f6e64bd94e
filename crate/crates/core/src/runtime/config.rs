//! File-based run configuration. Every command-line flag has a key of the
//! same name (dashes become underscores); flags given on the command line
//! win over the file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dsp::wav::SampleFormat;
use crate::error::{Error, Result};
use crate::losses::LossWeights;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(rename = "in")]
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub gen: Option<PathBuf>,
    #[serde(rename = "ref")]
    pub reference: Option<PathBuf>,
    pub format: Option<SampleFormat>,
    pub weights: Option<PathBuf>,
    pub target_speaker: Option<usize>,
    pub source_speaker: Option<usize>,
    pub seed: Option<u64>,
    pub condition_on_mean: Option<bool>,
    pub pipelined: Option<bool>,
    pub queue_depth: Option<usize>,
    pub chunk: Option<usize>,
    pub strict_rt: Option<bool>,
    pub report: Option<PathBuf>,
    pub seconds: Option<f64>,
    pub preset: Option<String>,
    pub densities: Option<Vec<f64>>,
    pub dense: Option<bool>,
    pub loss_weights: Option<LossWeights>,
}

macro_rules! overlay {
    ($base:ident, $over:ident; $($f:ident),*) => {
        RunConfig { $($f: $over.$f.or($base.$f)),* }
    };
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidInput(format!("config: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::File {
            path: path.to_owned(),
            source,
        })?;
        Self::from_toml(&text)
    }

    /// Values set in `over` replace those in `self`.
    pub fn merge(self, over: RunConfig) -> RunConfig {
        let base = self;
        overlay!(base, over; input, out, gen, reference, format, weights, target_speaker, source_speaker, seed, condition_on_mean,
            pipelined, queue_depth, chunk, strict_rt, report, seconds, preset, densities, dense,
            loss_weights)
    }
}
