//! Multiband autoregressive vocoder with logit-domain linear prediction.
//!
//! Per frame the conditioning network runs once; then `hop / M` band-level
//! steps each draw one μ-law bin per band, and the PQMF synthesis bank turns
//! every step's `M` band samples into `M` full-rate samples. The synthesis
//! bank's delay is kept, so output sample `i` corresponds to input time
//! `i - Pqmf::group_delay_samples()`.

mod config;
mod lp;
mod model;
mod synth;

pub use config::VocoderConfig;
pub use lp::{lp_combine, LogitBases};
pub use model::{Vocoder, VocoderWeights};
pub use synth::{FrameActivations, LayerActivations, TeacherForcer, VocoderState, LAYER_NAMES};
