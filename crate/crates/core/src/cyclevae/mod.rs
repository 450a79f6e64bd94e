//! Cyclic variational spectral model.
//!
//! Two encoders map log-mel frames to a spectral latent `z` and an excitation
//! latent `z̃`; a decoder maps both latents and a speaker code back to a
//! Gaussian over mel frames. In the pretraining wiring a second decoder
//! estimates excitation from `z̃` and the mel decoder also takes excitation.

mod config;
mod convert;
mod model;
mod net;
#[cfg(test)]
mod tests;
mod types;

pub use config::{CycleVaeConfig, EXCITATION_DIM, GATE_DENSITIES};
pub use convert::{convert_path, cyclic_path, ConvertOptions, ConvertedFrame, Converter, CyclicOutput, PathSites};
pub use model::{CycleVaeModel, DecoderState, Encoded, EncoderState, SpectralFrame, SIGMA_FLOOR};
pub use net::{SegGru, SegGruState};
pub use types::{convert_lf0, ExcitationEstimate, ExcitationFrame, LatentPair, Lf0Stats, SpeakerCode};
