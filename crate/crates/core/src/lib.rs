//! Streaming low-latency voice conversion.
//!
//! A sparse recurrent variational spectral model converts log-mel frames of a
//! source speaker into frames of a target speaker, and a multiband
//! autoregressive vocoder with logit-space linear prediction turns them back
//! into a waveform. Everything runs frame-synchronously on one CPU core.

pub mod cyclevae;
pub mod dsp;
pub mod error;
pub mod losses;
pub mod metrics;
pub mod mwdlp;
pub mod nn;
pub mod rng;
pub mod runtime;

pub use error::{ContainerError, Error, Result};
