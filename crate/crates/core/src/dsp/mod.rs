//! Signal processing front end and back end.

mod config;
pub mod features;
pub mod mel;
pub mod mulaw;
pub mod pqmf;
pub mod stft;
pub mod wav;

pub use config::AudioConfig;
pub use mel::{MelFilterbank, MelFrame, LOG_FLOOR};
pub use mulaw::MuLaw;
pub use pqmf::{Pqmf, PqmfAnalyzer, PqmfSynthesizer};
pub use stft::{frame_stft, StreamingStft};
