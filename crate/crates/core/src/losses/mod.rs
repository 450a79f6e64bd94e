//! Forward evaluation of the training objectives.

mod elbo;
mod spectral;
mod waveform;

pub use elbo::{elbo_report, ElboInputs, ElboReport, LossWeights, WaveformTerms};
pub use spectral::{
    excitation_nll, fullres_magnitude_loss, gaussian_nll, kl_laplace, kl_laplace_standard, mel_l1,
};
pub use waveform::{
    layerwise_loss, stft_loss, stft_terms, waveform_ce, LayerwiseLoss, StftTerms, WaveformCe, PROB_FLOOR,
    STFT_RESOLUTIONS,
};
