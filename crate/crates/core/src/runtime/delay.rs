//! Algorithmic delay accounting.

use crate::dsp::AudioConfig;

/// `window_ms / 2 + lookahead_frames · hop_ms`.
pub fn delay_budget_ms(window_ms: f64, hop_ms: f64, lookahead_frames: usize) -> f64 {
    window_ms / 2.0 + lookahead_frames as f64 * hop_ms
}

pub fn delay_budget(cfg: &AudioConfig, lookahead_frames: usize) -> f64 {
    delay_budget_ms(cfg.window_ms, cfg.hop_ms, lookahead_frames)
}

/// Delay counted up to the last sample of the frame being produced: with
/// `lookup_frames` frames read beyond the current one, the output frame
/// itself covers one hop of them.
pub fn delay_budget_lookup(cfg: &AudioConfig, lookup_frames: usize) -> f64 {
    delay_budget(cfg, lookup_frames.saturating_sub(1))
}
