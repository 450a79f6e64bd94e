use std::time::Duration;

use serde::{Deserialize, Serialize};

/// Seconds or real-time factors per pipeline stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Stages {
    pub frontend: f64,
    pub encoders: f64,
    pub decoder: f64,
    pub vocoder: f64,
    /// Everything outside the four stages: I/O, scheduling, allocation.
    pub other: f64,
}

impl Stages {
    pub fn sum(&self) -> f64 {
        self.frontend + self.encoders + self.decoder + self.vocoder + self.other
    }

    /// Name and value of the largest of the four model stages.
    pub fn largest(&self) -> (&'static str, f64) {
        [
            ("frontend", self.frontend),
            ("encoders", self.encoders),
            ("decoder", self.decoder),
            ("vocoder", self.vocoder),
        ]
        .into_iter()
        .fold(("frontend", f64::MIN), |a, b| if b.1 > a.1 { b } else { a })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub audio_seconds: f64,
    pub total_seconds: f64,
    pub stage_seconds: Stages,
    pub total_rtf: f64,
    pub stage_rtf: Stages,
    pub lookahead_frames: usize,
    pub algorithmic_delay_ms: f64,
    /// Input frames processed.
    pub frames: usize,
    pub max_frame_ms: f64,
    /// Frames whose processing took longer than one hop.
    pub overrun_frames: usize,
}

/// Raw timings collected by an engine.
#[derive(Debug, Clone, Copy, Default)]
pub struct Timings {
    pub frontend: Duration,
    pub encoders: Duration,
    pub decoder: Duration,
    pub vocoder: Duration,
    pub total: Duration,
    pub frames: usize,
    pub max_frame: Duration,
    pub overrun_frames: usize,
}

impl Timings {
    /// `other` absorbs whatever the stages do not account for, so the stage
    /// columns always add up to the total.
    pub fn report(&self, audio_seconds: f64, lookahead_frames: usize, algorithmic_delay_ms: f64) -> LatencyReport {
        let total = self.total.as_secs_f64();
        let mut s = Stages {
            frontend: self.frontend.as_secs_f64(),
            encoders: self.encoders.as_secs_f64(),
            decoder: self.decoder.as_secs_f64(),
            vocoder: self.vocoder.as_secs_f64(),
            other: 0.0,
        };
        s.other = total - (s.frontend + s.encoders + s.decoder + s.vocoder);
        let rtf = |x: f64| if audio_seconds > 0.0 { x / audio_seconds } else { 0.0 };
        LatencyReport {
            audio_seconds,
            total_seconds: total,
            stage_seconds: s,
            total_rtf: rtf(total),
            stage_rtf: Stages {
                frontend: rtf(s.frontend),
                encoders: rtf(s.encoders),
                decoder: rtf(s.decoder),
                vocoder: rtf(s.vocoder),
                other: rtf(s.other),
            },
            lookahead_frames,
            algorithmic_delay_ms,
            frames: self.frames,
            max_frame_ms: self.max_frame.as_secs_f64() * 1e3,
            overrun_frames: self.overrun_frames,
        }
    }
}
