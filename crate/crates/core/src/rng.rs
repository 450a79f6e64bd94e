//! Counter-based random streams.
//!
//! Every sampling site owns an independent ChaCha stream derived from one run
//! seed, so the draws a site sees depend only on `(seed, site, draw index)` and
//! never on the order in which different sites are evaluated. This is what
//! keeps streaming, offline and pipelined execution bit-identical.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Sampling sites of the conversion pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Site {
    EncoderZ = 1,
    EncoderZTilde = 2,
    DecoderMel = 3,
    CycleEncoderZ = 4,
    CycleEncoderZTilde = 5,
    CycleDecoderMel = 6,
    Vocoder = 7,
    ReconDecoderMel = 8,
    WeightInit = 100,
}

/// One independent random stream.
#[derive(Debug, Clone)]
pub struct RngStream {
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, site: Site) -> Self {
        Self::with_stream_id(seed, site as u64)
    }

    pub fn with_stream_id(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { inner }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 bits of resolution.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in the open interval `(0, 1)`.
    pub fn uniform_open(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[-scale, scale)`, used for weight initialization.
    pub fn symmetric(&mut self, scale: f32) -> f32 {
        ((2.0 * self.uniform() - 1.0) as f32) * scale
    }
}
