//! Mid-tread mu-law companding with `mu = bins - 1`.
//!
//! The compressed amplitude `y = sign(x) ln(1 + mu|x|) / ln(1 + mu)` is
//! quantised on a grid of step `2 / (bins - 1)` that contains zero. Bin
//! `bins / 2` is the zero level, so `encode(x) + encode(-x) == bins` for
//! `|x| < 1`; bin 0 is reserved for exactly -1.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct MuLaw {
    bins: usize,
    mu: f64,
    table: Vec<f32>,
}

impl MuLaw {
    pub fn new(bins: usize) -> Result<Self> {
        if bins < 4 || bins % 2 != 0 {
            return Err(Error::Config(format!("mu-law needs an even bin count >= 4, got {bins}")));
        }
        let mut law = Self {
            bins,
            mu: (bins - 1) as f64,
            table: Vec::new(),
        };
        law.table = (0..bins).map(|b| law.decode_exact(b) as f32).collect();
        Ok(law)
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn center(&self) -> usize {
        self.bins / 2
    }

    /// Quantisation step in the compressed domain.
    pub fn step(&self) -> f64 {
        2.0 / (self.bins - 1) as f64
    }

    pub fn compress(&self, x: f64) -> f64 {
        let x = x.clamp(-1.0, 1.0);
        x.signum() * (self.mu * x.abs()).ln_1p() / self.mu.ln_1p()
    }

    pub fn expand(&self, y: f64) -> f64 {
        let y = y.clamp(-1.0, 1.0);
        y.signum() * ((self.mu.ln_1p() * y.abs()).exp() - 1.0) / self.mu
    }

    /// Bin index of `x`; out-of-range input is clamped to `[-1, 1]`.
    pub fn encode(&self, x: f32) -> usize {
        let y = self.compress(x as f64);
        let half = self.bins as i64 / 2;
        let q = (y / self.step()).round() as i64;
        (q.clamp(-half, half - 1) + half) as usize
    }

    /// Like [`MuLaw::encode`] but rejects `|x| > 1` and non-finite input.
    pub fn encode_strict(&self, x: f32) -> Result<usize> {
        if !x.is_finite() || x.abs() > 1.0 {
            return Err(Error::InvalidInput(format!("sample {x} outside [-1, 1]")));
        }
        Ok(self.encode(x))
    }

    fn decode_exact(&self, bin: usize) -> f64 {
        let q = bin as i64 - self.bins as i64 / 2;
        self.expand(q as f64 * self.step())
    }

    /// Amplitude of the bin centre.
    #[inline]
    pub fn decode(&self, bin: usize) -> f32 {
        self.table[bin]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_is_the_center_bin() {
        let law = MuLaw::new(256).unwrap();
        assert_eq!(law.encode(0.0), 128);
        assert_eq!(law.decode(law.encode(0.0)), 0.0);
    }

    #[test]
    fn closed_form_oracle_for_half() {
        let law = MuLaw::new(256).unwrap();
        let mu = 255.0f64;
        let y = (1.0 + mu * 0.5).ln() / (1.0 + mu).ln();
        let expected = (y * 127.5).round() as usize + 128;
        assert_eq!(law.encode(0.5), expected);
        assert_eq!(expected, 128 + 112);
    }

    #[test]
    fn encode_decode_is_identity_on_bins() {
        for bins in [4usize, 16, 256, 1024] {
            let law = MuLaw::new(bins).unwrap();
            for b in 0..bins {
                assert_eq!(law.encode(law.decode(b)), b, "bins {bins} bin {b}");
            }
        }
    }

    #[test]
    fn rejects_odd_or_tiny_bin_counts() {
        assert!(MuLaw::new(255).is_err());
        assert!(MuLaw::new(2).is_err());
    }

    #[test]
    fn strict_mode_flags_out_of_range() {
        let law = MuLaw::new(256).unwrap();
        assert!(law.encode_strict(1.5).is_err());
        assert_eq!(law.encode(1.5), law.encode(1.0));
        assert_eq!(law.encode(-3.0), 0);
    }

    proptest! {
        #[test]
        fn mirror_bins(x in -0.999_999f32..0.999_999) {
            let law = MuLaw::new(256).unwrap();
            prop_assert_eq!(law.encode(x) + law.encode(-x), 256);
        }

        #[test]
        fn error_within_half_step(x in -1.0f32..=1.0, bins_half in 2usize..600) {
            let law = MuLaw::new(2 * bins_half).unwrap();
            let y = law.compress(x as f64);
            let yq = law.compress(law.decode(law.encode(x)) as f64);
            prop_assert!((y - yq).abs() <= law.step() / 2.0 + 1e-6);
        }
    }
}
