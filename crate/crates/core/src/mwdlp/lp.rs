//! Linear prediction in the logit domain.

use num_traits::Float;

use crate::error::{ensure_len, Result};
use crate::nn::Matrix;

/// `ô[b] = Σ_k a[k]·r_k[b] + o[b]`, where `bases[k]` is the basis vector for
/// lag `k + 1`. The lag sum is formed first, then the residual is added, so an
/// empty `a` returns `o` unchanged.
pub fn lp_combine<T: Float>(o: &[T], a: &[T], bases: &[&[T]], out: &mut [T]) {
    debug_assert_eq!(a.len(), bases.len());
    debug_assert_eq!(o.len(), out.len());
    out.fill(T::zero());
    for (&ak, r) in a.iter().zip(bases) {
        for (y, &rb) in out.iter_mut().zip(r.iter()) {
            *y = *y + ak * rb;
        }
    }
    for (y, &ob) in out.iter_mut().zip(o) {
        *y = *y + ob;
    }
}

/// Per-band basis tables and the ring of past bins that selects from them.
///
/// Row `b` of a band's table is the basis vector contributed by a past sample
/// that fell in bin `b`.
#[derive(Debug, Clone)]
pub struct LogitBases {
    k: usize,
    /// `bands × k` ring, newest first for each band once rotated by `head`.
    ring: Vec<usize>,
    head: usize,
}

impl LogitBases {
    /// Fresh history where every past sample is `initial_bin`.
    pub fn new(bands: usize, k: usize, initial_bin: usize) -> Self {
        Self {
            k,
            ring: vec![initial_bin; bands * k],
            head: 0,
        }
    }

    pub fn order(&self) -> usize {
        self.k
    }

    /// Bin sampled `lag` steps ago (`lag` in `1..=K`) for band `m`.
    #[inline]
    pub fn past(&self, m: usize, lag: usize) -> usize {
        debug_assert!(lag >= 1 && lag <= self.k);
        self.ring[m * self.k + (self.head + lag - 1) % self.k]
    }

    /// Records the bins sampled at the current step; they become lag 1.
    pub fn advance(&mut self, bins: &[usize]) {
        if self.k == 0 {
            return;
        }
        self.head = (self.head + self.k - 1) % self.k;
        for (m, &b) in bins.iter().enumerate() {
            self.ring[m * self.k + self.head] = b;
        }
    }

    /// Applies [`lp_combine`] for band `m` with bases drawn from `table`.
    #[inline]
    pub fn combine(&self, m: usize, table: &Matrix, o: &[f32], a: &[f32], out: &mut [f32]) {
        out.fill(0.0);
        for (lag, &ak) in (1..=self.k).zip(a) {
            let r = table.row(self.past(m, lag));
            for (y, &rb) in out.iter_mut().zip(r) {
                *y += ak * rb;
            }
        }
        for (y, &ob) in out.iter_mut().zip(o) {
            *y += ob;
        }
    }

    pub fn check(&self, bands: usize, bins: usize) -> Result<()> {
        ensure_len("logit history", bands * self.k, self.ring.len())?;
        debug_assert!(self.ring.iter().all(|&b| b < bins));
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use proptest::prelude::*;

    #[test]
    fn zero_coefficients_return_residual() {
        let o = [0.5, -1.0, 2.0, 3.5];
        let r = [1.0, 1.0, 1.0, 1.0];
        let mut out = [0.0; 4];
        lp_combine(&o, &[0.0, 0.0], &[&r, &r], &mut out);
        assert_eq!(out, o);
        lp_combine::<f64>(&o, &[], &[], &mut out);
        assert_eq!(out, o);
    }

    #[test]
    fn forced_arithmetic() {
        let mut out = [0.0; 2];
        lp_combine(&[1.0, 2.0], &[0.5], &[&[2.0, 4.0]], &mut out);
        assert_eq!(out, [2.0, 4.0]);
    }

    #[test]
    fn ring_front_is_latest_step() {
        let mut h = LogitBases::new(2, 3, 8);
        assert_eq!(h.past(1, 3), 8);
        h.advance(&[1, 2]);
        h.advance(&[3, 4]);
        assert_eq!((h.past(0, 1), h.past(1, 1)), (3, 4));
        assert_eq!((h.past(0, 2), h.past(1, 2)), (1, 2));
        assert_eq!(h.past(0, 3), 8);
        h.advance(&[5, 6]);
        h.advance(&[7, 9]);
        assert_eq!([h.past(1, 1), h.past(1, 2), h.past(1, 3)], [9, 6, 4]);
    }

    proptest! {
        #[test]
        fn history_combine_matches_direct_sum(k in prop_oneof![Just(0usize), Just(1), Just(8)],
                                              bins in prop_oneof![Just(4usize), Just(256)],
                                              steps in 0usize..20, seed in any::<u64>()) {
            let mut rng = RngStream::with_stream_id(seed, 0);
            let table = Matrix::random(bins, bins, 4.0, &mut rng);
            let mut hist = LogitBases::new(1, k, bins / 2);
            let mut sampled = Vec::new();
            for _ in 0..steps {
                let b = (rng.next_u64() % bins as u64) as usize;
                hist.advance(&[b]);
                sampled.push(b);
            }
            let o: Vec<f32> = (0..bins).map(|_| rng.symmetric(3.0)).collect();
            let a: Vec<f32> = (0..k).map(|_| rng.symmetric(2.0)).collect();
            let mut out = vec![0.0; bins];
            hist.combine(0, &table, &o, &a, &mut out);
            for b in 0..bins {
                let mut direct = o[b] as f64;
                for lag in 1..=k {
                    let bin = if lag <= sampled.len() { sampled[sampled.len() - lag] } else { bins / 2 };
                    direct += a[lag - 1] as f64 * table.get(bin, b) as f64;
                }
                prop_assert!((out[b] as f64 - direct).abs() < 1e-4);
            }
        }
    }
}
