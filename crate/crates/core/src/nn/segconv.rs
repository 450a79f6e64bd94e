use super::dense::Matrix;
use crate::error::{ensure_len, Error, Result};
use crate::rng::RngStream;

/// Segmental convolution over `p` past frames, the current frame and `n`
/// future frames. The kernel is stored output-major,
/// `[out_dim × (p+1+n)·in_dim]`, with input columns ordered oldest frame first.
#[derive(Debug, Clone, PartialEq)]
pub struct SegConvSpec {
    pub p: usize,
    pub n: usize,
    pub in_dim: usize,
    pub out_dim: usize,
    pub kernel: Matrix,
    pub bias: Vec<f32>,
}

impl SegConvSpec {
    pub fn new(p: usize, n: usize, in_dim: usize, kernel: Matrix, bias: Vec<f32>) -> Result<Self> {
        ensure_len("segconv kernel width", (p + 1 + n) * in_dim, kernel.cols)?;
        ensure_len("segconv bias", kernel.rows, bias.len())?;
        Ok(Self {
            p,
            n,
            in_dim,
            out_dim: kernel.rows,
            kernel,
            bias,
        })
    }

    pub fn zeros(p: usize, n: usize, in_dim: usize, out_dim: usize) -> Self {
        Self {
            p,
            n,
            in_dim,
            out_dim,
            kernel: Matrix::zeros(out_dim, (p + 1 + n) * in_dim),
            bias: vec![0.0; out_dim],
        }
    }

    pub fn random(p: usize, n: usize, in_dim: usize, out_dim: usize, rng: &mut RngStream) -> Self {
        let kernel = Matrix::random(out_dim, (p + 1 + n) * in_dim, 1.0, rng);
        let bias = (0..out_dim).map(|_| rng.symmetric(0.1)).collect();
        Self {
            p,
            n,
            in_dim,
            out_dim,
            kernel,
            bias,
        }
    }

    pub fn frames(&self) -> usize {
        self.p + 1 + self.n
    }

    pub fn width(&self) -> usize {
        self.frames() * self.in_dim
    }

    /// Frames of algorithmic lookahead.
    pub fn lookahead(&self) -> usize {
        self.n
    }

    /// Applies the kernel to an already concatenated window.
    #[inline]
    pub fn apply_concat(&self, concat: &[f32], out: &mut [f32]) {
        out.copy_from_slice(&self.bias);
        self.kernel.matvec_acc(concat, out);
    }

    pub fn window(&self) -> LookaheadWindow {
        LookaheadWindow::new(self.p, self.n, self.in_dim)
    }
}

pub fn segconv(spec: &SegConvSpec, window: &[&[f32]]) -> Result<Vec<f32>> {
    if window.len() != spec.frames() {
        return Err(Error::dim("segconv frame count", spec.frames(), window.len()));
    }
    let mut concat = Vec::with_capacity(spec.width());
    for f in window {
        ensure_len("segconv frame", spec.in_dim, f.len())?;
        concat.extend_from_slice(f);
    }
    let mut out = vec![0.0; spec.out_dim];
    spec.apply_concat(&concat, &mut out);
    Ok(out)
}

/// Sliding `(p+1+n)`-frame window for streaming segmental convolution.
///
/// The left edge repeats the first frame; at the end of the stream
/// [`flush`](Self::flush) repeats the last frame so the final `n` frames
/// still get a full window. Memory is fixed at construction.
#[derive(Debug, Clone)]
pub struct LookaheadWindow {
    p: usize,
    n: usize,
    dim: usize,
    ring: Vec<f32>,
    received: usize,
    shifted: usize,
}

impl LookaheadWindow {
    pub fn new(p: usize, n: usize, dim: usize) -> Self {
        Self {
            p,
            n,
            dim,
            ring: vec![0.0; (p + 1 + n) * dim],
            received: 0,
            shifted: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lookahead(&self) -> usize {
        self.n
    }

    pub fn past(&self) -> usize {
        self.p
    }

    /// Real frames received so far.
    pub fn received(&self) -> usize {
        self.received
    }

    fn shift_in(&mut self, frame: Option<&[f32]>) -> Option<usize> {
        let len = self.ring.len();
        if len > self.dim {
            self.ring.copy_within(self.dim.., 0);
            match frame {
                Some(f) => self.ring[len - self.dim..].copy_from_slice(f),
                // repeat the newest frame, which now sits one slot back
                None => self.ring.copy_within(len - 2 * self.dim..len - self.dim, len - self.dim),
            }
        } else if let Some(f) = frame {
            self.ring.copy_from_slice(f);
        }
        self.shifted += 1;
        self.ready()
    }

    fn ready(&self) -> Option<usize> {
        (self.shifted > self.n).then(|| self.shifted - 1 - self.n)
    }

    /// Pushes one frame. Returns the index of the frame whose window is now
    /// complete, if any; read it with [`concat`](Self::concat).
    pub fn push(&mut self, frame: &[f32]) -> Result<Option<usize>> {
        ensure_len("window frame", self.dim, frame.len())?;
        if self.shifted != self.received {
            return Err(Error::InvalidInput("push after flush".into()));
        }
        self.received += 1;
        if self.received == 1 {
            for slot in self.ring.chunks_exact_mut(self.dim) {
                slot.copy_from_slice(frame);
            }
            self.shifted = 1;
            return Ok(self.ready());
        }
        Ok(self.shift_in(Some(frame)))
    }

    /// Completes one pending window by repeating the last frame. Returns
    /// `None` once every received frame has been emitted.
    pub fn flush(&mut self) -> Option<usize> {
        if self.received == 0 {
            return None;
        }
        while self.shifted < self.received + self.n {
            if let Some(t) = self.shift_in(None) {
                return Some(t);
            }
        }
        None
    }

    /// The current window, oldest frame first.
    pub fn concat(&self) -> &[f32] {
        &self.ring
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn widths_and_lookahead() {
        let enc = SegConvSpec::zeros(3, 1, 80, 8);
        assert_eq!(enc.width(), 400);
        assert_eq!(enc.lookahead(), 1);
        assert_eq!(SegConvSpec::zeros(4, 0, 80, 8).lookahead(), 0);
    }

    #[test]
    fn center_selector_returns_center_frame() {
        let (p, n, d) = (3, 1, 4);
        let mut k = Matrix::zeros(d, (p + 1 + n) * d);
        for i in 0..d {
            k.set(i, p * d + i, 1.0);
        }
        let spec = SegConvSpec::new(p, n, d, k, vec![0.0; d]).unwrap();
        let frames: Vec<Vec<f32>> = (0..5).map(|t| vec![t as f32; d]).collect();
        let refs: Vec<&[f32]> = frames.iter().map(Vec::as_slice).collect();
        assert_eq!(segconv(&spec, &refs).unwrap(), vec![3.0; d]);
        assert!(segconv(&spec, &refs[..4]).is_err());
    }

    fn clamped_window(frames: &[Vec<f32>], t: usize, p: usize, n: usize) -> Vec<f32> {
        let last = frames.len() as isize - 1;
        (t as isize - p as isize..=t as isize + n as isize)
            .flat_map(|i| frames[i.clamp(0, last) as usize].clone())
            .collect()
    }

    #[test]
    fn streaming_window_matches_clamped_indexing() {
        for (p, n) in [(3, 1), (4, 0), (5, 1), (0, 2)] {
            for len in 1..7 {
                let frames: Vec<Vec<f32>> = (0..len).map(|t| vec![t as f32, -(t as f32)]).collect();
                let mut w = LookaheadWindow::new(p, n, 2);
                let mut seen = Vec::new();
                for f in &frames {
                    if let Some(t) = w.push(f).unwrap() {
                        assert_eq!(w.concat(), clamped_window(&frames, t, p, n));
                        seen.push(t);
                    }
                }
                while let Some(t) = w.flush() {
                    assert_eq!(w.concat(), clamped_window(&frames, t, p, n));
                    seen.push(t);
                }
                assert_eq!(seen, (0..len).collect::<Vec<_>>(), "p={p} n={n} len={len}");
            }
        }
    }

    #[test]
    fn lookahead_delay_is_exactly_n() {
        let mut w = LookaheadWindow::new(3, 1, 1);
        assert_eq!(w.push(&[0.0]).unwrap(), None);
        assert_eq!(w.push(&[1.0]).unwrap(), Some(0));
        assert_eq!(w.push(&[2.0]).unwrap(), Some(1));
    }
}
