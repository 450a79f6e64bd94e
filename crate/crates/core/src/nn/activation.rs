use num_traits::Float;

/// `e^x` in f32 without branches, so loops over slices vectorise.
/// Cody–Waite range reduction and a degree-6 polynomial; within 2 ulp on
/// `[-87, 88]`, saturating outside.
#[inline(always)]
pub fn exp_f32(x: f32) -> f32 {
    const LN2_HI: f32 = 0.693_359_4;
    const LN2_LO: f32 = -2.121_944_4e-4;
    // 1.5·2^23: adding it rounds to an integer that then sits in the low
    // mantissa bits, which avoids both `f32::round` (a libm call on baseline
    // x86-64) and a saturating float-to-int cast
    const SHIFTER: f32 = 12_582_912.0;
    let x = x.clamp(-87.0, 88.0);
    let t = x * std::f32::consts::LOG2_E + SHIFTER;
    let n = t - SHIFTER;
    let r = x - n * LN2_HI - n * LN2_LO;
    let p = 1.0
        + r * (1.0
            + r * (0.5
                + r * (1.666_666_6e-1
                    + r * (4.166_662e-2 + r * (8.333_452e-3 + r * 1.388_889_6e-3)))));
    let bits = t.to_bits().wrapping_sub(0x4B40_0000).wrapping_add(127) << 23;
    p * f32::from_bits(bits)
}

#[inline(always)]
pub fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + exp_f32(-x))
}

#[inline(always)]
pub fn tanh(x: f32) -> f32 {
    // absolute error stays below 1e-7 near zero, which is what the cell needs
    1.0 - 2.0 / (exp_f32(2.0 * x) + 1.0)
}

pub fn sigmoid_in_place(v: &mut [f32]) {
    for x in v {
        *x = sigmoid(*x);
    }
}

pub fn tanh_in_place(v: &mut [f32]) {
    for x in v {
        *x = tanh(*x);
    }
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f32) -> f32 {
    if x > 20.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// Softmax with max subtraction. The normaliser is accumulated in f64 so that
/// the outputs of long f32 vectors still sum to one within 1e-6.
pub fn softmax_into<T: Float>(logits: &[T], out: &mut [T]) {
    debug_assert_eq!(logits.len(), out.len());
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = 0.0f64;
    for (o, &l) in out.iter_mut().zip(logits) {
        *o = (l - max).exp();
        sum += o.to_f64().unwrap_or(0.0);
    }
    let inv = T::from(1.0 / sum).unwrap_or_else(T::zero);
    for o in out.iter_mut() {
        *o = *o * inv;
    }
}

/// f32 softmax on the hot path: [`exp_f32`] for the exponentials, f64 for the
/// normaliser.
pub fn softmax_f32_into(logits: &[f32], out: &mut [f32]) {
    debug_assert_eq!(logits.len(), out.len());
    let max = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    for (o, &l) in out.iter_mut().zip(logits) {
        *o = exp_f32(l - max);
    }
    let mut part = [0.0f64; 4];
    let chunks = out.chunks_exact(4);
    let rest: f64 = chunks.remainder().iter().map(|&v| v as f64).sum();
    for c in chunks {
        for i in 0..4 {
            part[i] += c[i] as f64;
        }
    }
    let inv = (1.0 / ((part[0] + part[1]) + (part[2] + part[3]) + rest)) as f32;
    for o in out.iter_mut() {
        *o *= inv;
    }
}

pub fn softmax<T: Float>(logits: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); logits.len()];
    softmax_into(logits, &mut out);
    out
}
