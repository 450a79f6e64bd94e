//! Runtime CPU feature dispatch for the hot kernels.
//!
//! Results depend on whether FMA is used, so one machine always takes the
//! same path for every caller; streaming and offline runs stay bit-identical.

#[cfg(target_arch = "x86_64")]
#[inline]
pub(crate) fn has_avx2_fma() -> bool {
    std::is_x86_feature_detected!("avx2") && std::is_x86_feature_detected!("fma")
}

/// `a * b + c`, fused when `FMA` is set. Only call the fused form from code
/// compiled with the `fma` target feature, otherwise it lowers to a libm call.
#[inline(always)]
pub(crate) fn madd<const FMA: bool>(a: f32, b: f32, c: f32) -> f32 {
    if FMA {
        a.mul_add(b, c)
    } else {
        a * b + c
    }
}
