use crate::cyclevae::{ExcitationEstimate, ExcitationFrame};
use crate::dsp::{MelFilterbank, MelFrame};
use crate::error::{ensure_len, Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

fn check_positive(what: &str, v: &[f32]) -> Result<()> {
    match v.iter().position(|s| !(*s > 0.0)) {
        Some(i) => Err(Error::InvalidInput(format!("{what} at index {i} is not positive"))),
        None => Ok(()),
    }
}

/// Negative log density of `x` under a diagonal Gaussian.
pub fn gaussian_nll(x: &[f32], mu: &[f32], sigma: &[f32]) -> Result<f64> {
    ensure_len("gaussian mean", x.len(), mu.len())?;
    ensure_len("gaussian scale", x.len(), sigma.len())?;
    check_positive("gaussian scale", sigma)?;
    Ok(x.iter()
        .zip(mu)
        .zip(sigma)
        .map(|((&x, &m), &s)| {
            let (s, d) = (s as f64, x as f64 - m as f64);
            0.5 * (LN_2PI + 2.0 * s.ln() + d * d / (s * s))
        })
        .sum())
}

/// `KL(L(μq, bq) ‖ L(μp, bp))` summed over dimensions.
pub fn kl_laplace(mu_q: &[f32], b_q: &[f32], mu_p: &[f32], b_p: &[f32]) -> Result<f64> {
    let n = mu_q.len();
    ensure_len("kl scale q", n, b_q.len())?;
    ensure_len("kl mean p", n, mu_p.len())?;
    ensure_len("kl scale p", n, b_p.len())?;
    check_positive("kl scale q", b_q)?;
    check_positive("kl scale p", b_p)?;
    let mut kl = 0.0;
    for i in 0..n {
        let (bq, bp) = (b_q[i] as f64, b_p[i] as f64);
        let d = (mu_q[i] as f64 - mu_p[i] as f64).abs();
        kl += (bp / bq).ln() + (bq * (-d / bq).exp() + d) / bp - 1.0;
    }
    // rounding can leave a tiny negative residue when q = p
    Ok(kl.max(0.0))
}

/// KL against the standard Laplace prior `L(0, 1)`.
pub fn kl_laplace_standard(mu: &[f32], b: &[f32]) -> Result<f64> {
    let zeros = vec![0.0; mu.len()];
    let ones = vec![1.0; mu.len()];
    kl_laplace(mu, b, &zeros, &ones)
}

/// Excitation likelihood term: voicing cross-entropy on every frame, Gaussian
/// NLL of log-F0 and aperiodicity on voiced frames only. `predicted` is
/// `None` when the model has no excitation decoder.
pub fn excitation_nll(e: &ExcitationFrame, predicted: Option<&ExcitationEstimate>) -> Result<f64> {
    let p = predicted.ok_or_else(|| Error::Config("excitation likelihood needs the excitation decoder".into()))?;
    ensure_len("aperiodicity", p.ap_mu.len(), e.aperiodicity.len())?;
    let q = (p.voicing_prob as f64).clamp(1e-12, 1.0 - 1e-12);
    let mut nll = if e.voiced { -q.ln() } else { -(1.0 - q).ln() };
    if e.voiced {
        nll += gaussian_nll(&[e.log_f0], &[p.lf0_mu], &[p.lf0_sigma])?;
        nll += gaussian_nll(&e.aperiodicity, &p.ap_mu, &p.ap_sigma)?;
    }
    Ok(nll)
}

/// Mean absolute difference between two frames.
pub fn mel_l1(a: &[f32], b: &[f32]) -> Result<f64> {
    ensure_len("mel l1", a.len(), b.len())?;
    if a.is_empty() {
        return Ok(0.0);
    }
    Ok(a.iter().zip(b).map(|(x, y)| (*x as f64 - *y as f64).abs()).sum::<f64>() / a.len() as f64)
}

/// Mean absolute difference between the magnitudes recovered from a sampled
/// log-mel frame and reference full-resolution magnitudes.
pub fn fullres_magnitude_loss(fb: &MelFilterbank, sampled: &MelFrame, reference: &[f32]) -> Result<f64> {
    ensure_len("sampled mel", fb.n_mels(), sampled.values.len())?;
    ensure_len("reference magnitudes", fb.n_bins(), reference.len())?;
    mel_l1(&fb.invert(sampled)?, reference)
}
