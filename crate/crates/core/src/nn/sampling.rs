use num_traits::Float;

use crate::error::{ensure_len, Error, Result};
use crate::rng::RngStream;

/// Inverse-CDF lookup: the first index whose cumulative probability exceeds
/// `u`. Falls back to the last bin with positive mass if rounding leaves the
/// total slightly below `u`.
pub fn categorical_from_uniform<T: Float>(probs: &[T], u: f64) -> usize {
    let mut cum = 0.0f64;
    let mut last_positive = 0;
    for (i, p) in probs.iter().enumerate() {
        let p = p.to_f64().unwrap_or(0.0);
        if p > 0.0 {
            last_positive = i;
        }
        cum += p;
        if u < cum {
            return i;
        }
    }
    last_positive
}

pub fn categorical_sample<T: Float>(probs: &[T], rng: &mut RngStream) -> Result<usize> {
    if probs.is_empty() {
        return Err(Error::InvalidInput("empty probability vector".into()));
    }
    if let Some(i) = probs.iter().position(|p| !(*p >= T::zero()) || !p.is_finite()) {
        return Err(Error::InvalidInput(format!("invalid probability at index {i}")));
    }
    Ok(categorical_from_uniform(probs, rng.uniform()))
}

/// Standard Laplace variate by inverse CDF from `u ∈ (0, 1)`.
#[inline]
pub fn laplace_from_uniform(u: f64) -> f64 {
    let d = u - 0.5;
    -d.signum() * (1.0 - 2.0 * d.abs()).ln()
}

fn check_scale(what: &'static str, mu: &[f32], sigma: &[f32]) -> Result<()> {
    ensure_len(what, mu.len(), sigma.len())?;
    if let Some(i) = sigma.iter().position(|s| !(*s >= 0.0)) {
        return Err(Error::InvalidInput(format!("negative or NaN scale at index {i}")));
    }
    Ok(())
}

/// `z = μ − σ⊙ε` with `ε` standard Laplace. Writes the noise to `eps` so the
/// caller can record it.
pub fn laplace_sample_into(
    mu: &[f32],
    sigma: &[f32],
    rng: &mut RngStream,
    z: &mut [f32],
    eps: &mut [f32],
) -> Result<()> {
    check_scale("laplace sigma", mu, sigma)?;
    ensure_len("laplace output", mu.len(), z.len())?;
    ensure_len("laplace noise", mu.len(), eps.len())?;
    for i in 0..mu.len() {
        let e = laplace_from_uniform(rng.uniform_open());
        eps[i] = e as f32;
        z[i] = (mu[i] as f64 - sigma[i] as f64 * e) as f32;
    }
    Ok(())
}

pub fn laplace_sample(mu: &[f32], sigma: &[f32], rng: &mut RngStream) -> Result<Vec<f32>> {
    let mut z = vec![0.0; mu.len()];
    let mut eps = vec![0.0; mu.len()];
    laplace_sample_into(mu, sigma, rng, &mut z, &mut eps)?;
    Ok(z)
}

/// Standard normal by Box–Muller, one variate per pair of uniforms.
#[inline]
pub fn standard_normal(rng: &mut RngStream) -> f64 {
    let u1 = rng.uniform_open();
    let u2 = rng.uniform();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

pub fn gaussian_sample_into(mu: &[f32], sigma: &[f32], rng: &mut RngStream, out: &mut [f32]) -> Result<()> {
    check_scale("gaussian sigma", mu, sigma)?;
    ensure_len("gaussian output", mu.len(), out.len())?;
    for i in 0..mu.len() {
        let eta = standard_normal(rng);
        out[i] = (mu[i] as f64 + sigma[i] as f64 * eta) as f32;
    }
    Ok(())
}

pub fn gaussian_sample(mu: &[f32], sigma: &[f32], rng: &mut RngStream) -> Result<Vec<f32>> {
    let mut out = vec![0.0; mu.len()];
    gaussian_sample_into(mu, sigma, rng, &mut out)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Site;
    use statrs::distribution::{ChiSquared, ContinuousCDF, Laplace, Normal};

    #[test]
    fn cdf_thresholds() {
        assert_eq!(categorical_from_uniform(&[0.5f32, 0.5], 0.25), 0);
        assert_eq!(categorical_from_uniform(&[0.5f32, 0.5], 0.75), 1);
        assert_eq!(categorical_from_uniform(&[0.0f32, 1.0, 0.0], 0.0), 1);
        assert_eq!(categorical_from_uniform(&[0.3f32, 0.3, 0.3, 0.0], 0.95), 2);
    }

    #[test]
    fn one_hot_any_seed() {
        for seed in 0..50 {
            let mut rng = RngStream::new(seed, Site::Vocoder);
            assert_eq!(categorical_sample(&[0.0f32, 0.0, 1.0, 0.0], &mut rng).unwrap(), 2);
        }
    }

    #[test]
    fn negative_probability_rejected() {
        let mut rng = RngStream::new(0, Site::Vocoder);
        assert!(categorical_sample(&[1.2f32, -0.2], &mut rng).is_err());
    }

    #[test]
    fn categorical_chi_square() {
        let probs = [0.2f64, 0.3, 0.5];
        let mut rng = RngStream::new(42, Site::Vocoder);
        let n = 1_000_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            counts[categorical_sample(&probs, &mut rng).unwrap()] += 1;
        }
        let mut chi2 = 0.0;
        for (c, p) in counts.iter().zip(probs) {
            let e = p * n as f64;
            assert!((*c as f64 - e).abs() < 3.0 * (n as f64 * p * (1.0 - p)).sqrt());
            chi2 += (*c as f64 - e).powi(2) / e;
        }
        let pval = 1.0 - ChiSquared::new(2.0).unwrap().cdf(chi2);
        assert!(pval > 0.01, "chi2 {chi2} p {pval}");
    }

    #[test]
    fn laplace_closed_forms() {
        assert_eq!(laplace_from_uniform(0.5), 0.0);
        assert!((laplace_from_uniform(0.75) - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((laplace_from_uniform(0.25) + std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn laplace_moments() {
        let (mu, sigma) = (1.5f32, 0.7f32);
        let n = 1_000_000;
        let mut rng = RngStream::new(3, Site::EncoderZ);
        let mut z = vec![0.0; n];
        let mut eps = vec![0.0; n];
        laplace_sample_into(&vec![mu; n], &vec![sigma; n], &mut rng, &mut z, &mut eps).unwrap();
        let mean = z.iter().map(|&v| v as f64).sum::<f64>() / n as f64;
        let var = z.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n as f64;
        assert!((mean - mu as f64).abs() < 0.01 * mu as f64);
        let target = 2.0 * (sigma as f64).powi(2);
        assert!((var - target).abs() < 0.01 * target, "var {var}");
        // the recorded noise reproduces the draw
        assert!(z.iter().zip(&eps).all(|(z, e)| (z - (mu - sigma * e)).abs() < 1e-6));
    }

    #[test]
    fn gaussian_moments_and_degenerate_scale() {
        let mut rng = RngStream::new(4, Site::DecoderMel);
        assert_eq!(gaussian_sample(&[0.3, -1.0], &[0.0, 0.0], &mut rng).unwrap(), vec![0.3, -1.0]);
        let (mu, sigma) = (2.0f32, 0.5f32);
        let n = 1_000_000;
        let out = gaussian_sample(&vec![mu; n], &vec![sigma; n], &mut rng).unwrap();
        let mean = out.iter().map(|&v| v as f64).sum::<f64>() / n as f64;
        let var = out.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n as f64;
        assert!((mean - 2.0).abs() < 0.02);
        assert!((var - 0.25).abs() < 0.0025);
    }

    #[test]
    fn samplers_are_reproducible() {
        let run = |seed| {
            let mut rng = RngStream::new(seed, Site::EncoderZ);
            laplace_sample(&[0.0; 16], &[1.0; 16], &mut rng).unwrap()
        };
        assert_eq!(run(9), run(9));
        assert_ne!(run(9), run(10));
    }

    fn ks_statistic(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        xs.iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = cdf(x);
                (f - i as f64 / n).abs().max((i as f64 + 1.0) / n - f)
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn ks_marginals_across_seeds() {
        // critical value of the one-sample KS test at alpha 0.01
        let n = 20_000;
        let crit = 1.628 / (n as f64).sqrt();
        let lap = Laplace::new(0.0, 1.0).unwrap();
        let norm = Normal::new(0.0, 1.0).unwrap();
        for seed in [1u64, 2, 3] {
            let mut rng = RngStream::new(seed, Site::EncoderZ);
            let l = laplace_sample(&vec![0.0; n], &vec![1.0; n], &mut rng).unwrap();
            let d = ks_statistic(l.iter().map(|&v| v as f64).collect(), |x| lap.cdf(x));
            assert!(d < crit, "laplace seed {seed}: {d}");
            let mut rng = RngStream::new(seed, Site::DecoderMel);
            let g = gaussian_sample(&vec![0.0; n], &vec![1.0; n], &mut rng).unwrap();
            let d = ks_statistic(g.iter().map(|&v| v as f64).collect(), |x| norm.cdf(x));
            assert!(d < crit, "gaussian seed {seed}: {d}");
        }
    }
}
