//! Cepstral distortion, log global-variance distance and F0 errors.

use rtvc::metrics::{f0_metrics, lgd, mcd, CepstraTrack, N_CEPSTRA};
use rtvc::runtime::{approximate_track, synthetic_speech};
use rtvc::dsp::AudioConfig;

fn main() -> rtvc::Result<()> {
    // one coefficient apart by one unit
    let zero = CepstraTrack::from_cepstra(vec![vec![0.0; N_CEPSTRA]])?;
    let mut c = vec![0.0; N_CEPSTRA];
    c[1] = 1.0;
    println!("single-coefficient MCD {:.4} dB", mcd(&zero, &CepstraTrack::from_cepstra(vec![c])?)?);

    let cfg = AudioConfig::default();
    let a = approximate_track(&cfg, &synthetic_speech(1.0, cfg.sample_rate_hz, 1))?;
    let b = approximate_track(&cfg, &synthetic_speech(1.0, cfg.sample_rate_hz, 2))?;
    println!("mcd {:.3} dB, lgd {:.4}", mcd(&a, &b)?, lgd(&a, &b)?);
    println!("{:?}", f0_metrics(&a, &b)?);
    Ok(())
}
