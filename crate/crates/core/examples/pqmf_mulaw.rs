//! Six-band PQMF round trip and μ-law companding of the band signals.

use rtvc::dsp::{MuLaw, Pqmf};
use rtvc::runtime::synthetic_speech;

fn main() -> rtvc::Result<()> {
    let fb = Pqmf::new(6)?;
    let x = synthetic_speech(1.0, 24_000, 1);
    let bands = fb.analyze(&x);
    let y = fb.synthesize(&bands)?;
    let d = fb.group_delay_samples();
    let (mut s, mut e) = (0.0f64, 0.0f64);
    for i in d..x.len() {
        s += (x[i - d] as f64).powi(2);
        e += (y[i] - x[i - d]) as f64 * (y[i] - x[i - d]) as f64;
    }
    println!("{} bands of {} samples, delay {d}, SNR {:.1} dB", bands.len(), bands[0].len(), 10.0 * (s / e).log10());

    let mu = MuLaw::new(256)?;
    let coded: Vec<usize> = bands[0].iter().map(|&v| mu.encode(v)).collect();
    let err = bands[0].iter().zip(&coded).map(|(&v, &c)| (v - mu.decode(c)).abs()).fold(0.0f32, f32::max);
    println!("band 0 through 8-bit mu-law: max error {err:.4}");
    Ok(())
}
