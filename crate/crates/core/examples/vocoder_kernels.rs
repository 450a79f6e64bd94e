//! Logit-space linear prediction and sampling for one band step.

use rtvc::mwdlp::lp_combine;
use rtvc::nn::{categorical_sample, softmax};
use rtvc::rng::{RngStream, Site};

fn main() -> rtvc::Result<()> {
    let bins = 16;
    let residual: Vec<f32> = (0..bins).map(|b| -((b as f32 - 8.0) / 3.0).powi(2)).collect();
    // previous band sample's categorical history, projected to logit bases
    let bases: Vec<Vec<f32>> = (0..2).map(|k| (0..bins).map(|b| if b == 4 + k * 6 { 2.0 } else { 0.0 }).collect()).collect();
    let refs: Vec<&[f32]> = bases.iter().map(Vec::as_slice).collect();
    let mut logits = vec![0.0; bins];
    lp_combine(&residual, &[0.5, 1.5], &refs, &mut logits);
    let p = softmax(&logits);
    let mut rng = RngStream::new(1, Site::Vocoder);
    let mut counts = vec![0; bins];
    for _ in 0..10_000 {
        counts[categorical_sample(&p, &mut rng)?] += 1;
    }
    for b in 0..bins {
        println!("bin {b:>2}  p {:.3}  drawn {:>5}", p[b], counts[b]);
    }
    Ok(())
}
