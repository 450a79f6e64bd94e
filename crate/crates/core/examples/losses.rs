//! Evaluate the training objective on a converted/reference pair.

use rtvc::runtime::{convert_offline, init_random, loss_eval, synthetic_speech, LossEvalOptions, Preset, SessionOptions};

fn main() -> rtvc::Result<()> {
    let bundle = init_random(4, Preset::Toy)?;
    let sr = bundle.audio.sample_rate_hz;
    let reference = synthetic_speech(0.5, sr, 2);
    let gen = convert_offline(&bundle, &reference, &SessionOptions::new(0, 1))?;
    let opts = LossEvalOptions { source: 0, target: 0, seed: 1, weights: Default::default() };
    let report = loss_eval(&bundle, &gen[..reference.len()], &reference, &opts)?;
    for (k, v) in report.key_values() {
        println!("{k:<24} {v:.5}");
    }
    Ok(())
}
