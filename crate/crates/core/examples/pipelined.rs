//! Three-thread pipeline: front end, spectral model and vocoder each on
//! their own thread, joined by bounded queues.

use rtvc::runtime::{convert_offline, convert_pipelined, init_random, synthetic_speech, Preset, SessionOptions};

fn main() -> rtvc::Result<()> {
    let bundle = init_random(3, Preset::Toy)?;
    let x = synthetic_speech(2.0, bundle.audio.sample_rate_hz, 5);
    let opts = SessionOptions::new(1, 3);

    let input = x.chunks(480).map(|c| Ok(c.to_vec()));
    let mut out = Vec::new();
    let report = convert_pipelined(&bundle, input, &opts, 4, &mut |s| {
        out.extend_from_slice(s);
        Ok(())
    })?;
    assert_eq!(out, convert_offline(&bundle, &x, &opts)?);
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
    Ok(())
}
