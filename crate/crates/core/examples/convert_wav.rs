//! Offline conversion of a WAV file with a toy model.
//!
//! `cargo run --example convert_wav [in.wav] [out.wav] [target]`
//! Without arguments a synthetic half-second utterance is converted.

use rtvc::dsp::wav::{read_wav, write_wav, SampleFormat};
use rtvc::runtime::{convert_offline, init_random, synthetic_speech, Preset, SessionOptions};

fn main() -> rtvc::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let bundle = init_random(1, Preset::Toy)?;
    let sr = bundle.audio.sample_rate_hz;
    let input = match args.first() {
        Some(p) => read_wav(p)?.samples,
        None => synthetic_speech(0.5, sr, 1),
    };
    let out_path = args.get(1).cloned().unwrap_or_else(|| std::env::temp_dir().join("converted.wav").display().to_string());
    let target = args.get(2).map_or(Ok(1), |t| t.parse()).map_err(|e| rtvc::Error::InvalidInput(format!("target: {e}")))?;

    let out = convert_offline(&bundle, &input, &SessionOptions::new(target, 7))?;
    write_wav(&out_path, &out, sr, SampleFormat::S16)?;
    println!("{} samples in, {} samples out -> {out_path}", input.len(), out.len());
    Ok(())
}
