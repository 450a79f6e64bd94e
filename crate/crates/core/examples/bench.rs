//! Real-time factor of the streaming engine.
//!
//! `cargo run --release --example bench [toy|paper-scale] [seconds]`

use rtvc::runtime::{bench, init_random, Preset};

fn main() -> rtvc::Result<()> {
    let mut args = std::env::args().skip(1);
    let preset: Preset = args.next().as_deref().unwrap_or("toy").parse()?;
    let seconds: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(5.0);
    let bundle = init_random(0, preset)?;
    let r = bench(&bundle, seconds, 0)?;
    let s = &r.stage_rtf;
    println!("total rtf   {:.3}", r.total_rtf);
    for (name, v) in [
        ("frontend", s.frontend),
        ("encoders", s.encoders),
        ("decoder", s.decoder),
        ("vocoder", s.vocoder),
        ("other", s.other),
    ] {
        println!("  {name:<9} {v:.3}");
    }
    println!("largest stage: {}", s.largest().0);
    println!("max frame {:.2} ms, {} of {} frames over the hop", r.max_frame_ms, r.overrun_frames, r.frames);
    Ok(())
}
