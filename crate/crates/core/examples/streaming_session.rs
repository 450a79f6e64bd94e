//! Push audio through a `Session` in small chunks and watch output appear
//! two frames behind the input.

use rtvc::runtime::{convert_offline, init_random, synthetic_speech, Preset, Session, SessionOptions};

fn main() -> rtvc::Result<()> {
    let bundle = init_random(2, Preset::Toy)?;
    let x = synthetic_speech(1.0, bundle.audio.sample_rate_hz, 3);
    let opts = SessionOptions::new(0, 11);

    let mut session = Session::new(&bundle, opts.clone())?;
    let mut out = Vec::new();
    for (i, chunk) in x.chunks(100).enumerate() {
        session.push(chunk, &mut out)?;
        if i % 40 == 0 {
            println!("in {:>6}  out {:>6}", session.samples_in(), out.len());
        }
    }
    session.finish(&mut out)?;

    assert_eq!(out, convert_offline(&bundle, &x, &opts)?);
    let r = session.report();
    println!("streamed output equals offline output ({} samples)", out.len());
    println!("rtf {:.3}, max frame {:.2} ms, overruns {}", r.total_rtf, r.max_frame_ms, r.overrun_frames);
    Ok(())
}
