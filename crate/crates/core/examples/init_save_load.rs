//! Build a toy model, write it as a weight container and load it back.
//!
//! `cargo run --example init_save_load [out.mwvc]`

use rtvc::runtime::{delay_budget_lookup, init_random, ModelBundle, Preset};

fn main() -> rtvc::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| std::env::temp_dir().join("toy.mwvc").display().to_string());
    let bundle = init_random(1, Preset::Toy)?;
    bundle.save(&path)?;
    let back = ModelBundle::load(&path)?;
    assert_eq!(back.to_bytes()?, bundle.to_bytes()?);
    let bytes = std::fs::metadata(&path)?.len();
    println!("wrote {path} ({bytes} bytes)");
    println!(
        "speakers {}, lookahead {} frames, algorithmic delay {} ms",
        back.cyclevae.config.n_speakers,
        back.lookahead_frames(),
        delay_budget_lookup(&back.audio, back.lookahead_frames())
    );
    Ok(())
}
