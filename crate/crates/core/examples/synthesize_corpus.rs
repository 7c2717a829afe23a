//! Write a small synthetic corpus and show how its groups drift from the
//! clean prompt template.
//!
//! cargo run --example synthesize_corpus -- [out_dir]

use std::path::PathBuf;

use speakstyle::corpus::{generate_synthetic_corpus, synthesize_template, synthesize_utterance, SynthConfig};
use speakstyle::{compute_triplet, extract_features, FrameConfig};

fn main() -> speakstyle::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("speakstyle-corpus"));
    let cfg = SynthConfig::new(5, 4, 3, 42);
    let manifest = generate_synthetic_corpus(&cfg, &out)?;
    println!("manifest: {}", manifest.display());

    let frame = FrameConfig::default();
    let template = extract_features(&synthesize_template(&cfg, 0)?, &frame)?;
    println!("\nprompt 0, distance to the clean template");
    println!("group  articulation  pitch   stress");
    for g in 0..cfg.groups {
        let clip = synthesize_utterance(&cfg, 0, g, 0)?;
        let t = compute_triplet(&extract_features(&clip, &frame)?, &template)?;
        println!("{g:5}  {:12.3}  {:6.3}  {:6.3}", t.id, t.p, t.ir);
    }
    Ok(())
}
