//! Synthesize the five-group corpus, split it 2:1 by speaker, build ideals,
//! classify the held-out speakers and print the agreement tables.
//!
//! cargo run --release --example end_to_end -- [out_dir] [seed]

use std::path::PathBuf;
use std::time::Instant;

use speakstyle::corpus::{generate_synthetic_corpus, load_manifest, LabelColumn, ManifestShape, SynthConfig};
use speakstyle::pipeline::{evaluate_system, EvalOptions};
use speakstyle::reference::DEFAULT_THRESHOLD;
use speakstyle::{FrameConfig, NormKind};

fn main() -> speakstyle::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("speakstyle-end-to-end"));
    let seed: u64 = args.next().map(|s| s.parse().expect("seed")).unwrap_or(42);

    let start = Instant::now();
    let cfg = SynthConfig::new(5, 6, 4, seed);
    let manifest_path = generate_synthetic_corpus(&cfg, &out.join("corpus"))?;
    let manifest = load_manifest(&manifest_path, ManifestShape::default())?;

    let opts = EvalOptions {
        config: FrameConfig::default(),
        threshold: DEFAULT_THRESHOLD,
        norm: NormKind::L2,
        seed,
        reference_labels: LabelColumn::Expert1,
    };
    let eval = evaluate_system(&manifest, &opts)?;
    eval.write(&out.join("run"))?;

    for s in &eval.speakers {
        println!("{:8} -> {}", s.speaker, s.chosen);
    }
    println!();
    print!("{}", eval.report.table());
    println!(
        "\ndominant decisions: {:.0}%   elapsed {:.1}s   output in {}",
        100.0 * eval.report.dominant_fraction,
        start.elapsed().as_secs_f64(),
        out.display()
    );
    Ok(())
}
