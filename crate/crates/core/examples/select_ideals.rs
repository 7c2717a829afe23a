//! Cell averages and ideal selection at a few thresholds.

use speakstyle::corpus::{synthesize_utterance, SynthConfig};
use speakstyle::reference::{compute_averages, select_ideals};
use speakstyle::{extract_features, CorpusIndex, FrameConfig, NormKind, Utterance};

fn main() -> speakstyle::Result<()> {
    let cfg = SynthConfig::new(3, 5, 2, 11);
    let frame = FrameConfig::default();
    let names = vec!["bad".to_string(), "average".into(), "good".into()];
    let mut index = CorpusIndex::new(cfg.prompts, names);
    for p in 0..cfg.prompts {
        for g in 0..cfg.groups {
            for s in 0..cfg.speakers_per_group {
                let bundle = extract_features(&synthesize_utterance(&cfg, p, g, s)?, &frame)?;
                index.insert(p, g, Utterance::new(SynthConfig::speaker_id(g, s), bundle))?;
            }
        }
    }

    let averages = compute_averages(&index, NormKind::L2)?;
    println!("prompt group  mean (id, p, ir)          variation");
    for a in &averages {
        println!(
            "{:6} {:5}  ({:.3}, {:+.3}, {:+.3})  {:.4}",
            a.prompt, a.group, a.mean.id, a.mean.p, a.mean.ir, a.variation
        );
    }

    for threshold in [f64::INFINITY, 0.1, 0.05, 0.0] {
        let refs = select_ideals(&index, &averages, threshold, NormKind::L2)?;
        println!("\nthreshold {threshold}");
        for cell in refs.cells() {
            let ideals: Vec<&str> = cell.ideals.iter().map(|u| u.speaker.as_str()).collect();
            println!("  prompt {} group {}: {}", cell.average.prompt, cell.average.group, ideals.join(" "));
        }
    }
    Ok(())
}
