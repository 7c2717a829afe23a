//! Build ideals from four speakers per group and label a held-out speaker
//! from every group, prompt by prompt.

use speakstyle::corpus::{synthesize_utterance, SynthConfig};
use speakstyle::reference::{build_from_index, DEFAULT_THRESHOLD};
use speakstyle::{
    classify_speaker, classify_utterance, extract_features, CorpusIndex, FrameConfig, NormKind,
    Utterance,
};

fn main() -> speakstyle::Result<()> {
    let cfg = SynthConfig::new(5, 5, 4, 3);
    let frame = FrameConfig::default();
    let held_out = 4;

    let groups = (0..cfg.groups).map(|g| format!("group {g}")).collect();
    let mut index = CorpusIndex::new(cfg.prompts, groups);
    for p in 0..cfg.prompts {
        for g in 0..cfg.groups {
            for s in (0..cfg.speakers_per_group).filter(|&s| s != held_out) {
                let bundle = extract_features(&synthesize_utterance(&cfg, p, g, s)?, &frame)?;
                index.insert(p, g, Utterance::new(SynthConfig::speaker_id(g, s), bundle))?;
            }
        }
    }
    let refs = build_from_index(&index, DEFAULT_THRESHOLD, NormKind::L2)?;

    for g in 0..cfg.groups {
        let speaker = SynthConfig::speaker_id(g, held_out);
        let mut results = Vec::new();
        for p in 0..cfg.prompts {
            let test = extract_features(&synthesize_utterance(&cfg, p, g, held_out)?, &frame)?;
            let r = classify_utterance(&test, p, &refs, NormKind::L2)?;
            println!(
                "{speaker} prompt {p}: group {} ({}, margin {:.3}, ideal {})",
                r.chosen,
                if r.dominant { "dominant" } else { "argmin" },
                r.margin,
                r.chosen_score().ideal_used
            );
            results.push(r);
        }
        println!("{speaker} => group {} (truth {g})\n", classify_speaker(&results)?);
    }
    Ok(())
}
