//! Compare one speaker's prompt with speakers from every group.

use speakstyle::corpus::{synthesize_utterance, SynthConfig};
use speakstyle::{compute_triplet, dtw_align, extract_features, scalarize, FrameConfig, NormKind};

fn main() -> speakstyle::Result<()> {
    let cfg = SynthConfig::new(5, 3, 1, 7);
    let frame = FrameConfig::default();
    let features = |g, s| -> speakstyle::Result<_> {
        extract_features(&synthesize_utterance(&cfg, 0, g, s)?, &frame)
    };

    let anchor = features(4, 0)?;
    let path = dtw_align(anchor.spectral(), features(0, 0)?.spectral())?;
    println!(
        "alignment of g4s00 with g0s00: {} steps, cost {:.2}\n",
        path.pairs.len(),
        path.cost
    );

    println!("g4s00 vs   id      p      ir     scalar");
    for g in 0..cfg.groups {
        for s in 0..cfg.speakers_per_group {
            let t = compute_triplet(&anchor, &features(g, s)?)?;
            println!(
                "{:8}  {:.3}  {:+.3}  {:+.3}  {:.3}",
                SynthConfig::speaker_id(g, s),
                t.id,
                t.p,
                t.ir,
                scalarize(&t, NormKind::L2)
            );
        }
    }
    Ok(())
}
