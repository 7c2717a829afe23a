//! Per-frame f0 and stress for a gliding tone followed by silence.

use speakstyle::{extract_features, AudioClip, FrameConfig};

fn main() -> speakstyle::Result<()> {
    let sr = 16000u32;
    let (mut phase, mut samples) = (0.0f64, Vec::new());
    for i in 0..sr as usize / 2 {
        let t = i as f64 / sr as f64;
        // 110 Hz rising one octave over half a second
        let f = 110.0 * 2f64.powf(2.0 * t);
        phase += 2.0 * std::f64::consts::PI * f / sr as f64;
        samples.push(0.4 * phase.sin());
    }
    samples.extend(std::iter::repeat_n(0.0, sr as usize / 10));

    let clip = AudioClip::new(samples, sr)?;
    let bundle = extract_features(&clip, &FrameConfig::default())?;
    println!("frame    f0 (Hz)   stress (dB)");
    for (k, (f0, e)) in bundle.pitch().iter().zip(bundle.stress()).enumerate().step_by(5) {
        let f0 = f0.map_or("unvoiced".to_string(), |f| format!("{f:8.1}"));
        println!("{k:5}  {f0:>9}   {e:9.1}");
    }
    Ok(())
}
