//! Corpus manifests and the seeded synthetic corpus.
//!
//! A manifest is a CSV file with the header `path,speaker,prompt,expert1,expert2,truth`.
//! Ranks are group indices ordered worst to best; an empty field means the
//! label is absent. Audio paths are resolved relative to the manifest.

use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{write_wav_pcm16, AudioClip, SUPPORTED_RATES};

pub const MANIFEST_HEADER: [&str; 6] = ["path", "speaker", "prompt", "expert1", "expert2", "truth"];

/// Labels for five groups, worst to best.
pub const FIVE_GROUPS: [&str; 5] = ["very bad", "bad", "average", "good", "very good"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub speaker: String,
    pub prompt: usize,
    pub expert1: Option<usize>,
    pub expert2: Option<usize>,
    pub truth: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LabelColumn {
    #[default]
    Expert1,
    Expert2,
    Truth,
}

impl LabelColumn {
    pub fn name(self) -> &'static str {
        match self {
            LabelColumn::Expert1 => "expert1",
            LabelColumn::Expert2 => "expert2",
            LabelColumn::Truth => "truth",
        }
    }
}

impl fmt::Display for LabelColumn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LabelColumn {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "expert1" => Ok(LabelColumn::Expert1),
            "expert2" => Ok(LabelColumn::Expert2),
            "truth" => Ok(LabelColumn::Truth),
            other => Err(format!("unknown label column '{other}'")),
        }
    }
}

impl ManifestEntry {
    pub fn label(&self, column: LabelColumn) -> Option<usize> {
        match column {
            LabelColumn::Expert1 => self.expert1,
            LabelColumn::Expert2 => self.expert2,
            LabelColumn::Truth => self.truth,
        }
    }
}

/// Optional bounds checked while loading a manifest.
#[derive(Debug, Clone, Copy, Default)]
pub struct ManifestShape {
    pub prompts: Option<usize>,
    pub groups: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct Manifest {
    pub base_dir: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        let p = Path::new(&entry.path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Number of prompts implied by the entries.
    pub fn prompt_count(&self) -> usize {
        self.entries.iter().map(|e| e.prompt + 1).max().unwrap_or(0)
    }
}

pub fn load_manifest(path: &Path, shape: ManifestShape) -> Result<Manifest> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != MANIFEST_HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header '{}'", MANIFEST_HEADER.join(",")),
        });
    }

    let mut entries = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let entry: ManifestEntry = record
            .deserialize(Some(&headers))
            .map_err(|e| Error::Parse {
                line,
                message: e.to_string(),
            })?;
        if let Some(limit) = shape.prompts {
            if entry.prompt >= limit {
                return Err(Error::RankOutOfRange {
                    line,
                    field: "prompt",
                    value: entry.prompt,
                    limit,
                });
            }
        }
        if let Some(limit) = shape.groups {
            for (field, value) in [
                ("expert1", entry.expert1),
                ("expert2", entry.expert2),
                ("truth", entry.truth),
            ] {
                if let Some(value) = value.filter(|&v| v >= limit) {
                    return Err(Error::RankOutOfRange {
                        line,
                        field,
                        value,
                        limit,
                    });
                }
            }
        }
        entries.push(entry);
    }

    let base_dir = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();
    Ok(Manifest { base_dir, entries })
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(MANIFEST_HEADER)?;
    let rank = |r: Option<usize>| r.map(|v| v.to_string()).unwrap_or_default();
    for e in entries {
        writer.write_record([
            e.path.clone(),
            e.speaker.clone(),
            e.prompt.to_string(),
            rank(e.expert1),
            rank(e.expert2),
            rank(e.truth),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// Parameters of the synthetic corpus.
///
/// Every speaker's deviation from a prompt's clean template is the group's
/// schedule value times a prompt-wide "accent" direction shared by all
/// speakers, plus an individual part scaled by `speaker_spread`. Groups
/// therefore sit at increasing distance from the template as quality drops.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub groups: usize,
    pub speakers_per_group: usize,
    pub prompts: usize,
    pub seed: u64,
    /// Formant displacement per group, natural-log frequency units.
    pub articulation_noise: Vec<f64>,
    /// Pitch-contour displacement per group, semitones.
    pub pitch_shape_jitter: Vec<f64>,
    /// Syllable-level displacement per group, dB.
    pub stress_jitter: Vec<f64>,
    /// Size of the individual part relative to the group displacement.
    pub speaker_spread: f64,
    /// Probability that an expert label is off by one rank.
    pub label_noise: f64,
    pub sample_rate: u32,
    pub duration_ms: f64,
    /// Apply a 300-3400 Hz band-pass to every rendered utterance.
    pub telephone_band: bool,
}

fn linear_schedule(groups: usize, worst: f64, best: f64) -> Vec<f64> {
    if groups <= 1 {
        return vec![best; groups];
    }
    (0..groups)
        .map(|g| worst + (best - worst) * g as f64 / (groups - 1) as f64)
        .collect()
}

impl SynthConfig {
    pub fn new(groups: usize, speakers_per_group: usize, prompts: usize, seed: u64) -> Self {
        Self {
            groups,
            speakers_per_group,
            prompts,
            seed,
            articulation_noise: linear_schedule(groups, 0.30, 0.02),
            pitch_shape_jitter: linear_schedule(groups, 4.0, 0.2),
            stress_jitter: linear_schedule(groups, 8.0, 0.4),
            speaker_spread: 0.15,
            label_noise: 0.0,
            sample_rate: 16000,
            duration_ms: 600.0,
            telephone_band: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.groups == 0 || self.speakers_per_group == 0 || self.prompts == 0 {
            return bad("groups, speakers_per_group and prompts must be positive".into());
        }
        for (name, schedule) in [
            ("articulation_noise", &self.articulation_noise),
            ("pitch_shape_jitter", &self.pitch_shape_jitter),
            ("stress_jitter", &self.stress_jitter),
        ] {
            if schedule.len() != self.groups {
                return bad(format!(
                    "{name} has {} entries, expected {}",
                    schedule.len(),
                    self.groups
                ));
            }
            if schedule.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                return bad(format!("{name} entries must be finite and nonnegative"));
            }
        }
        if !(self.speaker_spread >= 0.0 && self.speaker_spread.is_finite()) {
            return bad("speaker_spread must be nonnegative".into());
        }
        if !(0.0..=1.0).contains(&self.label_noise) {
            return bad("label_noise must lie in [0, 1]".into());
        }
        if !SUPPORTED_RATES.contains(&self.sample_rate) {
            return Err(Error::UnsupportedRate(self.sample_rate));
        }
        if !(self.duration_ms >= 100.0 && self.duration_ms.is_finite()) {
            return bad("duration_ms must be at least 100".into());
        }
        Ok(())
    }

    pub fn speaker_id(group: usize, speaker: usize) -> String {
        format!("g{group}s{speaker:02}")
    }
}

// Independent random streams, one per (purpose, prompt, group, speaker).
fn stream(seed: u64, kind: u64, prompt: usize, group: usize, speaker: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(
        (kind << 60) ^ ((prompt as u64) << 40) ^ ((group as u64) << 20) ^ speaker as u64,
    );
    rng
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

const FORMANT_BANDWIDTHS: [f64; 3] = [120.0, 150.0, 200.0];
const FORMANT_GAINS: [f64; 3] = [1.0, 0.6, 0.3];
const SYLLABLE_DIP_DB: f64 = 12.0;
const EDGE_FADE_MS: f64 = 15.0;
const BLOCK_MS: f64 = 5.0;
const OUTPUT_RMS: f64 = 0.18;

#[derive(Debug, Clone)]
struct Syllable {
    // share of the utterance duration
    weight: f64,
    formants: [f64; 3],
    // semitones relative to the speaker's base pitch, at the syllable centre
    pitch_st: f64,
    level_db: f64,
}

/// Clean rendering plan of one prompt plus the shared accent direction.
#[derive(Debug, Clone)]
struct PromptPlan {
    syllables: Vec<Syllable>,
    formant_dir: Vec<[f64; 3]>,
    pitch_dir: Vec<f64>,
    stress_dir: Vec<f64>,
}

fn prompt_plan(seed: u64, prompt: usize) -> PromptPlan {
    let mut rng = stream(seed, 0, prompt, 0, 0);
    let count = rng.random_range(2..=4usize);
    let stressed = rng.random_range(0..count);
    let syllables = (0..count)
        .map(|s| Syllable {
            weight: rng.random_range(0.7..1.3),
            formants: [
                rng.random_range(300.0..800.0),
                rng.random_range(900.0..2200.0),
                rng.random_range(2400.0..3100.0),
            ],
            pitch_st: rng.random_range(-4.0..4.0),
            level_db: if s == stressed {
                0.0
            } else {
                rng.random_range(-10.0..-4.0)
            },
        })
        .collect();
    let formant_dir = (0..count)
        .map(|_| [normal(&mut rng), normal(&mut rng), normal(&mut rng)])
        .collect();
    let pitch_dir = (0..count).map(|_| normal(&mut rng)).collect();
    let stress_dir = (0..count).map(|_| normal(&mut rng)).collect();
    PromptPlan {
        syllables,
        formant_dir,
        pitch_dir,
        stress_dir,
    }
}

struct Voice {
    base_f0: f64,
    rate: f64,
}

fn speaker_voice(seed: u64, group: usize, speaker: usize) -> Voice {
    let mut rng = stream(seed, 1, 0, group, speaker);
    Voice {
        base_f0: rng.random_range(100.0..150.0),
        rate: rng.random_range(0.92..1.08),
    }
}

fn perturbed_syllables(
    cfg: &SynthConfig,
    plan: &PromptPlan,
    group: usize,
    rng: Option<&mut ChaCha8Rng>,
) -> Vec<Syllable> {
    let a = cfg.articulation_noise[group];
    let p = cfg.pitch_shape_jitter[group];
    let st = cfg.stress_jitter[group];
    let spread = cfg.speaker_spread;
    let individual = |rng: &mut Option<&mut ChaCha8Rng>| match rng {
        Some(r) => spread * normal(r),
        None => 0.0,
    };
    let mut rng = rng;
    plan.syllables
        .iter()
        .enumerate()
        .map(|(s, syl)| {
            let mut formants = syl.formants;
            for (k, f) in formants.iter_mut().enumerate() {
                let shift = a * (plan.formant_dir[s][k] + individual(&mut rng));
                *f *= shift.exp();
            }
            Syllable {
                weight: syl.weight,
                formants,
                pitch_st: syl.pitch_st + p * (plan.pitch_dir[s] + individual(&mut rng)),
                level_db: syl.level_db + st * (plan.stress_dir[s] + individual(&mut rng)),
            }
        })
        .collect()
}

fn envelope_gain(freq: f64, formants: &[f64; 3]) -> f64 {
    let resonances: f64 = formants
        .iter()
        .zip(FORMANT_BANDWIDTHS)
        .zip(FORMANT_GAINS)
        .map(|((f, bw), g)| g * (-(freq - f).powi(2) / (2.0 * bw * bw)).exp())
        .sum();
    resonances + 0.02 / (1.0 + freq / 1000.0)
}

fn render(syllables: &[Syllable], base_f0: f64, duration_ms: f64, sample_rate: u32) -> Vec<f64> {
    let sr = sample_rate as f64;
    let n = (duration_ms * sr / 1000.0).round() as usize;
    let total_weight: f64 = syllables.iter().map(|s| s.weight).sum();
    let mut bounds = Vec::with_capacity(syllables.len() + 1);
    bounds.push(0.0);
    for s in syllables {
        bounds.push(bounds.last().unwrap() + s.weight / total_weight);
    }
    let centers: Vec<f64> = bounds.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();

    // piecewise-linear interpolation through syllable centres, flat beyond
    let interp = |t: f64, values: &dyn Fn(usize) -> f64| -> f64 {
        if t <= centers[0] {
            return values(0);
        }
        for i in 1..centers.len() {
            if t <= centers[i] {
                let u = (t - centers[i - 1]) / (centers[i] - centers[i - 1]);
                return values(i - 1) * (1.0 - u) + values(i) * u;
            }
        }
        values(centers.len() - 1)
    };

    let nyquist_guard = 0.45 * sr;
    let block = ((BLOCK_MS * sr / 1000.0).round() as usize).max(1);
    let fade = (EDGE_FADE_MS * sr / 1000.0).round() as usize;
    let mut out = vec![0.0; n];
    let mut phase = 0.0f64;
    let mut amps: Vec<f64> = Vec::new();

    for start in (0..n).step_by(block) {
        let t_mid = (start as f64 + block as f64 / 2.0) / n as f64;
        let formants = [0, 1, 2].map(|k| interp(t_mid, &|i| syllables[i].formants[k]));
        let harmonics_f0 = base_f0 * 2f64.powf(interp(t_mid, &|i| syllables[i].pitch_st) / 12.0);
        let count = (nyquist_guard / harmonics_f0).floor().max(1.0) as usize;
        amps.clear();
        amps.extend((1..=count).map(|h| envelope_gain(h as f64 * harmonics_f0, &formants)));
        let norm = amps.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-12);

        for i in start..(start + block).min(n) {
            let t = i as f64 / n as f64;
            let f0 = base_f0 * 2f64.powf(interp(t, &|k| syllables[k].pitch_st) / 12.0);
            phase = (phase + 2.0 * PI * f0 / sr) % (2.0 * PI);

            let syl = bounds.windows(2).position(|w| t < w[1]).unwrap_or(syllables.len() - 1);
            let u = (t - bounds[syl]) / (bounds[syl + 1] - bounds[syl]);
            let level_db = syllables[syl].level_db - SYLLABLE_DIP_DB * (1.0 - (PI * u).sin());
            let mut gain = OUTPUT_RMS * std::f64::consts::SQRT_2 * 10f64.powf(level_db / 20.0) / norm;
            let edge = i.min(n - 1 - i);
            if edge < fade {
                gain *= edge as f64 / fade as f64;
            }

            let voiced: f64 = amps
                .iter()
                .enumerate()
                .map(|(h, a)| a * ((h + 1) as f64 * phase).sin())
                .sum();
            out[i] = (gain * voiced).clamp(-0.99, 0.99);
        }
    }
    out
}

// RBJ biquad, direct form I.
struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
}

impl Biquad {
    fn highpass(cutoff: f64, sr: f64) -> Self {
        let w = 2.0 * PI * cutoff / sr;
        let alpha = w.sin() / (2.0 * std::f64::consts::FRAC_1_SQRT_2);
        let c = w.cos();
        let a0 = 1.0 + alpha;
        Self {
            b: [(1.0 + c) / 2.0 / a0, -(1.0 + c) / a0, (1.0 + c) / 2.0 / a0],
            a: [-2.0 * c / a0, (1.0 - alpha) / a0],
        }
    }

    fn lowpass(cutoff: f64, sr: f64) -> Self {
        let w = 2.0 * PI * cutoff / sr;
        let alpha = w.sin() / (2.0 * std::f64::consts::FRAC_1_SQRT_2);
        let c = w.cos();
        let a0 = 1.0 + alpha;
        Self {
            b: [(1.0 - c) / 2.0 / a0, (1.0 - c) / a0, (1.0 - c) / 2.0 / a0],
            a: [-2.0 * c / a0, (1.0 - alpha) / a0],
        }
    }

    fn run(&self, x: &[f64]) -> Vec<f64> {
        let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
        x.iter()
            .map(|&x0| {
                let y0 = self.b[0] * x0 + self.b[1] * x1 + self.b[2] * x2
                    - self.a[0] * y1
                    - self.a[1] * y2;
                x2 = x1;
                x1 = x0;
                y2 = y1;
                y1 = y0;
                y0
            })
            .collect()
    }
}

/// 300-3400 Hz telephone band (upper edge capped below Nyquist).
pub fn telephone_band(samples: &[f64], sample_rate: u32) -> Vec<f64> {
    let sr = sample_rate as f64;
    let hp = Biquad::highpass(300.0, sr).run(samples);
    Biquad::lowpass(3400f64.min(0.45 * sr), sr)
        .run(&hp)
        .into_iter()
        .map(|s| s.clamp(-1.0, 1.0))
        .collect()
}

fn finish(cfg: &SynthConfig, samples: Vec<f64>) -> Result<AudioClip> {
    let samples = if cfg.telephone_band {
        telephone_band(&samples, cfg.sample_rate)
    } else {
        samples
    };
    AudioClip::new(samples, cfg.sample_rate)
}

/// The unperturbed rendering of a prompt, at a neutral 120 Hz voice.
pub fn synthesize_template(cfg: &SynthConfig, prompt: usize) -> Result<AudioClip> {
    cfg.validate()?;
    let plan = prompt_plan(cfg.seed, prompt);
    finish(cfg, render(&plan.syllables, 120.0, cfg.duration_ms, cfg.sample_rate))
}

/// One speaker's rendering of a prompt.
pub fn synthesize_utterance(
    cfg: &SynthConfig,
    prompt: usize,
    group: usize,
    speaker: usize,
) -> Result<AudioClip> {
    cfg.validate()?;
    if group >= cfg.groups {
        return Err(Error::InvalidConfig(format!("group {group} out of range")));
    }
    let plan = prompt_plan(cfg.seed, prompt);
    let voice = speaker_voice(cfg.seed, group, speaker);
    let mut rng = stream(cfg.seed, 2, prompt, group, speaker);
    let syllables = perturbed_syllables(cfg, &plan, group, Some(&mut rng));
    let samples = render(
        &syllables,
        voice.base_f0,
        cfg.duration_ms * voice.rate,
        cfg.sample_rate,
    );
    finish(cfg, samples)
}

fn expert_label(rng: &mut ChaCha8Rng, truth: usize, groups: usize, noise: f64) -> usize {
    if groups < 2 || rng.random::<f64>() >= noise {
        return truth;
    }
    let up = rng.random::<bool>();
    match (truth, up) {
        (0, _) => 1,
        (t, _) if t + 1 == groups => t - 1,
        (t, true) => t + 1,
        (t, false) => t - 1,
    }
}

/// Writes `audio/*.wav` and `manifest.csv` under `out_dir` and returns the
/// manifest path. Rows are ordered by group, speaker, prompt.
pub fn generate_synthetic_corpus(cfg: &SynthConfig, out_dir: &Path) -> Result<PathBuf> {
    cfg.validate()?;
    let audio_dir = out_dir.join("audio");
    fs::create_dir_all(&audio_dir)?;

    let jobs: Vec<(usize, usize, usize)> = (0..cfg.groups)
        .flat_map(|g| {
            (0..cfg.speakers_per_group)
                .flat_map(move |s| (0..cfg.prompts).map(move |p| (g, s, p)))
        })
        .collect();

    let entries = jobs
        .par_iter()
        .map(|&(g, s, p)| {
            let clip = synthesize_utterance(cfg, p, g, s)?;
            let rel = format!("audio/p{p:02}_g{g}_s{s:02}.wav");
            write_wav_pcm16(&out_dir.join(&rel), &clip)?;
            Ok((g, s, p, rel))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut labels = Vec::with_capacity(cfg.groups * cfg.speakers_per_group);
    for g in 0..cfg.groups {
        for s in 0..cfg.speakers_per_group {
            let mut rng = stream(cfg.seed, 3, 0, g, s);
            let e1 = expert_label(&mut rng, g, cfg.groups, cfg.label_noise);
            let e2 = expert_label(&mut rng, g, cfg.groups, cfg.label_noise);
            labels.push((e1, e2));
        }
    }

    let rows: Vec<ManifestEntry> = entries
        .into_iter()
        .map(|(g, s, p, path)| {
            let (e1, e2) = labels[g * cfg.speakers_per_group + s];
            ManifestEntry {
                path,
                speaker: SynthConfig::speaker_id(g, s),
                prompt: p,
                expert1: Some(e1),
                expert2: Some(e2),
                truth: Some(g),
            }
        })
        .collect();

    let manifest = out_dir.join("manifest.csv");
    write_manifest(&manifest, &rows)?;
    Ok(manifest)
}
