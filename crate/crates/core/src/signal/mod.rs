//! Audio clips and the three per-utterance feature streams the metric consumes:
//! a cepstral track for articulation, an f0 contour for pitch and a frame
//! log-energy contour for stress. All three are computed on the same frame grid.

mod cepstrum;
mod pitch;
mod wav;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cepstrum::CepstralAnalyzer;
pub use pitch::estimate_pitch;
pub use wav::{load_clip, read_wav, write_wav_pcm16};

/// Sample rates accepted at ingestion. Nothing is resampled.
pub const SUPPORTED_RATES: [u32; 5] = [8000, 16000, 22050, 44100, 48000];

/// Leading/trailing silence below this level is stripped when loading recordings.
pub const SILENCE_THRESHOLD_DB: f64 = -60.0;

/// Floor applied to frame log-energy, in dB.
pub const ENERGY_FLOOR_DB: f64 = -120.0;

#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if !SUPPORTED_RATES.contains(&sample_rate) {
            return Err(Error::UnsupportedRate(sample_rate));
        }
        if let Some((index, &value)) = samples
            .iter()
            .enumerate()
            .find(|(_, v)| !(-1.0..=1.0).contains(*v))
        {
            return Err(Error::SampleOutOfRange { index, value });
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Multiplies every sample by `gain`, clamping to [-1, 1].
    pub fn scaled(&self, gain: f64) -> Self {
        Self {
            samples: self
                .samples
                .iter()
                .map(|s| (s * gain).clamp(-1.0, 1.0))
                .collect(),
            sample_rate: self.sample_rate,
        }
    }

    /// Drops leading and trailing samples whose magnitude is below `threshold_db`
    /// relative to full scale. An all-silent clip becomes empty.
    pub fn trim_silence(&self, threshold_db: f64) -> Self {
        let level = 10f64.powf(threshold_db / 20.0);
        let loud = |s: &f64| s.abs() >= level;
        let samples = match (
            self.samples.iter().position(loud),
            self.samples.iter().rposition(loud),
        ) {
            (Some(start), Some(end)) => self.samples[start..=end].to_vec(),
            _ => Vec::new(),
        };
        Self {
            samples,
            sample_rate: self.sample_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrameConfig {
    pub window_ms: f64,
    pub hop_ms: f64,
    pub preemphasis: f64,
    pub n_filters: usize,
    pub n_ceps: usize,
    pub pitch_fmin: f64,
    pub pitch_fmax: f64,
    pub voicing_threshold: f64,
}

impl Default for FrameConfig {
    fn default() -> Self {
        Self {
            window_ms: 25.0,
            hop_ms: 10.0,
            preemphasis: 0.97,
            n_filters: 20,
            n_ceps: 13,
            pitch_fmin: 50.0,
            pitch_fmax: 500.0,
            voicing_threshold: 0.3,
        }
    }
}

impl FrameConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if !(self.window_ms.is_finite() && self.window_ms > 0.0) {
            return bad("window_ms must be positive");
        }
        if !(self.hop_ms.is_finite() && self.hop_ms > 0.0) {
            return bad("hop_ms must be positive");
        }
        if self.hop_ms > self.window_ms {
            return bad("hop_ms must not exceed window_ms");
        }
        if !(0.0..1.0).contains(&self.preemphasis) {
            return bad("preemphasis must lie in [0, 1)");
        }
        if self.n_filters == 0 || self.n_ceps == 0 {
            return bad("n_filters and n_ceps must be positive");
        }
        if self.n_ceps > self.n_filters {
            return bad("n_ceps must not exceed n_filters");
        }
        if !(self.pitch_fmin > 0.0 && self.pitch_fmin < self.pitch_fmax) {
            return bad("pitch range must satisfy 0 < pitch_fmin < pitch_fmax");
        }
        if !(self.voicing_threshold > 0.0 && self.voicing_threshold < 1.0) {
            return bad("voicing_threshold must lie in (0, 1)");
        }
        Ok(())
    }

    pub fn window_len(&self, sample_rate: u32) -> usize {
        ms_to_samples(self.window_ms, sample_rate).max(1)
    }

    pub fn hop_len(&self, sample_rate: u32) -> usize {
        ms_to_samples(self.hop_ms, sample_rate).max(1)
    }
}

fn ms_to_samples(ms: f64, sample_rate: u32) -> usize {
    (ms * sample_rate as f64 / 1000.0).round() as usize
}

/// Number of whole frames of `window` samples, advancing by `hop`.
pub fn frame_count(n_samples: usize, window: usize, hop: usize) -> usize {
    if n_samples < window {
        0
    } else {
        (n_samples - window) / hop + 1
    }
}

/// Iterates over the whole frames of `samples`; a trailing partial frame is dropped.
pub fn frames(samples: &[f64], window: usize, hop: usize) -> impl Iterator<Item = &[f64]> {
    (0..frame_count(samples.len(), window, hop)).map(move |i| &samples[i * hop..i * hop + window])
}

/// Features of one utterance, all streams indexed by the same frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBundle {
    config: FrameConfig,
    sample_rate: u32,
    spectral: Vec<Vec<f64>>,
    pitch: Vec<Option<f64>>,
    stress: Vec<f64>,
}

impl FeatureBundle {
    /// Assembles a bundle from precomputed streams, checking frame alignment,
    /// cepstral width and the pitch range.
    pub fn from_parts(
        config: FrameConfig,
        sample_rate: u32,
        spectral: Vec<Vec<f64>>,
        pitch: Vec<Option<f64>>,
        stress: Vec<f64>,
    ) -> Result<Self> {
        config.validate()?;
        let n = spectral.len();
        if n == 0 {
            return Err(Error::InvalidConfig("feature bundle has no frames".into()));
        }
        if pitch.len() != n || stress.len() != n {
            return Err(Error::InvalidConfig(format!(
                "stream lengths differ: spectral {n}, pitch {}, stress {}",
                pitch.len(),
                stress.len()
            )));
        }
        if let Some(row) = spectral.iter().find(|r| r.len() != config.n_ceps) {
            return Err(Error::DimensionMismatch(row.len(), config.n_ceps));
        }
        if pitch
            .iter()
            .flatten()
            .any(|f0| !(config.pitch_fmin..=config.pitch_fmax).contains(f0))
        {
            return Err(Error::InvalidConfig(
                "voiced f0 outside the configured pitch range".into(),
            ));
        }
        Ok(Self {
            config,
            sample_rate,
            spectral,
            pitch,
            stress,
        })
    }

    pub fn config(&self) -> &FrameConfig {
        &self.config
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn frame_count(&self) -> usize {
        self.spectral.len()
    }

    pub fn spectral(&self) -> &[Vec<f64>] {
        &self.spectral
    }

    /// Per-frame f0 in Hz, `None` for unvoiced frames.
    pub fn pitch(&self) -> &[Option<f64>] {
        &self.pitch
    }

    /// Per-frame log-energy in dB.
    pub fn stress(&self) -> &[f64] {
        &self.stress
    }

    /// True when both bundles can be compared frame against frame.
    pub fn compatible_with(&self, other: &FeatureBundle) -> bool {
        self.sample_rate == other.sample_rate && self.config == other.config
    }
}

pub fn extract_features(clip: &AudioClip, cfg: &FrameConfig) -> Result<FeatureBundle> {
    cfg.validate()?;
    let sr = clip.sample_rate();
    if !SUPPORTED_RATES.contains(&sr) {
        return Err(Error::UnsupportedRate(sr));
    }
    let window = cfg.window_len(sr);
    let hop = cfg.hop_len(sr);
    let samples = clip.samples();
    if frame_count(samples.len(), window, hop) == 0 {
        return Err(Error::ClipTooShort {
            samples: samples.len(),
            window,
        });
    }

    let emphasized = preemphasize(samples, cfg.preemphasis);
    let analyzer = CepstralAnalyzer::new(cfg, sr);
    let spectral: Vec<Vec<f64>> = frames(&emphasized, window, hop)
        .map(|f| analyzer.cepstra(f))
        .collect();
    let pitch: Vec<Option<f64>> = frames(samples, window, hop)
        .map(|f| estimate_pitch(f, sr, cfg))
        .collect();
    let stress = stress_contour(frames(samples, window, hop));

    Ok(FeatureBundle {
        config: cfg.clone(),
        sample_rate: sr,
        spectral,
        pitch,
        stress,
    })
}

/// `y[n] = x[n] - coeff * x[n-1]`, with `y[0] = x[0]`.
pub fn preemphasize(samples: &[f64], coeff: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(samples.len());
    let mut prev = 0.0;
    for &s in samples {
        out.push(s - coeff * prev);
        prev = s;
    }
    out
}

/// Mean-square energy of one frame in dB, floored at [`ENERGY_FLOOR_DB`].
pub fn frame_log_energy(frame: &[f64]) -> f64 {
    if frame.is_empty() {
        return ENERGY_FLOOR_DB;
    }
    let mean_sq = frame.iter().map(|s| s * s).sum::<f64>() / frame.len() as f64;
    if mean_sq <= 0.0 {
        return ENERGY_FLOOR_DB;
    }
    (10.0 * mean_sq.log10()).max(ENERGY_FLOOR_DB)
}

pub fn stress_contour<'a, I>(frames: I) -> Vec<f64>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    frames.into_iter().map(frame_log_energy).collect()
}
