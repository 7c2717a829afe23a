//! Normalized autocorrelation pitch estimator.
//!
//! For a lag `k` the frame is compared with itself shifted by `k` samples,
//! normalized by the energies of the two overlapping segments:
//!
//! ```text
//! r(k) = sum x[n] x[n+k] / sqrt(sum x[n]^2 * sum x[n+k]^2),   n = 0 .. N-k-1
//! ```
//!
//! so `r` is independent of the frame's gain. Lags are searched over
//! `[sr / fmax, sr / fmin]`; lags whose overlap is shorter than half the frame
//! (fewer than two periods in view) are skipped. The frame is unvoiced when the
//! best `r` falls below the voicing threshold. There is no octave-correction
//! pass beyond preferring the earliest peak that reaches 90% of the best one.

use super::FrameConfig;

const PEAK_FRACTION: f64 = 0.9;

fn normalized_autocorrelation(frame: &[f64], lag: usize) -> f64 {
    let n = frame.len() - lag;
    let (mut cross, mut e0, mut e1) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let a = frame[i];
        let b = frame[i + lag];
        cross += a * b;
        e0 += a * a;
        e1 += b * b;
    }
    let denom = (e0 * e1).sqrt();
    if denom <= f64::MIN_POSITIVE {
        0.0
    } else {
        cross / denom
    }
}

/// Estimated f0 in Hz, or `None` when the frame is unvoiced.
pub fn estimate_pitch(frame: &[f64], sample_rate: u32, cfg: &FrameConfig) -> Option<f64> {
    let sr = sample_rate as f64;
    let min_lag = ((sr / cfg.pitch_fmax).floor() as usize).max(1);
    let max_lag = ((sr / cfg.pitch_fmin).ceil() as usize).min(frame.len() / 2);
    if max_lag <= min_lag {
        return None;
    }

    // one guard lag on each side for peak detection and interpolation
    let lo = min_lag - 1;
    let hi = (max_lag + 1).min(frame.len() - 1);
    let r: Vec<f64> = (lo..=hi)
        .map(|lag| normalized_autocorrelation(frame, lag))
        .collect();
    let at = |lag: usize| r[lag - lo];

    let best = (min_lag..=max_lag).map(at).fold(f64::NEG_INFINITY, f64::max);
    if !(best >= cfg.voicing_threshold) {
        return None;
    }

    let is_peak = |lag: usize| {
        let v = at(lag);
        let left = lag == lo || v >= at(lag - 1);
        let right = lag == hi || v >= at(lag + 1);
        left && right
    };
    let lag = (min_lag..=max_lag)
        .find(|&lag| at(lag) >= PEAK_FRACTION * best && is_peak(lag))
        .or_else(|| (min_lag..=max_lag).find(|&lag| at(lag) == best))?;

    let offset = if lag > lo && lag < hi {
        let (a, b, c) = (at(lag - 1), at(lag), at(lag + 1));
        let denom = a - 2.0 * b + c;
        if denom < 0.0 {
            (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
        } else {
            0.0
        }
    } else {
        0.0
    };
    let f0 = sr / (lag as f64 + offset);
    Some(f0.clamp(cfg.pitch_fmin, cfg.pitch_fmax))
}
