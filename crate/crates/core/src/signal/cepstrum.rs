use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::FrameConfig;

const LOG_FLOOR: f64 = 1e-12;

fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Hamming window, mel filterbank and type-II DCT for one (config, rate) pair.
pub struct CepstralAnalyzer {
    window: Vec<f64>,
    nfft: usize,
    fft: Arc<dyn Fft<f64>>,
    // sparse triangular weights: (first bin, weights)
    filters: Vec<(usize, Vec<f64>)>,
    dct: Vec<Vec<f64>>,
}

impl CepstralAnalyzer {
    pub fn new(cfg: &FrameConfig, sample_rate: u32) -> Self {
        let len = cfg.window_len(sample_rate);
        let window: Vec<f64> = if len == 1 {
            vec![1.0]
        } else {
            (0..len)
                .map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / (len - 1) as f64).cos())
                .collect()
        };
        let nfft = len.next_power_of_two();
        let fft = FftPlanner::new().plan_fft_forward(nfft);

        let sr = sample_rate as f64;
        let mel_max = hz_to_mel(sr / 2.0);
        let edges: Vec<f64> = (0..cfg.n_filters + 2)
            .map(|i| mel_to_hz(mel_max * i as f64 / (cfg.n_filters + 1) as f64))
            .collect();
        let bins = nfft / 2 + 1;
        let filters = edges
            .windows(3)
            .map(|e| {
                let (lo, center, hi) = (e[0], e[1], e[2]);
                let weights: Vec<(usize, f64)> = (0..bins)
                    .filter_map(|k| {
                        let f = k as f64 * sr / nfft as f64;
                        let w = if f > lo && f <= center {
                            (f - lo) / (center - lo)
                        } else if f > center && f < hi {
                            (hi - f) / (hi - center)
                        } else {
                            0.0
                        };
                        (w > 0.0).then_some((k, w))
                    })
                    .collect();
                let first = weights.first().map_or(0, |w| w.0);
                (first, weights.into_iter().map(|w| w.1).collect())
            })
            .collect();

        let m = cfg.n_filters as f64;
        let dct = (0..cfg.n_ceps)
            .map(|k| {
                let scale = if k == 0 { (1.0 / m).sqrt() } else { (2.0 / m).sqrt() };
                (0..cfg.n_filters)
                    .map(|j| scale * (PI * k as f64 * (j as f64 + 0.5) / m).cos())
                    .collect()
            })
            .collect();

        Self {
            window,
            nfft,
            fft,
            filters,
            dct,
        }
    }

    /// Cepstral coefficients of one (pre-emphasized) frame.
    pub fn cepstra(&self, frame: &[f64]) -> Vec<f64> {
        let mut buf: Vec<Complex<f64>> = frame
            .iter()
            .zip(&self.window)
            .map(|(s, w)| Complex::new(s * w, 0.0))
            .collect();
        buf.resize(self.nfft, Complex::new(0.0, 0.0));
        self.fft.process(&mut buf);

        let log_energies: Vec<f64> = self
            .filters
            .iter()
            .map(|(first, weights)| {
                let e: f64 = weights
                    .iter()
                    .enumerate()
                    .map(|(i, w)| w * buf[first + i].norm_sqr())
                    .sum();
                e.max(LOG_FLOOR).ln()
            })
            .collect();

        self.dct
            .iter()
            .map(|basis| basis.iter().zip(&log_energies).map(|(b, e)| b * e).sum())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mel_round_trip() {
        for hz in [0.0, 300.0, 1000.0, 3400.0, 8000.0] {
            assert!((mel_to_hz(hz_to_mel(hz)) - hz).abs() < 1e-9);
        }
    }

    #[test]
    fn every_filter_has_support() {
        for sr in [8000, 16000, 22050, 44100, 48000] {
            let a = CepstralAnalyzer::new(&FrameConfig::default(), sr);
            assert_eq!(a.filters.len(), 20);
            assert!(a.filters.iter().all(|(_, w)| !w.is_empty()), "rate {sr}");
        }
    }

    #[test]
    fn dct_rows_are_orthonormal() {
        let a = CepstralAnalyzer::new(&FrameConfig::default(), 16000);
        for i in 0..a.dct.len() {
            for j in 0..a.dct.len() {
                let dot: f64 = a.dct[i].iter().zip(&a.dct[j]).map(|(x, y)| x * y).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gain_moves_only_c0() {
        let cfg = FrameConfig::default();
        let a = CepstralAnalyzer::new(&cfg, 16000);
        let frame: Vec<f64> = (0..400)
            .map(|i| (i as f64 * 0.13).sin() * 0.4 + (i as f64 * 0.71).cos() * 0.2)
            .collect();
        let half: Vec<f64> = frame.iter().map(|s| s * 0.5).collect();
        let c = a.cepstra(&frame);
        let h = a.cepstra(&half);
        let expected_shift = (20f64).sqrt() * 0.25f64.ln();
        assert!((h[0] - c[0] - expected_shift).abs() < 1e-9);
        for k in 1..c.len() {
            assert!((h[k] - c[k]).abs() < 1e-9, "coefficient {k}");
        }
    }
}
