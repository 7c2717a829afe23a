//! The articulation/pitch/stress triplet between two utterances of one prompt.
//!
//! Articulation distance `id` is the symmetric DTW cost over the cepstral
//! tracks divided by the summed frame counts. The same alignment path then
//! pairs the pitch and stress contours, and `p` / `ir` are Pearson
//! correlations of the paired log-f0 and log-energy values. Higher `p` and
//! `ir` mean closer; lower `id` means closer.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::FeatureBundle;

/// Contours whose variance falls below this are treated as flat.
pub const FLAT_VARIANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Triplet {
    /// Articulation distance, `>= 0`.
    pub id: f64,
    /// Pitch similarity in `[-1, 1]`.
    pub p: f64,
    /// Stress similarity in `[-1, 1]`.
    pub ir: f64,
}

impl Triplet {
    /// The triplet of an utterance compared with itself.
    pub const IDENTITY: Triplet = Triplet {
        id: 0.0,
        p: 1.0,
        ir: 1.0,
    };

    pub fn new(id: f64, p: f64, ir: f64) -> Self {
        Self { id, p, ir }
    }

    pub fn is_valid(&self) -> bool {
        self.id >= 0.0 && (-1.0..=1.0).contains(&self.p) && (-1.0..=1.0).contains(&self.ir)
    }

    /// True when `self` is at least as close as `other` in all three components.
    pub fn dominates(&self, other: &Triplet) -> bool {
        self.id <= other.id && self.p >= other.p && self.ir >= other.ir
    }
}

impl From<[f64; 3]> for Triplet {
    fn from([id, p, ir]: [f64; 3]) -> Self {
        Self { id, p, ir }
    }
}

impl From<Triplet> for [f64; 3] {
    fn from(t: Triplet) -> Self {
        [t.id, t.p, t.ir]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentPath {
    /// `(frame in a, frame in b)`, from `(0, 0)` to `(len_a - 1, len_b - 1)`.
    pub pairs: Vec<(usize, usize)>,
    pub cost: f64,
}

#[derive(Clone, Copy)]
enum Step {
    Start,
    Diagonal,
    // advance in a only
    Vertical,
    // advance in b only
    Horizontal,
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Symmetric DTW with step weights diagonal 2, vertical 1, horizontal 1 and a
/// start weight of 2, so every complete path carries total weight
/// `len_a + len_b`. Backtrace ties prefer diagonal, then vertical, then
/// horizontal.
pub fn dtw_align(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<AlignmentPath> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyTrack);
    }
    let dim = a[0].len();
    if let Some(row) = a.iter().chain(b).find(|r| r.len() != dim) {
        return Err(Error::DimensionMismatch(dim, row.len()));
    }

    let (n, m) = (a.len(), b.len());
    let mut acc = vec![f64::INFINITY; n * m];
    let mut step = vec![Step::Start; n * m];
    for i in 0..n {
        for j in 0..m {
            let c = euclidean(&a[i], &b[j]);
            let idx = i * m + j;
            if i == 0 && j == 0 {
                acc[idx] = 2.0 * c;
                continue;
            }
            let mut best = f64::INFINITY;
            let mut chosen = Step::Start;
            if i > 0 && j > 0 {
                best = acc[idx - m - 1] + 2.0 * c;
                chosen = Step::Diagonal;
            }
            if i > 0 {
                let v = acc[idx - m] + c;
                if v < best {
                    best = v;
                    chosen = Step::Vertical;
                }
            }
            if j > 0 {
                let v = acc[idx - 1] + c;
                if v < best {
                    best = v;
                    chosen = Step::Horizontal;
                }
            }
            acc[idx] = best;
            step[idx] = chosen;
        }
    }

    let mut pairs = Vec::with_capacity(n + m);
    let (mut i, mut j) = (n - 1, m - 1);
    loop {
        pairs.push((i, j));
        match step[i * m + j] {
            Step::Start => break,
            Step::Diagonal => {
                i -= 1;
                j -= 1;
            }
            Step::Vertical => i -= 1,
            Step::Horizontal => j -= 1,
        }
    }
    pairs.reverse();

    Ok(AlignmentPath {
        pairs,
        cost: acc[n * m - 1],
    })
}

/// Pearson correlation with the flat-contour conventions: two flat contours
/// are fully similar (1), one flat contour against a moving one scores 0.
pub fn contour_similarity(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    if x == y {
        return 1.0;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxx += da * da;
        syy += db * db;
        sxy += da * db;
    }
    let flat_x = sxx / n < FLAT_VARIANCE;
    let flat_y = syy / n < FLAT_VARIANCE;
    match (flat_x, flat_y) {
        (true, true) => 1.0,
        (true, false) | (false, true) => 0.0,
        _ => (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0),
    }
}

// Total order on bundles so that (a, b) and (b, a) run the identical computation.
fn canonical_cmp(a: &FeatureBundle, b: &FeatureBundle) -> Ordering {
    fn rows(x: &[Vec<f64>], y: &[Vec<f64>]) -> Ordering {
        x.iter()
            .flatten()
            .zip(y.iter().flatten())
            .map(|(p, q)| p.total_cmp(q))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    }
    let opt = |p: &Option<f64>| p.unwrap_or(-1.0);
    a.frame_count()
        .cmp(&b.frame_count())
        .then_with(|| rows(a.spectral(), b.spectral()))
        .then_with(|| {
            a.pitch()
                .iter()
                .zip(b.pitch())
                .map(|(p, q)| opt(p).total_cmp(&opt(q)))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
        .then_with(|| {
            a.stress()
                .iter()
                .zip(b.stress())
                .map(|(p, q)| p.total_cmp(q))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
}

pub fn compute_triplet(a: &FeatureBundle, b: &FeatureBundle) -> Result<Triplet> {
    if !a.compatible_with(b) {
        return Err(Error::ConfigMismatch);
    }
    let (first, second) = if canonical_cmp(a, b) == Ordering::Greater {
        (b, a)
    } else {
        (a, b)
    };

    let path = dtw_align(first.spectral(), second.spectral())?;
    let id = path.cost / (first.frame_count() + second.frame_count()) as f64;

    let (f0_x, f0_y): (Vec<f64>, Vec<f64>) = path
        .pairs
        .iter()
        .filter_map(|&(i, j)| match (first.pitch()[i], second.pitch()[j]) {
            (Some(x), Some(y)) => Some((x.ln(), y.ln())),
            _ => None,
        })
        .unzip();
    // identical pitch tracks count as fully similar even when (almost) unvoiced
    let p = if first.pitch() == second.pitch() {
        1.0
    } else if f0_x.len() < 2 {
        0.0
    } else {
        contour_similarity(&f0_x, &f0_y)
    };

    let (e_x, e_y): (Vec<f64>, Vec<f64>) = path
        .pairs
        .iter()
        .map(|&(i, j)| (first.stress()[i], second.stress()[j]))
        .unzip();
    let ir = contour_similarity(&e_x, &e_y);

    Ok(Triplet { id, p, ir })
}
