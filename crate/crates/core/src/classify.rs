//! Scoring a test utterance against every group's ideals and picking a group.
//!
//! A group is chosen outright when its best triplet is simultaneously no
//! worse than every other group's in all three components (lowest `id`,
//! highest `p`, highest `ir`). When no single group achieves that, the group
//! with the smallest scalarized score wins.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{compute_triplet, Triplet};
use crate::reference::{ReferenceSet, Utterance};
use crate::signal::FeatureBundle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    L1,
    #[default]
    L2,
    Linf,
}

impl FromStr for NormKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(NormKind::L1),
            "l2" => Ok(NormKind::L2),
            "linf" => Ok(NormKind::Linf),
            other => Err(format!("unknown norm '{other}' (expected l1, l2 or linf)")),
        }
    }
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormKind::L1 => "l1",
            NormKind::L2 => "l2",
            NormKind::Linf => "linf",
        })
    }
}

impl NormKind {
    pub fn apply(self, v: [f64; 3]) -> f64 {
        match self {
            NormKind::L1 => v.iter().map(|x| x.abs()).sum(),
            NormKind::L2 => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
            NormKind::Linf => v.iter().fold(0.0, |m, x| m.max(x.abs())),
        }
    }
}

/// Maps a triplet to `(id/(1+id), (1-p)/2, (1-ir)/2)`, each in `[0, 1]`, zero at
/// a perfect match.
pub fn scalar_components(t: &Triplet) -> [f64; 3] {
    [t.id / (1.0 + t.id), (1.0 - t.p) / 2.0, (1.0 - t.ir) / 2.0]
}

/// Single nonnegative score for a triplet, lower is closer.
pub fn scalarize(t: &Triplet, norm: NormKind) -> f64 {
    norm.apply(scalar_components(t))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupScore {
    pub group: usize,
    pub triplet: Triplet,
    pub scalar: f64,
    pub ideal_used: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationResult {
    pub prompt: usize,
    pub scores: Vec<GroupScore>,
    pub chosen: usize,
    pub dominant: bool,
    pub margin: f64,
}

impl ClassificationResult {
    pub fn chosen_score(&self) -> &GroupScore {
        &self.scores[self.chosen]
    }
}

/// Best triplet of `test` over the ideals of one group. Ties in scalarized
/// score go to the smallest speaker id.
pub fn score_against_group(
    test: &FeatureBundle,
    group: usize,
    ideals: &[Utterance],
    norm: NormKind,
) -> Result<GroupScore> {
    let mut best: Option<GroupScore> = None;
    for ideal in ideals {
        let triplet = compute_triplet(test, &ideal.bundle)?;
        let scalar = scalarize(&triplet, norm);
        let better = match &best {
            None => true,
            Some(b) => {
                scalar < b.scalar || (scalar == b.scalar && ideal.speaker < b.ideal_used)
            }
        };
        if better {
            best = Some(GroupScore {
                group,
                triplet,
                scalar,
                ideal_used: ideal.speaker.clone(),
            });
        }
    }
    best.ok_or(Error::EmptyCell)
}

/// Index of the smallest scalar; ties go to the lower group rank.
fn argmin_scalar(scores: &[GroupScore]) -> usize {
    scores
        .iter()
        .enumerate()
        .fold(0, |best, (i, s)| if s.scalar < scores[best].scalar { i } else { best })
}

/// Applies the dominance rule to per-group scores, falling back to the
/// scalarized argmin. Returns `(chosen, dominant)`.
pub fn decide(scores: &[GroupScore]) -> (usize, bool) {
    let dominant: Vec<usize> = (0..scores.len())
        .filter(|&g| {
            scores
                .iter()
                .enumerate()
                .all(|(j, s)| j == g || scores[g].triplet.dominates(&s.triplet))
        })
        .collect();
    match dominant.as_slice() {
        [g] => (*g, true),
        _ => (argmin_scalar(scores), false),
    }
}

pub fn classify_utterance(
    test: &FeatureBundle,
    prompt: usize,
    refs: &ReferenceSet,
    norm: NormKind,
) -> Result<ClassificationResult> {
    if prompt >= refs.prompts() {
        return Err(Error::UnknownPrompt(prompt));
    }
    let scores = (0..refs.groups().len())
        .map(|g| {
            let ideals = refs.ideals(prompt, g).ok_or(Error::UnknownPrompt(prompt))?;
            score_against_group(test, g, ideals, norm)
        })
        .collect::<Result<Vec<_>>>()?;

    let (chosen, dominant) = decide(&scores);
    let runner_up = scores
        .iter()
        .filter(|s| s.group != chosen)
        .map(|s| s.scalar)
        .fold(f64::INFINITY, f64::min);
    let margin = if runner_up.is_finite() {
        (runner_up - scores[chosen].scalar).max(0.0)
    } else {
        0.0
    };

    Ok(ClassificationResult {
        prompt,
        scores,
        chosen,
        dominant,
        margin,
    })
}

/// Mean scalarized score of each group over a speaker's utterances.
pub fn mean_scalars(results: &[ClassificationResult]) -> Vec<f64> {
    let groups = results.first().map_or(0, |r| r.scores.len());
    (0..groups)
        .map(|g| results.iter().map(|r| r.scores[g].scalar).sum::<f64>() / results.len() as f64)
        .collect()
}

/// Majority vote over utterance decisions. Ties go to the tied group with the
/// smallest mean scalarized score across all the speaker's utterances, then to
/// the lower rank.
pub fn classify_speaker(results: &[ClassificationResult]) -> Result<usize> {
    if results.is_empty() {
        return Err(Error::EmptyResults);
    }
    let groups = results[0].scores.len();
    let mut votes = vec![0usize; groups];
    for r in results {
        votes[r.chosen] += 1;
    }
    let top = *votes.iter().max().unwrap_or(&0);
    let means = mean_scalars(results);
    let winner = (0..groups)
        .filter(|&g| votes[g] == top)
        .fold(None, |best: Option<usize>, g| match best {
            Some(b) if means[b] <= means[g] => Some(b),
            _ => Some(g),
        })
        .ok_or(Error::EmptyResults)?;
    Ok(winner)
}
