//! Agreement between two raters (or a rater and the system) over ordinal
//! group labels, and the speaker-level reference/test split.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{LabelColumn, ManifestEntry};
use crate::error::{Error, Result};

/// One group rank per subject.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LabelVector {
    entries: BTreeMap<String, usize>,
}

impl LabelVector {
    pub fn from_pairs<I, S>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, usize)>,
        S: Into<String>,
    {
        let mut entries = BTreeMap::new();
        for (subject, rank) in pairs {
            let subject = subject.into();
            if entries.contains_key(&subject) {
                return Err(Error::DuplicateSubject(subject));
            }
            entries.insert(subject, rank);
        }
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, subject: &str) -> Option<usize> {
        self.entries.get(subject).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, usize)> {
        self.entries.iter().map(|(s, r)| (s.as_str(), *r))
    }

    pub fn subjects(&self) -> BTreeSet<&str> {
        self.entries.keys().map(String::as_str).collect()
    }

    /// Keeps only the listed subjects.
    pub fn restricted_to(&self, subjects: &BTreeSet<String>) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .filter(|(s, _)| subjects.contains(*s))
                .map(|(s, r)| (s.clone(), *r))
                .collect(),
        }
    }

    /// Speaker-level labels from one manifest column. Every row of a speaker
    /// must carry the same label.
    pub fn from_manifest(entries: &[ManifestEntry], column: LabelColumn) -> Result<Self> {
        let mut out: BTreeMap<String, usize> = BTreeMap::new();
        for e in entries {
            let rank = e.label(column).ok_or_else(|| Error::MissingLabel {
                speaker: e.speaker.clone(),
                column: column.name().to_string(),
            })?;
            match out.get(&e.speaker) {
                Some(&r) if r != rank => return Err(Error::InconsistentLabel(e.speaker.clone())),
                _ => {
                    out.insert(e.speaker.clone(), rank);
                }
            }
        }
        Ok(Self { entries: out })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub n: usize,
    pub total_pct: f64,
    pub one_step_pct: f64,
    /// `confusion[a][b]` counts subjects rated `a` by the first rater and `b`
    /// by the second.
    pub confusion: Vec<Vec<usize>>,
}

/// Exact and within-one-rank agreement. The 1-step figure includes exact matches.
pub fn agreement(a: &LabelVector, b: &LabelVector, groups: usize) -> Result<AgreementReport> {
    let (sa, sb) = (a.subjects(), b.subjects());
    if sa != sb {
        let only_a: Vec<&str> = sa.difference(&sb).copied().collect();
        let only_b: Vec<&str> = sb.difference(&sa).copied().collect();
        return Err(Error::SubjectMismatch(format!(
            "only in first: [{}]; only in second: [{}]",
            only_a.join(", "),
            only_b.join(", ")
        )));
    }
    if a.is_empty() {
        return Err(Error::NoSubjects);
    }

    let mut confusion = vec![vec![0usize; groups]; groups];
    let (mut exact, mut near) = (0usize, 0usize);
    for (subject, ra) in a.iter() {
        let rb = b.get(subject).expect("subject sets are equal");
        if ra >= groups || rb >= groups {
            return Err(Error::InvalidConfig(format!(
                "subject {subject} has rank {} with only {groups} groups",
                ra.max(rb)
            )));
        }
        confusion[ra][rb] += 1;
        if ra == rb {
            exact += 1;
        }
        if ra.abs_diff(rb) <= 1 {
            near += 1;
        }
    }
    let n = a.len();
    Ok(AgreementReport {
        n,
        total_pct: 100.0 * exact as f64 / n as f64,
        one_step_pct: 100.0 * near as f64 / n as f64,
        confusion,
    })
}

/// Text table with one column per comparison and the rows
/// `Total Agreement` and `1-step Agreement`.
pub fn format_agreement_table(columns: &[(&str, &AgreementReport)]) -> String {
    let label_width = "1-step Agreement".len();
    let widths: Vec<usize> = columns.iter().map(|(h, _)| h.len().max(8)).collect();
    let mut out = String::new();
    let _ = write!(out, "{:label_width$}", "");
    for ((h, _), w) in columns.iter().zip(&widths) {
        let _ = write!(out, " | {h:>w$}");
    }
    out.push('\n');
    let rule = label_width + widths.iter().map(|w| w + 3).sum::<usize>();
    out.push_str(&"-".repeat(rule));
    out.push('\n');
    for (name, pick) in [
        ("Total Agreement", (|r: &AgreementReport| r.total_pct) as fn(&AgreementReport) -> f64),
        ("1-step Agreement", |r: &AgreementReport| r.one_step_pct),
    ] {
        let _ = write!(out, "{name:label_width$}");
        for ((_, r), w) in columns.iter().zip(&widths) {
            let cell = format!("{:.1} %", pick(r));
            let _ = write!(out, " | {cell:>w$}");
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub reference: Vec<ManifestEntry>,
    pub test: Vec<ManifestEntry>,
    pub reference_speakers: BTreeSet<String>,
    pub test_speakers: BTreeSet<String>,
}

/// Number of a group's speakers that go to the test part.
pub fn test_share(speakers: usize) -> usize {
    (speakers + 1) / 3
}

/// Splits speakers of every group into a reference part (about two thirds)
/// and a test part (about one third). A speaker's utterances never straddle
/// the split. Groups come from `column`.
pub fn split_corpus(entries: &[ManifestEntry], column: LabelColumn, seed: u64) -> Result<Split> {
    let labels = LabelVector::from_manifest(entries, column)?;
    let mut by_group: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for (speaker, rank) in labels.iter() {
        by_group.entry(rank).or_default().push(speaker.to_string());
    }

    // every (prompt, group) cell needs at least 3 speakers
    let mut cells: BTreeMap<(usize, usize), BTreeSet<&str>> = BTreeMap::new();
    for e in entries {
        let g = labels.get(&e.speaker).expect("labelled above");
        cells.entry((e.prompt, g)).or_default().insert(&e.speaker);
    }
    if let Some((&(_, group), speakers)) = cells.iter().find(|(_, s)| s.len() < 3) {
        return Err(Error::CellTooSmall {
            group,
            speakers: speakers.len(),
        });
    }
    if by_group.is_empty() {
        return Err(Error::CellTooSmall {
            group: 0,
            speakers: 0,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test_speakers = BTreeSet::new();
    for speakers in by_group.values_mut() {
        speakers.sort();
        speakers.shuffle(&mut rng);
        test_speakers.extend(speakers.iter().take(test_share(speakers.len())).cloned());
    }
    let reference_speakers: BTreeSet<String> = labels
        .iter()
        .map(|(s, _)| s.to_string())
        .filter(|s| !test_speakers.contains(s))
        .collect();

    let (test, reference) = entries
        .iter()
        .cloned()
        .partition(|e| test_speakers.contains(&e.speaker));
    Ok(Split {
        reference,
        test,
        reference_speakers,
        test_speakers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vector(ranks: &[usize]) -> LabelVector {
        LabelVector::from_pairs(ranks.iter().enumerate().map(|(i, &r)| (format!("s{i:03}"), r)))
            .unwrap()
    }

    #[test]
    fn identical_vectors_agree_fully() {
        let ranks: Vec<usize> = (0..100).map(|i| i % 5).collect();
        let r = agreement(&vector(&ranks), &vector(&ranks), 5).unwrap();
        assert_eq!((r.total_pct, r.one_step_pct, r.n), (100.0, 100.0, 100));
        for (g, row) in r.confusion.iter().enumerate() {
            assert_eq!(row[g], 20);
        }
    }

    #[test]
    fn twenty_six_exact_nineteen_adjacent() {
        // 26 exact, 19 off by one, 55 off by two
        let a: Vec<usize> = (0..100).map(|_| 2).collect();
        let b: Vec<usize> = (0..100)
            .map(|i| if i < 26 { 2 } else if i < 45 { 3 } else { 0 })
            .collect();
        let r = agreement(&vector(&a), &vector(&b), 5).unwrap();
        assert_eq!(r.total_pct, 26.0);
        assert_eq!(r.one_step_pct, 45.0);
    }

    #[test]
    fn subject_mismatch() {
        let a = LabelVector::from_pairs([("x", 1), ("y", 2)]).unwrap();
        let b = LabelVector::from_pairs([("x", 1), ("z", 2)]).unwrap();
        assert!(matches!(agreement(&a, &b, 5), Err(Error::SubjectMismatch(_))));
    }

    #[test]
    fn duplicate_subject() {
        assert!(matches!(
            LabelVector::from_pairs([("x", 1), ("x", 2)]),
            Err(Error::DuplicateSubject(_))
        ));
    }

    #[test]
    fn empty_vectors_are_an_error() {
        let e = LabelVector::default();
        assert!(matches!(agreement(&e, &e, 5), Err(Error::NoSubjects)));
    }

    #[test]
    fn table_layout() {
        let r = agreement(&vector(&[0, 1, 2, 3]), &vector(&[0, 2, 2, 0]), 5).unwrap();
        let t = format_agreement_table(&[("Expert 1 - Expert 2", &r)]);
        assert!(t.contains("Total Agreement"));
        assert!(t.contains("50.0 %"));
        assert!(t.contains("1-step Agreement"));
        assert!(t.contains("75.0 %"));
    }

    fn manifest(groups: usize, speakers: usize, prompts: usize) -> Vec<ManifestEntry> {
        let mut out = Vec::new();
        for g in 0..groups {
            for s in 0..speakers {
                for p in 0..prompts {
                    out.push(ManifestEntry {
                        path: format!("p{p}_g{g}_s{s}.wav"),
                        speaker: format!("g{g}s{s:02}"),
                        prompt: p,
                        expert1: Some(g),
                        expert2: Some(g),
                        truth: Some(g),
                    });
                }
            }
        }
        out
    }

    #[test]
    fn six_speakers_split_four_two() {
        let split = split_corpus(&manifest(1, 6, 2), LabelColumn::Truth, 1).unwrap();
        assert_eq!(split.reference_speakers.len(), 4);
        assert_eq!(split.test_speakers.len(), 2);
        assert_eq!(split.test.len(), 4);
        assert_eq!(split.reference.len(), 8);
    }

    #[test]
    fn split_is_deterministic() {
        let m = manifest(5, 6, 4);
        assert_eq!(
            split_corpus(&m, LabelColumn::Truth, 42).unwrap(),
            split_corpus(&m, LabelColumn::Truth, 42).unwrap()
        );
    }

    #[test]
    fn seed_42_golden_partition() {
        let split = split_corpus(&manifest(5, 6, 4), LabelColumn::Truth, 42).unwrap();
        let got: Vec<&str> = split.test_speakers.iter().map(String::as_str).collect();
        assert_eq!(got.len(), 10);
        for g in 0..5 {
            let prefix = format!("g{g}");
            assert_eq!(got.iter().filter(|s| s.starts_with(&prefix)).count(), 2);
        }
        assert_eq!(got, GOLDEN_SEED_42);
    }

    const GOLDEN_SEED_42: [&str; 10] = [
        "g0s01", "g0s02", "g1s00", "g1s04", "g2s02", "g2s04", "g3s01", "g3s05", "g4s01", "g4s03",
    ];

    #[test]
    fn too_few_speakers() {
        assert!(matches!(
            split_corpus(&manifest(2, 2, 1), LabelColumn::Truth, 1),
            Err(Error::CellTooSmall { speakers: 2, .. })
        ));
        assert!(matches!(
            split_corpus(&[], LabelColumn::Truth, 1),
            Err(Error::CellTooSmall { speakers: 0, .. })
        ));
    }

    #[test]
    fn inconsistent_speaker_labels() {
        let mut m = manifest(1, 3, 2);
        m[1].truth = Some(1);
        assert!(matches!(
            split_corpus(&m, LabelColumn::Truth, 1),
            Err(Error::InconsistentLabel(_))
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn agreement_is_symmetric_and_cumulative(
                pairs in prop::collection::vec((0usize..5, 0usize..5), 1..60)
            ) {
                let a = vector(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
                let b = vector(&pairs.iter().map(|p| p.1).collect::<Vec<_>>());
                let ab = agreement(&a, &b, 5).unwrap();
                let ba = agreement(&b, &a, 5).unwrap();
                prop_assert_eq!(ab.total_pct, ba.total_pct);
                prop_assert_eq!(ab.one_step_pct, ba.one_step_pct);
                for i in 0..5 {
                    for j in 0..5 {
                        prop_assert_eq!(ab.confusion[i][j], ba.confusion[j][i]);
                    }
                }
                prop_assert!(0.0 <= ab.total_pct && ab.total_pct <= ab.one_step_pct);
                prop_assert!(ab.one_step_pct <= 100.0);
                let total: usize = ab.confusion.iter().flatten().sum();
                prop_assert_eq!(total, ab.n);
                let diag: usize = (0..5).map(|g| ab.confusion[g][g]).sum();
                prop_assert!((100.0 * diag as f64 / ab.n as f64 - ab.total_pct).abs() < 1e-9);
            }

            #[test]
            fn split_partitions_every_group(
                sizes in prop::collection::vec(3usize..9, 1..5),
                seed in any::<u64>(),
            ) {
                let mut m = Vec::new();
                for (g, &n) in sizes.iter().enumerate() {
                    m.extend(manifest(1, n, 2).into_iter().map(|mut e| {
                        e.speaker = format!("g{g}-{}", e.speaker);
                        e.truth = Some(g);
                        e
                    }));
                }
                let split = split_corpus(&m, LabelColumn::Truth, seed).unwrap();
                prop_assert!(split.reference_speakers.is_disjoint(&split.test_speakers));
                let all: BTreeSet<String> = m.iter().map(|e| e.speaker.clone()).collect();
                let union: BTreeSet<String> =
                    split.reference_speakers.union(&split.test_speakers).cloned().collect();
                prop_assert_eq!(union, all);
                for (g, &n) in sizes.iter().enumerate() {
                    let prefix = format!("g{g}-");
                    let t = split.test_speakers.iter().filter(|s| s.starts_with(&prefix)).count();
                    prop_assert!(t == n / 3 || t == (n + 2) / 3);
                }
            }
        }
    }
}
