//! End-to-end drivers: manifest to features, features to a reference set,
//! classification of a manifest, and the split/build/classify/score protocol.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::classify::{classify_speaker, classify_utterance, mean_scalars, ClassificationResult, NormKind};
use crate::corpus::{LabelColumn, Manifest, ManifestEntry, FIVE_GROUPS};
use crate::error::{Error, Result};
use crate::evaluate::{agreement, format_agreement_table, split_corpus, AgreementReport, LabelVector};
use crate::reference::{build_from_index, CorpusIndex, ReferenceSet, Utterance};
use crate::signal::{extract_features, load_clip, FeatureBundle, FrameConfig};

/// Display names for `groups` ranks, worst to best.
pub fn group_names(groups: usize) -> Vec<String> {
    if groups == FIVE_GROUPS.len() {
        FIVE_GROUPS.iter().map(|s| s.to_string()).collect()
    } else {
        (0..groups).map(|g| format!("group {g}")).collect()
    }
}

/// Loads, trims and analyses every entry. All recordings must share one
/// sample rate; with `expected_rate` set they must match it.
pub fn load_features(
    manifest: &Manifest,
    entries: &[ManifestEntry],
    cfg: &FrameConfig,
    expected_rate: Option<u32>,
) -> Result<Vec<FeatureBundle>> {
    cfg.validate()?;
    let clips = entries
        .par_iter()
        .map(|e| {
            let path = manifest.resolve(e);
            load_clip(&path).map(|c| (path, c))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rate = expected_rate;
    for (path, clip) in &clips {
        match rate {
            None => rate = Some(clip.sample_rate()),
            Some(r) if r != clip.sample_rate() => {
                return Err(Error::MixedSampleRate {
                    expected: r,
                    found: clip.sample_rate(),
                    path: path.clone(),
                })
            }
            _ => {}
        }
    }

    clips
        .par_iter()
        .map(|(_, clip)| extract_features(clip, cfg))
        .collect()
}

/// Reference set from labelled manifest entries. The group count is
/// `groups`, or one more than the largest label seen.
pub fn build_reference_set(
    manifest: &Manifest,
    entries: &[ManifestEntry],
    column: LabelColumn,
    cfg: &FrameConfig,
    threshold: f64,
    norm: NormKind,
    groups: Option<usize>,
) -> Result<ReferenceSet> {
    if entries.is_empty() {
        return Err(Error::EmptyCell);
    }
    let labels = LabelVector::from_manifest(entries, column)?;
    let groups = groups.unwrap_or_else(|| labels.iter().map(|(_, r)| r + 1).max().unwrap_or(0));
    let prompts = entries.iter().map(|e| e.prompt + 1).max().unwrap_or(0);
    let bundles = load_features(manifest, entries, cfg, None)?;

    let mut index = CorpusIndex::new(prompts, group_names(groups));
    for (entry, bundle) in entries.iter().zip(bundles) {
        let group = labels.get(&entry.speaker).expect("labelled");
        if group >= groups {
            return Err(Error::InvalidConfig(format!(
                "speaker {} has group {group}, but only {groups} groups exist",
                entry.speaker
            )));
        }
        index.insert(entry.prompt, group, Utterance::new(entry.speaker.clone(), bundle))?;
    }
    build_from_index(&index, threshold, norm)
}

#[derive(Debug, Clone)]
pub struct UtteranceOutcome {
    pub speaker: String,
    pub result: ClassificationResult,
}

#[derive(Debug, Clone)]
pub struct SpeakerOutcome {
    pub speaker: String,
    pub chosen: usize,
    pub mean_scalars: Vec<f64>,
}

/// Classifies every entry against `refs`. Outcomes are sorted by speaker,
/// then prompt.
pub fn classify_entries(
    manifest: &Manifest,
    entries: &[ManifestEntry],
    refs: &ReferenceSet,
    norm: NormKind,
) -> Result<Vec<UtteranceOutcome>> {
    if let Some(e) = entries.iter().find(|e| e.prompt >= refs.prompts()) {
        return Err(Error::UnknownPrompt(e.prompt));
    }
    let bundles = load_features(manifest, entries, refs.config(), Some(refs.sample_rate()))?;
    let mut outcomes = entries
        .par_iter()
        .zip(bundles.par_iter())
        .map(|(e, b)| {
            classify_utterance(b, e.prompt, refs, norm).map(|result| UtteranceOutcome {
                speaker: e.speaker.clone(),
                result,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    outcomes.sort_by(|a, b| {
        a.speaker
            .cmp(&b.speaker)
            .then(a.result.prompt.cmp(&b.result.prompt))
    });
    Ok(outcomes)
}

/// One label per speaker from that speaker's utterance outcomes.
pub fn aggregate_speakers(outcomes: &[UtteranceOutcome]) -> Result<Vec<SpeakerOutcome>> {
    let mut by_speaker: BTreeMap<&str, Vec<ClassificationResult>> = BTreeMap::new();
    for o in outcomes {
        by_speaker.entry(&o.speaker).or_default().push(o.result.clone());
    }
    by_speaker
        .into_iter()
        .map(|(speaker, results)| {
            Ok(SpeakerOutcome {
                speaker: speaker.to_string(),
                chosen: classify_speaker(&results)?,
                mean_scalars: mean_scalars(&results),
            })
        })
        .collect()
}

/// Results CSV: one row per utterance, then one aggregate row per speaker
/// with prompt `*`, the speaker's label and mean scalars.
pub fn results_csv(outcomes: &[UtteranceOutcome], speakers: &[SpeakerOutcome], groups: usize) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["speaker".to_string(), "prompt".into(), "chosen".into(), "dominant".into()];
    header.extend((0..groups).map(|g| format!("scalar_{g}")));
    w.write_record(&header)?;
    for o in outcomes {
        let mut row = vec![
            o.speaker.clone(),
            o.result.prompt.to_string(),
            o.result.chosen.to_string(),
            o.result.dominant.to_string(),
        ];
        row.extend(o.result.scores.iter().map(|s| s.scalar.to_string()));
        w.write_record(&row)?;
    }
    for s in speakers {
        let mut row = vec![s.speaker.clone(), "*".into(), s.chosen.to_string(), String::new()];
        row.extend(s.mean_scalars.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Speaker-level labels from a results CSV (`prompt == "*"` rows), a plain
/// `subject,group` CSV, or a manifest column.
pub fn read_labels(path: &Path, column: LabelColumn) -> Result<LabelVector> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let line_of = |r: &csv::StringRecord| r.position().map_or(0, |p| p.line());
    let parse_rank = |text: &str, line: u64| -> Result<usize> {
        text.trim().parse().map_err(|_| Error::Parse {
            line,
            message: format!("'{text}' is not a group rank"),
        })
    };

    let mut pairs = Vec::new();
    if let (Some(s), Some(p), Some(c)) = (find("speaker"), find("prompt"), find("chosen")) {
        for rec in reader.records() {
            let rec = rec?;
            if &rec[p] == "*" {
                pairs.push((rec[s].to_string(), parse_rank(&rec[c], line_of(&rec))?));
            }
        }
    } else if let (Some(s), Some(g)) = (find("subject"), find("group")) {
        for rec in reader.records() {
            let rec = rec?;
            pairs.push((rec[s].to_string(), parse_rank(&rec[g], line_of(&rec))?));
        }
    } else if find("path").is_some() && find("speaker").is_some() {
        drop(reader);
        let m = crate::corpus::load_manifest(path, Default::default())?;
        return LabelVector::from_manifest(&m.entries, column);
    } else {
        return Err(Error::Parse {
            line: 1,
            message: "expected a results, subject/group or manifest header".into(),
        });
    }
    LabelVector::from_pairs(pairs)
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub config: FrameConfig,
    pub threshold: f64,
    pub norm: NormKind,
    pub seed: u64,
    /// Labels that define the reference groups.
    pub reference_labels: LabelColumn,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvaluationReport {
    pub seed: u64,
    pub test_speakers: usize,
    pub test_utterances: usize,
    /// Share of utterance decisions made by the dominance rule.
    pub dominant_fraction: f64,
    pub system_vs_expert1: Option<AgreementReport>,
    pub system_vs_expert2: Option<AgreementReport>,
    pub expert1_vs_expert2: Option<AgreementReport>,
    pub system_vs_truth: Option<AgreementReport>,
}

impl EvaluationReport {
    pub fn table(&self) -> String {
        let cols: Vec<(&str, &AgreementReport)> = [
            ("Expert 1 - Expert 2", &self.expert1_vs_expert2),
            ("Expert 1 - System", &self.system_vs_expert1),
            ("Expert 2 - System", &self.system_vs_expert2),
            ("Truth - System", &self.system_vs_truth),
        ]
        .into_iter()
        .filter_map(|(h, r)| r.as_ref().map(|r| (h, r)))
        .collect();
        format_agreement_table(&cols)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub model: ReferenceSet,
    pub outcomes: Vec<UtteranceOutcome>,
    pub speakers: Vec<SpeakerOutcome>,
    pub report: EvaluationReport,
}

impl Evaluation {
    /// Writes `model.json`, `results.csv` and `report.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("model.json"), self.model.to_json()?)?;
        fs::write(
            dir.join("results.csv"),
            results_csv(&self.outcomes, &self.speakers, self.model.groups().len())?,
        )?;
        fs::write(dir.join("report.json"), self.report.to_json()?)?;
        Ok(())
    }
}

fn optional_labels(entries: &[ManifestEntry], column: LabelColumn) -> Result<Option<LabelVector>> {
    if entries.iter().all(|e| e.label(column).is_none()) {
        Ok(None)
    } else {
        LabelVector::from_manifest(entries, column).map(Some)
    }
}

/// Splits speakers 2:1 per group, builds ideals on the larger part, labels
/// every test speaker and scores the labels against each available rater.
pub fn evaluate_system(manifest: &Manifest, opts: &EvalOptions) -> Result<Evaluation> {
    let split = split_corpus(&manifest.entries, opts.reference_labels, opts.seed)?;
    if split.test.is_empty() {
        return Err(Error::CellTooSmall {
            group: 0,
            speakers: 0,
        });
    }
    let all_labels = LabelVector::from_manifest(&manifest.entries, opts.reference_labels)?;
    let groups = all_labels.iter().map(|(_, r)| r + 1).max().unwrap_or(0);

    let model = build_reference_set(
        manifest,
        &split.reference,
        opts.reference_labels,
        &opts.config,
        opts.threshold,
        opts.norm,
        Some(groups),
    )?;
    let outcomes = classify_entries(manifest, &split.test, &model, opts.norm)?;
    let speakers = aggregate_speakers(&outcomes)?;
    let system = LabelVector::from_pairs(speakers.iter().map(|s| (s.speaker.clone(), s.chosen)))?;

    let e1 = optional_labels(&split.test, LabelColumn::Expert1)?;
    let e2 = optional_labels(&split.test, LabelColumn::Expert2)?;
    let truth = optional_labels(&split.test, LabelColumn::Truth)?;
    let vs = |other: &Option<LabelVector>| -> Result<Option<AgreementReport>> {
        other.as_ref().map(|o| agreement(o, &system, groups)).transpose()
    };
    let expert1_vs_expert2 = match (&e1, &e2) {
        (Some(a), Some(b)) => Some(agreement(a, b, groups)?),
        _ => None,
    };

    let dominant = outcomes.iter().filter(|o| o.result.dominant).count();
    let report = EvaluationReport {
        seed: opts.seed,
        test_speakers: speakers.len(),
        test_utterances: outcomes.len(),
        dominant_fraction: dominant as f64 / outcomes.len() as f64,
        system_vs_expert1: vs(&e1)?,
        system_vs_expert2: vs(&e2)?,
        expert1_vs_expert2,
        system_vs_truth: vs(&truth)?,
    };
    Ok(Evaluation {
        model,
        outcomes,
        speakers,
        report,
    })
}
