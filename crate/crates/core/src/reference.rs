//! Reference ideals per (prompt, group) cell.
//!
//! Every cell is summarized by the mean triplet over all ordered pairs of its
//! utterances (self-pairs included) and by the spread of the scalarized
//! pairwise scores. A cell whose spread stays within the threshold is
//! represented by its medoid alone; otherwise medoids are added greedily
//! until every utterance lies within the threshold of some chosen ideal.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::classify::{scalarize, NormKind};
use crate::error::{Error, Result};
use crate::metric::{compute_triplet, Triplet};
use crate::signal::{FeatureBundle, FrameConfig};

pub const MODEL_VERSION: u32 = 1;

/// Variation threshold used when none is given, in scalarized units.
pub const DEFAULT_THRESHOLD: f64 = 0.15;

#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub speaker: String,
    pub bundle: FeatureBundle,
}

impl Utterance {
    pub fn new(speaker: impl Into<String>, bundle: FeatureBundle) -> Self {
        Self {
            speaker: speaker.into(),
            bundle,
        }
    }
}

/// Utterances arranged by prompt and group. Groups are ordered worst to best,
/// so the position of a label is its rank.
#[derive(Debug, Clone)]
pub struct CorpusIndex {
    prompts: usize,
    groups: Vec<String>,
    cells: Vec<Vec<Utterance>>,
}

impl CorpusIndex {
    pub fn new(prompts: usize, groups: Vec<String>) -> Self {
        let cells = vec![Vec::new(); prompts * groups.len()];
        Self {
            prompts,
            groups,
            cells,
        }
    }

    pub fn prompts(&self) -> usize {
        self.prompts
    }

    pub fn groups(&self) -> &[String] {
        &self.groups
    }

    pub fn insert(&mut self, prompt: usize, group: usize, utterance: Utterance) -> Result<()> {
        if prompt >= self.prompts {
            return Err(Error::UnknownPrompt(prompt));
        }
        if group >= self.groups.len() {
            return Err(Error::InvalidModel(format!("group rank {group} out of range")));
        }
        let g = self.groups.len();
        self.cells[prompt * g + group].push(utterance);
        Ok(())
    }

    pub fn cell(&self, prompt: usize, group: usize) -> &[Utterance] {
        &self.cells[prompt * self.groups.len() + group]
    }

    /// All `(prompt, group)` coordinates without utterances.
    pub fn missing_cells(&self) -> Vec<(usize, usize)> {
        let g = self.groups.len();
        (0..self.cells.len())
            .filter(|&i| self.cells[i].is_empty())
            .map(|i| (i / g, i % g))
            .collect()
    }

    fn coordinates(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let g = self.groups.len();
        (0..self.cells.len()).map(move |i| (i / g, i % g))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellAverage {
    pub prompt: usize,
    pub group: usize,
    pub mean: Triplet,
    pub variation: f64,
}

/// All `N x N` triplets of a cell. The diagonal is the identity triplet and
/// the lower triangle mirrors the upper one.
pub fn pairwise_triplets(cell: &[Utterance]) -> Result<Vec<Vec<Triplet>>> {
    let n = cell.len();
    let mut table = vec![vec![Triplet::IDENTITY; n]; n];
    for k in 0..n {
        for l in k + 1..n {
            let t = compute_triplet(&cell[k].bundle, &cell[l].bundle)?;
            table[k][l] = t;
            table[l][k] = t;
        }
    }
    Ok(table)
}

fn average_from_table(
    prompt: usize,
    group: usize,
    table: &[Vec<Triplet>],
    norm: NormKind,
) -> CellAverage {
    let n = table.len();
    let (mut id, mut p, mut ir) = (0.0, 0.0, 0.0);
    for row in table {
        for t in row {
            id += t.id;
            p += t.p;
            ir += t.ir;
        }
    }
    let pairs = (n * n) as f64;
    let mean = Triplet::new(id / pairs, p / pairs, ir / pairs);

    let off_diagonal: Vec<f64> = (0..n)
        .flat_map(|k| (0..n).filter(move |&l| l != k).map(move |l| (k, l)))
        .map(|(k, l)| scalarize(&table[k][l], norm))
        .collect();
    let variation = if off_diagonal.is_empty() {
        0.0
    } else {
        let m = off_diagonal.len() as f64;
        let mu = off_diagonal.iter().sum::<f64>() / m;
        (off_diagonal.iter().map(|s| (s - mu) * (s - mu)).sum::<f64>() / m).sqrt()
    };

    CellAverage {
        prompt,
        group,
        mean,
        variation,
    }
}

/// Mean triplet over all ordered pairs of the cell and the standard deviation
/// of the scalarized off-diagonal scores.
pub fn compute_cell_average(
    prompt: usize,
    group: usize,
    cell: &[Utterance],
    norm: NormKind,
) -> Result<CellAverage> {
    if cell.is_empty() {
        return Err(Error::EmptyCell);
    }
    let table = pairwise_triplets(cell)?;
    Ok(average_from_table(prompt, group, &table, norm))
}

/// Member of `candidates` with the smallest summed distance to the others;
/// ties go to the smallest speaker id.
fn medoid(candidates: &[usize], distances: &[Vec<f64>], cell: &[Utterance]) -> usize {
    let mut best: Option<(usize, f64)> = None;
    for &c in candidates {
        let total: f64 = candidates.iter().map(|&o| distances[c][o]).sum();
        best = match best {
            Some((b, bt))
                if bt < total || (bt == total && cell[b].speaker <= cell[c].speaker) =>
            {
                Some((b, bt))
            }
            _ => Some((c, total)),
        };
    }
    best.map(|b| b.0).expect("medoid of an empty set")
}

/// Indices of the chosen ideals within `cell`, in selection order.
pub fn select_cell_ideals(
    cell: &[Utterance],
    table: &[Vec<Triplet>],
    variation: f64,
    threshold: f64,
    norm: NormKind,
) -> Vec<usize> {
    let distances: Vec<Vec<f64>> = table
        .iter()
        .map(|row| row.iter().map(|t| scalarize(t, norm)).collect())
        .collect();
    let all: Vec<usize> = (0..cell.len()).collect();
    if variation <= threshold {
        return vec![medoid(&all, &distances, cell)];
    }
    let mut uncovered: BTreeSet<usize> = all.into_iter().collect();
    let mut chosen = Vec::new();
    while !uncovered.is_empty() {
        let pool: Vec<usize> = uncovered.iter().copied().collect();
        let m = medoid(&pool, &distances, cell);
        chosen.push(m);
        uncovered.retain(|&u| u != m && distances[m][u] > threshold);
    }
    chosen
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceCell {
    pub average: CellAverage,
    pub ideals: Vec<Utterance>,
}

/// The trained model: cell averages and ideals for every prompt and group.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSet {
    config: FrameConfig,
    sample_rate: u32,
    norm: NormKind,
    threshold: f64,
    groups: Vec<String>,
    prompts: usize,
    cells: Vec<ReferenceCell>,
}

impl ReferenceSet {
    pub fn config(&self) -> &FrameConfig {
        &self.config
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn norm(&self) -> NormKind {
        self.norm
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn groups(&self) -> &[String] {
        &self.groups
    }

    pub fn prompts(&self) -> usize {
        self.prompts
    }

    pub fn cells(&self) -> &[ReferenceCell] {
        &self.cells
    }

    pub fn cell(&self, prompt: usize, group: usize) -> Option<&ReferenceCell> {
        if prompt >= self.prompts || group >= self.groups.len() {
            return None;
        }
        self.cells.get(prompt * self.groups.len() + group)
    }

    pub fn ideals(&self, prompt: usize, group: usize) -> Option<&[Utterance]> {
        self.cell(prompt, group).map(|c| c.ideals.as_slice())
    }

    pub fn averages(&self) -> impl Iterator<Item = &CellAverage> {
        self.cells.iter().map(|c| &c.average)
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = ModelDoc {
            version: MODEL_VERSION,
            frame_config: self.config.clone(),
            sample_rate: self.sample_rate,
            norm: self.norm,
            threshold: self.threshold,
            groups: self.groups.clone(),
            prompts: self.prompts,
            cells: self
                .cells
                .iter()
                .map(|c| CellDoc {
                    prompt: c.average.prompt,
                    group: c.average.group,
                    mean: c.average.mean,
                    variation: c.average.variation,
                    ideals: c
                        .ideals
                        .iter()
                        .map(|u| IdealDoc {
                            speaker: u.speaker.clone(),
                            spectral: u.bundle.spectral().to_vec(),
                            pitch: u.bundle.pitch().to_vec(),
                            stress: u.bundle.stress().to_vec(),
                        })
                        .collect(),
                })
                .collect(),
        };
        let mut s = serde_json::to_string(&doc)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let probe: VersionProbe = serde_json::from_str(text)?;
        if probe.version != MODEL_VERSION {
            return Err(Error::UnsupportedVersion(probe.version));
        }
        let doc: ModelDoc = serde_json::from_str(text)?;
        let g = doc.groups.len();
        if g == 0 || doc.prompts == 0 {
            return Err(Error::InvalidModel("model has no groups or prompts".into()));
        }
        let mut slots: Vec<Option<ReferenceCell>> = vec![None; doc.prompts * g];
        for cell in doc.cells {
            if cell.prompt >= doc.prompts || cell.group >= g {
                return Err(Error::InvalidModel(format!(
                    "cell ({}, {}) outside the model shape",
                    cell.prompt, cell.group
                )));
            }
            if cell.ideals.is_empty() {
                return Err(Error::InvalidModel(format!(
                    "cell ({}, {}) has no ideals",
                    cell.prompt, cell.group
                )));
            }
            let ideals = cell
                .ideals
                .into_iter()
                .map(|i| {
                    FeatureBundle::from_parts(
                        doc.frame_config.clone(),
                        doc.sample_rate,
                        i.spectral,
                        i.pitch,
                        i.stress,
                    )
                    .map(|b| Utterance::new(i.speaker, b))
                })
                .collect::<Result<Vec<_>>>()?;
            slots[cell.prompt * g + cell.group] = Some(ReferenceCell {
                average: CellAverage {
                    prompt: cell.prompt,
                    group: cell.group,
                    mean: cell.mean,
                    variation: cell.variation,
                },
                ideals,
            });
        }
        let missing: Vec<(usize, usize)> = slots
            .iter()
            .enumerate()
            .filter(|(_, c)| c.is_none())
            .map(|(i, _)| (i / g, i % g))
            .collect();
        if !missing.is_empty() {
            return Err(Error::MissingCell(missing));
        }
        Ok(Self {
            config: doc.frame_config,
            sample_rate: doc.sample_rate,
            norm: doc.norm,
            threshold: doc.threshold,
            groups: doc.groups,
            prompts: doc.prompts,
            cells: slots.into_iter().flatten().collect(),
        })
    }
}

fn check_index(index: &CorpusIndex) -> Result<(FrameConfig, u32)> {
    let missing = index.missing_cells();
    if !missing.is_empty() {
        return Err(Error::MissingCell(missing));
    }
    let first = &index.cells[0][0].bundle;
    if index
        .cells
        .iter()
        .flatten()
        .any(|u| !u.bundle.compatible_with(first))
    {
        return Err(Error::ConfigMismatch);
    }
    Ok((first.config().clone(), first.sample_rate()))
}

/// Averages for every cell of `index`, in prompt-major order.
pub fn compute_averages(index: &CorpusIndex, norm: NormKind) -> Result<Vec<CellAverage>> {
    index
        .coordinates()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(p, g)| compute_cell_average(p, g, index.cell(p, g), norm))
        .collect()
}

/// Selects ideals for every cell given precomputed averages.
pub fn select_ideals(
    index: &CorpusIndex,
    averages: &[CellAverage],
    threshold: f64,
    norm: NormKind,
) -> Result<ReferenceSet> {
    check_threshold(threshold)?;
    let (config, sample_rate) = check_index(index)?;
    let cells = index
        .coordinates()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(p, g)| {
            let average = averages
                .iter()
                .find(|a| a.prompt == p && a.group == g)
                .copied()
                .ok_or(Error::MissingCell(vec![(p, g)]))?;
            let cell = index.cell(p, g);
            let table = pairwise_triplets(cell)?;
            let chosen = select_cell_ideals(cell, &table, average.variation, threshold, norm);
            Ok(ReferenceCell {
                average,
                ideals: chosen.into_iter().map(|i| cell[i].clone()).collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ReferenceSet {
        config,
        sample_rate,
        norm,
        threshold,
        groups: index.groups.clone(),
        prompts: index.prompts,
        cells,
    })
}

/// Averages and ideals for every cell, computing each cell's pairwise table once.
pub fn build_from_index(index: &CorpusIndex, threshold: f64, norm: NormKind) -> Result<ReferenceSet> {
    check_threshold(threshold)?;
    let (config, sample_rate) = check_index(index)?;
    let cells = index
        .coordinates()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(p, g)| {
            let cell = index.cell(p, g);
            let table = pairwise_triplets(cell)?;
            let average = average_from_table(p, g, &table, norm);
            let chosen = select_cell_ideals(cell, &table, average.variation, threshold, norm);
            Ok(ReferenceCell {
                average,
                ideals: chosen.into_iter().map(|i| cell[i].clone()).collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ReferenceSet {
        config,
        sample_rate,
        norm,
        threshold,
        groups: index.groups.clone(),
        prompts: index.prompts,
        cells,
    })
}

fn check_threshold(threshold: f64) -> Result<()> {
    if threshold >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "threshold must be nonnegative, got {threshold}"
        )))
    }
}

#[derive(Deserialize)]
struct VersionProbe {
    version: u32,
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    version: u32,
    frame_config: FrameConfig,
    sample_rate: u32,
    norm: NormKind,
    // +inf is written as null
    #[serde(serialize_with = "ser_threshold", deserialize_with = "de_threshold")]
    threshold: f64,
    groups: Vec<String>,
    prompts: usize,
    cells: Vec<CellDoc>,
}

#[derive(Serialize, Deserialize)]
struct CellDoc {
    prompt: usize,
    group: usize,
    mean: Triplet,
    variation: f64,
    ideals: Vec<IdealDoc>,
}

#[derive(Serialize, Deserialize)]
struct IdealDoc {
    speaker: String,
    spectral: Vec<Vec<f64>>,
    pitch: Vec<Option<f64>>,
    stress: Vec<f64>,
}

fn ser_threshold<S: Serializer>(t: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if t.is_finite() {
        s.serialize_f64(*t)
    } else {
        s.serialize_none()
    }
}

fn de_threshold<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
}

#[cfg(test)]
mod tests {
    use super::*;

    // Constant one-coefficient tracks of equal length: id between two of them is
    // the absolute offset difference, p and ir are exactly 1.
    fn flat(speaker: &str, level: f64) -> Utterance {
        let cfg = FrameConfig {
            n_ceps: 1,
            ..FrameConfig::default()
        };
        let n = 6;
        let bundle = FeatureBundle::from_parts(
            cfg,
            16000,
            vec![vec![level]; n],
            vec![Some(120.0); n],
            vec![-30.0; n],
        )
        .unwrap();
        Utterance::new(speaker, bundle)
    }

    fn dist(a: f64, b: f64) -> f64 {
        let d = (a - b).abs();
        d / (1.0 + d)
    }

    #[test]
    fn single_utterance_cell() {
        let avg = compute_cell_average(0, 0, &[flat("a", 1.0)], NormKind::L2).unwrap();
        assert_eq!(avg.mean, Triplet::IDENTITY);
        assert_eq!(avg.variation, 0.0);
    }

    #[test]
    fn two_utterance_cell() {
        let cell = [flat("a", 0.0), flat("b", 0.8)];
        let t = compute_triplet(&cell[0].bundle, &cell[1].bundle).unwrap();
        let avg = compute_cell_average(0, 0, &cell, NormKind::L2).unwrap();
        assert!((avg.mean.id - t.id / 2.0).abs() < 1e-12);
        assert!((avg.mean.p - (1.0 + t.p) / 2.0).abs() < 1e-12);
        assert!((avg.mean.ir - (1.0 + t.ir) / 2.0).abs() < 1e-12);
        // both off-diagonal pairs score the same
        assert!(avg.variation.abs() < 1e-12);
    }

    #[test]
    fn empty_cell_is_an_error() {
        assert!(matches!(
            compute_cell_average(0, 0, &[], NormKind::L2),
            Err(Error::EmptyCell)
        ));
    }

    #[test]
    fn infinite_threshold_keeps_only_the_medoid() {
        let cell = [flat("a", 0.0), flat("b", 0.4), flat("c", 3.0)];
        let table = pairwise_triplets(&cell).unwrap();
        let chosen = select_cell_ideals(&cell, &table, 10.0, f64::INFINITY, NormKind::L2);
        // sums: a = d(0,.4)+d(0,3), b = d(.4,0)+d(.4,3), c = d(3,0)+d(3,.4)
        let sums = [
            dist(0.0, 0.4) + dist(0.0, 3.0),
            dist(0.4, 0.0) + dist(0.4, 3.0),
            dist(3.0, 0.0) + dist(3.0, 0.4),
        ];
        let want = (0..3)
            .min_by(|&i, &j| sums[i].partial_cmp(&sums[j]).unwrap())
            .unwrap();
        assert_eq!(chosen, vec![want]);
    }

    #[test]
    fn zero_threshold_keeps_every_distinct_utterance() {
        let cell = [flat("a", 0.0), flat("b", 0.4), flat("c", 3.0)];
        let avg = compute_cell_average(0, 0, &cell, NormKind::L2).unwrap();
        let table = pairwise_triplets(&cell).unwrap();
        let mut chosen = select_cell_ideals(&cell, &table, avg.variation, 0.0, NormKind::L2);
        chosen.sort();
        assert_eq!(chosen, vec![0, 1, 2]);
    }

    #[test]
    fn two_tight_pairs_give_two_ideals() {
        let cell = [flat("a", 0.0), flat("b", 0.1), flat("c", 5.0), flat("d", 5.3)];
        let intra = dist(5.0, 5.3).max(dist(0.0, 0.1));
        let inter = dist(0.1, 5.0);
        let threshold = 0.25;
        assert!(intra < threshold && threshold < inter);
        let avg = compute_cell_average(0, 0, &cell, NormKind::L2).unwrap();
        assert!(avg.variation > threshold);
        let table = pairwise_triplets(&cell).unwrap();
        let chosen = select_cell_ideals(&cell, &table, avg.variation, threshold, NormKind::L2);
        assert_eq!(chosen.len(), 2);
        let low = chosen.iter().filter(|&&i| i < 2).count();
        assert_eq!(low, 1);
        // every member is covered
        for u in 0..4 {
            assert!(chosen.iter().any(|&c| dist(
                [0.0, 0.1, 5.0, 5.3][c],
                [0.0, 0.1, 5.0, 5.3][u]
            ) <= threshold));
        }
    }

    #[test]
    fn medoid_tie_goes_to_smallest_speaker() {
        let cell = [flat("z", 0.0), flat("m", 1.0)];
        let table = pairwise_triplets(&cell).unwrap();
        assert_eq!(select_cell_ideals(&cell, &table, 0.0, 1.0, NormKind::L2), vec![1]);
    }

    fn tiny_index() -> CorpusIndex {
        let mut index = CorpusIndex::new(2, vec!["bad".into(), "good".into()]);
        for p in 0..2 {
            for g in 0..2 {
                for (k, level) in [0.0, 0.2, 1.5].iter().enumerate() {
                    let u = flat(&format!("s{g}{k}"), level + g as f64 + p as f64 * 0.1);
                    index.insert(p, g, u).unwrap();
                }
            }
        }
        index
    }

    #[test]
    fn missing_cells_are_reported() {
        let mut index = CorpusIndex::new(2, vec!["a".into(), "b".into()]);
        index.insert(0, 0, flat("x", 0.0)).unwrap();
        index.insert(1, 1, flat("y", 0.0)).unwrap();
        match build_from_index(&index, 0.15, NormKind::L2) {
            Err(Error::MissingCell(cells)) => assert_eq!(cells, vec![(0, 1), (1, 0)]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn two_step_selection_matches_single_pass() {
        let index = tiny_index();
        let averages = compute_averages(&index, NormKind::L2).unwrap();
        let a = select_ideals(&index, &averages, 0.15, NormKind::L2).unwrap();
        let b = build_from_index(&index, 0.15, NormKind::L2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn json_round_trip_preserves_model() {
        let refs = build_from_index(&tiny_index(), 0.1, NormKind::L1).unwrap();
        let text = refs.to_json().unwrap();
        let back = ReferenceSet::from_json(&text).unwrap();
        assert_eq!(back, refs);
        assert_eq!(back.to_json().unwrap(), text);
    }

    #[test]
    fn infinite_threshold_round_trips_as_null() {
        let refs = build_from_index(&tiny_index(), f64::INFINITY, NormKind::L2).unwrap();
        let text = refs.to_json().unwrap();
        assert!(text.contains("\"threshold\":null"));
        assert_eq!(ReferenceSet::from_json(&text).unwrap().threshold(), f64::INFINITY);
    }

    #[test]
    fn unknown_version_is_rejected() {
        let refs = build_from_index(&tiny_index(), 0.1, NormKind::L2).unwrap();
        let text = refs.to_json().unwrap().replacen("\"version\":1", "\"version\":7", 1);
        assert!(matches!(
            ReferenceSet::from_json(&text),
            Err(Error::UnsupportedVersion(7))
        ));
    }
}
