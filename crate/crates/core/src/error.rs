use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported sample rate {0} Hz (expected 8000, 16000, 22050, 44100 or 48000)")]
    UnsupportedRate(u32),

    #[error("clip of {samples} samples is shorter than one analysis window ({window} samples)")]
    ClipTooShort { samples: usize, window: usize },

    #[error("sample {index} has value {value}, outside [-1, 1]")]
    SampleOutOfRange { index: usize, value: f64 },

    #[error("unsupported WAV format: {0}")]
    UnsupportedFormat(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("frame vectors differ in dimension ({0} vs {1})")]
    DimensionMismatch(usize, usize),

    #[error("cannot align an empty track")]
    EmptyTrack,

    #[error("feature bundles were extracted with different configurations")]
    ConfigMismatch,

    #[error("sample rate {found} Hz differs from the corpus rate {expected} Hz ({})", .path.display())]
    MixedSampleRate {
        expected: u32,
        found: u32,
        path: PathBuf,
    },

    #[error("word-group cell is empty")]
    EmptyCell,

    #[error("missing word-group cells (prompt, group): {}", format_cells(.0))]
    MissingCell(Vec<(usize, usize)>),

    #[error("prompt {0} is not covered by the reference set")]
    UnknownPrompt(usize),

    #[error("no classification results to aggregate")]
    EmptyResults,

    #[error("subject sets differ: {0}")]
    SubjectMismatch(String),

    #[error("no subjects to compare")]
    NoSubjects,

    #[error("subject {0} appears more than once")]
    DuplicateSubject(String),

    #[error("group {group} has {speakers} speakers; at least 3 are required for a 3-way split")]
    CellTooSmall { group: usize, speakers: usize },

    #[error("speaker {speaker} has no {column} label")]
    MissingLabel { speaker: String, column: String },

    #[error("speaker {0} carries conflicting group labels")]
    InconsistentLabel(String),

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("line {line}: {field} = {value} is out of range (limit {limit})")]
    RankOutOfRange {
        line: u64,
        field: &'static str,
        value: usize,
        limit: usize,
    },

    #[error("unsupported model version {0}")]
    UnsupportedVersion(u32),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("{}: {source}", .path.display())]
    Wav {
        path: PathBuf,
        #[source]
        source: hound::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn format_cells(cells: &[(usize, usize)]) -> String {
    cells
        .iter()
        .map(|(p, g)| format!("({p}, {g})"))
        .collect::<Vec<_>>()
        .join(", ")
}
