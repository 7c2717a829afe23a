//! Speaking-style classification of spoken prompts.
//!
//! Two utterances of the same prompt are compared with a triplet
//! `(id, p, ir)`: an articulation distance from dynamic time warping over
//! cepstral frames, and pitch and stress similarities measured along the same
//! alignment. Reference "ideals" are chosen per prompt and group from labelled
//! speakers, and a test utterance is assigned to the group whose ideals it
//! matches best.
//!
//! | module | role |
//! |---|---|
//! | [`signal`] | WAV ingestion, cepstra, pitch and stress contours |
//! | [`metric`] | DTW alignment and the triplet |
//! | [`reference`] | cell averages and ideal selection, model serialization |
//! | [`classify`] | scalarization, dominance rule, speaker vote |
//! | [`evaluate`] | agreement percentages, confusion matrices, 2:1 speaker split |
//! | [`corpus`] | manifests and the seeded synthetic corpus |
//! | [`pipeline`] | end-to-end drivers over manifests |
//! | [`cli`] | the `speakstyle` command line |
//!
//! The `examples/` directory has one runnable program per capability.

pub mod classify;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod evaluate;
pub mod metric;
pub mod pipeline;
pub mod reference;
pub mod signal;

pub use classify::{
    classify_speaker, classify_utterance, scalarize, score_against_group, ClassificationResult,
    GroupScore, NormKind,
};
pub use corpus::{generate_synthetic_corpus, load_manifest, ManifestEntry, SynthConfig};
pub use error::{Error, Result};
pub use evaluate::{agreement, split_corpus, AgreementReport, LabelVector};
pub use metric::{compute_triplet, dtw_align, AlignmentPath, Triplet};
pub use reference::{
    build_from_index, compute_cell_average, select_ideals, CellAverage, CorpusIndex, ReferenceSet,
    Utterance,
};
pub use signal::{extract_features, AudioClip, FeatureBundle, FrameConfig};
