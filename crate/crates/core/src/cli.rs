//! Command-line front end. Exit codes: 0 success, 1 usage error, 2 data or
//! processing error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::classify::NormKind;
use crate::corpus::{generate_synthetic_corpus, load_manifest, LabelColumn, ManifestShape, SynthConfig};
use crate::error::{Error, Result};
use crate::evaluate::{agreement, format_agreement_table, AgreementReport};
use crate::pipeline::{
    aggregate_speakers, build_reference_set, classify_entries, evaluate_system, read_labels,
    results_csv, EvalOptions,
};
use crate::reference::{ReferenceSet, DEFAULT_THRESHOLD};
use crate::signal::FrameConfig;

#[derive(Debug, Parser)]
#[command(name = "speakstyle", version, about = "Speaking-style classification against reference ideals")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Seed for every random choice (corpus synthesis, data split).
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,

    /// Norm used to scalarize triplets.
    #[arg(long, global = true, default_value = "l2")]
    pub norm: NormKind,

    /// Variation threshold for ideal selection (scalarized units).
    #[arg(long, global = true, default_value_t = DEFAULT_THRESHOLD, value_parser = nonnegative)]
    pub threshold: f64,

    /// JSON file overriding frame-analysis defaults.
    #[arg(long, global = true)]
    pub frame_config: Option<PathBuf>,
}

fn nonnegative(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 => Ok(v),
        Ok(v) => Err(format!("{v} is negative")),
        Err(e) => Err(e.to_string()),
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the seeded synthetic corpus and its manifest.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u32).range(1..))]
        groups: u32,
        #[arg(long, default_value_t = 6, value_parser = clap::value_parser!(u32).range(1..))]
        speakers_per_group: u32,
        #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u32).range(1..))]
        prompts: u32,
        /// Probability that an expert label is off by one rank.
        #[arg(long, default_value_t = 0.0)]
        label_noise: f64,
        /// Band-limit the audio to 300-3400 Hz.
        #[arg(long)]
        telephone: bool,
    },
    /// Build the reference set (model) from a labelled manifest.
    BuildRefs {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Manifest column that assigns speakers to groups.
        #[arg(long, default_value = "expert1")]
        labels: LabelColumn,
        /// Number of groups; defaults to one more than the largest label.
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        groups: Option<u32>,
    },
    /// Classify every utterance of a manifest against a model.
    Classify {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the split/build/classify protocol on a manifest, or compare
    /// predicted labels with reference labels.
    Evaluate {
        #[arg(long, conflicts_with_all = ["pred", "truth"], required_unless_present = "pred")]
        manifest: Option<PathBuf>,
        /// Output directory for model.json, results.csv and report.json.
        #[arg(long, requires = "manifest")]
        out: Option<PathBuf>,
        /// Manifest column that assigns reference speakers to groups.
        #[arg(long, default_value = "expert1")]
        labels: LabelColumn,
        #[arg(long, requires = "truth")]
        pred: Option<PathBuf>,
        #[arg(long, requires = "pred")]
        truth: Option<PathBuf>,
        /// Column read when a label file is a manifest.
        #[arg(long, default_value = "truth")]
        column: LabelColumn,
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        groups: Option<u32>,
        /// Write the JSON report here instead of standard output.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Agreement between two label files.
    Agreement {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// Column read when a label file is a manifest.
        #[arg(long, default_value = "truth")]
        column: LabelColumn,
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        groups: Option<u32>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn frame_config(common: &CommonArgs) -> Result<Option<FrameConfig>> {
    common
        .frame_config
        .as_ref()
        .map(|p| {
            let cfg: FrameConfig = serde_json::from_str(&fs::read_to_string(p)?)?;
            cfg.validate()?;
            Ok(cfg)
        })
        .transpose()
}

fn emit_report(text: &str, report: Option<&Path>) -> Result<()> {
    match report {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn agreement_json(r: &AgreementReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(r)?;
    s.push('\n');
    Ok(s)
}

fn execute(cli: &Cli) -> Result<()> {
    let common = &cli.common;
    match &cli.command {
        Command::Synth {
            out,
            groups,
            speakers_per_group,
            prompts,
            label_noise,
            telephone,
        } => {
            let mut cfg = SynthConfig::new(
                *groups as usize,
                *speakers_per_group as usize,
                *prompts as usize,
                common.seed,
            );
            cfg.label_noise = *label_noise;
            cfg.telephone_band = *telephone;
            eprintln!(
                "synthesizing {} utterances into {}",
                cfg.groups * cfg.speakers_per_group * cfg.prompts,
                out.display()
            );
            let manifest = generate_synthetic_corpus(&cfg, out)?;
            println!("{}", manifest.display());
        }
        Command::BuildRefs {
            manifest,
            out,
            labels,
            groups,
        } => {
            let cfg = frame_config(common)?.unwrap_or_default();
            let shape = ManifestShape {
                prompts: None,
                groups: groups.map(|g| g as usize),
            };
            let m = load_manifest(manifest, shape)?;
            let refs = build_reference_set(
                &m,
                &m.entries,
                *labels,
                &cfg,
                common.threshold,
                common.norm,
                groups.map(|g| g as usize),
            )?;
            fs::write(out, refs.to_json()?)?;
            println!("prompt,group,ideals,variation");
            for cell in refs.cells() {
                println!(
                    "{},{},{},{}",
                    cell.average.prompt,
                    cell.average.group,
                    cell.ideals.len(),
                    cell.average.variation
                );
            }
            eprintln!("wrote {}", out.display());
        }
        Command::Classify {
            model,
            manifest,
            out,
        } => {
            let refs = ReferenceSet::from_json(&fs::read_to_string(model)?)?;
            if let Some(cfg) = frame_config(common)? {
                if &cfg != refs.config() {
                    return Err(Error::ConfigMismatch);
                }
            }
            let m = load_manifest(manifest, ManifestShape::default())?;
            let outcomes = classify_entries(&m, &m.entries, &refs, common.norm)?;
            let speakers = aggregate_speakers(&outcomes)?;
            fs::write(out, results_csv(&outcomes, &speakers, refs.groups().len())?)?;
            eprintln!(
                "classified {} utterances from {} speakers",
                outcomes.len(),
                speakers.len()
            );
        }
        Command::Evaluate {
            manifest,
            out,
            labels,
            pred,
            truth,
            column,
            groups,
            report,
        } => {
            if let Some(manifest) = manifest {
                let m = load_manifest(manifest, ManifestShape::default())?;
                let opts = EvalOptions {
                    config: frame_config(common)?.unwrap_or_default(),
                    threshold: common.threshold,
                    norm: common.norm,
                    seed: common.seed,
                    reference_labels: *labels,
                };
                let eval = evaluate_system(&m, &opts)?;
                if let Some(dir) = out {
                    eval.write(dir)?;
                }
                print!("{}", eval.report.table());
                emit_report(&eval.report.to_json()?, report.as_deref())?;
            } else if let (Some(pred), Some(truth)) = (pred, truth) {
                let t = read_labels(truth, *column)?;
                let p = read_labels(pred, *column)?;
                let g = group_count(&[&t, &p], *groups);
                let r = agreement(&t, &p, g)?;
                print!("{}", format_agreement_table(&[("Reference - System", &r)]));
                emit_report(&agreement_json(&r)?, report.as_deref())?;
            }
        }
        Command::Agreement {
            a,
            b,
            column,
            groups,
            report,
        } => {
            let la = read_labels(a, *column)?;
            let lb = read_labels(b, *column)?;
            let g = group_count(&[&la, &lb], *groups);
            let r = agreement(&la, &lb, g)?;
            print!("{}", format_agreement_table(&[("A - B", &r)]));
            emit_report(&agreement_json(&r)?, report.as_deref())?;
        }
    }
    Ok(())
}

fn group_count(vectors: &[&crate::evaluate::LabelVector], explicit: Option<u32>) -> usize {
    explicit.map(|g| g as usize).unwrap_or_else(|| {
        vectors
            .iter()
            .flat_map(|v| v.iter().map(|(_, r)| r + 1))
            .max()
            .unwrap_or(1)
    })
}
