//! `capforge` command-line harness.
//!
//! Exit codes: 0 success, 2 input or parse failure, 3 alignment failure,
//! 4 internal error.

pub mod render;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::dataio::{self, CaptionDataset, DatasetInspection, Profile};
use crate::fusion::{self, FusionMode};
use crate::metrics::{self, vqa_top1};
use crate::ngram::CorpusStats;
use crate::scst::{RewardMetric, RewardStream};
use crate::text_norm::{tokenize, TokenSequence};
use crate::{Error, Result};

use render::{bootstrap, thousands, EvaluationOutput};

pub const DEFAULT_SEED: u64 = 20_240_517;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_ALIGNMENT: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    TextTable,
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProfileArg {
    Msrvtt,
    Generic,
}

impl From<ProfileArg> for Profile {
    fn from(p: ProfileArg) -> Self {
        match p {
            ProfileArg::Msrvtt => Profile::Msrvtt,
            ProfileArg::Generic => Profile::Generic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RewardMetricArg {
    CiderD,
    Bleu4Smoothed,
}

impl From<RewardMetricArg> for RewardMetric {
    fn from(m: RewardMetricArg) -> Self {
        match m {
            RewardMetricArg::CiderD => RewardMetric::CiderD,
            RewardMetricArg::Bleu4Smoothed => RewardMetric::Bleu4Smoothed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FusionModeArg {
    Average,
    Concat,
}

#[derive(Debug, Parser)]
#[command(name = "capforge", version, about = "Caption metrics, SCST rewards and frame-token fusion")]
pub struct RunConfig {
    /// Scoring threads (0 = machine parallelism).
    #[arg(long, global = true, env = "CAPFORGE_WORKERS", default_value_t = 0)]
    pub workers: usize,

    /// Reject unknown fields in input files.
    #[arg(long, global = true)]
    pub strict: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct DatasetArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_enum, default_value = "generic")]
    pub profile: ProfileArg,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score a prediction file against a dataset split.
    Evaluate {
        #[command(flatten)]
        data: DatasetArgs,
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long, value_enum, default_value = "text-table")]
        format: OutputFormat,
        /// Bootstrap resamples for confidence intervals (0 disables).
        #[arg(long, default_value_t = 0)]
        bootstrap: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Serve SCST rewards over line-delimited JSON on stdin/stdout.
    RewardStream {
        /// Precomputed corpus statistics (see `build-stats`).
        #[arg(long, conflicts_with = "dataset")]
        stats: Option<PathBuf>,
        #[arg(long, required_unless_present = "stats")]
        dataset: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "generic")]
        profile: ProfileArg,
        /// Split whose references define document frequencies.
        #[arg(long, default_value = "train")]
        split: String,
        #[arg(long, value_enum, default_value = "cider-d")]
        reward_metric: RewardMetricArg,
    },
    /// Fuse a frame-token tensor file by averaging or concatenation.
    Fuse {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, value_enum, default_value = "concat")]
        mode: FusionModeArg,
    },
    /// Check an annotation file and report split and caption statistics.
    ValidateData {
        #[command(flatten)]
        data: DatasetArgs,
        #[arg(long, value_enum, default_value = "text-table")]
        format: OutputFormat,
    },
    /// Write the document-frequency sidecar used by `reward-stream --stats`.
    BuildStats {
        #[command(flatten)]
        data: DatasetArgs,
        #[arg(long, default_value = "train")]
        split: String,
        #[arg(long)]
        output: PathBuf,
    },
    /// Top-1 accuracy of VQA answers.
    Vqa {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        answers: PathBuf,
    },
}

/// Result of `evaluate`: the report plus its rendering in the requested
/// format.
pub struct EvaluateRun {
    pub report: metrics::ScoreReport,
    pub rendered: String,
}

#[allow(clippy::too_many_arguments)]
pub fn run_evaluate(
    data: &DatasetArgs,
    predictions: &Path,
    split: &str,
    format: OutputFormat,
    bootstrap_samples: usize,
    seed: u64,
    workers: usize,
    strict: bool,
) -> Result<EvaluateRun> {
    let dataset = dataio::load_annotations(&data.dataset, data.profile.into(), strict)?;
    let predictions = dataio::load_predictions(predictions, strict)?;
    let alignment = dataio::align(&predictions, &dataset, split)?;
    let items = alignment.scoring_items();
    let stats = CorpusStats::from_references(items.iter().map(|item| item.refs.as_slice()))?;
    let report = metrics::evaluate_items(items, &stats, workers)?;
    let intervals = bootstrap(&report, bootstrap_samples, seed);
    let output = EvaluationOutput::new(
        &dataset.name,
        split,
        &report,
        alignment.missing,
        alignment.extra,
        seed,
        intervals,
    );
    let rendered = match format {
        OutputFormat::TextTable => output.to_table(),
        OutputFormat::Json => output.to_json()?,
        OutputFormat::Csv => output.to_csv()?,
    };
    Ok(EvaluateRun { report, rendered })
}

/// Loads the statistics and fallback references for a reward stream.
pub fn reward_stream_inputs(
    stats: Option<&Path>,
    dataset: Option<&Path>,
    profile: Profile,
    split: &str,
    strict: bool,
) -> Result<(CorpusStats, BTreeMap<String, Vec<TokenSequence>>)> {
    match (stats, dataset) {
        (Some(path), _) => Ok((CorpusStats::load_json(path)?, BTreeMap::new())),
        (None, Some(path)) => {
            let ds = dataio::load_annotations(path, profile, strict)?;
            let split_refs = ds.tokenized_refs(split)?;
            let stats = CorpusStats::from_references(split_refs.values().map(Vec::as_slice))?;
            let all_refs = ds
                .references
                .iter()
                .map(|(id, refs)| (id.clone(), refs.iter().map(|r| tokenize(r)).collect()))
                .collect();
            Ok((stats, all_refs))
        }
        (None, None) => Err(Error::Internal("reward-stream needs --stats or --dataset".into())),
    }
}

pub fn run_reward_stream(
    stats: &CorpusStats,
    fallback: &BTreeMap<String, Vec<TokenSequence>>,
    metric: RewardMetric,
    input: &mut dyn BufRead,
    output: &mut dyn Write,
    diagnostics: &mut dyn Write,
) -> Result<()> {
    let stream = RewardStream::new(stats, metric).with_fallback_refs(fallback);
    let summary = stream
        .serve(input, output)
        .map_err(|e| Error::io("<stdio>", e))?;
    writeln!(
        diagnostics,
        "reward-stream: served {} requests ({} failed), mean reward {:.6} ({metric})",
        summary.served,
        summary.failed,
        summary.mean_reward()
    )
    .map_err(|e| Error::io("<stderr>", e))?;
    Ok(())
}

pub fn render_validation(inspection: &DatasetInspection, format: OutputFormat) -> Result<String> {
    let ds: &CaptionDataset = &inspection.dataset;
    if format == OutputFormat::Json {
        let splits: BTreeMap<&str, usize> = ds.splits.iter().map(|(k, v)| (k.as_str(), v.len())).collect();
        let value = serde_json::json!({
            "dataset": ds.name,
            "profile": inspection.profile,
            "videos": ds.num_videos(),
            "splits": splits,
            "captions_per_video": inspection.captions_histogram,
            "duplicate_captions": inspection.duplicate_captions,
            "splits_disjoint": inspection.splits_disjoint,
            "warnings": inspection.warnings,
            "violations": inspection.violations,
            "valid": inspection.is_valid(),
        });
        return Ok(serde_json::to_string_pretty(&value)? + "\n");
    }
    let mut out = format!(
        "dataset: {} (profile {})\nvideos: {}\n",
        ds.name,
        inspection.profile,
        thousands(ds.num_videos())
    );
    let split_line = ds
        .splits
        .iter()
        .map(|(name, ids)| format!("{name}={}", thousands(ids.len())))
        .collect::<Vec<_>>()
        .join(" ");
    out.push_str(&format!("splits: {split_line}\n"));
    if inspection.profile == Profile::Msrvtt {
        let sizes = dataio::MSRVTT_SPLITS
            .iter()
            .map(|(name, _)| {
                let n = ds
                    .splits
                    .get(*name)
                    .or_else(|| (*name == "validate").then(|| ds.splits.get("val")).flatten())
                    .map_or(0, Vec::len);
                thousands(n)
            })
            .collect::<Vec<_>>()
            .join("/");
        out.push_str(&format!("train/validate/test: {sizes}\n"));
    }
    out.push_str("captions per video:");
    for (captions, videos) in &inspection.captions_histogram {
        out.push_str(&format!(" {captions}x{}", thousands(*videos)));
    }
    out.push('\n');
    out.push_str(&format!("duplicate captions: {}\n", inspection.duplicate_captions));
    out.push_str(&format!(
        "splits disjoint: {}\n",
        if inspection.splits_disjoint { "yes" } else { "no" }
    ));
    for warning in &inspection.warnings {
        out.push_str(&format!("warning: {warning}\n"));
    }
    for violation in &inspection.violations {
        out.push_str(&format!("violation: {violation}\n"));
    }
    out.push_str(if inspection.is_valid() { "status: ok\n" } else { "status: invalid\n" });
    Ok(out)
}

fn execute(config: RunConfig, stdin: &mut dyn BufRead, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    let write_out = |stdout: &mut dyn Write, text: &str| -> Result<()> {
        stdout
            .write_all(text.as_bytes())
            .and_then(|_| stdout.flush())
            .map_err(|e| Error::io("<stdout>", e))
    };
    match config.command {
        Command::Evaluate {
            data,
            predictions,
            split,
            format,
            bootstrap,
            seed,
        } => {
            let run = run_evaluate(
                &data,
                &predictions,
                &split,
                format,
                bootstrap,
                seed,
                config.workers,
                config.strict,
            )?;
            write_out(stdout, &run.rendered)?;
            Ok(EXIT_OK)
        }
        Command::RewardStream {
            stats,
            dataset,
            profile,
            split,
            reward_metric,
        } => {
            let (stats, fallback) =
                reward_stream_inputs(stats.as_deref(), dataset.as_deref(), profile.into(), &split, config.strict)?;
            run_reward_stream(&stats, &fallback, reward_metric.into(), stdin, stdout, stderr)?;
            Ok(EXIT_OK)
        }
        Command::Fuse { input, output, mode } => {
            let block = fusion::load_tensor(&input)?;
            let mode = match mode {
                FusionModeArg::Average => FusionMode::Average,
                FusionModeArg::Concat => FusionMode::Concat,
            };
            let fused = fusion::fuse(&block, mode);
            fusion::save_fused(&output, &fused)?;
            write_out(
                stdout,
                &format!(
                    "fused {}x{}x{} -> {}x{} ({:?})\n",
                    block.frames(),
                    block.tokens_per_frame(),
                    block.dim(),
                    fused.len,
                    fused.dim,
                    mode
                ),
            )?;
            Ok(EXIT_OK)
        }
        Command::ValidateData { data, format } => {
            let inspection = dataio::inspect_annotations(&data.dataset, data.profile.into(), config.strict)?;
            write_out(stdout, &render_validation(&inspection, format)?)?;
            Ok(if inspection.is_valid() { EXIT_OK } else { EXIT_INPUT })
        }
        Command::BuildStats { data, split, output } => {
            let ds = dataio::load_annotations(&data.dataset, data.profile.into(), config.strict)?;
            let refs = ds.tokenized_refs(&split)?;
            let stats = CorpusStats::from_references(refs.values().map(Vec::as_slice))?;
            stats.save_json(&output)?;
            write_out(
                stdout,
                &format!(
                    "wrote {} n-gram entries over {} videos to {}\n",
                    stats.num_entries(),
                    stats.num_videos(),
                    output.display()
                ),
            )?;
            Ok(EXIT_OK)
        }
        Command::Vqa { predictions, answers } => {
            let predictions = dataio::load_answers(&predictions)?;
            let answers = dataio::load_answers(&answers)?;
            let accuracy = vqa_top1(&predictions, &answers)?;
            write_out(
                stdout,
                &format!("top-1 accuracy: {:.1} ({} questions)\n", accuracy * 100.0, predictions.len()),
            )?;
            Ok(EXIT_OK)
        }
    }
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I, stdin: &mut dyn BufRead, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let config = match RunConfig::try_parse_from(args) {
        Ok(config) => config,
        Err(e) => {
            let _ = write!(stderr, "{e}");
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match execute(config, stdin, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
