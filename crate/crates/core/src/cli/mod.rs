// SPDX-License-Identifier: MIT OR Apache-2.0

//! Command-line interface.
//!
//! Exit codes: 0 success, 1 usage, 2 data error, 3 transport error.

mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use commands::*;
pub use config::{EnsembleFile, Resolved, RunConfig, SignalFile, ENDPOINT_ENV};

use crate::datasets::DEFAULT_TEMPLATE;
use crate::error::{Error, ErrorKind};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_TRANSPORT: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "steered-decode", version, about = "Decoding-time bias mitigation with expert/anti-expert ensembles")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a vocabulary file from text or JSON-lines corpora.
    BuildVocab(BuildVocabArgs),
    /// Train an n-gram model (expert, anti-expert or base) from a corpus.
    Train(TrainArgs),
    /// Generate continuations for a prompt file.
    Generate(GenerateArgs),
    /// Show next-token probability shifts for candidate tokens.
    Inspect(InspectArgs),
    /// Run one evaluation.
    Eval(EvalArgs),
    /// Stereotype Scores for every (mitigation setting, evaluation direction) pair.
    EvalMatrix(EvalMatrixArgs),
}

#[derive(Debug, Args)]
pub struct BuildVocabArgs {
    /// Plain text (one document per line), JSON-lines datasets, or bias-pair
    /// CSV files (expanded with `--template`).
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub min_count: usize,
    /// Sentence template for bias-pair CSV inputs; repeatable.
    #[arg(long = "template", default_value = DEFAULT_TEMPLATE)]
    pub templates: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LabelArg {
    Stereotype,
    AntiStereotype,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Labeled corpus (JSON lines), bias-pair CSV, or plain text with one
    /// sentence per line.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Sentence template for bias-pair CSV corpora; repeatable.
    #[arg(long = "template", default_value = DEFAULT_TEMPLATE)]
    pub templates: Vec<String>,
    /// Keep only sentences with this label (labeled or pair corpora).
    #[arg(long, value_enum)]
    pub label: Option<LabelArg>,
    /// Keep only sentences with this direction (labeled or pair corpora).
    #[arg(long)]
    pub direction: Option<String>,
    #[arg(long)]
    pub vocab: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub order: usize,
    #[arg(long, default_value_t = 0.01)]
    pub k: f64,
    /// Hold out this percentage for validation (seeded shuffle).
    #[arg(long)]
    pub holdout: Option<u32>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Options shared by commands that resolve a run configuration.
#[derive(Debug, Clone, Args, Default)]
pub struct RunArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Base model: n-gram file, `uniform`, or URL. Falls back to the config
    /// file, then to the STEERED_DECODE_ENDPOINT environment variable.
    #[arg(long)]
    pub base: Option<String>,
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long)]
    pub expert: Option<String>,
    #[arg(long)]
    pub anti_expert: Option<String>,
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub top_p: Option<f64>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub max_new_tokens: Option<usize>,
    #[arg(long)]
    pub greedy: bool,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Comma-separated list; several values write one file per alpha.
    #[arg(long, value_delimiter = ',')]
    pub alpha: Vec<f64>,
    #[arg(long)]
    pub prompts: PathBuf,
    /// Samples per prompt.
    #[arg(short, long, default_value_t = 5)]
    pub n: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub prompt: String,
    #[arg(long, value_delimiter = ',', required = true)]
    pub candidates: Vec<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalKind {
    Local,
    Stereoset,
    Ppl,
    Global,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, value_enum)]
    pub which: EvalKind,
    /// Context pairs, StereoSet triples, plain text, or generations.
    #[arg(long)]
    pub data: PathBuf,
    /// Term-weight JSON for the lexicon scorer (global eval).
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub csv: bool,
}

#[derive(Debug, Args)]
pub struct EvalMatrixArgs {
    /// Matrix spec: `{"settings": {name: run config}, "datasets": {direction: triples path}}`.
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
}

/// Parses `args` and runs the command.
pub fn run<I, T>(args: I) -> crate::Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    dispatch(cli.command)
}

pub fn dispatch(command: Command) -> crate::Result<()> {
    match command {
        Command::BuildVocab(a) => cmd_build_vocab(&a).map(drop),
        Command::Train(a) => cmd_train(&a).map(drop),
        Command::Generate(a) => cmd_generate(&a).map(drop),
        Command::Inspect(a) => cmd_inspect(&a).map(drop),
        Command::Eval(a) => cmd_eval(&a).map(drop),
        Command::EvalMatrix(a) => cmd_eval_matrix(&a).map(drop),
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err.kind() {
        ErrorKind::Usage => EXIT_USAGE,
        ErrorKind::Data => EXIT_DATA,
        ErrorKind::Transport => EXIT_TRANSPORT,
    }
}

/// Binary entry point; returns the process exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
