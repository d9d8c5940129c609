mod commands;

use std::fmt::Display;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Detect hearing-difficulty moments in conversational audio.
#[derive(Debug, Parser)]
#[command(name = "hdm", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic annotated corpus with audio.
    Synth(SynthArgs),
    /// Normalize a corpus, map act tags and extract events.
    Import(ImportArgs),
    /// Sample labeled context windows, optionally writing a mock registry.
    BuildDataset(BuildDatasetArgs),
    /// Apply noise, time stretch and pitch shift to a WAV file.
    Augment(AugmentArgs),
    /// Serve the model-client protocol from corpus annotations.
    MockServe(MockServeArgs),
    /// Cross-validate a detector and write a report.
    Evaluate(EvaluateArgs),
    /// Score a recording with a sliding window.
    Stream(StreamArgs),
    /// Test whether report A beats report B.
    Compare(CompareArgs),
    /// Write balanced base64 audio/label records for fine-tuning.
    ExportFinetune(ExportArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 20)]
    conversations: usize,
    #[arg(long, default_value_t = 2)]
    events_per_conv: usize,
    /// Extra br utterances excluded through the refinement list.
    #[arg(long, default_value_t = 1)]
    decoys_per_conv: usize,
    #[arg(long, default_value_t = 60.0)]
    duration_s: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct ImportArgs {
    #[arg(long)]
    input: PathBuf,
    /// utterance-csv or normalized-jsonl.
    #[arg(long, default_value = "utterance-csv")]
    format: String,
    /// Act-tag map JSON. CSV input uses the bundled SWDA map by default.
    #[arg(long, conflicts_with = "no_tagmap")]
    tagmap: Option<PathBuf>,
    /// Keep act tags as they are.
    #[arg(long)]
    no_tagmap: bool,
    #[arg(long)]
    refinement: Option<PathBuf>,
    #[arg(long, default_value = hdm_core::SIGNAL_NON_UNDERSTANDING)]
    target_tag: String,
    /// Directory recorded in audio_ref for CSV input, relative to the output.
    #[arg(long)]
    audio_dir: Option<String>,
    #[arg(long, default_value_t = 16_000)]
    sample_rate: u32,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    events_out: Option<PathBuf>,
    #[arg(long)]
    stats_out: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
struct SamplingArgs {
    /// Negatives per positive.
    #[arg(long, default_value_t = 10)]
    ratio: usize,
    #[arg(long, default_value_t = 4.0)]
    context_s: f64,
    #[arg(long, default_value_t = 0.4)]
    min_elapsed_s: f64,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 0.2)]
    test_frac: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct BuildDatasetArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    events: PathBuf,
    #[command(flatten)]
    sampling: SamplingArgs,
    /// Base directory for audio_ref paths; defaults to the corpus directory.
    #[arg(long)]
    audio_dir: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Also register every window of the dataset and of all evaluation folds.
    #[arg(long)]
    registry: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AugmentArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Force additive noise with this standard deviation.
    #[arg(long)]
    noise: Option<f64>,
    /// Force a time stretch with this rate.
    #[arg(long)]
    stretch: Option<f64>,
    /// Force a pitch shift by this many semitones.
    #[arg(long)]
    pitch: Option<f64>,
    /// Chance of each transform not forced by a flag.
    #[arg(long, default_value_t = 0.5)]
    prob: f64,
}

#[derive(Debug, Args)]
struct MockServeArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    events: PathBuf,
    #[arg(long)]
    registry: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    /// 0 picks a free port; the bound address is printed.
    #[arg(long, default_value_t = 8091)]
    port: u16,
    /// Word drop probability of the mock transcriber.
    #[arg(long, default_value_t = 0.0)]
    wer: f64,
    /// Standard deviation of the score noise.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0.0)]
    bias: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 4)]
    threads: usize,
}

#[derive(Debug, Args)]
struct DetectorArgs {
    /// hotword, lm-audio, lm-text or classifier.
    #[arg(long)]
    detector: String,
    #[arg(long, env = "HDM_ENDPOINT")]
    endpoint: Option<String>,
    #[arg(long, default_value_t = 30.0)]
    timeout_s: f64,
    #[arg(long, default_value_t = 3)]
    retries: u32,
    #[arg(long, default_value_t = 100)]
    backoff_ms: u64,
    #[arg(long, default_value_t = 4)]
    in_flight: usize,
    /// Few-shot examples per prompt, half positive.
    #[arg(long, default_value_t = 0)]
    shots: usize,
    /// Send conversation id and end time with each request (always on for
    /// lm-text).
    #[arg(long)]
    attach_meta: bool,
    /// Hotword lexicon, one phrase per line.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Prompt instruction text replacing the bundled one.
    #[arg(long)]
    prompt: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    events: PathBuf,
    #[command(flatten)]
    detector: DetectorArgs,
    #[command(flatten)]
    sampling: SamplingArgs,
    #[arg(long)]
    audio_dir: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct StreamArgs {
    #[arg(long)]
    audio: PathBuf,
    #[command(flatten)]
    detector: DetectorArgs,
    #[arg(long, default_value_t = 1000)]
    hop_ms: u32,
    #[arg(long, default_value_t = 4.0)]
    window_s: f64,
    /// Ground-truth events for the CSV column and the plot.
    #[arg(long)]
    events: Option<PathBuf>,
    /// Conversation the audio belongs to; defaults to the file stem.
    #[arg(long)]
    conversation_id: Option<String>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    plot: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
}

#[derive(Debug, Args)]
struct ExportArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    audio_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Augment each exported window.
    #[arg(long)]
    augment: bool,
    #[arg(long, default_value_t = 0.5)]
    augment_prob: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug)]
enum CliError {
    /// Bad flags or input files; exit code 1.
    Invalid(String),
    /// Failure while doing the work; exit code 2.
    Runtime(String),
}

type CliResult<T> = Result<T, CliError>;

trait Classify<T> {
    fn invalid(self, context: &str) -> CliResult<T>;
    fn runtime(self, context: &str) -> CliResult<T>;
}

impl<T, E: Display> Classify<T> for Result<T, E> {
    fn invalid(self, context: &str) -> CliResult<T> {
        self.map_err(|e| CliError::Invalid(format!("{context}: {e}")))
    }

    fn runtime(self, context: &str) -> CliResult<T> {
        self.map_err(|e| CliError::Runtime(format!("{context}: {e}")))
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Import(a) => commands::import(a),
        Command::BuildDataset(a) => commands::build_dataset(a),
        Command::Augment(a) => commands::augment(a),
        Command::MockServe(a) => commands::mock_serve(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Stream(a) => commands::stream(a),
        Command::Compare(a) => commands::compare(a),
        Command::ExportFinetune(a) => commands::export_finetune(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Invalid(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
