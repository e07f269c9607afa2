//! Single entry-point binary exposing every pipeline stage as a
//! subcommand. Flags given before the subcommand (`--config`, `--seed`,
//! `--out`) apply to the whole run; every stage writes a manifest with the
//! effective configuration hash so runs are reproducible.

mod commands;
pub mod config;
pub mod manifest;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "nilmkit", version, about = "Energy disaggregation toolkit", subcommand_required = true, arg_required_else_help = true)]
pub struct Cli {
    /// Shared configuration file (TOML); flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Global seed recorded into every manifest and checkpoint.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output directory for artifacts and manifests.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse raw datasets or generate synthetic ones.
    Ingest {
        #[command(subcommand)]
        source: IngestSource,
    },
    /// Build (or reuse) a normalized window cache from a pair file.
    Windows(WindowsArgs),
    /// Train and evaluate the seq2-[3]point disaggregator.
    Nilm {
        #[command(subcommand)]
        action: NilmAction,
    },
    /// Site-NILM: four-class regression-then-classify pipeline.
    Site {
        #[command(subcommand)]
        action: SiteAction,
    },
    /// Generate and split 2D appliance signature images.
    Signatures {
        #[command(subcommand)]
        action: SignaturesAction,
    },
    /// Train and evaluate signature classifiers.
    Classify {
        #[command(subcommand)]
        action: ClassifyAction,
    },
    /// Power summary and transient-state histogram for one appliance.
    Behavior(BehaviorArgs),
    /// Re-render plot files from a CSV payload.
    Report(ReportArgs),
}

#[derive(Debug, Subcommand)]
pub enum IngestSource {
    /// REDD-layout house directory (labels.dat + channel_<k>.dat).
    Redd {
        /// House directory.
        #[arg(long)]
        house: PathBuf,
        /// Also write train/test pair files for this appliance.
        #[arg(long)]
        appliance: Option<String>,
        /// Chronological train fraction for pair files.
        #[arg(long)]
        split_ratio: Option<f64>,
    },
    /// REFIT-layout CSV (Time, Unix, Aggregate, Appliance1..N).
    Refit {
        #[arg(long)]
        file: PathBuf,
        /// Column treated as the site aggregate.
        #[arg(long, default_value = "Aggregate")]
        aggregate_col: String,
        /// Column treated as the site appliance.
        #[arg(long, default_value = "Appliance1")]
        appliance_col: String,
        /// When set, also write site-train/site-test files.
        #[arg(long)]
        split_ratio: Option<f64>,
    },
    /// Seeded synthetic data from a TOML config.
    Synth {
        #[arg(long)]
        config: PathBuf,
        /// Also write train/test pair files for this appliance.
        #[arg(long)]
        appliance: Option<String>,
        /// Chronological train fraction for pair/site files.
        #[arg(long)]
        split_ratio: Option<f64>,
    },
}

#[derive(Debug, Args)]
pub struct WindowsArgs {
    /// Two-column pair CSV.
    #[arg(long)]
    pub pairs: PathBuf,
    /// Cache file to create or reuse.
    #[arg(long)]
    pub cache: Option<PathBuf>,
    #[arg(long)]
    pub window_len: Option<usize>,
    #[arg(long)]
    pub offset: Option<usize>,
    #[arg(long)]
    pub budget: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum NilmAction {
    /// Train on a pair file; writes checkpoint, stats sidecars, and curve.
    Train(NilmTrainArgs),
    /// Transfer-train from a base checkpoint (conv layers frozen).
    Transfer(NilmTransferArgs),
    /// Threshold evaluation on a pair file.
    Eval(NilmEvalArgs),
    /// Four-class site evaluation of a checkpoint.
    SiteEval(SiteEvalArgs),
}

#[derive(Debug, Args)]
pub struct NilmTrainArgs {
    #[arg(long)]
    pub pairs: PathBuf,
    /// Checkpoint path (default <out>/model.ckpt).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub window_len: Option<usize>,
    #[arg(long)]
    pub offset: Option<usize>,
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
}

#[derive(Debug, Args)]
pub struct NilmTransferArgs {
    #[arg(long)]
    pub base: PathBuf,
    #[arg(long)]
    pub pairs: PathBuf,
    /// Checkpoint path (default <out>/transfer.ckpt).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
}

#[derive(Debug, Args)]
pub struct NilmEvalArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub pairs: PathBuf,
    /// Threshold in normalized units; overrides --appliance.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Appliance name with a published threshold (dishwasher, microwave,
    /// refrigerator, washer-dryer).
    #[arg(long)]
    pub appliance: Option<String>,
    #[arg(long)]
    pub offset: Option<usize>,
    #[arg(long)]
    pub budget: Option<usize>,
    /// Aggregate stats sidecar (default <ckpt>.agg-stats.csv).
    #[arg(long)]
    pub agg_stats: Option<PathBuf>,
    /// Appliance stats sidecar (default <ckpt>.app-stats.csv).
    #[arg(long)]
    pub app_stats: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SiteEvalArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Three-column site CSV (aggregate, appliance, class).
    #[arg(long)]
    pub site: PathBuf,
    /// Appliance stats sidecar used for denormalization.
    #[arg(long)]
    pub stats: Option<PathBuf>,
    /// Aggregate stats sidecar used for input normalization.
    #[arg(long)]
    pub agg_stats: Option<PathBuf>,
    #[arg(long)]
    pub offset: Option<usize>,
    #[arg(long)]
    pub budget: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum SiteAction {
    /// Train the seq2-[3]point model on a site file.
    Train(SiteTrainArgs),
    /// Evaluate a site checkpoint (same as `nilm site-eval`).
    Eval(SiteEvalArgs),
}

#[derive(Debug, Args)]
pub struct SiteTrainArgs {
    #[arg(long)]
    pub site: PathBuf,
    /// Checkpoint path (default <out>/site.ckpt).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub window_len: Option<usize>,
    #[arg(long)]
    pub offset: Option<usize>,
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum SignaturesAction {
    /// Generate signature images from a synced house file.
    Generate(SignaturesGenerateArgs),
    /// Build a balanced ancestor-disjoint train/test split.
    Split(SignaturesSplitArgs),
}

#[derive(Debug, Args)]
pub struct SignaturesGenerateArgs {
    /// Synced house CSV (timestamp,mains1,mains2,<appliances>).
    #[arg(long)]
    pub house: PathBuf,
    /// Appliance column to slice, or "all".
    #[arg(long, default_value = "all")]
    pub channel: String,
    /// wavelet | stft | fused.
    #[arg(long)]
    pub transform: String,
    #[arg(long)]
    pub max_r: Option<usize>,
    #[arg(long)]
    pub data_offset: Option<usize>,
    #[arg(long)]
    pub max_iters: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SignaturesSplitArgs {
    /// Manifest written by `signatures generate`.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Total train images across all classes.
    #[arg(long, default_value_t = 600)]
    pub train: usize,
    /// Total test images across all classes.
    #[arg(long, default_value_t = 200)]
    pub test: usize,
}

#[derive(Debug, Subcommand)]
pub enum ClassifyAction {
    Train(ClassifyTrainArgs),
    Eval(ClassifyEvalArgs),
}

#[derive(Debug, Args)]
pub struct ClassifyTrainArgs {
    /// simple-dnn | compact-cnn.
    #[arg(long, default_value = "simple-dnn")]
    pub model: String,
    /// Head preset for compact-cnn: resnet | alexnet | densenet.
    #[arg(long)]
    pub head: Option<String>,
    /// Split manifest from `signatures split`.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Checkpoint path (default <out>/classifier.ckpt).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ClassifyEvalArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
}

#[derive(Debug, Args)]
pub struct BehaviorArgs {
    /// Synced house CSV.
    #[arg(long)]
    pub house: PathBuf,
    #[arg(long)]
    pub appliance: String,
    /// Days from the first timestamp.
    #[arg(long, default_value_t = 2)]
    pub days: u64,
    /// Explicit period start (UTC seconds); defaults to the first stamp.
    #[arg(long)]
    pub start: Option<i64>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// overlay | histogram | confusion.
    #[arg(long)]
    pub kind: String,
    /// CSV payload produced by the pipeline.
    #[arg(long)]
    pub input: PathBuf,
}

/// Parses argv and executes. Returns the process exit code: 0 on success,
/// 1 on run/validation errors, 2 on usage errors.
pub fn run(argv: &[String]) -> u8 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 2 } else { 0 };
            let _ = err.print();
            return code;
        }
    };
    match commands::dispatch(cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err:#}");
            1
        }
    }
}
