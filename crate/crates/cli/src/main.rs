//! Command line driver for the moderation trajectory toolkit.
//!
//! Every analysis subcommand re-derives its stage from the raw inputs,
//! so there is no intermediate file format to version; `all` writes
//! the complete artifact set plus a manifest. Failures print one JSON
//! object to stderr and exit 2 (bad configuration), 3 (unusable
//! input), or 4 (internal error).

mod stages;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "modtraj", version, about = "Moderation trajectory analysis toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse the raw logs and write reconstructed block spans.
    Ingest(PipelineArgs),
    /// Select the analysis cohort and write its anchor blocks.
    Cohort(PipelineArgs),
    /// Write post-block trajectory labels for the cohort.
    Label(PipelineArgs),
    /// Build matched user pairs across outcome groups.
    Match(PipelineArgs),
    /// Write engagement features at each cohort member's block.
    Features(PipelineArgs),
    /// Detect linguistic cues in messages sent while blocked.
    Cues(PipelineArgs),
    /// Write summary statistics, cue tests, and the word-level test.
    Stats(PipelineArgs),
    /// Write hazard curves and matched engagement comparisons.
    Figures(PipelineArgs),
    /// Train trajectory forecasters and write their evaluations.
    Predict(PipelineArgs),
    /// Run the full pipeline and write every artifact.
    All(PipelineArgs),
    /// Generate a synthetic log pair with known ground truth.
    Synth(SynthArgs),
}

#[derive(Args, Clone)]
pub struct PipelineArgs {
    /// Line-delimited JSON block log.
    #[arg(long)]
    pub input_blocks: PathBuf,
    /// Line-delimited JSON comment record.
    #[arg(long)]
    pub input_comments: PathBuf,
    /// Output directory for artifacts.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Abort on the first malformed input line instead of skipping.
    #[arg(long)]
    pub strict: bool,

    /// Observation horizon after the first block, in days.
    #[arg(long, default_value_t = 180.0)]
    pub horizon_days: f64,
    /// Window that counts a second block as a fast reoffense.
    #[arg(long, default_value_t = 7.0)]
    pub short_window_days: f64,
    /// Minimum account tenure at the first block, in days.
    #[arg(long, default_value_t = 30.0)]
    pub min_tenure_days: f64,
    /// Minimum authored comments before the first block.
    #[arg(long, default_value_t = 8)]
    pub min_comments: usize,
    /// Days of community history to discard from the record start.
    #[arg(long, default_value_t = 1826.0)]
    pub burnin_days: f64,
    /// End of observation, days from epoch; defaults to the last
    /// event seen in either input.
    #[arg(long)]
    pub dataset_end_days: Option<f64>,

    /// Relative date-matching tolerance (fraction of the anchor).
    #[arg(long, default_value_t = 0.01)]
    pub tolerance: f64,
    /// Absolute date-matching tolerance in days; overrides the
    /// relative tolerance when set.
    #[arg(long)]
    pub tolerance_days: Option<f64>,
    /// Count comment edits as engagement alongside additions.
    #[arg(long)]
    pub count_edits: bool,
    /// Months of hazard curve to compute.
    #[arg(long, default_value_t = 24)]
    pub hazard_months: u32,
    /// Dirichlet prior mass for the word-level log-odds test.
    #[arg(long, default_value_t = 500.0)]
    pub fw_alpha: f64,

    /// Seed for every stochastic stage (splits, shuffles).
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Regularization grid for the forecaster, ascending.
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.1,1,10,100")]
    pub c_grid: Vec<f64>,
    /// Fraction of each class held out to pick the regularizer.
    #[arg(long, default_value_t = 0.2)]
    pub dev_fraction: f64,
    /// Training epochs per fit.
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,

    /// JSON file overriding the block reason keyword table.
    #[arg(long)]
    pub reason_table: Option<PathBuf>,
    /// JSON file overriding the cue lexicon.
    #[arg(long)]
    pub cue_lexicon: Option<PathBuf>,
}

#[derive(Args, Clone)]
pub struct SynthArgs {
    /// Output directory for the generated files.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 500)]
    pub n_users: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Fraction of users blocked at least once.
    #[arg(long, default_value_t = 0.55)]
    pub block_rate: f64,
    /// Monthly hazard of a never-blocked user going silent.
    #[arg(long, default_value_t = 0.10)]
    pub departure_hazard: f64,
    /// Base probability of reoffending within the horizon.
    #[arg(long, default_value_t = 0.45)]
    pub base_recid_prob: f64,
    /// Multiplies the reoffense probability of high-activity users.
    #[arg(long, default_value_t = 1.0)]
    pub recid_multiplier: f64,
    /// Odds ratio on reoffense for users who apologize while blocked.
    #[arg(long, default_value_t = 1.0)]
    pub apology_odds_ratio: f64,
    /// Fraction of first blocks lifted early.
    #[arg(long, default_value_t = 0.15)]
    pub unblock_rate: f64,
    #[arg(long, default_value_t = 1.0)]
    pub median_duration_days: f64,
    #[arg(long, default_value_t = 180.0)]
    pub horizon_days: f64,
    #[arg(long, default_value_t = 7.0)]
    pub short_window_days: f64,
    #[arg(long, default_value_t = 30.0)]
    pub min_tenure_days: f64,
    #[arg(long, default_value_t = 8)]
    pub min_comments: usize,
    #[arg(long, default_value_t = 1826.0)]
    pub burnin_days: f64,
    #[arg(long, default_value_t = 5200.0)]
    pub dataset_end_days: f64,
}

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or settings; nothing was read.
    Config(String),
    /// Inputs missing or unusable.
    Data(String),
    /// A bug surfaced; state is not trustworthy.
    Internal(String),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Data(_) => "data",
            CliError::Internal(_) => "internal",
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Data(m) | CliError::Internal(m) => m,
        }
    }

    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Internal(_) => 4,
        }
    }
}

/// Cap the global worker pool when MODTRAJ_THREADS is set.
fn init_threads() -> Result<(), CliError> {
    match std::env::var("MODTRAJ_THREADS") {
        Err(_) => Ok(()),
        Ok(raw) => {
            let n: usize = raw
                .parse()
                .ok()
                .filter(|&n| n >= 1)
                .ok_or_else(|| {
                    CliError::Config(format!("MODTRAJ_THREADS must be a positive integer, got {raw:?}"))
                })?;
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| CliError::Internal(format!("thread pool init failed: {e}")))
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Cmd::Ingest(a) => stages::cmd_ingest(&a),
        Cmd::Cohort(a) => stages::cmd_cohort(&a),
        Cmd::Label(a) => stages::cmd_label(&a),
        Cmd::Match(a) => stages::cmd_match(&a),
        Cmd::Features(a) => stages::cmd_features(&a),
        Cmd::Cues(a) => stages::cmd_cues(&a),
        Cmd::Stats(a) => stages::cmd_stats(&a),
        Cmd::Figures(a) => stages::cmd_figures(&a),
        Cmd::Predict(a) => stages::cmd_predict(&a),
        Cmd::All(a) => stages::cmd_all(&a),
        Cmd::Synth(a) => stages::cmd_synth(&a),
    }
}

fn main() {
    let cli = Cli::parse();
    let outcome = init_threads().and_then(|()| run(cli));
    if let Err(e) = outcome {
        let payload = serde_json::json!({"kind": e.kind(), "error": e.message()});
        eprintln!("{payload}");
        std::process::exit(e.exit_code());
    }
}
