use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use repscope_core::activation_stats::DEFAULT_THRESHOLD_Z;
use repscope_core::concept_probe::{DEFAULT_THRESHOLD, DEFAULT_TOP_K};
use repscope_core::head_analysis::DEFAULT_RANK_TOL;

/// Representation-space diagnostics on dumped activations and classifier heads.
#[derive(Debug, Parser, Serialize)]
#[command(name = "repscope", version)]
pub struct Cli {
    /// Output path; stdout when omitted (for `interp`, the checkpoint directory).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    /// Recorded in every report and forwarded to sampled procedures.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Mean activation kurtosis (optionally with outlier coordinates).
    Kurtosis(KurtosisArgs),
    /// Coordinates (or projected directions) with large per-sample z-scores.
    Outliers(OutliersArgs),
    /// Importance of the head's right singular directions.
    Importance(ImportanceArgs),
    /// Zero-shot accuracy while pruning the smallest singular values.
    PruneSweep(PruneSweepArgs),
    /// Effective Robustness and %acc against a baseline line.
    Er(ErArgs),
    /// Average precision of every concept along every head direction.
    Probe(ProbeArgs),
    /// Region sizes of a Venn diagram over 2 or 3 concept sets.
    Venn(VennArgs),
    /// Overlap of finetuned concept sets with zero-shot and supervised sets per epoch.
    OverlapTraj(OverlapArgs),
    /// Linear CKA between aligned layer dumps.
    Cka(CkaArgs),
    /// Interpolate two checkpoints in weight space.
    Interp(InterpArgs),
    /// Merge per-alpha reports into one sweep table.
    SweepReport(SweepReportArgs),
    /// Run the full per-model pipeline from a manifest.
    Report(ReportArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct KurtosisArgs {
    #[arg(long)]
    pub acts: PathBuf,
    #[arg(long)]
    pub per_sample: bool,
    /// Also detect outlier coordinates at this z threshold.
    #[arg(long)]
    pub z: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct OutliersArgs {
    #[arg(long)]
    pub acts: PathBuf,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD_Z)]
    pub z: f64,
    /// d_H x m matrix of orthonormal directions to project onto.
    #[arg(long)]
    pub directions: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct HeadArgs {
    #[arg(long)]
    pub head: PathBuf,
    /// Treat the head file as text embeddings and normalize them.
    #[arg(long)]
    pub from_text: bool,
    /// Temperature for --from-text; defaults to the sidecar value.
    #[arg(long)]
    pub temperature: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct ImportanceArgs {
    #[command(flatten)]
    pub head: HeadArgs,
    #[arg(long)]
    pub acts: PathBuf,
    #[arg(long, default_value_t = DEFAULT_RANK_TOL)]
    pub rank_tol: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct PruneSweepArgs {
    #[command(flatten)]
    pub head: HeadArgs,
    #[arg(long)]
    pub acts: PathBuf,
    /// Labels for --acts; defaults to the activation sidecar.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")]
    pub fractions: Vec<f64>,
    /// Labeled shifted-set activations (repeatable).
    #[arg(long = "shift")]
    pub shifts: Vec<PathBuf>,
    #[arg(long)]
    pub baselines: Option<PathBuf>,
    #[arg(long)]
    pub published_fit: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct ErArgs {
    /// Baseline pool CSV with columns model_id,acc_in,acc_shift.
    #[arg(long, required_unless_present = "published_fit")]
    pub baselines: Option<PathBuf>,
    #[arg(long)]
    pub acc_in: f64,
    #[arg(long)]
    pub acc_shift: f64,
    /// Use the fixed published line (beta1 = 0.76, beta0 = -1.49).
    #[arg(long)]
    pub published_fit: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct ProbeArgs {
    #[arg(long)]
    pub svd_head: PathBuf,
    #[arg(long)]
    pub probe_acts: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: f64,
    #[arg(long, default_value_t = DEFAULT_TOP_K)]
    pub top_k: usize,
    #[arg(long, value_delimiter = ',', default_value = "0.8,0.85,0.9,0.95")]
    pub sweep: Vec<f64>,
    /// Probe canonical coordinates instead of the head's singular directions.
    #[arg(long)]
    pub canonical: bool,
    #[arg(long, default_value_t = DEFAULT_RANK_TOL)]
    pub rank_tol: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct VennArgs {
    /// NAME=PATH; PATH holds a JSON id array or a probe report (repeat 2-3 times).
    #[arg(long = "set", required = true)]
    pub sets: Vec<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct OverlapArgs {
    /// Finetuned concept sets, one per epoch, in order.
    #[arg(long, value_delimiter = ',', required = true)]
    pub fine: Vec<PathBuf>,
    #[arg(long)]
    pub zero: PathBuf,
    #[arg(long)]
    pub sup: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct CkaArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    pub a: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub b: Vec<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct InterpArgs {
    #[arg(long)]
    pub theta0: PathBuf,
    #[arg(long)]
    pub theta1: PathBuf,
    /// Single alpha; without it the grid 0.0, 0.1, ..., 1.0 is written.
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepReportArgs {
    /// ALPHA=REPORT (repeatable, strictly increasing alphas).
    #[arg(long = "entry", required = true)]
    pub entries: Vec<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    /// Pipeline manifest (JSON).
    #[arg(long)]
    pub config: PathBuf,
}
