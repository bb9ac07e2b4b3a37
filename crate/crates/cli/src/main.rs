//! `fadtk`: Fréchet Audio Distance, distortion sweeps, signal metrics and
//! ranking analyses from the command line.
//!
//! Exit codes: 0 on success, 1 on a fatal error, 2 on invalid arguments.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "fadtk", version, about = "Fréchet Audio Distance toolkit")]
struct Cli {
    /// Base seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads (0 = one per core). Never changes numeric output.
    #[arg(long, global = true, env = "FADTK_THREADS", default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Apply one distortion to a WAV file.
    Distort(DistortArgs),
    /// Write distorted copies of every evaluation clip for a grid.
    Sweep(SweepArgs),
    /// Compute embeddings for every window of every manifest clip.
    Embed(EmbedArgs),
    /// Fit a Gaussian to an embeddings file.
    Stats(StatsArgs),
    /// Fréchet distance between background and evaluation statistics.
    Fad(FadArgs),
    /// SDR, SI-SDR, cosine distance and magnitude L2 between clips.
    SignalMetrics(SignalMetricsArgs),
    /// Distort, embed and score a corpus for every grid entry.
    Pipeline(PipelineArgs),
    /// Fit Plackett-Luce worths to pairwise comparisons.
    Rank(RankArgs),
    /// Correlation between two CSV columns.
    Correlate(CorrelateArgs),
    /// Index of dispersion of FAD over evaluation-set sizes.
    Dispersion(DispersionArgs),
    /// FAD as a function of the embedding window step.
    StepStudy(StepStudyArgs),
    /// Generate a seeded synthetic music corpus with a manifest.
    SynthCorpus(SynthCorpusArgs),
}

#[derive(Debug, Args)]
struct DistortArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    family: String,
    /// Parameter as name=value; repeat for several.
    #[arg(long = "param")]
    params: Vec<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct GridArgs {
    /// `builtin` or a grid CSV (family,params,seed).
    #[arg(long, default_value = "builtin")]
    grid: String,
    /// Keep only these families, comma separated.
    #[arg(long, value_delimiter = ',')]
    families: Vec<String>,
}

#[derive(Debug, Args)]
struct AnalysisArgs {
    /// Embedding window step in seconds.
    #[arg(long, default_value_t = 0.5)]
    step: f64,
    /// Frontend configuration file of key = value lines.
    #[arg(long)]
    frontend: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long)]
    out_dir: PathBuf,
    /// Report CSV path (default stdout).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RoleFilter {
    All,
    Evaluation,
    Background,
}

#[derive(Debug, Args)]
struct EmbedArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// `patch-stats` or `file:<embeddings file>`.
    #[arg(long, default_value = "patch-stats")]
    backend: String,
    #[command(flatten)]
    analysis: AnalysisArgs,
    #[arg(long, value_enum, default_value_t = RoleFilter::All)]
    role: RoleFilter,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct StatsArgs {
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long, default_value = fadtk_core::fad::PATCH_STATS_ID)]
    backend_id: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct FadArgs {
    #[arg(long)]
    background: PathBuf,
    #[arg(long)]
    eval: PathBuf,
}

#[derive(Debug, Args)]
struct SignalMetricsArgs {
    #[arg(long, requires = "estimate", conflicts_with = "pairs")]
    reference: Option<PathBuf>,
    #[arg(long, requires = "reference")]
    estimate: Option<PathBuf>,
    /// CSV of clip_id,reference,estimate for batch mode.
    #[arg(long, required_unless_present = "reference")]
    pairs: Option<PathBuf>,
    #[arg(long, default_value_t = fadtk_core::metrics::DEFAULT_FILTER_TAPS)]
    filter_taps: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PipelineArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    analysis: AnalysisArgs,
    #[arg(long, default_value_t = fadtk_core::metrics::DEFAULT_FILTER_TAPS)]
    filter_taps: usize,
    /// Report FAD only.
    #[arg(long)]
    no_signal_metrics: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RankArgs {
    #[arg(long)]
    comparisons: PathBuf,
    #[arg(long, default_value_t = fadtk_core::ranking::DEFAULT_MAX_ITERS)]
    max_iters: usize,
    #[arg(long, default_value_t = fadtk_core::ranking::DEFAULT_TOL)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Pearson,
    Spearman,
}

#[derive(Debug, Args)]
struct CorrelateArgs {
    /// Input CSV; `table2` selects the built-in human-evaluation table.
    #[arg(long)]
    csv: String,
    #[arg(long)]
    x: String,
    #[arg(long)]
    y: String,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Method::Pearson])]
    method: Vec<Method>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DispersionArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    analysis: AnalysisArgs,
    #[arg(long, value_delimiter = ',', default_values_t = [50, 100, 300])]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    repeats: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct StepStudyArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[command(flatten)]
    grid: GridArgs,
    /// Frontend configuration file of key = value lines.
    #[arg(long)]
    frontend: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 0.5, 0.25])]
    steps: Vec<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SynthCorpusArgs {
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 30)]
    evaluation: usize,
    #[arg(long, default_value_t = 0)]
    background: usize,
    #[arg(long, default_value_t = 6.0)]
    seconds: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
        eprintln!("fadtk: cannot start worker pool: {e}");
        return ExitCode::from(1);
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fadtk: error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
