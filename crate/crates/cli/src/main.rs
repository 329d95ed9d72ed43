mod commands;
mod error;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use error::CliError;
use settings::{List, Settings, Span};

#[derive(Debug, Parser)]
#[command(name = "climakit", version, about = "Anomaly placement, dataset synthesis and OoD benchmark tooling")]
pub struct Cli {
    /// Flat `key = value` file with defaults for any long flag.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for per-image work; defaults to all logical cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write synthetic driving-scene label maps with a scene index.
    Toy(ToyArgs),
    /// Sample pseudo boxes for every semantic map.
    Sample(SampleArgs),
    /// Build images and masks by copy-paste compositing.
    Compose(GenArgs),
    /// Build images and masks with a generation service or the stub.
    Generate(GenerateArgs),
    /// Refine the masks of a dataset.
    Refine(RefineArgs),
    /// Score anomaly maps against dataset masks.
    Eval(EvalArgs),
    /// Dataset statistics and anomaly heatmap.
    Stats(StatsArgs),
    /// Assign a balanced test split in place.
    Curate(CurateArgs),
    /// Check a manifest against its files.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct ToyArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub height: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SamplerArgs {
    /// Boxes per image.
    #[arg(long = "n")]
    pub n: Option<usize>,
    /// Depth-scale coefficient in pixels.
    #[arg(long = "s-h")]
    pub s_h: Option<f64>,
    /// Width-over-height range `min:max`.
    #[arg(long)]
    pub aspect: Option<Span<f64>>,
    #[arg(long = "h-min")]
    pub h_min: Option<f64>,
    #[arg(long = "h-max")]
    pub h_max: Option<f64>,
    #[arg(long = "ground-contact")]
    pub ground_contact: Option<bool>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub maps: Option<PathBuf>,
    #[arg(long)]
    pub schema: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub sampler: SamplerArgs,
}

#[derive(Debug, Args)]
pub struct RefineFlags {
    #[arg(long = "median-radius")]
    pub median_radius: Option<usize>,
    #[arg(long)]
    pub kernel: Option<usize>,
    #[arg(long = "keep-largest")]
    pub keep_largest: Option<bool>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub maps: Option<PathBuf>,
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Scene images named after the maps.
    #[arg(long)]
    pub images: Option<PathBuf>,
    /// Box sets from `sample`; sampled on the fly when absent.
    #[arg(long)]
    pub boxes: Option<PathBuf>,
    /// Directory of `<concept>/*.png` RGBA cutouts.
    #[arg(long)]
    pub cutouts: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// `n` or `min:max` anomalies per image.
    #[arg(long = "anomalies-per-image")]
    pub anomalies: Option<Span<usize>>,
    #[arg(long)]
    pub concepts: Option<List<String>>,
    #[arg(long)]
    pub harmonize: Option<bool>,
    #[arg(long)]
    pub refine: Option<bool>,
    #[command(flatten)]
    pub refine_flags: RefineFlags,
    #[arg(long)]
    pub split: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Stop after this many new images; rerun to resume.
    #[arg(long)]
    pub limit: Option<usize>,
    #[command(flatten)]
    pub sampler: SamplerArgs,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub gen: GenArgs,
    /// Use the in-process deterministic backend.
    #[arg(long)]
    pub stub: bool,
    /// Service address; defaults to `CLIMAKIT_ENDPOINT`.
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub retries: Option<u32>,
    #[arg(long = "timeout-secs")]
    pub timeout_secs: Option<u64>,
    #[arg(long = "backoff-ms")]
    pub backoff_ms: Option<u64>,
    #[arg(long = "max-in-flight")]
    pub max_in_flight: Option<usize>,
    #[arg(long)]
    pub dilation: Option<usize>,
    #[arg(long = "diff-threshold")]
    pub diff_threshold: Option<u8>,
    #[arg(long = "leak-tolerance")]
    pub leak_tolerance: Option<u8>,
}

#[derive(Debug, Args)]
pub struct RefineArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub refine_flags: RefineFlags,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Score maps named after the images, `.csm` or 16-bit `.png`.
    #[arg(long)]
    pub scores: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub bins: Option<usize>,
    /// Score range `lo:hi`.
    #[arg(long)]
    pub range: Option<Span<f64>>,
    /// `test`, `train`, `unassigned` or `all`.
    #[arg(long)]
    pub split: Option<String>,
    #[arg(long = "allow-missing")]
    pub allow_missing: Option<bool>,
    /// `pooled` or `per_image_mean`.
    #[arg(long)]
    pub aggregation: Option<String>,
    #[arg(long = "group-by")]
    pub group_by: Option<List<climakit::metrics::GroupBy>>,
    /// Method name in the scene×weather table.
    #[arg(long)]
    pub method: Option<String>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CurateArgs {
    /// Rewritten in place with the new split assignment.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub total: Option<usize>,
    /// `scene weather count` lines; unlisted cells get zero.
    #[arg(long)]
    pub quotas: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "min-fraction")]
    pub min_fraction: Option<f64>,
    #[arg(long = "max-fraction")]
    pub max_fraction: Option<f64>,
    #[arg(long = "require-refined")]
    pub require_refined: Option<bool>,
    /// Directory for the curation report.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Directory for the violation report.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let settings = Settings::load(cli.config.as_deref())?;
    let jobs = settings.get(cli.jobs, "jobs", 0)?;
    rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global().map_err(|e| CliError::config(e.to_string()))?;
    commands::dispatch(cli.command, &settings, jobs)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).format_timestamp(None).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
