use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fgmatch::{AggregationMethod, RebinPolicy};

#[derive(Debug, Parser)]
#[command(name = "fgmatch", version, about = "Foreground-only CDF matching for mammograms")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a reference profile from the images listed in a manifest.
    BuildRef(BuildRefArgs),
    /// Harmonize images against a reference profile.
    Harmonize(HarmonizeArgs),
    /// Dump the foreground histogram and CDF of one image as CSV.
    Inspect(InspectArgs),
    /// Compare foreground CDFs before and after harmonization.
    Metrics(MetricsArgs),
    /// Write a corpus of synthetic phantoms.
    Synth(SynthArgs),
    /// Re-check a profile or a harmonized output and its sidecar.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Averaged,
    Pooled,
}

impl From<Method> for AggregationMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Averaged => AggregationMethod::Averaged,
            Method::Pooled => AggregationMethod::Pooled,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Rebin {
    Auto,
    Native,
    Common12,
}

impl From<Rebin> for RebinPolicy {
    fn from(r: Rebin) -> Self {
        match r {
            Rebin::Auto => RebinPolicy::Auto,
            Rebin::Native => RebinPolicy::Native,
            Rebin::Common12 => RebinPolicy::Common12,
        }
    }
}

/// Masking flags shared by the commands that compute foreground histograms.
#[derive(Debug, Args)]
pub struct MaskArgs {
    /// Smallest intensity counted as foreground (default 1).
    #[arg(long, value_name = "K")]
    pub min_intensity: Option<u16>,
    /// Keep only the largest 8-connected foreground component.
    #[arg(long)]
    pub keep_largest_component: bool,
}

#[derive(Debug, Args)]
pub struct BuildRefArgs {
    /// Text file with one image path per line; relative paths are resolved
    /// against the manifest's directory.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Where to write the profile JSON.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "averaged")]
    pub method: Method,
    /// Profile bit depth (default: the shallowest input depth, at most 12).
    #[arg(long)]
    pub target_bits: Option<u8>,
    #[arg(long, default_value = "reference")]
    pub label: String,
    /// Creation timestamp stored verbatim in the profile.
    #[arg(long)]
    pub created: Option<String>,
    #[arg(long, value_name = "N")]
    pub workers: Option<usize>,
    #[command(flatten)]
    pub mask: MaskArgs,
}

#[derive(Debug, Args)]
pub struct HarmonizeArgs {
    /// Input images (PGM or DICOM).
    pub inputs: Vec<PathBuf>,
    /// Manifest with one input path per line.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// TOML job file; command-line flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub profile: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    pub workers: Option<usize>,
    #[arg(long, value_enum)]
    pub rebin: Option<Rebin>,
    /// CSV report path (default: `<out>/report.csv`).
    #[arg(long, value_name = "PATH")]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub mask: MaskArgs,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    pub path: PathBuf,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub mask: MaskArgs,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Directory of original images.
    #[arg(long)]
    pub before: PathBuf,
    /// Directory of harmonized images, named `<stem>.pgm`.
    #[arg(long)]
    pub after: PathBuf,
    #[arg(long)]
    pub profile: PathBuf,
    /// Per-image CSV (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON summary (default: stderr).
    #[arg(long, value_name = "PATH")]
    pub report: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub rebin: Option<Rebin>,
    #[arg(long, value_name = "N")]
    pub workers: Option<usize>,
    #[command(flatten)]
    pub mask: MaskArgs,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub count: usize,
    /// Seed of the first phantom; phantom i uses `seed + i`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 256)]
    pub width: usize,
    #[arg(long, default_value_t = 256)]
    pub height: usize,
    #[arg(long, default_value_t = 12)]
    pub bits: u8,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    pub gain: f64,
    #[arg(long, default_value_t = 0, allow_negative_numbers = true)]
    pub offset: i64,
    /// Vendor label written to each sidecar.
    #[arg(long)]
    pub vendor: Option<String>,
    #[arg(long, value_parser = ["low", "high"])]
    pub energy: Option<String>,
    /// File name prefix.
    #[arg(long, default_value = "phantom_")]
    pub prefix: String,
    #[arg(long, value_name = "N")]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// A profile JSON, or a PGM (or its sidecar).
    pub path: PathBuf,
}
