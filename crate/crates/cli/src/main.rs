//! `crimegwr` command-line pipeline.

mod commands;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crimegwr::experiment::{BandwidthChoice, DEFAULT_TEST_FRACTION};
use crimegwr::ingest::{TimeBucket, DEFAULT_MIN_SUPPORT};
use crimegwr::stats::DEFAULT_TEMPERATURE_BIN_F;
use crimegwr::{BBox, CrimeType};

#[derive(Parser)]
#[command(name = "crimegwr", version, about = "Geographically weighted crime-risk modelling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic city as crimes.csv, demographics.csv and weather.csv.
    Synthetic(SyntheticArgs),
    /// Fit one model per crime type and write a model bundle.
    Fit(FitArgs),
    /// Holdout evaluation per crime type and year: scatter CSVs and metrics.json.
    Evaluate(EvaluateArgs),
    /// Precompute GeoJSON heat maps, one per crime type and year.
    Heatmap(HeatmapArgs),
    /// Descriptive statistics: histograms, month profile and correlations.
    Stats(StatsArgs),
    /// Answer a single risk query from a model bundle.
    Risk(RiskArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Args)]
struct SyntheticArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// GeoIDs per side of the lattice.
    #[arg(long, default_value_t = 7)]
    grid: usize,
    #[arg(long, default_value_t = 2015)]
    first_year: i32,
    #[arg(long, default_value_t = 2017)]
    last_year: i32,
}

#[derive(Args)]
struct InputArgs {
    /// Directory holding crimes.csv, demographics.csv and weather.csv.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    crimes: Option<PathBuf>,
    #[arg(long)]
    demographics: Option<PathBuf>,
    #[arg(long)]
    weather: Option<PathBuf>,
    /// TOML column-name mapping.
    #[arg(long)]
    columns: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_MIN_SUPPORT)]
    min_support: usize,
    /// Where to write reject CSVs and coverage.json.
    #[arg(long)]
    reports: Option<PathBuf>,
}

#[derive(Args)]
struct BandwidthArgs {
    /// Fixed kernel bandwidth in km.
    #[arg(long, conflicts_with = "grid")]
    bandwidth: Option<f64>,
    /// Comma-separated candidate bandwidths in km, chosen by leave-one-out CV.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
}

impl BandwidthArgs {
    fn choice(&self) -> BandwidthChoice {
        match (&self.bandwidth, &self.grid) {
            (Some(h), _) => BandwidthChoice::Fixed(*h),
            (None, Some(g)) => BandwidthChoice::Grid(g.clone()),
            (None, None) => BandwidthChoice::AutoGrid,
        }
    }
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    bandwidth: BandwidthArgs,
    /// Output bundle path.
    #[arg(long)]
    out: PathBuf,
    /// Fit on a single year; all years are pooled by default.
    #[arg(long)]
    year: Option<i32>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    bandwidth: BandwidthArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_TEST_FRACTION)]
    test_fraction: f64,
    /// Select one bandwidth across all years instead of one per year.
    #[arg(long)]
    shared_bandwidth: bool,
    /// Restrict to these crime types (default: all six).
    #[arg(long, value_delimiter = ',')]
    crime_type: Vec<CrimeType>,
}

#[derive(Args)]
struct HeatmapArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    bandwidth: BandwidthArgs,
    #[arg(long)]
    out: PathBuf,
    /// Years to map (default: every year present).
    #[arg(long, value_delimiter = ',')]
    year: Vec<i32>,
    #[arg(long, value_delimiter = ',')]
    crime_type: Vec<CrimeType>,
    /// min_lon,min_lat,max_lon,max_lat (default: box around GeoID centroids).
    #[arg(long, allow_hyphen_values = true)]
    bbox: Option<BBox>,
    #[arg(long, default_value_t = 40)]
    resolution: usize,
    /// Time bucket for the feature context.
    #[arg(long, default_value = "afternoon")]
    bucket: TimeBucket,
    /// Temperature for the feature context (default: the year's mean).
    #[arg(long, allow_hyphen_values = true)]
    temp_f: Option<f64>,
}

#[derive(Args)]
struct StatsArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    out: PathBuf,
    /// Restrict the histograms to one crime type.
    #[arg(long)]
    crime_type: Option<CrimeType>,
    #[arg(long, default_value_t = DEFAULT_TEMPERATURE_BIN_F)]
    temp_bin_f: f64,
}

#[derive(Args)]
struct RiskArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    lat: f64,
    #[arg(long, allow_hyphen_values = true)]
    lon: f64,
    #[arg(long)]
    hour: u32,
    #[arg(long)]
    month: u32,
    #[arg(long, allow_hyphen_values = true)]
    temp_f: Option<f64>,
    #[arg(long, default_value_t = crimegwr::risk::DEFAULT_GEOID_RADIUS_KM)]
    geoid_radius_km: f64,
}

#[derive(Args)]
struct ServeArgs {
    /// TOML config; environment variables override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    listen: Option<String>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    heatmap_dir: Option<PathBuf>,
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Synthetic(a) => commands::synthetic(a),
        Command::Fit(a) => commands::fit(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Heatmap(a) => commands::heatmap(a),
        Command::Stats(a) => commands::stats(a),
        Command::Risk(a) => commands::risk(a),
        Command::Serve(a) => commands::serve(a),
    }
}
