//! Command-line front end.
//!
//! Settings resolve as flags, then `RAYDIO_*` environment variables, then
//! the TOML file named by `--config`, then built-in defaults. Exit status is
//! 0 on success, 1 when some samples failed, 2 on usage or contract errors.

mod commands;
mod plot;
mod report;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::dataset::DatasetConfig;
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::reconstruct::ReconstructConfig;
use crate::tracer::TraceConfig;

pub use plot::{render_loss_curve, render_overlay, LossRecord};
pub use report::{ReconstructReport, ReconstructSummary, SampleReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARTIAL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Every tunable, as read from a TOML file with `[trace]`, `[dataset]` and
/// `[reconstruct]` tables. Missing keys take their defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub trace: TraceConfig,
    pub dataset: DatasetConfig,
    pub reconstruct: ReconstructConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e))
    }

    /// File contents when a path is given, defaults otherwise.
    pub fn resolve(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(RunConfig::default()), RunConfig::load)
    }
}

#[derive(Debug, Parser)]
#[command(name = "raydio", version, about = "Indoor radio path tracing, multi-view path images and 3D reconstruction")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, env = "RAYDIO_CONFIG")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Trace all paths between one Tx and one Rx.
    Trace(TraceArgs),
    /// Render the six scene views and three path views for one pair.
    RenderViews(RenderArgs),
    /// Sample, trace, render and write a dataset with a manifest.
    GenDataset(GenArgs),
    /// Reassign train/val/test splits of a manifest by transmitter.
    Split(SplitArgs),
    /// Recover 3D paths from path images and score them against the CSI.
    Reconstruct(ReconstructArgs),
    /// Per-pixel error of predicted path images against the targets.
    Evaluate(EvaluateArgs),
    /// Draw a loss curve or reconstruction overlays.
    Plot(PlotArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct PairArgs {
    /// Bundled scene name or scene JSON file.
    #[arg(long)]
    pub scene: String,
    /// Transmitter position `x,y,z` in meters.
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    pub tx: Point,
    /// Receiver position `x,y,z` in meters.
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    pub rx: Point,
    #[arg(long, env = "RAYDIO_MAX_ORDER")]
    pub max_order: Option<usize>,
    #[arg(long, env = "RAYDIO_FREQUENCY")]
    pub frequency: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    #[command(flatten)]
    pub pair: PairArgs,
    #[arg(long, value_enum, default_value = "json")]
    pub format: OutputFormat,
    /// Write here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[command(flatten)]
    pub pair: PairArgs,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, env = "RAYDIO_IMAGE_SIZE")]
    pub image_size: Option<u32>,
    /// File name prefix.
    #[arg(long, default_value = "sample")]
    pub id: String,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, default_value = "dataset")]
    pub out: PathBuf,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, env = "RAYDIO_JOBS")]
    pub jobs: Option<usize>,
    #[arg(long, env = "RAYDIO_SEED")]
    pub seed: Option<u64>,
    #[arg(long, env = "RAYDIO_IMAGE_SIZE")]
    pub image_size: Option<u32>,
    /// Comma-separated bundled scene names or scene files.
    #[arg(long, env = "RAYDIO_SCENES", value_delimiter = ',')]
    pub scenes: Option<Vec<String>>,
    #[arg(long, env = "RAYDIO_N_TX")]
    pub n_tx: Option<usize>,
    #[arg(long, env = "RAYDIO_N_RX_PER_TX")]
    pub n_rx_per_tx: Option<usize>,
    /// Print the sample count and write nothing.
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Train, val and test fractions, e.g. `0.8,0.1,0.1`.
    #[arg(long, value_delimiter = ',')]
    pub ratios: Option<Vec<f64>>,
    #[arg(long, env = "RAYDIO_SEED")]
    pub seed: Option<u64>,
    /// Defaults to rewriting the input manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    /// Directory of `{sample_id}_{xy,xz,yz}.png` triples (targets or predictions).
    #[arg(long)]
    pub images: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    /// Only samples of this split.
    #[arg(long)]
    pub split: Option<crate::dataset::Split>,
    /// Match tolerance in pixels.
    #[arg(long, default_value_t = 3.0)]
    pub tolerance_px: f64,
    /// Report JSON path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub split: Option<crate::dataset::Split>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Training log JSONL with `epoch`, `train_loss`, `val_loss`.
    #[arg(long, conflicts_with = "report", required_unless_present = "report")]
    pub loss_log: Option<PathBuf>,
    /// Report written by `reconstruct --out`.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Only this sample of the report.
    #[arg(long)]
    pub sample: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Panel size in pixels for overlays.
    #[arg(long, default_value_t = 512)]
    pub size: u32,
}

fn parse_point(s: &str) -> std::result::Result<Point, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    match parts[..] {
        [x, y, z] if parts.iter().all(|v| v.is_finite()) => Ok(Point::new(x, y, z)),
        _ => Err(format!("expected three finite comma-separated numbers, got {s:?}")),
    }
}

/// Parses `args` and runs the command, writing results to `out` and
/// diagnostics to `err`. Returns the process exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(&cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
    }
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Result<i32> {
    let config = RunConfig::resolve(cli.config.as_deref())?;
    match &cli.command {
        Command::Trace(a) => commands::trace(config, a, out),
        Command::RenderViews(a) => commands::render_views(config, a, out),
        Command::GenDataset(a) => commands::gen_dataset(config, a, out),
        Command::Split(a) => commands::split(config, a, out),
        Command::Reconstruct(a) => report::reconstruct(config, a, out),
        Command::Evaluate(a) => report::evaluate(a, out),
        Command::Plot(a) => plot::plot(a, out),
    }
}

/// Entry point for the binary: process arguments, standard streams and
/// `RUST_LOG`-controlled logging (warnings by default).
pub fn main() -> i32 {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    run(std::env::args_os(), &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::io(path, e)
}

pub(crate) fn write_out(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes()).map_err(io_err(Path::new("<stdout>")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_parse_from_commas() {
        assert_eq!(parse_point("1,2.5,-3").unwrap(), Point::new(1.0, 2.5, -3.0));
        assert!(parse_point("1,2").is_err());
        assert!(parse_point("1,x,3").is_err());
        assert!(parse_point("1,inf,3").is_err());
    }

    #[test]
    fn partial_toml_keeps_other_defaults() {
        let c: RunConfig = toml::from_str("[dataset]\nn_tx = 3\n[trace]\nmax_order = 1\n").unwrap();
        assert_eq!(c.dataset.n_tx, 3);
        assert_eq!(c.dataset.n_rx_per_tx, DatasetConfig::default().n_rx_per_tx);
        assert_eq!(c.trace.max_order, 1);
        assert_eq!(c.reconstruct, ReconstructConfig::default());
    }

    #[test]
    fn flags_beat_environment() {
        // no other test in this binary parses these variables
        std::env::set_var("RAYDIO_MAX_ORDER", "1");
        let order = |extra: &[&str]| {
            let args = ["raydio", "trace", "--scene", "shoebox", "--tx", "1,1,1", "--rx", "2,2,2"];
            match Cli::try_parse_from(args.iter().chain(extra)).unwrap().command {
                Command::Trace(t) => t.pair.max_order,
                _ => unreachable!(),
            }
        };
        assert_eq!(order(&[]), Some(1));
        assert_eq!(order(&["--max-order", "2"]), Some(2));
        std::env::remove_var("RAYDIO_MAX_ORDER");
    }

    #[test]
    fn defaults_survive_a_toml_round_trip() {
        let text = toml::to_string(&RunConfig::default()).unwrap();
        assert_eq!(toml::from_str::<RunConfig>(&text).unwrap(), RunConfig::default());
    }
}
