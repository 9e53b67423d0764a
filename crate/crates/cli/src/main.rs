use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use mpms_core::format::SlicePlane;
use mpms_core::metrics::Axis;
use mpms_core::Method;
use mpms_cli::commands::{self, ReconstructOptions};
use mpms_cli::config::{parse_method, AxisConfig, GridConfig};
use mpms_cli::{CliError, Result};

/// Near-field MIMO-SAR simulation and imaging for irregular scans.
#[derive(Debug, Parser)]
#[command(name = "mpms", version)]
struct Cli {
    /// Worker threads for the numeric kernels (0 = one per core).
    #[arg(long, global = true, env = "MPMS_THREADS", default_value_t = 0)]
    threads: usize,
    /// More log output; repeat for debug.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Errors only.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize an echo dump from a scenario file.
    Simulate {
        config: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Form an image from a dump; writes the volume, a slice and a timing CSV.
    Reconstruct {
        dump: PathBuf,
        /// bpa, rma_raw or rma_compensated.
        #[arg(short, long)]
        method: Option<String>,
        /// Scenario file supplying the grid and migration settings.
        #[arg(short, long)]
        config: Option<PathBuf>,
        /// Grid axis as start:stop:step in meters, or a single value.
        #[arg(long, allow_hyphen_values = true, requires_all = ["y", "z"])]
        x: Option<AxisConfig>,
        #[arg(long, allow_hyphen_values = true, requires_all = ["x", "z"])]
        y: Option<AxisConfig>,
        #[arg(long, allow_hyphen_values = true, requires_all = ["x", "y"])]
        z: Option<AxisConfig>,
        /// Slice plane through the peak; the two longest axes by default.
        #[arg(long, value_enum)]
        slice: Option<PlaneArg>,
        /// Output prefix.
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Sweep the plane-offset bound and report the point response.
    Psf {
        config: PathBuf,
        /// Comma-separated plane-offset bounds in cm.
        #[arg(long, value_delimiter = ',', default_value = "0,5,10,15,20")]
        dz_cm: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "y,z")]
        axes: Vec<String>,
        /// CSV output; stdout when absent.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Correlate two volumes and tabulate their peak offsets.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 1)]
        peaks: usize,
        #[arg(long, default_value_t = 0.01)]
        min_separation_m: f64,
        /// Peak offset CSV; stdout when absent.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Print a dump header.
    Inspect { dump: PathBuf },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PlaneArg {
    Xy,
    Xz,
    Yz,
}

impl From<PlaneArg> for SlicePlane {
    fn from(p: PlaneArg) -> Self {
        match p {
            PlaneArg::Xy => SlicePlane::Xy,
            PlaneArg::Xz => SlicePlane::Xz,
            PlaneArg::Yz => SlicePlane::Yz,
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config, out } => {
            let s = commands::cmd_simulate(&config, &out)?;
            println!("{} channels x {} frequencies -> {}", s.n_channels, s.n_frequencies, out.display());
        }
        Command::Reconstruct { dump, method, config, x, y, z, slice, out } => {
            let method: Option<Method> = method.as_deref().map(parse_method).transpose()?;
            let grid = match (x, y, z) {
                (Some(x), Some(y), Some(z)) => Some(GridConfig { x, y, z }),
                _ => None,
            };
            let opts = ReconstructOptions {
                method,
                config,
                grid,
                slice: slice.map(Into::into),
            };
            let s = commands::cmd_reconstruct(&dump, &opts, &out)?;
            let total: f64 = s.stages.iter().map(|t| t.seconds).sum();
            let p = s.volume.peak_position();
            println!("{}: peak at ({:.4}, {:.4}, {:.4}) m in {total:.3} s", s.method, p.x, p.y, p.z);
            for f in &s.files {
                println!("  {}", f.display());
            }
        }
        Command::Psf { config, dz_cm, axes, out } => {
            let axes = axes
                .iter()
                .map(|a| a.trim().parse::<Axis>())
                .collect::<mpms_core::Result<Vec<_>>>()
                .map_err(|e| CliError::Usage(e.to_string()))?;
            let rows = commands::cmd_psf(&config, &dz_cm, &axes, out.as_deref())?;
            if out.is_none() {
                print!("{}", commands::psf_csv(&rows));
            }
        }
        Command::Compare { a, b, peaks, min_separation_m, out } => {
            let s = commands::cmd_compare(&a, &b, peaks, min_separation_m, out.as_deref())?;
            println!("correlation {:.6}", s.correlation);
            println!("peaks within one voxel {}/{}", s.matched_within_voxel, s.n_peaks);
            if out.is_none() {
                print!("{}", s.peaks_csv);
            }
        }
        Command::Inspect { dump } => print!("{}", commands::cmd_inspect(&dump)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => "error",
        (false, 0) => "warn",
        (false, 1) => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MPMS_LOG", level)).init();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            log::warn!("thread pool: {e}");
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
