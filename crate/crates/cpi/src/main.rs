use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cpi::commands::{self, BenchSelect, CliError, DepthSpec, GridSpec, LambdaArg, Solver};
use cpi::config::DetectorMode;

#[derive(Parser)]
#[command(
    name = "cpi",
    version,
    about = "Correlation plenoptic imaging simulator and reconstruction tool"
)]
struct Cli {
    /// Upper bound on worker threads.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Mlem,
    Art,
}

#[derive(Clone, Copy, ValueEnum)]
enum BenchModeArg {
    NaiveFloat,
    BitPacked,
    Both,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct DepthArgs {
    /// Single refocus depth (mm).
    #[arg(long)]
    depth: Option<f64>,
    /// Depth stack `s1..s2:k`.
    #[arg(long)]
    stack: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate frame pairs from a run configuration.
    Simulate {
        config: PathBuf,
        #[arg(long)]
        frames: Option<u64>,
        #[arg(long, conflicts_with = "analog")]
        binary: bool,
        #[arg(long)]
        analog: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Accumulate the correlation tensor of a frames directory.
    Correlate {
        frames: PathBuf,
        #[arg(long, default_value_t = 1)]
        binning: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Refocus a correlation tensor onto one or more planes.
    Refocus {
        gamma: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        depth: DepthArgs,
        /// Sample every slice on the grid conjugate to this depth (mm).
        #[arg(long)]
        grid_depth: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compressive reconstruction from a random subset of frames.
    Cs {
        frames: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        fraction: f64,
        #[arg(long)]
        depth: f64,
        /// Penalty value or `cv`.
        #[arg(long, default_value = "cv")]
        lambda: String,
        #[arg(long, default_value_t = 1)]
        downsample: usize,
        #[arg(long, default_value_t = 1)]
        stride: usize,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Absorption tomography from a tensor and an object-free reference.
    Tomo {
        gamma: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// `nx,ny,nz,pitch_xy,z0,z1`.
        #[arg(long)]
        grid: String,
        #[arg(long, value_enum, default_value = "mlem")]
        solver: SolverArg,
        #[arg(long, default_value_t = 100)]
        iters: usize,
        #[arg(long, default_value_t = 1.0)]
        relaxation: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Image statistics, optionally against a reference image.
    Metrics {
        image: PathBuf,
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        frame: usize,
        #[arg(long, default_value_t = 1.0)]
        pitch: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Accumulation throughput of the float and bit-packed paths.
    Bench {
        frames: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "both")]
        mode: BenchModeArg,
        #[arg(long, default_value_t = 10_000)]
        synthetic_frames: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<cpi::Report, CliError> {
    let workers = cli.workers.unwrap_or_else(|| {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    });
    if workers == 0 {
        return Err(CliError::Usage("--workers must be at least 1".into()));
    }
    match cli.command {
        Command::Simulate {
            config,
            frames,
            binary,
            analog,
            out,
        } => commands::simulate(&commands::SimulateArgs {
            config,
            frames,
            mode: match (binary, analog) {
                (true, _) => Some(DetectorMode::Binary),
                (_, true) => Some(DetectorMode::Analog),
                _ => None,
            },
            out,
            workers,
        }),
        Command::Correlate {
            frames,
            binning,
            out,
        } => commands::correlate(&commands::CorrelateArgs {
            frames,
            binning,
            out,
            workers,
        }),
        Command::Refocus {
            gamma,
            config,
            depth,
            grid_depth,
            out,
        } => {
            let depths = match (depth.depth, depth.stack) {
                (Some(s), _) => DepthSpec::Single(s),
                (_, Some(st)) => DepthSpec::parse_stack(&st)?,
                _ => unreachable!("clap enforces one depth argument"),
            };
            commands::refocus(&commands::RefocusArgs {
                gamma,
                config,
                depths,
                grid_depth,
                out,
            })
        }
        Command::Cs {
            frames,
            config,
            fraction,
            depth,
            lambda,
            downsample,
            stride,
            folds,
            seed,
            out,
        } => commands::cs(&commands::CsArgs {
            frames,
            config,
            fraction,
            depth,
            lambda: LambdaArg::parse(&lambda)?,
            downsample,
            stride,
            folds,
            seed,
            out,
            workers,
        }),
        Command::Tomo {
            gamma,
            reference,
            config,
            grid,
            solver,
            iters,
            relaxation,
            out,
        } => commands::tomo(&commands::TomoArgs {
            gamma,
            reference,
            config,
            grid: GridSpec::parse(&grid)?,
            solver: match solver {
                SolverArg::Mlem => Solver::Mlem,
                SolverArg::Art => Solver::Art,
            },
            iters,
            relaxation,
            out,
        }),
        Command::Metrics {
            image,
            reference,
            frame,
            pitch,
            out,
        } => commands::metrics(&commands::MetricsArgs {
            image,
            reference,
            frame,
            pitch,
            out,
        }),
        Command::Bench {
            frames,
            mode,
            synthetic_frames,
            seed,
            out,
        } => commands::bench(&commands::BenchArgs {
            frames,
            mode: match mode {
                BenchModeArg::NaiveFloat => BenchSelect::NaiveFloat,
                BenchModeArg::BitPacked => BenchSelect::BitPacked,
                BenchModeArg::Both => BenchSelect::Both,
            },
            synthetic_frames,
            dims_a: (256, 256),
            dims_b: (16, 16),
            seed,
            out,
        }),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(report) => {
            print!("{report}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
