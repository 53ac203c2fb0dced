/// `println!` that ignores closed pipes.
macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

mod commands;
mod render;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

/// Simulate, focus and characterize in-wall radar scans.
#[derive(Debug, Parser)]
#[command(name = "wallscan", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Algo {
    Rma,
    Bp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Inet,
    Mnet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Pol {
    Co,
    Cross,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate co- and cross-pol B-scans of a scene.
    Simulate {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        scan: PathBuf,
        /// Optional waveform JSON; defaults to the 7.29 GHz / 1.5 GHz pulse.
        #[arg(long)]
        waveform: Option<PathBuf>,
        /// Overrides the noise seed in the scan file.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Focus a simulated or recorded scan into a depth image.
    Focus {
        #[arg(long, value_enum, default_value = "rma")]
        algo: Algo,
        /// Assumed wall permittivity.
        #[arg(long)]
        eps: f64,
        /// Assumed probe speed, m/s.
        #[arg(long)]
        speed: f64,
        #[arg(long, value_enum, default_value = "co")]
        channel: Pol,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run CA-CFAR on a focused image.
    Detect {
        #[arg(long, default_value_t = 1e-4)]
        pfa: f64,
        #[arg(long, default_value_t = 8)]
        training: usize,
        #[arg(long, default_value_t = 2)]
        guard: usize,
        /// Ignore cells this many dB below the image peak; 0 disables.
        #[arg(long, default_value_t = 60.0)]
        dynamic_range: f64,
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Polarimetric and dispersion features for every detection.
    Features {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Write a seeded training dataset.
    ExportDataset {
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Localization error CDFs of detections against ground truth.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// CSV destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Failure classes, mapped to process exit codes.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Input(String),
    Numeric(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Input(_) => 2,
            Failure::Numeric(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Input(m) | Failure::Numeric(m) => m,
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate {
            scene,
            scan,
            waveform,
            seed,
            out,
        } => commands::simulate(&scene, &scan, waveform.as_deref(), seed, &out),
        Command::Focus {
            algo,
            eps,
            speed,
            channel,
            input,
            out,
        } => commands::focus(algo, eps, speed, channel, &input, &out),
        Command::Detect {
            pfa,
            training,
            guard,
            dynamic_range,
            input,
        } => commands::detect(pfa, training, guard, dynamic_range, &input),
        Command::Features { input } => commands::features(&input),
        Command::ExportDataset { kind, n, seed, out } => commands::export_dataset(kind, n, seed, &out),
        Command::Eval { pred, truth, out } => commands::eval(&pred, &truth, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
