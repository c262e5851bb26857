//! `specrig`: singular-spectrum rigidity analysis for matrix chains.
//!
//! Exit codes: 0 when every theorem check passes, 1 on an inequality
//! violation, 2 on input or configuration errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use spectral_rigidity::cli;

#[derive(Parser)]
#[command(
    name = "specrig",
    version,
    about = "Spectral rigidity analysis for chains of square matrices"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit exponent charts and evaluate every rigidity inequality on a chain
    Analyze {
        /// TOML config file (defaults apply when omitted)
        #[arg(long)]
        config: Option<PathBuf>,
        /// Manifest listing matrix files in chain order
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Matrix files (CCA1 containers or whitespace text), in chain order
        files: Vec<PathBuf>,
        /// Write report.tsv / report.json / series files here instead of stdout
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Generate a seeded synthetic chain and write it with a manifest
    Synth {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Print orbit coordinates g, g', variance, Fisher information, entropy
    Orbit {
        /// Matrix side length
        #[arg(long)]
        d: usize,
        /// Comma-separated exponent list
        #[arg(long, value_delimiter = ',', required = true)]
        alphas: Vec<f64>,
    },
    /// Energy measures, truncation ranks, tail residuals, and transitions
    Rank {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
        files: Vec<PathBuf>,
    },
    /// Run the randomized theorem-inequality suite; exit 1 on any violation
    Verify {
        /// Number of seeded random chains
        #[arg(long, default_value_t = 100)]
        seeds: u64,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    // behave like a conventional unix filter when the output pipe closes
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Analyze {
            config,
            manifest,
            files,
            out_dir,
        } => cli::run_analyze(
            config.as_deref(),
            manifest.as_deref(),
            files,
            out_dir.as_deref(),
        ),
        Command::Synth { config, out_dir } => {
            cli::run_synth(config.as_deref(), out_dir).map(|()| true)
        }
        Command::Orbit { d, alphas } => cli::run_orbit(*d, alphas).map(|()| true),
        Command::Rank {
            config,
            manifest,
            files,
        } => cli::run_rank(config.as_deref(), manifest.as_deref(), files),
        Command::Verify { seeds, config } => cli::run_verify(*seeds, config.as_deref()),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("specrig: theorem-inequality violation detected");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("specrig: {e}");
            ExitCode::from(2)
        }
    }
}
