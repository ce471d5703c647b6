//! Command-line driver.
//!
//! Exit codes: 0 success; 1 bad configuration or rejected input; 2 the
//! inversion stalled; 3 a hypothesis-violating critical point; 4 the audit
//! found a contradiction; 5 the coercivity/escape probe failed; 6 no
//! mountain geometry between the anchors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;

use commands::{cmd_audit, cmd_demo, cmd_invert, cmd_mpass, cmd_probe, error_exit_code};
use config::{parse_vector, ProblemConfig};

#[derive(Parser)]
#[command(name = "varinv", version, about = "Global inversion of nonlinear maps")]
struct Cli {
    /// Problem configuration file (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for report files.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Overrides the seed from the configuration file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Suppresses the stdout summary.
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solves F(x) = target for the configured problem.
    Invert,
    /// Audits a claimed collision F(x1) = F(x2).
    Audit {
        /// First point, comma-separated.
        #[arg(long, allow_hyphen_values = true)]
        x1: String,
        /// Second point, comma-separated.
        #[arg(long, allow_hyphen_values = true)]
        x2: String,
    },
    /// Runs the ray-growth and escape probes on the configured problem.
    Probe,
    /// Saddle search between two anchors.
    Mpass {
        #[arg(long, allow_hyphen_values = true)]
        anchor_a: String,
        #[arg(long, allow_hyphen_values = true)]
        anchor_b: String,
    },
    /// Runs a named end-to-end reproduction.
    Demo { name: String },
}

fn load_config(cli: &Cli) -> varinv::Result<ProblemConfig> {
    let path = cli.config.as_ref().ok_or_else(|| {
        varinv::Error::Config("--config is required for this command".into())
    })?;
    let mut cfg = ProblemConfig::from_file(path)?;
    if let Some(seed) = cli.seed {
        cfg.solver.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> varinv::Result<i32> {
    match &cli.command {
        Command::Invert => cmd_invert(&load_config(cli)?, &cli.out, cli.quiet),
        Command::Audit { x1, x2 } => {
            let cfg = load_config(cli)?;
            cmd_audit(&cfg, &parse_vector(x1)?, &parse_vector(x2)?, &cli.out, cli.quiet)
        }
        Command::Probe => cmd_probe(&load_config(cli)?, &cli.out, cli.quiet),
        Command::Mpass { anchor_a, anchor_b } => {
            let cfg = load_config(cli)?;
            cmd_mpass(
                &cfg,
                &parse_vector(anchor_a)?,
                &parse_vector(anchor_b)?,
                &cli.out,
                cli.quiet,
            )
        }
        Command::Demo { name } => cmd_demo(name),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(error_exit_code(&err) as u8)
        }
    }
}
