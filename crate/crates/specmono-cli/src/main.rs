//! Command-line driver for the spectral monodromy pipeline: synthesize
//! eigenvalue lattices over a ball cover, fit micro-charts, assemble the
//! transition cocycle and loop holonomies, and run the normal-form, joint
//! spectrum and classical period engines.
//!
//! Exit codes: 0 success, 1 computation failure, 2 configuration or regime
//! violation, 3 I/O failure. Every error path prints a single machine-
//! parsable line `error[<kind>]: <diagnostics>` to stderr.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{BnfArgs, LoopSpec, Mode2, Pair};

#[derive(Parser)]
#[command(
    name = "specmono",
    version,
    about = "Spectral monodromy of weakly non-selfadjoint integrable systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize spectrum files over a ball cover and write a manifest
    Synth {
        /// Run configuration file
        #[arg(long)]
        config: PathBuf,
    },
    /// Fit micro-charts to the synthesized clouds and write a chart report
    Fit {
        /// Run configuration file
        #[arg(long)]
        config: PathBuf,
    },
    /// Assemble the transition cocycle and report loop holonomies
    Monodromy {
        /// Run configuration file
        #[arg(long)]
        config: PathBuf,
    },
    /// Normalize a symbol series over a Diophantine torus
    Bnf {
        /// Normalization order
        #[arg(long, default_value_t = 6)]
        order: u32,
        /// Diophantine constant
        #[arg(long, default_value_t = 1e-2)]
        alpha: f64,
        /// Diophantine exponent
        #[arg(long, default_value_t = 2.0)]
        d: f64,
        /// Largest denominator checked by the Diophantine test
        #[arg(long, default_value_t = specmono::birkhoff::DEFAULT_Q_MAX)]
        qmax: u64,
        /// Base frequency component a1 (also the input's linear xi1 coefficient)
        #[arg(long, default_value_t = 1.0)]
        a1: f64,
        /// Base frequency component a2
        #[arg(long, default_value_t = 0.6180339887498949)]
        a2: f64,
        /// Twist strength of the built-in symbol (ignored with --input)
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        /// Injected oscillatory mode k1,k2 of the built-in symbol
        #[arg(long, value_parser = commands::parse_mode, default_value = "1,0")]
        mode: Mode2,
        /// Coefficient of the injected mode
        #[arg(long, default_value_t = 0.1)]
        coeff: f64,
        /// Weight cut of the built-in symbol
        #[arg(long, default_value_t = 10)]
        nmax: u32,
        /// Fourier cut of the built-in symbol
        #[arg(long, default_value_t = 16)]
        kmax: i32,
        /// Normalize a formalseries v1 file instead of the built-in symbol
        #[arg(long)]
        input: Option<PathBuf>,
        /// Write the normal form as formalseries v1
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Identify the joint spectrum of a commuting symmetric pair
    NormalJoint {
        /// jointpair v1 input file
        #[arg(long)]
        input: PathBuf,
    },
    /// Evaluate classical period data and loop monodromy
    Classical {
        /// Evaluate period lattice and action at the regular value j,e
        #[arg(long, value_parser = commands::parse_point)]
        point: Option<Pair>,
        /// Walk the circle cx,cy,radius,nsteps and report its monodromy
        #[arg(long, value_parser = commands::parse_loop)]
        r#loop: Option<LoopSpec>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth { config } => commands::cmd_synth(&config),
        Command::Fit { config } => commands::cmd_fit(&config),
        Command::Monodromy { config } => commands::cmd_monodromy(&config),
        Command::Bnf {
            order,
            alpha,
            d,
            qmax,
            a1,
            a2,
            gamma,
            mode,
            coeff,
            nmax,
            kmax,
            input,
            output,
        } => commands::cmd_bnf(&BnfArgs {
            order,
            alpha,
            d,
            qmax,
            a1,
            a2,
            gamma,
            mode,
            coeff,
            nmax,
            kmax,
            input,
            output,
        }),
        Command::NormalJoint { input } => commands::cmd_normal_joint(&input),
        Command::Classical { point, r#loop } => commands::cmd_classical(point, r#loop),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", e.kind(), e.message());
            ExitCode::from(e.code())
        }
    }
}
