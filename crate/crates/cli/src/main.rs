use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use structune_cli::{
    cmd_norm, cmd_synth, exit, threads_from_env, wave_demo, CliError, CliResult, DemoConfig,
    GainsOverride, NormKind, SynthOverrides,
};

#[derive(Debug, Parser)]
#[command(
    name = "structune",
    version,
    about = "Structured H∞/H₂ controller synthesis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// H₂ or H∞ norm of a state-space system given as JSON.
    Norm {
        system: PathBuf,
        #[arg(long, value_enum, default_value = "hinf")]
        kind: NormKind,
        /// Relative tolerance of the H∞ iteration.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Solves a synthesis program given as JSON.
    Synth {
        program: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Random start drawn from this seed when the program has no x0.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        tol_gap: Option<f64>,
        #[arg(long)]
        tol_step: Option<f64>,
        #[arg(long)]
        cert_tol: Option<f64>,
        #[arg(long)]
        max_serious: Option<usize>,
    },
    /// Nominal and scheduled designs for the wave equation with simulations.
    WaveDemo {
        #[arg(long, default_value_t = 3.0)]
        q0: f64,
        #[arg(long, value_delimiter = ',', default_value = "2,3,4")]
        qs: Vec<f64>,
        #[arg(long, default_value = "wave_out")]
        out: PathBuf,
        /// JSON with `nominal`, `k1`, `k2` (and optionally `q0`) used
        /// instead of synthesis.
        #[arg(long)]
        gains_override: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Grid intervals of the PDE (time step 1/grid).
        #[arg(long, default_value_t = 400)]
        grid: usize,
        #[arg(long, default_value_t = 20.0)]
        horizon: f64,
        /// Ramp the reference smoothly over [0, RISE] instead of a unit step.
        #[arg(long)]
        rise: Option<f64>,
    },
}

fn run(cli: Cli) -> CliResult<(String, i32)> {
    match cli.command {
        Command::Norm { system, kind, tol } => Ok((cmd_norm(&system, kind, tol)?, exit::OK)),
        Command::Synth {
            program,
            out,
            seed,
            tol_gap,
            tol_step,
            cert_tol,
            max_serious,
        } => {
            let o = SynthOverrides {
                seed,
                tol_gap,
                tol_step,
                cert_tol,
                max_serious,
            };
            let r = cmd_synth(&program, &out, &o)?;
            Ok((r.stdout, r.code))
        }
        Command::WaveDemo {
            q0,
            qs,
            out,
            gains_override,
            seed,
            grid,
            horizon,
            rise,
        } => {
            let mut cfg = DemoConfig::new(out);
            cfg.q0 = q0;
            cfg.qs = qs;
            cfg.seed = seed;
            cfg.grid = grid;
            cfg.horizon = horizon;
            cfg.rise = rise;
            cfg.gains_override = gains_override
                .as_deref()
                .map(GainsOverride::load)
                .transpose()?;
            let t0 = Instant::now();
            let report = wave_demo(&cfg)?;
            eprintln!("wave-demo finished in {:.2} s", t0.elapsed().as_secs_f64());
            Ok((report.summary(), exit::OK))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = std::env::var("STRUCTUNE_THREADS").ok();
    let result = threads_from_env(threads.as_deref()).and_then(|n| {
        if let Some(n) = n {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| CliError::new(exit::FAILURE, "environment", e.to_string()))?;
        }
        run(cli)
    });
    match result {
        Ok((stdout, code)) => {
            print!("{stdout}");
            ExitCode::from(code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
