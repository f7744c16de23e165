//! `carroll`: validate models, census leaves, build connections and integrate geodesics.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "carroll", version, about = "Carrollian Lie algebroid toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Method {
    LCompat,
    Carrollian,
    FrameParallel,
    TorsionFree,
    MinimalDirectSum,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Base {
    /// The zero connection.
    Zero,
    /// The `[connection]` table of the model file.
    File,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ForceKind {
    Particle,
    General,
}

#[derive(Subcommand)]
enum Command {
    /// Check the algebroid axioms and the kernel conditions at sample points.
    Validate {
        path: PathBuf,
        #[arg(long, default_value_t = 128)]
        samples: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Classify the leaf through every cell center of a grid.
    Leaves {
        path: PathBuf,
        /// Cells per axis, e.g. `21x21`.
        #[arg(long, default_value = "21x21")]
        grid: String,
        /// Threshold on |c| for points and freezing (default 1e-6 times the chart diagonal).
        #[arg(long)]
        eps: Option<f64>,
        /// CSV with one row per cell.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Construct a connection and report its residuals.
    Connect {
        path: PathBuf,
        #[arg(long, value_enum)]
        method: Method,
        #[arg(long, value_enum, default_value = "zero")]
        base: Base,
        /// JSON report (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
        /// CSV of Gamma^c_ab (1-based) at grid points.
        #[arg(long)]
        emit_gamma: Option<PathBuf>,
        /// Grid for `--emit-gamma`, nodes per axis.
        #[arg(long, default_value = "5")]
        gamma_grid: String,
        #[arg(long, default_value_t = 128)]
        samples: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// Samples used for the Bianchi residuals.
        #[arg(long, default_value_t = 16)]
        bianchi_samples: usize,
    },
    /// Integrate an A-path geodesic.
    Geodesic {
        path: PathBuf,
        /// `zero`, `file`, or a construction method applied to the zero connection.
        #[arg(long, default_value = "zero")]
        connection: String,
        /// Start point, comma separated.
        #[arg(long, allow_hyphen_values = true)]
        start: String,
        /// Initial fiber velocity, comma separated.
        #[arg(long, allow_hyphen_values = true)]
        alpha: String,
        /// Force components, comma separated, or `none`.
        #[arg(long, default_value = "none", allow_hyphen_values = true)]
        force: String,
        #[arg(long, value_enum, default_value = "general")]
        force_mode: ForceKind,
        #[arg(long = "t", default_value_t = 1.0)]
        t_end: f64,
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
        /// Tolerance of the particle/swifton classification.
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// Trajectory CSV (stdout, before the JSON line, when absent).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit a preset model file.
    Preset {
        name: String,
        /// `key=value`, repeatable.
        #[arg(long = "param", allow_hyphen_values = true)]
        params: Vec<String>,
        /// Output TOML (stdout when absent).
        #[arg(long)]
        emit: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate {
            path,
            samples,
            seed,
            tol,
        } => commands::validate(&path, samples, seed, tol),
        Command::Leaves { path, grid, eps, out } => commands::leaves(&path, &grid, eps, out.as_deref()),
        Command::Connect {
            path,
            method,
            base,
            out,
            emit_gamma,
            gamma_grid,
            samples,
            seed,
            tol,
            bianchi_samples,
        } => commands::connect(&commands::ConnectArgs {
            path,
            method,
            base,
            out,
            emit_gamma,
            gamma_grid,
            samples,
            seed,
            tol,
            bianchi_samples,
        }),
        Command::Geodesic {
            path,
            connection,
            start,
            alpha,
            force,
            force_mode,
            t_end,
            dt,
            tol,
            out,
        } => commands::geodesic(&commands::GeodesicArgs {
            path,
            connection,
            start,
            alpha,
            force,
            force_mode,
            t_end,
            dt,
            tol,
            out,
        }),
        Command::Preset { name, params, emit } => commands::preset(&name, &params, emit.as_deref()),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code as u8)
        }
    }
}
