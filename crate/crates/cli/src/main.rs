//! Configuration-driven experiment runner.
//!
//! Exit codes: 0 pass, 1 quantitative fail, 2 usage or configuration
//! error, 3 internal numeric failure.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Context;
use config::ExperimentConfig;
use diskray::Error;

#[derive(Parser)]
#[command(
    name = "diskray",
    version,
    about = "Geodesic flows, sphere-bundle calculus and X-ray transforms on the unit disk"
)]
struct Cli {
    /// JSON configuration file; flags below override individual fields.
    #[arg(long, global = true)]
    config: Option<String>,

    /// Bundle grid as "radii,angles,fiber".
    #[arg(long, global = true)]
    grid: Option<String>,

    /// Inflow rays as "boundary,angles".
    #[arg(long, global = true)]
    rays: Option<String>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Pixel basis cells per side (forward matrix).
    #[arg(long, global = true)]
    basis: Option<usize>,

    /// Tikhonov regularization weight.
    #[arg(long, global = true)]
    lambda_reg: Option<f64>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<String>,

    /// Compare against (or bootstrap) a stored baseline.
    #[arg(long, global = true)]
    golden: Option<String>,

    /// Pin the worker pool to a single thread.
    #[arg(long, global = true)]
    deterministic: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Composite simplicity verdict (coercivity, uniqueness, travel time).
    Simplicity,
    /// Identity checks: pestov, commutator, cancellation, santalo, mollify.
    Verify {
        #[arg(long, value_delimiter = ',')]
        checks: Vec<String>,
    },
    /// Forward transform of the built-in phantom to a sinogram.
    Transform {
        /// Also dump the first N traced rays as CSV plus a manifest.
        #[arg(long)]
        dump_rays: Option<usize>,
    },
    /// Assemble the forward matrix and reconstruct the phantom.
    Invert,
    /// Smoothing convergence table across the configured scales.
    MollifyStudy,
}

fn parse_triple(s: &str) -> Result<(usize, usize, usize), Error> {
    let parts: Vec<_> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(Error::usage(format!(
            "expected three comma-separated values, got '{s}'"
        )));
    }
    let mut out = [0usize; 3];
    for (o, p) in out.iter_mut().zip(&parts) {
        *o = p
            .trim()
            .parse()
            .map_err(|e| Error::usage(format!("bad value '{p}': {e}")))?;
    }
    Ok((out[0], out[1], out[2]))
}

fn parse_pair(s: &str) -> Result<(usize, usize), Error> {
    let parts: Vec<_> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(Error::usage(format!(
            "expected two comma-separated values, got '{s}'"
        )));
    }
    let a = parts[0]
        .trim()
        .parse()
        .map_err(|e| Error::usage(format!("bad value '{}': {e}", parts[0])))?;
    let b = parts[1]
        .trim()
        .parse()
        .map_err(|e| Error::usage(format!("bad value '{}': {e}", parts[1])))?;
    Ok((a, b))
}

fn run(cli: Cli) -> Result<i32, Error> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(grid) = &cli.grid {
        cfg.grid = parse_triple(grid)?;
    }
    if let Some(rays) = &cli.rays {
        cfg.rays = parse_pair(rays)?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(basis) = cli.basis {
        cfg.basis = basis;
    }
    if let Some(lambda) = cli.lambda_reg {
        cfg.lambda_reg = lambda;
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    if cli.deterministic {
        cfg.deterministic = true;
    }
    cfg.validate()?;
    if cfg.deterministic {
        // All reductions are order-deterministic already; pinning to one
        // thread additionally serializes the schedule.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build_global();
    }
    let ctx = Context::new(cfg, cli.golden.clone())?;
    match &cli.command {
        Command::Simplicity => commands::cmd_simplicity(&ctx),
        Command::Verify { checks } => commands::cmd_verify(&ctx, checks),
        Command::Transform { dump_rays } => commands::cmd_transform(&ctx, *dump_rays),
        Command::Invert => commands::cmd_invert(&ctx),
        Command::MollifyStudy => commands::cmd_mollify_study(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::Usage(_) | Error::Data(_) | Error::Serde(_) | Error::Io(_) => 2,
                Error::Numeric(_) => 3,
                Error::OutsideDomain(_)
                | Error::NotPositiveDefinite { .. }
                | Error::AlphaTooSmall { .. } => 3,
            };
            ExitCode::from(code)
        }
    }
}
