//! `bst`: simulate, measure and analyse pulse-mode / frequency-bin
//! hyper-entangled photon pairs from a JSON pipeline config.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;

use bst_core::hom::{Interval, ParamName};
use clap::{Args, Parser, Subcommand};
use error::{CliError, CliResult};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "bst",
    version,
    about = "Hyper-entangled biphoton simulation and analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Pipeline config (JSON); built-in defaults otherwise.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed; overrides `mc.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize the state and write its JSA, JSI and Schmidt analysis.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Bin-map phase; overrides `state.phase_phi_p`.
        #[arg(long, allow_hyphen_values = true)]
        phi: Option<String>,
    },
    /// Time-of-flight measurement of the simulated JSI.
    Tofs {
        #[command(flatten)]
        common: Common,
        /// Number of emitted pairs.
        #[arg(long, default_value_t = 10_000_000)]
        pairs: u64,
    },
    /// Theory interferograms with 3-sigma bands, one file per phase.
    Hom {
        #[command(flatten)]
        common: Common,
        /// Phases, e.g. `0,pi/2,pi`; overrides `hom.phis`.
        #[arg(long, allow_hyphen_values = true)]
        phi: Option<String>,
        /// Also write Poisson-sampled interferograms.
        #[arg(long)]
        sample: bool,
    },
    /// Fit the interferogram model to a measured curve.
    Fit {
        /// CSV with delay_ps (or position_mm) and counts.
        data: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Initial value, `name=value` (names: N, V, delta, sigma, phi).
        #[arg(long = "init", value_parser = commands::parse_init)]
        inits: Vec<(ParamName, f64)>,
        /// Bounds, `name=lo:hi`; an empty side is unbounded.
        #[arg(long = "bound", value_parser = commands::parse_bound)]
        bounds: Vec<(ParamName, Interval)>,
    },
    /// Infer the JSA, its Schmidt number and the state phase.
    Infer {
        /// Intensity map CSV (wavelength1_nm, wavelength2_nm, value).
        jsi: PathBuf,
        /// HOM fit result written by `fit`.
        fit: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Candidate phases; overrides `hom.candidates`.
        #[arg(long, allow_hyphen_values = true)]
        phi: Option<String>,
        /// Monte Carlo rounds; overrides `mc.rounds`.
        #[arg(long)]
        rounds: Option<usize>,
    },
}

fn setup_threads() -> CliResult<()> {
    let Ok(v) = std::env::var("BST_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::Config(format!(
            "BST_THREADS must be a positive integer (got {v:?})"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}

fn phases(s: &str) -> CliResult<Vec<f64>> {
    config::parse_phase_list(s).map_err(|e| CliError::Config(format!("--phi: {e}")))
}

struct Context {
    cfg: config::PipelineConfig,
    out: PathBuf,
    seed: u64,
}

fn context(common: &Common) -> CliResult<Context> {
    let cfg = config::load_config(common.config.as_deref())?;
    let out = common.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    let seed = common.seed.unwrap_or(cfg.mc.seed);
    Ok(Context { cfg, out, seed })
}

fn run(cli: Cli) -> CliResult<()> {
    setup_threads()?;
    match cli.command {
        Command::Simulate { common, phi } => {
            let mut ctx = context(&common)?;
            if let Some(p) = phi {
                match phases(&p)?.as_slice() {
                    [one] => ctx.cfg.state.phase_phi_p = *one,
                    _ => return Err(CliError::Config("--phi takes a single phase here".into())),
                }
                ctx.cfg.validate()?;
            }
            commands::simulate(&ctx.cfg, &ctx.out)
        }
        Command::Tofs { common, pairs } => {
            let ctx = context(&common)?;
            commands::tofs(&ctx.cfg, &ctx.out, pairs, ctx.seed)
        }
        Command::Hom {
            common,
            phi,
            sample,
        } => {
            let ctx = context(&common)?;
            let list = match phi {
                Some(p) => phases(&p)?,
                None => ctx.cfg.hom.phis.clone(),
            };
            commands::hom(&ctx.cfg, &ctx.out, &list, sample.then_some(ctx.seed))
        }
        Command::Fit {
            data,
            common,
            inits,
            bounds,
        } => {
            let ctx = context(&common)?;
            commands::fit(&data, &ctx.out, &inits, &bounds)
        }
        Command::Infer {
            jsi,
            fit,
            common,
            phi,
            rounds,
        } => {
            let ctx = context(&common)?;
            let candidates = match phi {
                Some(p) => phases(&p)?,
                None => ctx.cfg.candidates(),
            };
            if candidates.len() < 2 {
                return Err(CliError::Config(
                    "need at least two candidate phases".into(),
                ));
            }
            let rounds = rounds.unwrap_or(ctx.cfg.mc.rounds);
            if rounds < 2 {
                return Err(CliError::Config("--rounds must be at least 2".into()));
            }
            commands::infer(
                &ctx.cfg,
                commands::InferArgs {
                    jsi: &jsi,
                    fit: &fit,
                    out: &ctx.out,
                    rounds,
                    seed: ctx.seed,
                    candidates,
                },
            )
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bst: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
