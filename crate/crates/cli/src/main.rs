use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use redist_cli::{
    config::ExperimentConfig, eval_checkpoint, parse_sweep, run, sweep, Method, PointKind,
};

#[derive(Parser)]
#[command(
    name = "redist",
    version,
    about = "Neural redistancing experiments and fast-marching baselines"
)]
struct Cli {
    /// Print training progress.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train or march one configuration and write its artifacts.
    Run(RunArgs),
    /// Run every configuration of a sweep file.
    Sweep {
        /// Sweep file (TOML with optional [matrix] and [[runs]]).
        config: PathBuf,
        /// Overrides `out` of every run; also receives the combined results.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fast-marching redistance on a uniform grid.
    Fmm {
        #[arg(long)]
        field: String,
        #[arg(long, default_value_t = 64)]
        grid: usize,
        #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(1..=2))]
        order: u8,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
    /// Error report of a saved network.
    EvalCheckpoint {
        checkpoint: PathBuf,
        #[arg(long)]
        field: String,
        /// Evaluation grid nodes per side.
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Print the field catalog.
    ListFields,
}

#[derive(Args)]
struct RunArgs {
    /// Base configuration; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    field: Option<String>,
    #[arg(long, value_enum)]
    method: Option<Method>,
    /// Uniform grid nodes per side.
    #[arg(long)]
    grid: Option<usize>,
    /// Use this many seeded random points instead of a grid.
    #[arg(long)]
    random: Option<usize>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs_cap: Option<usize>,
    /// Weight bound; 0 disables clipping.
    #[arg(long)]
    clip_m: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    run_id: Option<String>,
}

impl RunArgs {
    fn into_config(self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = self.field {
            c.field = v;
        }
        if let Some(v) = self.method {
            c.method = v;
        }
        if let Some(v) = self.grid {
            c.points.kind = PointKind::Uniform;
            c.points.n_per_side = v;
        }
        if let Some(v) = self.random {
            c.points.kind = PointKind::Random;
            c.points.count = Some(v);
        }
        if let Some(v) = self.width {
            c.net.width = v;
        }
        if let Some(v) = self.depth {
            c.net.depth = v;
        }
        if let Some(v) = self.seed {
            c.train.seed = v;
            c.points.seed = v;
        }
        if let Some(v) = self.epochs_cap {
            c.train.epoch_cap = v;
        }
        if let Some(v) = self.clip_m {
            c.train.clip_m = Some(v);
        }
        if let Some(v) = self.eta {
            c.train.eta = v;
        }
        if let Some(v) = self.out {
            c.out = v;
        }
        if let Some(v) = self.run_id {
            c.run_id = Some(v);
        }
        Ok(c)
    }
}

fn report(outcome: &redist_cli::RunOutcome) {
    let m = &outcome.manifest;
    match (&m.error, &m.report) {
        (Some(e), _) => eprintln!("run {} failed: {e}", m.run_id),
        (None, Some(r)) => println!(
            "{}: l2_u {:.4e}  linf_u {:.4e}  l2_v {:.4e}  linf_v {:.4e}  l2_v_gamma {:.4e}  ({:.1} s) -> {}",
            m.run_id,
            r.l2_u,
            r.linf_u,
            r.l2_v,
            r.linf_v,
            r.l2_v_gamma,
            m.wall_s,
            outcome.dir.display()
        ),
        (None, None) => {}
    }
    for c in m.checks.iter().filter(|c| !c.passed) {
        eprintln!(
            "check {} {}: {}",
            c.name,
            if c.enforced { "FAILED" } else { "not met" },
            c.detail
        );
    }
}

fn main_inner(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run(args) => {
            let cfg = args.into_config()?;
            let outcome = run(&cfg, cli.verbose)?;
            report(&outcome);
            Ok(outcome.ok())
        }
        Command::Sweep { config, out } => {
            let text = std::fs::read_to_string(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            let mut configs =
                parse_sweep(&text).with_context(|| format!("parsing {}", config.display()))?;
            if let Some(o) = &out {
                configs.iter_mut().for_each(|c| c.out = o.clone());
            }
            let dir = out.unwrap_or_else(|| configs[0].out.clone());
            let outcomes = sweep(&configs, &dir, cli.verbose)?;
            outcomes.iter().for_each(report);
            println!("results: {}", dir.join("results.csv").display());
            Ok(outcomes.iter().all(|o| o.ok()))
        }
        Command::Fmm {
            field,
            grid,
            order,
            out,
        } => {
            let cfg = ExperimentConfig {
                field,
                method: if order == 1 {
                    Method::Fmm1
                } else {
                    Method::Fmm2
                },
                out,
                points: redist_cli::config::PointsConfig {
                    n_per_side: grid,
                    ..Default::default()
                },
                ..Default::default()
            };
            let outcome = run(&cfg, cli.verbose)?;
            report(&outcome);
            Ok(outcome.ok())
        }
        Command::EvalCheckpoint {
            checkpoint,
            field,
            grid,
        } => {
            let (r, audit) = eval_checkpoint(&checkpoint, &field, grid)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&serde_json::json!({ "report": r, "audit": audit }))?
            );
            Ok(audit.passed())
        }
        Command::ListFields => {
            for name in redist::field::catalog_names() {
                println!("{name}");
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match main_inner(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
