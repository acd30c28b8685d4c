use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use vpme_core::experiments::{self, ExperimentConfig};
use vpme_core::{Result, VpmeError};

#[derive(Parser)]
#[command(name = "vpme", version, about = "Particle-in-cell experiments for the Vlasov-Poisson system with massless electrons")]
struct Cli {
    /// Experiment configuration (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output` from the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides `seed` from the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single run: diagnostics.csv and snapshots.
    Run,
    /// Paired runs from perturbed initial data: stability.csv, stability_fit.csv.
    Stability {
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.1, 0.05, 0.025])]
        eps: Vec<f64>,
        /// Seeds averaged per perturbation size.
        #[arg(long, default_value_t = 1)]
        trials: usize,
    },
    /// Mollified runs against the unmollified one: mollify.csv.
    Mollify {
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.2, 0.1, 0.05, 0.025])]
        radii: Vec<f64>,
    },
    /// Velocity moments along a run: moments.csv.
    Moments {
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 2.0, 4.0, 6.0])]
        orders: Vec<f64>,
    },
    /// Transport distance between two snapshots.
    W2 {
        file_a: PathBuf,
        file_b: PathBuf,
        /// Subsample size above which the distance is estimated.
        #[arg(long, default_value_t = 4000)]
        points: usize,
    },
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::from_path(path).map_err(|e| match e {
            VpmeError::Config { line, msg } => VpmeError::Usage(format!("{}:{line}: {msg}", path.display())),
            other => other,
        })?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output = out.clone();
    }
    Ok(cfg)
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("VPME_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| VpmeError::Usage(format!("VPME_THREADS must be a positive integer, got '{value}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| VpmeError::Usage(e.to_string()))
}

fn execute(cli: &Cli) -> Result<()> {
    configure_threads()?;
    if let Command::W2 { file_a, file_b, points } = &cli.command {
        let est = experiments::cmd_w2(file_a, file_b, *points)?;
        println!("w2 = {:.16e}", est.w2);
        println!("floor = {:.16e}", est.floor);
        println!("exact = {}", est.exact);
        return Ok(());
    }
    let cfg = load_config(cli)?;
    let out: &Path = &cfg.output;
    match &cli.command {
        Command::Run => {
            let s = experiments::cmd_run(&cfg, out)?;
            let first = s.records.first().map_or(0.0, |r| r.total);
            let drift = s
                .records
                .iter()
                .map(|r| ((r.total - first) / first).abs())
                .fold(0.0, f64::max);
            println!("steps = {} dt = {:.6e}", s.steps, s.dt);
            println!("max relative energy drift = {drift:.3e}");
            println!("wrote {}", out.join("diagnostics.csv").display());
        }
        Command::Stability { eps, trials } => {
            let s = experiments::cmd_stability(&cfg, out, eps, *trials)?;
            for r in &s.results {
                let sup = r.series.iter().map(|p| p.1).fold(0.0, f64::max);
                println!(
                    "eps = {:<8} sup w2 = {:.6e} C = {:.6e} residual = {:.3e}{}",
                    r.eps,
                    sup,
                    r.fit.c,
                    r.fit.residual,
                    if r.fit.floor_dominated { " (floor dominated)" } else { "" }
                );
            }
            if let Some(lip) = s.lipschitz {
                for r in &s.results {
                    println!("eps = {:<8} W1 growth rate = {:.6e} (Lipschitz {lip:.6e})", r.eps, r.w1_rate);
                }
            }
        }
        Command::Mollify { radii } => {
            for r in experiments::cmd_mollify(&cfg, out, radii)? {
                println!("r = {:<8} w2 = {:.6e} floor = {:.3e}", r.r, r.w2, r.floor);
            }
        }
        Command::Moments { orders } => {
            let t = experiments::cmd_moments(&cfg, out, orders)?;
            for (j, o) in t.orders.iter().enumerate() {
                println!("m{o}: initial = {:.6e} sup = {:.6e}", t.initial()[j], t.sup[j]);
            }
        }
        Command::W2 { .. } => unreachable!("handled above"),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_input_error() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
