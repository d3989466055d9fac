//! `raftsim`: run simulations, sweeps and stationary solves from JSON
//! configurations.
//!
//! Exit status: 0 success, 1 I/O failure, 2 configuration error,
//! 3 numerical failure. `RAFTSIM_THREADS` caps the worker pool.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use raftsim_core::experiments::config::{ExchangeKind, InitialKind, ModelKind};
use raftsim_core::experiments::{self, ExperimentError, RunConfig};
use raftsim_core::Execution;

#[derive(Parser)]
#[command(name = "raftsim", version, about = "Bulk-surface lipid raft phase-field simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON run configuration; the reference configuration when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides the configuration).
    #[arg(long)]
    out: Option<PathBuf>,
    /// RNG seed for the initial data.
    #[arg(long)]
    seed: Option<u64>,
    /// Final time.
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    /// Run sweep members one after another.
    #[arg(long)]
    sequential: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Time-integrate the configured model.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Full model at several diffusivities against the reduced model.
    #[command(name = "sweep-D")]
    SweepD {
        #[command(flatten)]
        common: Common,
        #[arg(long = "d-list", value_delimiter = ',', default_value = "1,4,16,64")]
        d_list: Vec<f64>,
    },
    /// Reduced model at several affinity parameters against the Ohta-Kawasaki limit.
    #[command(name = "sweep-delta")]
    SweepDelta {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "0.2,0.1,0.05")]
        deltas: Vec<f64>,
    },
    /// Temporal and spatial self-convergence.
    Refine {
        #[command(flatten)]
        common: Common,
        #[arg(long = "n-list", value_delimiter = ',', default_value = "32,48,64")]
        n_list: Vec<usize>,
        /// Step sizes; a halving sequence from the configured dt when omitted.
        #[arg(long = "dt-list", value_delimiter = ',')]
        dt_list: Option<Vec<f64>>,
    },
    /// Solve for a stationary state of the reduced model.
    Stationary {
        #[command(flatten)]
        common: Common,
        /// Lipid mass `int phi`.
        #[arg(long = "m", allow_hyphen_values = true)]
        lipid_mass: Option<f64>,
        /// Total cholesterol mass.
        #[arg(long = "M", allow_hyphen_values = true)]
        cholesterol_mass: Option<f64>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        /// Exchange law: equilibrium, noneq or noneq_cutoff.
        #[arg(long)]
        law: Option<String>,
    },
}

fn load(common: &Common) -> Result<RunConfig, ExperimentError> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::reference(),
    };
    if let Some(out) = &common.out {
        cfg.output.dir = out.clone();
    }
    if let Some(seed) = common.seed {
        cfg.initial.seed = seed;
    }
    if let Some(t) = common.t_end {
        cfg.params.t_end = t;
    }
    Ok(cfg)
}

fn exec(common: &Common) -> Execution {
    if common.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn parse_law(name: &str) -> Result<ExchangeKind, ExperimentError> {
    serde_json::from_value(serde_json::Value::String(name.to_string()))
        .map_err(|_| ExperimentError::Config(format!("unknown exchange law '{name}'")))
}

fn configure_threads() -> Result<(), ExperimentError> {
    let Ok(raw) = std::env::var("RAFTSIM_THREADS") else { return Ok(()) };
    let n: usize =
        raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
            ExperimentError::Config(format!("RAFTSIM_THREADS must be a positive integer, got '{raw}'"))
        })?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| ExperimentError::Config(e.to_string()))?;
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

fn print_sweep(r: &experiments::SweepResult) {
    println!("{}", r.columns.join(","));
    for row in &r.rows {
        println!("{}", row.iter().map(f64::to_string).collect::<Vec<_>>().join(","));
    }
    match r.fit {
        Some(f) => {
            println!("slope of {} vs {}: {:.4} (residual {:.2e})", r.fit_column, r.parameter, f.slope, f.residual)
        }
        None => println!("no slope fit"),
    }
}

fn dispatch(cmd: Command) -> Result<(), ExperimentError> {
    configure_threads()?;
    match cmd {
        Command::Run { common } => {
            let cfg = load(&common)?;
            let s = experiments::run(&cfg)?;
            println!(
                "{} steps, {} rows, {} snapshots per field in {}",
                s.steps,
                s.csv_rows,
                s.snapshots,
                s.out_dir.display()
            );
        }
        Command::SweepD { common, d_list } => {
            let cfg = load(&common)?;
            let r = experiments::sweep_d(&cfg, &d_list, exec(&common))?;
            r.write(&cfg.output.dir, "sweep_D")?;
            print_sweep(&r);
        }
        Command::SweepDelta { common, deltas } => {
            let cfg = load(&common)?;
            let r = experiments::sweep_delta(&cfg, &deltas, exec(&common))?;
            r.write(&cfg.output.dir, "sweep_delta")?;
            print_sweep(&r);
        }
        Command::Refine { common, n_list, dt_list } => {
            let mut cfg = load(&common)?;
            if common.config.is_none() {
                cfg.model = ModelKind::Reduced;
                cfg.initial.kind = InitialKind::Smooth;
                cfg.params.t_end = common.t_end.unwrap_or(0.01);
            }
            let dt_list = dt_list.unwrap_or_else(|| (0..4).map(|k| cfg.params.dt / f64::from(1 << k)).collect());
            let r = experiments::refinement_study(&cfg, &n_list, &dt_list, exec(&common))?;
            r.temporal.write(&cfg.output.dir, "refine_dt")?;
            r.spatial.write(&cfg.output.dir, "refine_N")?;
            print_sweep(&r.temporal);
            print_sweep(&r.spatial);
        }
        Command::Stationary { common, lipid_mass, cholesterol_mass, eps, delta, law } => {
            let mut cfg = load(&common)?;
            cfg.model = ModelKind::Stationary;
            if common.config.is_none() {
                cfg.initial.kind = InitialKind::Raft;
            }
            if let Some(m) = lipid_mass {
                cfg.initial.lipid_mass = m;
            }
            if let Some(m) = cholesterol_mass {
                cfg.initial.cholesterol_mass = m;
            }
            if let Some(e) = eps {
                cfg.params.eps = e;
            }
            if let Some(d) = delta {
                cfg.params.delta = d;
            }
            if let Some(name) = law {
                cfg.exchange.kind = parse_law(&name)?;
                if cfg.exchange.kind == ExchangeKind::Equilibrium && cfg.exchange.c == 0.0 {
                    cfg.exchange.c = 1.0;
                }
            }
            let s = experiments::run(&cfg)?;
            println!("converged in {} iterations; results in {}", s.steps, s.out_dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("raftsim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
