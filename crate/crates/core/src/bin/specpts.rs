use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use specpts_core::experiments::{self, ExperimentConfig, ExperimentKind, EXIT_VALIDATION};
use specpts_core::lattice::LatticeParams;
use specpts_core::Error;

#[derive(Parser)]
#[command(name = "specpts", version, about = "Spectral invariants of point configurations and lattices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment; flags override values from --config.
    Run(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// sphere-simplex, torus-opt, lattice-sweep, dos, moments, interval or trajectory
    experiment: Option<String>,
    /// JSON experiment config
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    /// Kernel, e.g. exp:2, 1mexp:2, pow:0.5, neglog
    #[arg(long)]
    f: Option<String>,
    /// Objective, e.g. trace, lambdamax, -lambda2, 1/lambda2, interval(0.82,0.88)
    #[arg(long)]
    objective: Option<String>,
    /// Side of the periodic lattice graph
    #[arg(long = "N")]
    side: Option<usize>,
    /// Sweep grid as AxB
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    b_max: Option<f64>,
    /// square, triangular or a,b
    #[arg(long)]
    lattice: Option<String>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    center: Option<f64>,
    #[arg(long)]
    width: Option<f64>,
    #[arg(long)]
    jitter: Option<f64>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_grid(s: &str) -> Result<[usize; 2], Error> {
    let bad = || Error::Parse(format!("grid must look like 41x41, got {s:?}"));
    let (a, b) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    Ok([a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?])
}

fn parse_lattice(s: &str) -> Result<LatticeParams, Error> {
    match s {
        "square" => Ok(LatticeParams::square()),
        "triangular" => Ok(LatticeParams::triangular()),
        _ => {
            let bad = || Error::Parse(format!("lattice must be square, triangular or a,b; got {s:?}"));
            let (a, b) = s.split_once(',').ok_or_else(bad)?;
            LatticeParams::new(a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?)
        }
    }
}

fn build_config(a: RunArgs) -> Result<ExperimentConfig, Error> {
    let mut c = match (&a.config, &a.experiment) {
        (Some(path), name) => {
            let c = ExperimentConfig::from_file(path)?;
            if let Some(name) = name {
                if name.parse::<ExperimentKind>()? != c.experiment {
                    return Err(Error::BadSetting(format!("config is for {}, not {name}", c.experiment.name())));
                }
            }
            c
        }
        (None, Some(name)) => ExperimentConfig::new(name.parse()?),
        (None, None) => return Err(Error::BadSetting("give an experiment name or --config".into())),
    };
    if let Some(v) = a.n {
        c.n = Some(v);
    }
    if let Some(v) = a.f {
        c.f = Some(v.parse()?);
    }
    if let Some(v) = a.objective {
        c.objective = Some(v.parse()?);
    }
    if let Some(v) = a.side {
        c.side = Some(v);
    }
    if let Some(v) = a.grid {
        c.grid = Some(parse_grid(&v)?);
    }
    if let Some(v) = a.b_max {
        c.b_max = Some(v);
    }
    if let Some(v) = a.lattice {
        c.lattice = Some(parse_lattice(&v)?);
    }
    if let Some(v) = a.samples {
        c.samples = Some(v);
    }
    if let Some(v) = a.bins {
        c.bins = Some(v);
    }
    if let Some(v) = a.center {
        c.center = Some(v);
    }
    if let Some(v) = a.width {
        c.width = Some(v);
    }
    if let Some(v) = a.jitter {
        c.jitter = Some(v);
    }
    if let Some(v) = a.restarts {
        c.optimizer.restarts = v;
    }
    if let Some(v) = a.seed {
        c.optimizer.seed = v;
    }
    if let Some(v) = a.max_iter {
        c.optimizer.max_iter = v;
    }
    if let Some(v) = a.stride {
        c.optimizer.snapshot_stride = v;
    }
    if let Some(v) = a.out {
        c.out = Some(v);
    }
    Ok(c)
}

fn main() -> ExitCode {
    let Command::Run(args) = Cli::parse().command;
    if let Err(e) = experiments::init_thread_pool() {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_VALIDATION as u8);
    }
    let config = match build_config(args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_VALIDATION as u8);
        }
    };
    let report = experiments::run(&config);
    if let Some(o) = &report.outcome {
        for line in &o.report {
            println!("{line}");
        }
    }
    if let Some(e) = &report.manifest.error {
        eprintln!("error ({}): {e}", report.manifest.failure_stage.as_deref().unwrap_or("run"));
    }
    ExitCode::from(report.exit_code as u8)
}
