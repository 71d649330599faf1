//! Config-driven experiment runner behind the `specpts` binary.
//!
//! Each [`ExperimentKind`] maps to one computation. Results go to an output
//! directory as CSV/JSON together with a `manifest.json` that is written even
//! when the run fails.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::geometry::{all_pair_distances_sq, jittered, random_config, triangular_canvas_config, ManifoldSpec};
use crate::gradients::value;
use crate::kernel::WeightFunction;
use crate::lattice::{self, LatticeParams, SweepGrid};
use crate::optimize::{bfgs_minimize, multi_start, OptimizeSettings, RunResult};
use crate::output::{config_hash, csv_string, emit_contour, emit_dos, emit_traj, fmt_f64, Manifest};
use crate::spectral::{evaluate, Invariant, Objective, Sense};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    SphereSimplex,
    TorusOpt,
    LatticeSweep,
    Dos,
    Moments,
    Interval,
    Trajectory,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::SphereSimplex => "sphere-simplex",
            ExperimentKind::TorusOpt => "torus-opt",
            ExperimentKind::LatticeSweep => "lattice-sweep",
            ExperimentKind::Dos => "dos",
            ExperimentKind::Moments => "moments",
            ExperimentKind::Interval => "interval",
            ExperimentKind::Trajectory => "trajectory",
        }
    }
}

impl std::str::FromStr for ExperimentKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(Value::String(s.to_string())).map_err(|_| Error::Parse(format!("unknown experiment {s:?}")))
    }
}

/// Everything an experiment reads. Fields left unset take per-experiment
/// defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Ambient dimension for sphere runs; defaults to `n - 1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sphere_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<WeightFunction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<Objective>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    /// Side `N` of the periodic lattice graph.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice: Option<LatticeParams>,
    /// Quadrature grid size `M`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
    /// Noise amplitude added to the triangular start of the interval run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jitter: Option<f64>,
    #[serde(default)]
    pub optimizer: OptimizeSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind) -> Self {
        ExperimentConfig {
            experiment,
            n: None,
            sphere_dim: None,
            f: None,
            objective: None,
            center: None,
            width: None,
            side: None,
            grid: None,
            b_max: None,
            lattice: None,
            samples: None,
            bins: None,
            jitter: None,
            optimizer: OptimizeSettings::default(),
            out: None,
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    fn kernel(&self, default: &str) -> WeightFunction {
        self.f.unwrap_or_else(|| default.parse().expect("default kernel"))
    }

    fn objective_or(&self, default: &str) -> Objective {
        self.objective.unwrap_or_else(|| default.parse().expect("default objective"))
    }

    fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("specpts-out"))
    }
}

/// What a finished experiment produced.
#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub summary: Value,
    pub artifacts: Vec<PathBuf>,
    /// Human-readable report lines.
    pub report: Vec<String>,
}

/// Result of [`run`]: exit code and the manifest that was written.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub exit_code: i32,
    pub manifest: Manifest,
    pub outcome: Option<Outcome>,
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

fn exit_code_for(e: &Error) -> i32 {
    if e.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_VALIDATION
    }
}

/// Validates, runs and records one experiment. The manifest is written to
/// the output directory in every case.
pub fn run(config: &ExperimentConfig) -> RunReport {
    let out = config.out_dir();
    let mut stage = "validate";
    let result = validate(config).and_then(|_| {
        fs::create_dir_all(&out)?;
        stage = "compute";
        execute(config, &out)
    });
    let (exit_code, failure_stage, error, outcome) = match result {
        Ok(o) => (EXIT_OK, None, None, Some(o)),
        Err(e) => (exit_code_for(&e), Some(stage.to_string()), Some(e.to_string()), None),
    };
    let manifest = Manifest {
        experiment: config.experiment.name().to_string(),
        config: serde_json::to_value(config).expect("config serializes"),
        config_hash: config_hash(config),
        seed: config.optimizer.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        status: if exit_code == EXIT_OK { "ok" } else { "failed" }.to_string(),
        exit_code,
        failure_stage,
        error,
        artifacts: outcome
            .as_ref()
            .map(|o| o.artifacts.iter().map(|p| p.file_name().unwrap_or_default().to_string_lossy().into_owned()).collect())
            .unwrap_or_default(),
        summary: outcome.as_ref().map(|o| o.summary.clone()).unwrap_or(Value::Null),
    };
    let exit_code = match manifest.write(&out) {
        Ok(_) => exit_code,
        Err(_) if exit_code == EXIT_OK => EXIT_VALIDATION,
        Err(_) => exit_code,
    };
    RunReport { exit_code, manifest, outcome }
}

fn bad(msg: impl Into<String>) -> Error {
    Error::BadSetting(msg.into())
}

/// Checks the settings an experiment depends on before any work starts.
pub fn validate(c: &ExperimentConfig) -> Result<()> {
    c.optimizer.validate()?;
    if let Some(n) = c.n {
        if n < 2 {
            return Err(Error::TooFewPoints { min: 2, got: n });
        }
    }
    match c.experiment {
        ExperimentKind::SphereSimplex => {
            let n = c.n.unwrap_or(4);
            let dim = c.sphere_dim.unwrap_or(n.saturating_sub(1));
            ManifoldSpec::sphere(dim)?;
        }
        ExperimentKind::LatticeSweep => {
            let side = c.side.unwrap_or(10);
            if side < 4 || !side.is_multiple_of(2) {
                return Err(Error::BadTorusSize(side));
            }
            if let Some(b) = c.b_max {
                if !(b >= 3f64.sqrt() / 2.0) {
                    return Err(bad("b_max must be at least sqrt(3)/2"));
                }
            }
        }
        ExperimentKind::Dos | ExperimentKind::Moments => {
            if c.samples == Some(0) || c.bins == Some(0) {
                return Err(bad("samples and bins must be positive"));
            }
        }
        ExperimentKind::Interval => {
            interval_rows(c.n.unwrap_or(100))?;
            Invariant::interval_centered(c.center.unwrap_or(0.85), c.width.unwrap_or(0.06))?;
        }
        ExperimentKind::TorusOpt | ExperimentKind::Trajectory => {}
    }
    Ok(())
}

fn interval_rows(n: usize) -> Result<usize> {
    let rows = (n as f64).sqrt().round() as usize;
    if rows * rows != n || !rows.is_multiple_of(2) {
        return Err(bad(format!("interval runs need n = rows² with rows even, got {n}")));
    }
    Ok(rows)
}

fn execute(c: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    match c.experiment {
        ExperimentKind::SphereSimplex => sphere_simplex(c, out),
        ExperimentKind::TorusOpt => torus_opt(c, out),
        ExperimentKind::LatticeSweep => lattice_sweep(c, out),
        ExperimentKind::Dos => dos(c, out),
        ExperimentKind::Moments => moments(c, out),
        ExperimentKind::Interval => interval(c, out),
        ExperimentKind::Trajectory => trajectory(c, out),
    }
}

fn write(out: &Path, name: &str, contents: &str, artifacts: &mut Vec<PathBuf>) -> Result<()> {
    let p = out.join(name);
    fs::write(&p, contents)?;
    artifacts.push(p);
    Ok(())
}

fn runs_csv(runs: &[RunResult]) -> String {
    let rows: Vec<Vec<String>> = runs
        .iter()
        .enumerate()
        .map(|(r, run)| {
            vec![
                r.to_string(),
                fmt_f64(run.value),
                fmt_f64(run.invariant_value),
                run.d_min.map(fmt_f64).unwrap_or_default(),
                run.iterations.to_string(),
                serde_json::to_value(run.stop).unwrap().as_str().unwrap().to_string(),
            ]
        })
        .collect();
    csv_string(&["run", "value", "invariant", "d_min", "iterations", "stop"], &rows)
}

fn sphere_simplex(c: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let n = c.n.unwrap_or(4);
    let manifold = ManifoldSpec::sphere(c.sphere_dim.unwrap_or(n - 1))?;
    let f = c.kernel("exp:2");
    let objective = c.objective_or("trace");
    let ms = multi_start(&manifold, n, &f, &objective, &c.optimizer)?;
    let best = ms.best();
    let target = 2.0 * n as f64 / (n as f64 - 1.0);
    let err = all_pair_distances_sq(&best.config).iter().map(|d| (d - target).abs()).fold(0.0, f64::max);
    let pass = err < 1e-5;
    let mut artifacts = Vec::new();
    write(out, "best.json", &best.config.to_json(), &mut artifacts)?;
    write(out, "runs.csv", &runs_csv(&ms.runs), &mut artifacts)?;
    Ok(Outcome {
        summary: json!({"objective": objective.to_string(), "f": f.to_string(), "invariant": best.invariant_value,
            "max_d2_error": err, "target_d2": target, "pass": pass}),
        artifacts,
        report: vec![
            format!("{objective} with f = {f}: J = {}", best.invariant_value),
            format!("max |d^2 - {target:.6}| = {err:.3e} {}", if pass { "PASS" } else { "FAIL" }),
        ],
    })
}

fn torus_opt(c: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let n = c.n.unwrap_or(100);
    let manifold = ManifoldSpec::unit_density_canvas(n);
    let f = c.kernel("exp:2");
    let objective = c.objective_or("trace");
    let ms = multi_start(&manifold, n, &f, &objective, &c.optimizer)?;
    let best = ms.best();
    let mut artifacts = Vec::new();
    write(out, "best.json", &best.config.to_json(), &mut artifacts)?;
    write(out, "runs.csv", &runs_csv(&ms.runs), &mut artifacts)?;
    Ok(Outcome {
        summary: json!({"objective": objective.to_string(), "f": f.to_string(), "best_run": ms.best,
            "invariant": best.invariant_value, "d_min": best.d_min}),
        artifacts,
        report: vec![format!(
            "best of {} restarts: run {} J = {} d_min = {:.3e}",
            ms.runs.len(),
            ms.best,
            best.invariant_value,
            best.d_min.unwrap_or(f64::NAN)
        )],
    })
}

fn lattice_sweep(c: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let f = c.kernel("exp:2");
    let objective = c.objective_or("trace");
    let [na, nb] = c.grid.unwrap_or([41, 41]);
    let grid = SweepGrid::over_u(na, nb, c.b_max.unwrap_or(lattice::SWEEP_B_MAX));
    let side = c.side.unwrap_or(10);
    let field = lattice::sweep_fundamental_domain(&objective, &f, side, &grid)?;
    let path = out.join("sweep.csv");
    emit_contour(&path, &field)?;
    let argmin = lattice::sweep_argmin(&field);
    let report = match argmin {
        Some(p) => vec![format!("{objective} with f = {f}, N = {side}: argmin (a, b) = ({:.6}, {:.6}) value {}", p.a, p.b, p.value)],
        None => vec!["empty sweep".to_string()],
    };
    Ok(Outcome {
        summary: json!({"objective": objective.to_string(), "f": f.to_string(), "nodes": field.len(),
            "argmin": argmin.map(|p| json!({"a": p.a, "b": p.b, "value": p.value}))}),
        artifacts: vec![path],
        report,
    })
}

fn lattices(c: &ExperimentConfig) -> Vec<(String, LatticeParams)> {
    match c.lattice {
        Some(p) if p == LatticeParams::triangular() => vec![("triangular".into(), p)],
        Some(p) if p == LatticeParams::square() => vec![("square".into(), p)],
        Some(p) => vec![(format!("a{}_b{}", p.a, p.b), p)],
        None => vec![("triangular".into(), LatticeParams::triangular()), ("square".into(), LatticeParams::square())],
    }
}

fn dos(c: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let f = c.kernel("exp:2");
    let (m, bins) = (c.samples.unwrap_or(256), c.bins.unwrap_or(200));
    let mut artifacts = Vec::new();
    let mut report = Vec::new();
    let mut summary = serde_json::Map::new();
    for (name, p) in lattices(c) {
        let h = lattice::dos(&p, &f, m, bins)?;
        let path = out.join(format!("dos_{name}.csv"));
        emit_dos(&path, &h)?;
        artifacts.push(path);
        let peak = h.van_hove_peak();
        report.push(format!("{name}: Van Hove peak at {peak:.4}, total mass {}", h.total_mass()));
        summary.insert(name, json!({"peak": peak, "total_mass": h.total_mass()}));
    }
    Ok(Outcome { summary: Value::Object(summary), artifacts, report })
}

fn moments(c: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let f = c.kernel("exp:2");
    let m = c.samples.unwrap_or(256);
    let mut rows = Vec::new();
    let mut report = Vec::new();
    let mut summary = serde_json::Map::new();
    for (name, p) in lattices(c) {
        let norm = lattice::operator_norm(&p, &f)?;
        let mut entry = serde_json::Map::new();
        entry.insert("operator_norm".into(), json!(norm));
        for k in 0..3u32 {
            let closed = lattice::moment_w(&p, &f, k)?;
            let quad = lattice::moment_w_quadrature(&p, &f, k, m)?;
            rows.push(vec![name.clone(), format!("W{k}"), fmt_f64(closed), fmt_f64(quad)]);
            entry.insert(format!("W{k}"), json!([closed, quad]));
        }
        let l1 = lattice::moment_l1(&p, &f)?;
        let l1q = lattice::moment_l1_quadrature(&p, &f, m)?;
        rows.push(vec![name.clone(), "L1".into(), fmt_f64(l1), fmt_f64(l1q)]);
        entry.insert("L1".into(), json!([l1, l1q]));
        report.push(format!("{name}: |W| = {norm:.6}, M2 = {:.6}, M1_L = {l1:.6}", lattice::moment_w(&p, &f, 2)?));
        summary.insert(name, Value::Object(entry));
    }
    let mut artifacts = Vec::new();
    write(out, "moments.csv", &csv_string(&["lattice", "moment", "closed_form", "quadrature"], &rows), &mut artifacts)?;
    Ok(Outcome { summary: Value::Object(summary), artifacts, report })
}

fn interval(c: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let rows = interval_rows(c.n.unwrap_or(100))?;
    let f = c.kernel("exp:2");
    let id = Invariant::interval_centered(c.center.unwrap_or(0.85), c.width.unwrap_or(0.06))?;
    let objective = Objective { invariant: id, sense: Sense::Minimize };
    let tri = triangular_canvas_config(rows)?;
    let tri_value = value(&tri, &f, &objective)?;
    // The exact lattice is a symmetric critical point; a small perturbation
    // lets the descent leave it.
    let start = jittered(&tri, c.jitter.unwrap_or(1e-4), c.optimizer.seed);
    let from_tri = bfgs_minimize(&start, &f, &objective, &c.optimizer)?;
    let ms = multi_start(tri.manifold(), tri.n(), &f, &objective, &c.optimizer)?;
    let best = ms.best();
    let mut artifacts = Vec::new();
    write(out, "from_triangular.json", &from_tri.config.to_json(), &mut artifacts)?;
    write(out, "best.json", &best.config.to_json(), &mut artifacts)?;
    write(out, "runs.csv", &runs_csv(&ms.runs), &mut artifacts)?;
    let improvement = 1.0 - best.value / tri_value;
    Ok(Outcome {
        summary: json!({"interval": id.to_string(), "triangular": tri_value, "from_triangular": from_tri.value,
            "best_random": best.value, "relative_improvement": improvement}),
        artifacts,
        report: vec![
            format!("triangular lattice: {tri_value}"),
            format!("descent from triangular: {}", from_tri.value),
            format!("best of {} restarts: {} ({:.2}% below triangular)", ms.runs.len(), best.value, 100.0 * improvement),
        ],
    })
}

fn trajectory(c: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let n = c.n.unwrap_or(100);
    let manifold = ManifoldSpec::unit_density_canvas(n);
    let f = c.kernel("exp:2");
    let objective = c.objective_or("rtot");
    let settings = OptimizeSettings {
        snapshot_stride: if c.optimizer.snapshot_stride == 0 { 10 } else { c.optimizer.snapshot_stride },
        ..c.optimizer.clone()
    };
    let dir = out.join("trajectory");
    let mut artifacts = Vec::new();
    let mut summary = Vec::new();
    for r in 0..settings.restarts {
        let start = random_config(&manifold, n, settings.seed.wrapping_add(r as u64))?;
        let run = bfgs_minimize(&start, &f, &objective, &settings)?;
        artifacts.extend(emit_traj(&dir, r, &run.snapshots)?);
        summary.push(json!({"run": r, "snapshots": run.snapshots.len(), "final": run.value,
            "invariant": evaluate(&run.config, &f, &objective.invariant)?}));
    }
    Ok(Outcome {
        report: vec![format!("{} snapshot files under {}", artifacts.len(), dir.display())],
        summary: Value::Array(summary),
        artifacts,
    })
}

/// Caps rayon's global pool at `SPECPTS_THREADS` when set.
pub fn init_thread_pool() -> Result<()> {
    if let Ok(v) = std::env::var("SPECPTS_THREADS") {
        let k: usize = v.parse().map_err(|_| bad(format!("SPECPTS_THREADS must be a positive integer, got {v:?}")))?;
        if k == 0 {
            return Err(bad("SPECPTS_THREADS must be positive"));
        }
        let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
    }
    Ok(())
}
