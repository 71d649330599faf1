//! Manifold-aware BFGS with Armijo backtracking, multi-start driver and the
//! nearest-neighbour diagnostic `d_min`.
//!
//! Iterates live in ambient coordinates. On the sphere the search direction
//! is projected onto the tangent space and each trial point is renormalized;
//! on a torus trial points are wrapped into the fundamental cell.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{random_config, ManifoldSpec, PointConfig};
use crate::gradients::value_and_gradient;
use crate::kernel::WeightFunction;
use crate::spectral::Objective;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeSettings {
    pub max_iter: usize,
    /// Stop once the (tangent) gradient 2-norm falls below this.
    pub grad_tol: f64,
    /// Sufficient-decrease constant of the Armijo test.
    pub armijo_c: f64,
    /// Backtracking factor.
    pub shrink: f64,
    pub restarts: usize,
    pub seed: u64,
    /// Record a snapshot every `snapshot_stride` iterations; 0 disables.
    pub snapshot_stride: usize,
    /// Largest coordinate change tried by the first trial step.
    pub max_step: f64,
    /// Plateau stop: relative decrease below `plateau_rtol` over
    /// `plateau_window` iterations.
    pub plateau_window: usize,
    pub plateau_rtol: f64,
}

impl Default for OptimizeSettings {
    fn default() -> Self {
        OptimizeSettings {
            max_iter: 2000,
            grad_tol: 1e-8,
            armijo_c: 1e-4,
            shrink: 0.5,
            restarts: 1,
            seed: 0,
            snapshot_stride: 0,
            max_step: 0.5,
            plateau_window: 25,
            plateau_rtol: 1e-12,
        }
    }
}

impl OptimizeSettings {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::BadSetting(m.to_string()));
        if !(self.grad_tol > 0.0) {
            return bad("grad_tol must be positive");
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return bad("armijo_c must lie in (0, 1)");
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return bad("shrink must lie in (0, 1)");
        }
        if self.restarts < 1 {
            return bad("restarts must be at least 1");
        }
        if !(self.max_step > 0.0) || !(self.plateau_rtol >= 0.0) {
            return bad("max_step must be positive and plateau_rtol nonnegative");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GradientTolerance,
    Plateau,
    MaxIterations,
    LineSearchFailure,
}

#[derive(Clone, Debug, Serialize)]
pub struct Snapshot {
    pub iteration: usize,
    pub config: PointConfig,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunResult {
    pub config: PointConfig,
    /// Minimized quantity (`J`, `-J` or `1/J` depending on the sense).
    pub value: f64,
    /// The invariant `J` itself.
    pub invariant_value: f64,
    pub initial_value: f64,
    pub d_min: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub stop: StopReason,
    pub grad_norm: f64,
    /// Number of accepted iterates whose gradient was a subgradient selection.
    pub flagged_iterates: usize,
    pub history: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
}

/// Triangular nearest-neighbour spacing at the configuration's density minus
/// the closest pair distance. `None` on the sphere.
pub fn d_min(config: &PointConfig) -> Option<f64> {
    let cell = config.manifold().torus_cell()?;
    let spacing = (2.0 * cell.area() / (3f64.sqrt() * config.n() as f64)).sqrt();
    Some(spacing - config.min_pair_distance())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn project_tangent(manifold: &ManifoldSpec, x: &[f64], v: &mut [f64]) {
    if let ManifoldSpec::Sphere { dim } = manifold {
        for (xi, vi) in x.chunks(*dim).zip(v.chunks_mut(*dim)) {
            let c = dot(xi, vi);
            vi.iter_mut().zip(xi).for_each(|(a, b)| *a -= c * b);
        }
    }
}

/// Dense inverse-Hessian approximation.
struct InverseHessian {
    m: usize,
    h: Vec<f64>,
    fresh: bool,
}

impl InverseHessian {
    fn new(m: usize) -> Self {
        let mut s = InverseHessian { m, h: vec![0.0; m * m], fresh: true };
        s.reset();
        s
    }

    fn reset(&mut self) {
        self.h.iter_mut().for_each(|x| *x = 0.0);
        for i in 0..self.m {
            self.h[i * self.m + i] = 1.0;
        }
        self.fresh = true;
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.h.chunks(self.m).map(|row| dot(row, v)).collect()
    }

    /// `H⁺ = (I - ρ s yᵗ) H (I - ρ y sᵗ) + ρ s sᵗ`, with the identity rescaled
    /// by `sᵗy / yᵗy` before the first update after a reset.
    fn update(&mut self, s: &[f64], y: &[f64], sy: f64) {
        if self.fresh {
            let scale = sy / dot(y, y);
            self.h.iter_mut().for_each(|x| *x *= scale);
            self.fresh = false;
        }
        let rho = 1.0 / sy;
        let hy = self.apply(y);
        let yhy = dot(y, &hy);
        let c = rho * rho * yhy + rho;
        let m = self.m;
        for i in 0..m {
            let row = &mut self.h[i * m..(i + 1) * m];
            for j in 0..m {
                row[j] += c * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
            }
        }
    }
}

/// Minimizes `objective` starting from `config0`.
///
/// Trial points where the objective cannot be evaluated (a singular kernel on
/// a coincident pair, a disconnected graph) are treated as failing the
/// sufficient-decrease test.
pub fn bfgs_minimize(config0: &PointConfig, f: &WeightFunction, objective: &Objective, settings: &OptimizeSettings) -> Result<RunResult> {
    settings.validate()?;
    let manifold = config0.manifold().clone();
    let mut x = config0.clone();
    let (mut fx, grad) = value_and_gradient(&x, f, objective)?;
    let initial_value = fx;
    let mut g = grad.tangent;
    let mut flagged = usize::from(grad.repeated_eigenvalue);
    let m = g.len();
    let mut hess = InverseHessian::new(m);
    let mut history = vec![fx];
    let mut snapshots = Vec::new();
    if settings.snapshot_stride > 0 {
        snapshots.push(Snapshot { iteration: 0, config: x.clone() });
    }

    let mut stop = StopReason::MaxIterations;
    let mut iterations = 0;
    while iterations < settings.max_iter {
        if dot(&g, &g).sqrt() <= settings.grad_tol {
            stop = StopReason::GradientTolerance;
            break;
        }
        let mut accepted = None;
        for attempt in 0..2 {
            let mut p: Vec<f64> = hess.apply(&g).into_iter().map(|v| -v).collect();
            project_tangent(&manifold, x.coords(), &mut p);
            let mut slope = dot(&g, &p);
            if !(slope < 0.0) || attempt == 1 {
                hess.reset();
                p = g.iter().map(|v| -v).collect();
                slope = -dot(&g, &g);
            }
            let pmax = p.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let mut alpha = (settings.max_step / pmax).min(1.0);
            while alpha * pmax > 1e-15 {
                let coords: Vec<f64> = x.coords().iter().zip(&p).map(|(a, b)| a + alpha * b).collect();
                let trial = PointConfig::from_flat(manifold.clone(), coords);
                if let Ok((ft, gt)) = value_and_gradient(&trial, f, objective) {
                    if ft.is_finite() && ft <= fx + settings.armijo_c * alpha * slope {
                        accepted = Some((trial, ft, gt, alpha, p));
                        break;
                    }
                }
                alpha *= settings.shrink;
            }
            if accepted.is_some() {
                break;
            }
        }
        let Some((trial, ft, gt, alpha, p)) = accepted else {
            stop = StopReason::LineSearchFailure;
            break;
        };
        iterations += 1;
        let s: Vec<f64> = p.iter().map(|v| alpha * v).collect();
        let y: Vec<f64> = gt.tangent.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            hess.update(&s, &y, sy);
        } else {
            hess.reset();
        }
        x = trial;
        fx = ft;
        g = gt.tangent;
        flagged += usize::from(gt.repeated_eigenvalue);
        history.push(fx);
        if settings.snapshot_stride > 0 && iterations % settings.snapshot_stride == 0 {
            snapshots.push(Snapshot { iteration: iterations, config: x.clone() });
        }
        let w = settings.plateau_window;
        if w > 0 && history.len() > w {
            let old = history[history.len() - 1 - w];
            if old - fx <= settings.plateau_rtol * fx.abs().max(f64::MIN_POSITIVE) {
                stop = StopReason::Plateau;
                break;
            }
        }
    }
    let grad_norm = dot(&g, &g).sqrt();
    if stop == StopReason::MaxIterations && grad_norm <= settings.grad_tol {
        stop = StopReason::GradientTolerance;
    }
    if settings.snapshot_stride > 0 && snapshots.last().map(|s| s.iteration) != Some(iterations) {
        snapshots.push(Snapshot { iteration: iterations, config: x.clone() });
    }
    let invariant_value = crate::spectral::evaluate(&x, f, &objective.invariant)?;
    Ok(RunResult {
        d_min: d_min(&x),
        config: x,
        value: fx,
        invariant_value,
        initial_value,
        iterations,
        converged: stop == StopReason::GradientTolerance,
        stop,
        grad_norm,
        flagged_iterates: flagged,
        history,
        snapshots,
    })
}

/// All restarts of a multi-start run and the index of the best one.
#[derive(Clone, Debug, Serialize)]
pub struct MultiStart {
    pub best: usize,
    pub runs: Vec<RunResult>,
}

impl MultiStart {
    pub fn best(&self) -> &RunResult {
        &self.runs[self.best]
    }
}

/// Runs `settings.restarts` optimizations from random starts with seeds
/// `seed, seed + 1, ...`. Restarts run in parallel; results are collected in
/// restart order, and ties in the final value keep the earliest restart.
pub fn multi_start(manifold: &ManifoldSpec, n: usize, f: &WeightFunction, objective: &Objective, settings: &OptimizeSettings) -> Result<MultiStart> {
    settings.validate()?;
    let runs: Vec<RunResult> = (0..settings.restarts)
        .into_par_iter()
        .map(|r| {
            let start = random_config(manifold, n, settings.seed.wrapping_add(r as u64))?;
            bfgs_minimize(&start, f, objective, settings)
        })
        .collect::<Result<_>>()?;
    let best = runs
        .iter()
        .enumerate()
        .fold(0, |b, (i, r)| if r.value < runs[b].value { i } else { b });
    Ok(MultiStart { best, runs })
}
