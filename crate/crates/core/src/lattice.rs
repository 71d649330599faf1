//! Unit-volume 2-D Bravais lattices: parameterization by the fundamental
//! domain `U`, dispersion relation, density of states, spectral moments,
//! periodic truncations `Λ^N` and parameter sweeps over `U`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ManifoldSpec, PointConfig, TorusCell};
use crate::kernel::{weight_vector, WeightFunction};
use crate::spectral::{evaluate, Objective, Spectrum};

const U_TOL: f64 = 1e-12;
/// Tail bound the automatic cutoff has to reach.
pub const TAIL_TOL: f64 = 1e-14;
const MAX_CUTOFF: f64 = 1000.0;

/// A point `(a, b)` of `U = {b > 0, 0 ≤ a ≤ 1/2, a² + b² ≥ 1}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeParams {
    pub a: f64,
    pub b: f64,
}

impl LatticeParams {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        let p = Self::unchecked(a, b)?;
        if !(-U_TOL..=0.5 + U_TOL).contains(&a) {
            return Err(Error::BadLatticeParams { a, b, reason: "a must lie in [0, 1/2]" });
        }
        if a * a + b * b < 1.0 - U_TOL {
            return Err(Error::BadLatticeParams { a, b, reason: "a² + b² must be at least 1" });
        }
        Ok(p)
    }

    /// Skips the `U` membership test; only `b > 0` is enforced.
    pub fn unchecked(a: f64, b: f64) -> Result<Self> {
        if !(b > 0.0) || !a.is_finite() || !b.is_finite() {
            return Err(Error::BadLatticeParams { a, b, reason: "b must be positive" });
        }
        Ok(LatticeParams { a, b })
    }

    pub fn square() -> Self {
        LatticeParams { a: 0.0, b: 1.0 }
    }

    pub fn triangular() -> Self {
        LatticeParams { a: 0.5, b: 3f64.sqrt() / 2.0 }
    }

    pub fn basis(&self) -> BravaisBasis {
        basis_from_params(self)
    }
}

/// Basis matrix with the lattice vectors as columns.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BravaisBasis {
    pub m: [[f64; 2]; 2],
}

pub fn basis_from_params(p: &LatticeParams) -> BravaisBasis {
    let s = p.b.sqrt();
    BravaisBasis { m: [[1.0 / s, p.a / s], [0.0, s]] }
}

impl BravaisBasis {
    pub fn columns(&self) -> [[f64; 2]; 2] {
        [[self.m[0][0], self.m[1][0]], [self.m[0][1], self.m[1][1]]]
    }

    pub fn det(&self) -> f64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn apply(&self, i: f64, j: f64) -> [f64; 2] {
        [self.m[0][0] * i + self.m[0][1] * j, self.m[1][0] * i + self.m[1][1] * j]
    }

    pub fn dual(&self) -> DualCell {
        let d = self.det();
        let s = 2.0 * PI / d;
        // 2π B^{-t}
        let m = [[s * self.m[1][1], -s * self.m[1][0]], [-s * self.m[0][1], s * self.m[0][0]]];
        DualCell { basis: BravaisBasis { m }, area: (2.0 * PI).powi(2) / d.abs() }
    }

    /// Nonzero lattice vectors of length at most `radius`.
    pub fn vectors_within(&self, radius: f64) -> Vec<[f64; 2]> {
        let [c1, c2] = self.columns();
        // Row spacing along the direction normal to c1.
        let h = self.det().abs() / c1[0].hypot(c1[1]);
        let jmax = (radius / h).floor() as i64;
        let mut out = Vec::new();
        let r2 = radius * radius;
        for j in -jmax..=jmax {
            // u = i c1 + j c2; solve |u| ≤ R for i along c1.
            let c1n = c1[0] * c1[0] + c1[1] * c1[1];
            let proj = (j as f64) * (c1[0] * c2[0] + c1[1] * c2[1]) / c1n;
            let span = radius / c1n.sqrt();
            let lo = (-proj - span).floor() as i64;
            let hi = (-proj + span).ceil() as i64;
            for i in lo..=hi {
                if i == 0 && j == 0 {
                    continue;
                }
                let u = self.apply(i as f64, j as f64);
                if u[0] * u[0] + u[1] * u[1] <= r2 {
                    out.push(u);
                }
            }
        }
        out
    }
}

/// Reciprocal lattice `2π B^{-t}(Z²)` and the area of its fundamental cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DualCell {
    pub basis: BravaisBasis,
    pub area: f64,
}

impl DualCell {
    /// `s k₁ + t k₂` for fractional coordinates `(s, t)`.
    pub fn point(&self, s: f64, t: f64) -> [f64; 2] {
        self.basis.apply(s, t)
    }
}

/// Smallest integer radius with `f(R²)·8R` below [`TAIL_TOL`].
pub fn cutoff_radius(f: &WeightFunction) -> Result<f64> {
    let mut r = 1.0;
    while r <= MAX_CUTOFF {
        let tail = f.eval(r * r).abs() * 8.0 * r;
        if tail < TAIL_TOL {
            return Ok(r);
        }
        r += 1.0;
    }
    Err(Error::CutoffTooSmall { radius: MAX_CUTOFF, tail: f.eval(MAX_CUTOFF * MAX_CUTOFF).abs() * 8.0 * MAX_CUTOFF })
}

/// The nonzero lattice vectors within the cutoff together with their weights.
#[derive(Clone, Debug)]
pub struct LatticeSum {
    pub params: LatticeParams,
    pub vectors: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub radius: f64,
}

impl LatticeSum {
    /// With `cutoff = None` the radius is picked by [`cutoff_radius`]; an
    /// explicit radius is rejected when its tail bound exceeds [`TAIL_TOL`].
    pub fn new(params: &LatticeParams, f: &WeightFunction, cutoff: Option<f64>) -> Result<Self> {
        let radius = match cutoff {
            None => cutoff_radius(f)?,
            Some(r) => {
                let tail = f.eval(r * r).abs() * 8.0 * r;
                if !(tail < TAIL_TOL) {
                    return Err(Error::CutoffTooSmall { radius: r, tail });
                }
                r
            }
        };
        let vectors = params.basis().vectors_within(radius);
        let weights = vectors.iter().map(|u| f.eval(u[0] * u[0] + u[1] * u[1])).collect();
        Ok(LatticeSum { params: *params, vectors, weights, radius })
    }

    /// `ω(ξ) = Σ_{u≠0} cos(ξ·u) f(|u|²)`
    pub fn omega(&self, xi: [f64; 2]) -> f64 {
        self.vectors
            .iter()
            .zip(&self.weights)
            .map(|(u, w)| (xi[0] * u[0] + xi[1] * u[1]).cos() * w)
            .sum()
    }

    /// Imaginary part of the truncated sum; vanishes by inversion symmetry.
    pub fn omega_imag(&self, xi: [f64; 2]) -> f64 {
        self.vectors
            .iter()
            .zip(&self.weights)
            .map(|(u, w)| (xi[0] * u[0] + xi[1] * u[1]).sin() * w)
            .sum()
    }

    pub fn sum_sq(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum()
    }
}

pub fn dispersion(params: &LatticeParams, f: &WeightFunction, xi: [f64; 2], cutoff: Option<f64>) -> Result<f64> {
    Ok(LatticeSum::new(params, f, cutoff)?.omega(xi))
}

/// `‖W_f‖ = ω(0)`
pub fn operator_norm(params: &LatticeParams, f: &WeightFunction) -> Result<f64> {
    dispersion(params, f, [0.0, 0.0], None)
}

/// Samples `ω` on the `M × M` vertex grid `(i/M, j/M)` of the dual cell, in
/// row-major order.
pub fn dispersion_samples(params: &LatticeParams, f: &WeightFunction, m: usize) -> Result<Vec<f64>> {
    let sum = LatticeSum::new(params, f, None)?;
    let cell = params.basis().dual();
    Ok((0..m * m)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / m, k % m);
            sum.omega(cell.point(i as f64 / m as f64, j as f64 / m as f64))
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DoSHistogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// Dual-cell area carried by one sample.
    pub sample_weight: f64,
}

impl DoSHistogram {
    /// Bins `values` over `[lo, hi]`; values outside the range are dropped.
    pub fn from_values(values: &[f64], lo: f64, hi: f64, bins: usize, sample_weight: f64) -> Self {
        let width = (hi - lo) / bins as f64;
        let edges = (0..=bins).map(|k| lo + k as f64 * width).collect();
        let mut counts = vec![0u64; bins];
        for &v in values {
            if v < lo || v > hi {
                continue;
            }
            let k = (((v - lo) / width) as usize).min(bins - 1);
            counts[k] += 1;
        }
        DoSHistogram { edges, counts, sample_weight }
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|e| 0.5 * (e[0] + e[1])).collect()
    }

    pub fn mass(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64 * self.sample_weight).collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.counts.iter().sum::<u64>() as f64 * self.sample_weight
    }

    /// Mass fractions per bin.
    pub fn normalized(&self) -> Vec<f64> {
        let total = self.counts.iter().sum::<u64>() as f64;
        self.counts.iter().map(|&c| c as f64 / total).collect()
    }

    /// Centre of the heaviest bin, ignoring bins above 95% of the range.
    pub fn van_hove_peak(&self) -> f64 {
        let lo = self.edges[0];
        let hi = *self.edges.last().unwrap();
        let limit = lo + 0.95 * (hi - lo);
        let centers = self.centers();
        let mut best = 0;
        for k in 0..self.bins() {
            if centers[k] <= limit && self.counts[k] > self.counts[best] {
                best = k;
            }
        }
        centers[best]
    }
}

/// Histogram of `ω` over an `M × M` grid on the dual cell, each sample
/// weighted by `|B|/M²`, with `bins` equal bins spanning the sampled range.
pub fn dos(params: &LatticeParams, f: &WeightFunction, m: usize, bins: usize) -> Result<DoSHistogram> {
    if m == 0 || bins == 0 {
        return Err(Error::BadSetting("grid size and bin count must be positive".into()));
    }
    let samples = dispersion_samples(params, f, m)?;
    let lo = samples.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let area = params.basis().dual().area;
    Ok(DoSHistogram::from_values(&samples, lo, hi, bins, area / (m * m) as f64))
}

/// Largest per-bin difference of the mass fractions of two histograms that
/// share their bins.
pub fn sup_distance(a: &DoSHistogram, b: &DoSHistogram) -> Result<f64> {
    if a.edges != b.edges {
        return Err(Error::BadSetting("histograms must share their bin edges".into()));
    }
    Ok(a.normalized().iter().zip(b.normalized()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
}

/// Distance between the eigenvalue histogram of `W^N` on `Λ^N` and the
/// density of states sampled on an `M × M` grid, using `bins` shared bins
/// over the sampled range of `ω`.
pub fn spectral_measure_distance(params: &LatticeParams, f: &WeightFunction, side: usize, m: usize, bins: usize) -> Result<f64> {
    let samples = dispersion_samples(params, f, m)?;
    let lo = samples.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let pad = 1e-9 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);
    let area = params.basis().dual().area;
    let reference = DoSHistogram::from_values(&samples, lo, hi, bins, area / (m * m) as f64);
    let eig = torus_graph(params, side)?.adjacency_spectrum(f)?;
    let finite = DoSHistogram::from_values(eig.values(), lo, hi, bins, area / (side * side) as f64);
    sup_distance(&finite, &reference)
}

/// Closed-form moments of the adjacency density of states, `p ∈ {0, 1, 2}`:
/// `|B|`, `0` and `|B| Σ_{u≠0} f(|u|²)²`.
pub fn moment_w(params: &LatticeParams, f: &WeightFunction, p: u32) -> Result<f64> {
    let area = params.basis().dual().area;
    match p {
        0 => Ok(area),
        1 => Ok(0.0),
        2 => Ok(area * LatticeSum::new(params, f, None)?.sum_sq()),
        _ => Err(Error::BadSetting(format!("no closed form for moment {p}; use the quadrature route"))),
    }
}

/// `∫_B ω(ξ)^p dξ` by the `M × M` rectangle rule.
pub fn moment_w_quadrature(params: &LatticeParams, f: &WeightFunction, p: u32, m: usize) -> Result<f64> {
    let area = params.basis().dual().area;
    let samples = dispersion_samples(params, f, m)?;
    Ok(samples.iter().map(|w| w.powi(p as i32)).sum::<f64>() * area / (m * m) as f64)
}

/// First Laplacian moment `|B| ω(0)`.
pub fn moment_l1(params: &LatticeParams, f: &WeightFunction) -> Result<f64> {
    Ok(params.basis().dual().area * operator_norm(params, f)?)
}

pub fn moment_l1_quadrature(params: &LatticeParams, f: &WeightFunction, m: usize) -> Result<f64> {
    let area = params.basis().dual().area;
    let w0 = operator_norm(params, f)?;
    let samples = dispersion_samples(params, f, m)?;
    Ok(samples.iter().map(|w| w0 - w).sum::<f64>() * area / (m * m) as f64)
}

/// `N²` sites `B(i, j)`, `i, j ∈ {-N/2, ..., N/2 - 1}`, on the torus with
/// periods `N b₁`, `N b₂`.
#[derive(Clone, Debug)]
pub struct TorusGraph {
    pub params: LatticeParams,
    pub side: usize,
    pub config: PointConfig,
}

pub fn torus_graph(params: &LatticeParams, side: usize) -> Result<TorusGraph> {
    if side < 4 || !side.is_multiple_of(2) {
        return Err(Error::BadTorusSize(side));
    }
    let basis = params.basis();
    let [c1, c2] = basis.columns();
    let nf = side as f64;
    let cell = TorusCell::new([nf * c1[0], nf * c1[1]], [nf * c2[0], nf * c2[1]])?;
    let half = (side / 2) as i64;
    let mut points = Vec::with_capacity(side * side);
    for i in -half..half {
        for j in -half..half {
            let u = basis.apply(i as f64, j as f64);
            points.push(vec![u[0], u[1]]);
        }
    }
    let config = PointConfig::new(ManifoldSpec::flat_torus(cell), points)?;
    Ok(TorusGraph { params: *params, side, config })
}

impl TorusGraph {
    /// Weighted degree of site 0; every site has the same degree.
    pub fn degree(&self, f: &WeightFunction) -> Result<f64> {
        let n = self.config.n();
        let w = weight_vector(&self.config, f)?;
        let edges = self.config.edges();
        Ok((1..n).map(|j| w[edges.index(0, j)]).sum())
    }

    pub fn adjacency_spectrum(&self, f: &WeightFunction) -> Result<Spectrum> {
        let g = crate::kernel::assemble(&self.config, f)?;
        crate::spectral::sym_eigenvalues(&g.adjacency)
    }

    pub fn laplacian_spectrum(&self, f: &WeightFunction) -> Result<Spectrum> {
        let g = crate::kernel::assemble(&self.config, f)?;
        crate::spectral::sym_eigenvalues(&g.laplacian)
    }
}

/// Grid of `(a, b)` nodes for a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

/// Upper end of the default `b` range.
pub const SWEEP_B_MAX: f64 = 1.5;

fn linspace(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    match k {
        0 => vec![],
        1 => vec![lo],
        _ => (0..k).map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64).collect(),
    }
}

impl SweepGrid {
    /// `a ∈ [0, 1/2]` and `b ∈ [√3/2, b_max]`, equally spaced.
    pub fn over_u(na: usize, nb: usize, b_max: f64) -> Self {
        SweepGrid { a: linspace(0.0, 0.5, na), b: linspace(3f64.sqrt() / 2.0, b_max, nb) }
    }

    /// Nodes inside `U`, `a` varying fastest.
    pub fn nodes(&self) -> Vec<LatticeParams> {
        self.b
            .iter()
            .flat_map(|&b| self.a.iter().map(move |&a| (a, b)))
            .filter_map(|(a, b)| LatticeParams::new(a, b).ok())
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepPoint {
    pub a: f64,
    pub b: f64,
    pub value: f64,
}

/// Objective value on `Λ^N_{a,b}` at every grid node inside `U`. Nodes are
/// evaluated in parallel and returned in grid order.
pub fn sweep_fundamental_domain(objective: &Objective, f: &WeightFunction, side: usize, grid: &SweepGrid) -> Result<Vec<SweepPoint>> {
    grid.nodes()
        .into_par_iter()
        .map(|p| {
            let g = torus_graph(&p, side)?;
            let j = evaluate(&g.config, f, &objective.invariant)?;
            Ok(SweepPoint { a: p.a, b: p.b, value: objective.apply(j) })
        })
        .collect()
}

/// First node with the smallest value.
pub fn sweep_argmin(field: &[SweepPoint]) -> Option<SweepPoint> {
    field.iter().copied().fold(None, |best: Option<SweepPoint>, p| match best {
        Some(b) if b.value <= p.value => Some(b),
        _ => Some(p),
    })
}
