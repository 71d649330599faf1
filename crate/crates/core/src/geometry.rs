//! Manifolds, distances, pair enumeration and point primitives.
//!
//! Points on a sphere are unit vectors in the ambient space and use the
//! chordal metric `|x - y|² = 2 - 2<x, y>`. Points on a flat torus are stored
//! in Cartesian coordinates inside the fundamental cell spanned by the two
//! period vectors, and use the minimum-image metric.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `|x| = 1` accepted by the sphere distance routine.
pub const UNIT_TOL: f64 = 1e-9;

/// Flat 2-D torus given by two period vectors (the columns of the basis).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TorusRepr", into = "TorusRepr")]
pub struct TorusCell {
    periods: [[f64; 2]; 2],
    inverse: [[f64; 2]; 2],
    det: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TorusRepr {
    periods: [[f64; 2]; 2],
}

impl TryFrom<TorusRepr> for TorusCell {
    type Error = Error;
    fn try_from(r: TorusRepr) -> Result<Self> {
        TorusCell::new(r.periods[0], r.periods[1])
    }
}

impl From<TorusCell> for TorusRepr {
    fn from(c: TorusCell) -> Self {
        TorusRepr { periods: c.periods }
    }
}

impl TorusCell {
    /// Builds a torus from its two period vectors.
    pub fn new(p1: [f64; 2], p2: [f64; 2]) -> Result<Self> {
        let det = p1[0] * p2[1] - p2[0] * p1[1];
        let scale = (p1[0].hypot(p1[1]) * p2[0].hypot(p2[1])).max(f64::MIN_POSITIVE);
        if !det.is_finite() || det.abs() <= 1e-14 * scale {
            return Err(Error::SingularBasis(det));
        }
        // inverse of [[p1x, p2x], [p1y, p2y]], stored row-major
        let inverse = [[p2[1] / det, -p2[0] / det], [-p1[1] / det, p1[0] / det]];
        Ok(TorusCell { periods: [p1, p2], inverse, det })
    }

    /// Axis-aligned `width × height` rectangle.
    pub fn rectangle(width: f64, height: f64) -> Result<Self> {
        Self::new([width, 0.0], [0.0, height])
    }

    pub fn periods(&self) -> [[f64; 2]; 2] {
        self.periods
    }

    pub fn area(&self) -> f64 {
        self.det.abs()
    }

    /// Smallest distance between opposite edges of the fundamental cell.
    pub fn min_height(&self) -> f64 {
        let l1 = self.periods[0][0].hypot(self.periods[0][1]);
        let l2 = self.periods[1][0].hypot(self.periods[1][1]);
        self.area() / l1.max(l2)
    }

    pub fn to_fractional(&self, x: [f64; 2]) -> [f64; 2] {
        [
            self.inverse[0][0] * x[0] + self.inverse[0][1] * x[1],
            self.inverse[1][0] * x[0] + self.inverse[1][1] * x[1],
        ]
    }

    pub fn from_fractional(&self, s: [f64; 2]) -> [f64; 2] {
        let [p1, p2] = self.periods;
        [p1[0] * s[0] + p2[0] * s[1], p1[1] * s[0] + p2[1] * s[1]]
    }

    /// Maps a point into the fundamental cell `B·[0,1)²` by an integer
    /// translate. Points already inside are returned unchanged.
    pub fn wrap(&self, x: [f64; 2]) -> [f64; 2] {
        let s = self.to_fractional(x);
        if s.iter().all(|c| (0.0..1.0).contains(c)) {
            return x;
        }
        let shift = self.from_fractional([s[0].floor(), s[1].floor()]);
        let y = [x[0] - shift[0], x[1] - shift[1]];
        let t = self.to_fractional(y);
        if t.iter().all(|c| (0.0..1.0).contains(c)) {
            return y;
        }
        // rounding left a coordinate on the boundary
        let mut t = t;
        for c in t.iter_mut() {
            *c -= c.floor();
            if *c >= 1.0 {
                *c = 0.0;
            }
        }
        self.from_fractional(t)
    }

    /// Minimum-image displacement `x - y*` and its squared length.
    ///
    /// The displacement is first reduced to the nearest fractional image, then
    /// the 3×3 block of neighbouring translates is searched. Ties keep the
    /// lexicographically first translate `(p, q)`.
    pub fn min_image(&self, x: &[f64], y: &[f64]) -> ([f64; 2], f64) {
        let raw = [x[0] - y[0], x[1] - y[1]];
        let mut s = self.to_fractional(raw);
        s[0] -= s[0].round();
        s[1] -= s[1].round();
        let base = self.from_fractional(s);
        let [p1, p2] = self.periods;
        let mut best = base;
        let mut best_d2 = f64::INFINITY;
        for p in -1..=1 {
            for q in -1..=1 {
                let (pf, qf) = (p as f64, q as f64);
                let cand = [
                    base[0] - pf * p1[0] - qf * p2[0],
                    base[1] - pf * p1[1] - qf * p2[1],
                ];
                let d2 = cand[0] * cand[0] + cand[1] * cand[1];
                if d2 < best_d2 {
                    best_d2 = d2;
                    best = cand;
                }
            }
        }
        (best, best_d2)
    }
}

/// Where the points live.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ManifoldSpec {
    /// Unit sphere `S^{dim-1}` in `R^dim`.
    Sphere { dim: usize },
    /// Flat 2-torus.
    FlatTorus { cell: TorusCell },
}

impl ManifoldSpec {
    pub fn sphere(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::BadSphereDim(dim));
        }
        Ok(ManifoldSpec::Sphere { dim })
    }

    pub fn flat_torus(cell: TorusCell) -> Self {
        ManifoldSpec::FlatTorus { cell }
    }

    /// Rectangle of area `n` with `H = W·√3/2`, which fits an `N×N`
    /// triangular lattice at unit density when `n = N²` with `N` even.
    pub fn unit_density_canvas(n: usize) -> Self {
        let width = (2.0 * n as f64 / 3f64.sqrt()).sqrt();
        let height = width * 3f64.sqrt() / 2.0;
        ManifoldSpec::FlatTorus { cell: TorusCell::rectangle(width, height).expect("positive sides") }
    }

    /// Ambient coordinate dimension of a point.
    pub fn dim(&self) -> usize {
        match self {
            ManifoldSpec::Sphere { dim } => *dim,
            ManifoldSpec::FlatTorus { .. } => 2,
        }
    }

    pub fn is_sphere(&self) -> bool {
        matches!(self, ManifoldSpec::Sphere { .. })
    }

    pub fn torus_cell(&self) -> Option<&TorusCell> {
        match self {
            ManifoldSpec::FlatTorus { cell } => Some(cell),
            ManifoldSpec::Sphere { .. } => None,
        }
    }

    /// Squared distance and the displacement used for gradients, written into
    /// `disp`. On the sphere the displacement is the chordal `x - y`.
    pub fn displacement(&self, x: &[f64], y: &[f64], disp: &mut [f64]) -> f64 {
        match self {
            ManifoldSpec::Sphere { .. } => {
                let mut dot = 0.0;
                for ((d, a), b) in disp.iter_mut().zip(x).zip(y) {
                    *d = a - b;
                    dot += a * b;
                }
                (2.0 - 2.0 * dot).clamp(0.0, 4.0)
            }
            ManifoldSpec::FlatTorus { cell } => {
                let (d, d2) = cell.min_image(x, y);
                disp[0] = d[0];
                disp[1] = d[1];
                d2
            }
        }
    }

    pub fn distance_sq(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut buf = [0.0; 2];
        match self {
            ManifoldSpec::Sphere { .. } => {
                let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
                (2.0 - 2.0 * dot).clamp(0.0, 4.0)
            }
            ManifoldSpec::FlatTorus { .. } => self.displacement(x, y, &mut buf),
        }
    }
}

/// Squared chordal distance between two unit vectors, `2 - 2<x, y>` clamped
/// to `[0, 4]`.
pub fn sphere_distance_sq(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    for (index, v) in [x, y].into_iter().enumerate() {
        let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > UNIT_TOL {
            return Err(Error::NotUnitVector { index, norm });
        }
    }
    let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    Ok((2.0 - 2.0 * dot).clamp(0.0, 4.0))
}

/// Minimum-image squared distance on a flat torus, with the minimizing
/// displacement `x - y*`.
pub fn torus_distance_sq(x: [f64; 2], y: [f64; 2], cell: &TorusCell) -> (f64, [f64; 2]) {
    let (d, d2) = cell.min_image(&x, &y);
    (d2, d)
}

/// Projects an ambient vector onto the tangent space of the sphere at `x`.
pub fn sphere_tangent_project(x: &[f64], g: &[f64]) -> Vec<f64> {
    let dot: f64 = x.iter().zip(g).map(|(a, b)| a * b).sum();
    g.iter().zip(x).map(|(gi, xi)| gi - dot * xi).collect()
}

/// Lexicographic enumeration of the unordered pairs `(i, j)`, `i < j`.
///
/// Edge `k = {i, j}` is oriented with head `j` (the larger index) and tail `i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EdgeIndex {
    n: usize,
}

impl EdgeIndex {
    pub fn new(n: usize) -> Self {
        EdgeIndex { n }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n * self.n.saturating_sub(1) / 2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Edge number of the pair `{i, j}` (either order). Panics on `i == j`.
    pub fn index(&self, i: usize, j: usize) -> usize {
        assert!(i != j && i < self.n && j < self.n, "invalid pair ({i}, {j})");
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        i * self.n - i * (i + 1) / 2 + (j - i - 1)
    }

    /// Inverse of [`EdgeIndex::index`]: `(tail, head)` with `tail < head`.
    pub fn pair(&self, k: usize) -> (usize, usize) {
        assert!(k < self.len(), "edge {k} out of range");
        // row i starts at offset(i) = i*n - i(i+1)/2; solve offset(i) <= k
        let n = self.n as f64;
        let disc = (2.0 * n - 1.0) * (2.0 * n - 1.0) - 8.0 * k as f64;
        let mut i = (((2.0 * n - 1.0) - disc.max(0.0).sqrt()) / 2.0).floor() as usize;
        let offset = |i: usize| i * self.n - i * (i + 1) / 2;
        while i > 0 && offset(i) > k {
            i -= 1;
        }
        while offset(i + 1) <= k {
            i += 1;
        }
        (i, k - offset(i) + i + 1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| (i + 1..self.n).map(move |j| (i, j)))
    }
}

/// Ordered list of points on a manifold, flattened row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ConfigRepr", into = "ConfigRepr")]
pub struct PointConfig {
    manifold: ManifoldSpec,
    coords: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigRepr {
    manifold: ManifoldSpec,
    points: Vec<Vec<f64>>,
}

impl TryFrom<ConfigRepr> for PointConfig {
    type Error = Error;
    fn try_from(r: ConfigRepr) -> Result<Self> {
        PointConfig::new(r.manifold, r.points)
    }
}

impl From<PointConfig> for ConfigRepr {
    fn from(c: PointConfig) -> Self {
        let points = (0..c.n()).map(|i| c.point(i).to_vec()).collect();
        ConfigRepr { manifold: c.manifold, points }
    }
}

impl PointConfig {
    /// Sphere points must be unit within [`UNIT_TOL`] and are renormalized;
    /// torus points are wrapped into the fundamental cell.
    pub fn new(manifold: ManifoldSpec, points: Vec<Vec<f64>>) -> Result<Self> {
        let dim = manifold.dim();
        let mut coords = Vec::with_capacity(points.len() * dim);
        for (index, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: p.len() });
            }
            if manifold.is_sphere() {
                let norm = p.iter().map(|c| c * c).sum::<f64>().sqrt();
                if (norm - 1.0).abs() > UNIT_TOL {
                    return Err(Error::NotUnitVector { index, norm });
                }
            }
            coords.extend_from_slice(p);
        }
        Ok(Self::from_flat(manifold, coords))
    }

    /// Builds a configuration from flat coordinates, retracting onto the
    /// manifold (sphere rows normalized, torus rows wrapped).
    pub fn from_flat(manifold: ManifoldSpec, coords: Vec<f64>) -> Self {
        assert_eq!(coords.len() % manifold.dim(), 0, "coordinate count not a multiple of dim");
        let mut c = PointConfig { manifold, coords };
        c.retract();
        c
    }

    pub fn manifold(&self) -> &ManifoldSpec {
        &self.manifold
    }

    pub fn dim(&self) -> usize {
        self.manifold.dim()
    }

    pub fn n(&self) -> usize {
        self.coords.len() / self.dim()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.coords[i * d..(i + 1) * d]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn edges(&self) -> EdgeIndex {
        EdgeIndex::new(self.n())
    }

    fn retract(&mut self) {
        let d = self.dim();
        match &self.manifold {
            ManifoldSpec::Sphere { .. } => {
                for row in self.coords.chunks_mut(d) {
                    let norm = row.iter().map(|c| c * c).sum::<f64>().sqrt();
                    if norm > 0.0 && (norm - 1.0).abs() > 4.0 * f64::EPSILON {
                        row.iter_mut().for_each(|c| *c /= norm);
                    }
                }
            }
            ManifoldSpec::FlatTorus { cell } => {
                for row in self.coords.chunks_mut(2) {
                    let w = cell.wrap([row[0], row[1]]);
                    row.copy_from_slice(&w);
                }
            }
        }
    }

    /// Smallest pairwise distance (not squared).
    pub fn min_pair_distance(&self) -> f64 {
        all_pair_distances_sq(self).into_iter().fold(f64::INFINITY, f64::min).sqrt()
    }

    /// Checks that all points are pairwise distinct, `d > tol`.
    pub fn check_distinct(&self, tol: f64) -> Result<()> {
        for (k, (i, j)) in self.edges().iter().enumerate() {
            let _ = k;
            if self.manifold.distance_sq(self.point(i), self.point(j)).sqrt() <= tol {
                return Err(Error::ZeroDistance { i, j });
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Squared distances of every pair, ordered by [`EdgeIndex`].
pub fn all_pair_distances_sq(config: &PointConfig) -> Vec<f64> {
    let m = config.manifold();
    config.edges().iter().map(|(i, j)| m.distance_sq(config.point(i), config.point(j))).collect()
}

/// Squared distances plus per-pair displacement `x_i - x_j` (tail minus head),
/// flattened `len × dim`.
#[derive(Clone, Debug)]
pub struct PairGeometry {
    pub dist_sq: Vec<f64>,
    pub disp: Vec<f64>,
    pub dim: usize,
}

impl PairGeometry {
    pub fn compute(config: &PointConfig) -> Self {
        let dim = config.dim();
        let edges = config.edges();
        let mut dist_sq = Vec::with_capacity(edges.len());
        let mut disp = vec![0.0; edges.len() * dim];
        for (k, (i, j)) in edges.iter().enumerate() {
            let d2 = config.manifold().displacement(
                config.point(i),
                config.point(j),
                &mut disp[k * dim..(k + 1) * dim],
            );
            dist_sq.push(d2);
        }
        PairGeometry { dist_sq, disp, dim }
    }

    pub fn disp(&self, k: usize) -> &[f64] {
        &self.disp[k * self.dim..(k + 1) * self.dim]
    }
}

/// `n` independent uniform points; deterministic in `seed`.
pub fn random_config(manifold: &ManifoldSpec, n: usize, seed: u64) -> Result<PointConfig> {
    if n < 2 {
        return Err(Error::TooFewPoints { min: 2, got: n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = manifold.dim();
    let mut coords = Vec::with_capacity(n * dim);
    match manifold {
        ManifoldSpec::Sphere { .. } => {
            for _ in 0..n {
                loop {
                    let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
                    let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
                    if norm > 1e-8 {
                        coords.extend(v.iter().map(|c| c / norm));
                        break;
                    }
                }
            }
        }
        ManifoldSpec::FlatTorus { cell } => {
            for _ in 0..n {
                let s = [rng.random::<f64>(), rng.random::<f64>()];
                coords.extend_from_slice(&cell.from_fractional(s));
            }
        }
    }
    Ok(PointConfig::from_flat(manifold.clone(), coords))
}

/// Adds independent uniform noise in `[-scale, scale]` to every coordinate
/// and retracts back onto the manifold.
pub fn jittered(config: &PointConfig, scale: f64, seed: u64) -> PointConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords = config.coords().iter().map(|x| x + scale * (2.0 * rng.random::<f64>() - 1.0)).collect();
    PointConfig::from_flat(config.manifold().clone(), coords)
}

/// Perfect triangular lattice of `rows × rows` points on
/// [`ManifoldSpec::unit_density_canvas`]; `rows` must be even.
pub fn triangular_canvas_config(rows: usize) -> Result<PointConfig> {
    if rows < 2 || !rows.is_multiple_of(2) {
        return Err(Error::BadTorusSize(rows));
    }
    let n = rows * rows;
    let manifold = ManifoldSpec::unit_density_canvas(n);
    let spacing = (2.0 / 3f64.sqrt()).sqrt();
    let row_height = spacing * 3f64.sqrt() / 2.0;
    let mut coords = Vec::with_capacity(2 * n);
    for j in 0..rows {
        let shift = if j % 2 == 1 { 0.5 } else { 0.0 };
        for i in 0..rows {
            coords.push((i as f64 + shift) * spacing);
            coords.push(j as f64 * row_height);
        }
    }
    Ok(PointConfig::from_flat(manifold, coords))
}
