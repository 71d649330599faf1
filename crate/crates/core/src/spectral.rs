//! Symmetric eigendecomposition and the catalogue of spectral invariants.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PointConfig;
use crate::kernel::{weight_vector, WeightFunction, WeightedGraph};

/// Ascending eigenvalues of a symmetric matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum(Vec<f64>);

impl Spectrum {
    /// Sorts the values ascending.
    pub fn new(mut values: Vec<f64>) -> Self {
        values.sort_by(f64::total_cmp);
        Spectrum(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.0.iter().sum::<f64>() / self.0.len() as f64
    }

    /// Population variance (`1/n` convention).
    pub fn variance(&self) -> f64 {
        let n = self.0.len() as f64;
        let mean = self.mean();
        self.0.iter().map(|l| l * l).sum::<f64>() / n - mean * mean
    }
}

/// Eigenvalues with orthonormal eigenvectors as columns, in the same order.
#[derive(Clone, Debug)]
pub struct EigenPairs {
    pub spectrum: Spectrum,
    pub vectors: DMatrix<f64>,
}

fn check_symmetric(a: &DMatrix<f64>) -> Result<()> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), got: a.ncols() });
    }
    let scale = a.amax();
    let asym = (a - a.transpose()).amax();
    if asym > 1e-10 * scale {
        return Err(Error::NotSymmetric(asym));
    }
    Ok(())
}

/// Full eigendecomposition of a symmetric matrix, eigenvalues ascending.
pub fn sym_eigen(a: &DMatrix<f64>) -> Result<EigenPairs> {
    check_symmetric(a)?;
    let eig = SymmetricEigen::new(a.clone());
    let mut order: Vec<usize> = (0..a.nrows()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(a.nrows(), a.ncols(), |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(EigenPairs { spectrum: Spectrum(values), vectors })
}

/// Eigenvalues only.
pub fn sym_eigenvalues(a: &DMatrix<f64>) -> Result<Spectrum> {
    check_symmetric(a)?;
    Ok(Spectrum::new(a.clone().symmetric_eigenvalues().iter().copied().collect()))
}

/// Which graph operator an invariant is a spectral function of.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Operator {
    Adjacency,
    Laplacian,
}

/// The menu of spectral invariants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Invariant {
    /// `Σ λ_i(L)`
    TraceL,
    /// `Σ μ_i(W)² = ‖W‖_F²`
    FrobeniusSqW,
    /// Algebraic connectivity `λ_2(L)`.
    Lambda2,
    /// Spectral radius `λ_n(L)`.
    LambdaMax,
    /// Total effective resistance `n Σ_{i≥2} 1/λ_i`.
    RTot,
    /// `λ_n / λ_2`
    CondNumber,
    /// Population variance of the Laplacian eigenvalues.
    Variance,
    /// `Σ_j |λ_j - lo| + |λ_j - hi| - (hi - lo)`
    IntervalDist { lo: f64, hi: f64 },
}

impl Invariant {
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::BadInterval { lo, hi });
        }
        Ok(Invariant::IntervalDist { lo, hi })
    }

    /// Interval of the given center and width.
    pub fn interval_centered(center: f64, width: f64) -> Result<Self> {
        Self::interval(center - width / 2.0, center + width / 2.0)
    }

    pub fn operator(&self) -> Operator {
        match self {
            Invariant::FrobeniusSqW => Operator::Adjacency,
            _ => Operator::Laplacian,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Invariant::TraceL => "trace",
            Invariant::FrobeniusSqW => "frob2",
            Invariant::Lambda2 => "lambda2",
            Invariant::LambdaMax => "lambdamax",
            Invariant::RTot => "rtot",
            Invariant::CondNumber => "cond",
            Invariant::Variance => "var",
            Invariant::IntervalDist { .. } => "interval",
        }
    }

    /// Every invariant, with the interval variant at `[lo, hi]`.
    pub fn catalogue(lo: f64, hi: f64) -> [Invariant; 8] {
        [
            Invariant::TraceL,
            Invariant::FrobeniusSqW,
            Invariant::Lambda2,
            Invariant::LambdaMax,
            Invariant::RTot,
            Invariant::CondNumber,
            Invariant::Variance,
            Invariant::IntervalDist { lo, hi },
        ]
    }
}

impl fmt::Display for Invariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Invariant::IntervalDist { lo, hi } => write!(f, "interval({lo},{hi})"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for Invariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Ok(match s {
            "trace" => Invariant::TraceL,
            "frob2" => Invariant::FrobeniusSqW,
            "lambda2" => Invariant::Lambda2,
            "lambdamax" => Invariant::LambdaMax,
            "rtot" => Invariant::RTot,
            "cond" => Invariant::CondNumber,
            "var" => Invariant::Variance,
            _ => {
                let inner = s
                    .strip_prefix("interval(")
                    .and_then(|r| r.strip_suffix(')'))
                    .ok_or_else(|| Error::Parse(format!("unknown invariant '{s}'")))?;
                let (lo, hi) = inner.split_once(',').ok_or_else(|| Error::Parse(format!("bad interval '{s}'")))?;
                let lo: f64 = lo.trim().parse().map_err(|_| Error::Parse(format!("bad interval '{s}'")))?;
                let hi: f64 = hi.trim().parse().map_err(|_| Error::Parse(format!("bad interval '{s}'")))?;
                Invariant::interval(lo, hi)?
            }
        })
    }
}

impl Serialize for Invariant {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Invariant {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// How an invariant is turned into a quantity to minimize.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    #[default]
    Minimize,
    /// Minimize `-J`.
    Maximize,
    /// Minimize `1/J`.
    Reciprocal,
}

/// An invariant together with its optimization sense.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Objective {
    pub invariant: Invariant,
    pub sense: Sense,
}

impl Objective {
    pub fn minimize(invariant: Invariant) -> Self {
        Objective { invariant, sense: Sense::Minimize }
    }

    pub fn maximize(invariant: Invariant) -> Self {
        Objective { invariant, sense: Sense::Maximize }
    }

    pub fn reciprocal(invariant: Invariant) -> Self {
        Objective { invariant, sense: Sense::Reciprocal }
    }

    /// Maps an invariant value to the minimized quantity.
    pub fn apply(&self, j: f64) -> f64 {
        match self.sense {
            Sense::Minimize => j,
            Sense::Maximize => -j,
            Sense::Reciprocal => 1.0 / j,
        }
    }

    /// Derivative of [`Objective::apply`] with respect to `J`.
    pub fn chain(&self, j: f64) -> f64 {
        match self.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
            Sense::Reciprocal => -1.0 / (j * j),
        }
    }
}

/// `trace`, `-lambda2` (maximize) or `1/lambda2` (reciprocal).
impl FromStr for Objective {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(rest) = s.strip_prefix("1/") {
            Ok(Objective::reciprocal(rest.parse()?))
        } else if let Some(rest) = s.strip_prefix('-') {
            Ok(Objective::maximize(rest.parse()?))
        } else {
            Ok(Objective::minimize(s.parse()?))
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.sense {
            Sense::Minimize => write!(f, "{}", self.invariant),
            Sense::Maximize => write!(f, "-{}", self.invariant),
            Sense::Reciprocal => write!(f, "1/{}", self.invariant),
        }
    }
}

impl Serialize for Objective {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Objective {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

fn require_connected(values: &[f64]) -> Result<()> {
    let n = values.len();
    let (lambda2, lambda_max) = (values[1], values[n - 1]);
    if !(lambda2 > 1e-12 * lambda_max.abs().max(f64::MIN_POSITIVE)) {
        return Err(Error::DisconnectedGraph { lambda2, lambda_max });
    }
    Ok(())
}

/// Evaluates an invariant from the spectrum of its operator (the adjacency
/// spectrum for [`Invariant::FrobeniusSqW`], the Laplacian spectrum
/// otherwise).
pub fn invariant(spectrum: &Spectrum, id: &Invariant) -> Result<f64> {
    let v = spectrum.values();
    let n = v.len();
    if n < 2 {
        return Err(Error::TooFewPoints { min: 2, got: n });
    }
    Ok(match *id {
        Invariant::TraceL => v.iter().sum(),
        Invariant::FrobeniusSqW => v.iter().map(|x| x * x).sum(),
        Invariant::Lambda2 => v[1],
        Invariant::LambdaMax => v[n - 1],
        Invariant::RTot => {
            require_connected(v)?;
            n as f64 * v[1..].iter().map(|x| 1.0 / x).sum::<f64>()
        }
        Invariant::CondNumber => {
            require_connected(v)?;
            v[n - 1] / v[1]
        }
        Invariant::Variance => spectrum.variance(),
        Invariant::IntervalDist { lo, hi } => {
            v.iter().map(|x| (x - lo).abs() + (x - hi).abs() - (hi - lo).abs()).sum()
        }
    })
}

/// `‖W‖_F² = Σ_{i≠j} W_ij²`
pub fn frobenius_sq(w: &DMatrix<f64>) -> f64 {
    w.iter().map(|x| x * x).sum()
}

/// Invariant of the graph on a configuration. Trace and Frobenius norm are
/// summed directly from the edge weights; the rest go through the spectrum.
pub fn evaluate(config: &PointConfig, f: &WeightFunction, id: &Invariant) -> Result<f64> {
    let w = weight_vector(config, f)?;
    evaluate_weights(config.n(), w, id)
}

pub(crate) fn evaluate_weights(n: usize, w: Vec<f64>, id: &Invariant) -> Result<f64> {
    match id {
        Invariant::TraceL => Ok(2.0 * w.iter().sum::<f64>()),
        Invariant::FrobeniusSqW => Ok(2.0 * w.iter().map(|x| x * x).sum::<f64>()),
        _ => {
            let g = WeightedGraph::from_weights(n, w);
            invariant(&sym_eigenvalues(&g.laplacian)?, id)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{random_config, ManifoldSpec};
    use crate::kernel::assemble;
    use approx::assert_relative_eq;

    #[test]
    fn eigen_small_examples() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let e = sym_eigen(&a).unwrap();
        assert_relative_eq!(e.spectrum.values()[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(e.spectrum.values()[1], 3.0, epsilon = 1e-14);
        let l = DMatrix::from_fn(3, 3, |i, j| if i == j { 2.0 } else { -1.0 });
        let v = sym_eigen(&l).unwrap().spectrum;
        for (x, y) in v.values().iter().zip([0.0, 3.0, 3.0]) {
            assert!((x - y).abs() < 1e-14);
        }
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(sym_eigen(&bad), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn eigenpair_contract() {
        for seed in 0..5 {
            let c = random_config(&ManifoldSpec::sphere(3).unwrap(), 15, seed).unwrap();
            let g = assemble(&c, &WeightFunction::exp_decay(1.5).unwrap()).unwrap();
            let e = sym_eigen(&g.laplacian).unwrap();
            let u = &e.vectors;
            let ortho = u.transpose() * u - DMatrix::identity(15, 15);
            assert!(ortho.amax() <= 1e-10);
            let lam = DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(e.spectrum.values()));
            let resid = &g.laplacian * u - u * lam;
            assert!(resid.amax() <= 1e-8 * g.laplacian.amax());
            for (j, lj) in e.spectrum.values().iter().enumerate() {
                let col = u.column(j);
                let rq = col.dot(&(&g.laplacian * col));
                assert!((rq - lj).abs() <= 1e-10 * g.laplacian.amax());
            }
            assert!(e.spectrum.values().windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn invariant_examples() {
        let s = Spectrum::new(vec![2.0, 0.0]);
        assert_eq!(invariant(&s, &Invariant::Variance).unwrap(), 1.0);
        let s = Spectrum::new(vec![0.0, 1.0, 2.0]);
        assert_eq!(invariant(&s, &Invariant::interval(0.5, 1.5).unwrap()).unwrap(), 2.0);
        assert!(matches!(
            invariant(&Spectrum::new(vec![0.0, 0.0, 1.0]), &Invariant::RTot),
            Err(Error::DisconnectedGraph { .. })
        ));
        assert!(Invariant::interval(1.0, 1.0).is_err());
    }

    #[test]
    fn simplex_closed_forms() {
        let h = 0.75f64.sqrt();
        let tri = PointConfig::new(
            ManifoldSpec::sphere(2).unwrap(),
            vec![vec![1.0, 0.0], vec![-0.5, h], vec![-0.5, -h]],
        )
        .unwrap();
        let f = WeightFunction::exp_decay(2.0).unwrap();
        let rtot = evaluate(&tri, &f, &Invariant::RTot).unwrap();
        assert_relative_eq!(rtot, 2.0 * 6f64.exp(), max_relative = 1e-12);
        assert_relative_eq!(rtot, 806.86, max_relative = 1e-5);
        assert_relative_eq!(
            evaluate(&tri, &f, &Invariant::FrobeniusSqW).unwrap(),
            6.0 * (-12.0f64).exp(),
            max_relative = 1e-13
        );

        let s = 1.0 / 3f64.sqrt();
        let tet = PointConfig::new(
            ManifoldSpec::sphere(3).unwrap(),
            vec![vec![s, s, s], vec![s, -s, -s], vec![-s, s, -s], vec![-s, -s, s]],
        )
        .unwrap();
        let lmax = evaluate(&tet, &f, &Invariant::LambdaMax).unwrap();
        assert_relative_eq!(lmax, 4.0 * (-16.0f64 / 3.0).exp(), max_relative = 1e-12);
        assert_relative_eq!(lmax, 1.9312e-2, max_relative = 1e-4);
    }

    #[test]
    fn frobenius_matches_adjacency_spectrum() {
        assert_eq!(frobenius_sq(&DMatrix::from_row_slice(2, 2, &[0.0, 0.3, 0.3, 0.0])), 2.0 * 0.09);
        let c = random_config(&ManifoldSpec::unit_density_canvas(5), 5, 4).unwrap();
        let g = assemble(&c, &WeightFunction::exp_decay(2.0).unwrap()).unwrap();
        let mu = sym_eigenvalues(&g.adjacency).unwrap();
        assert_relative_eq!(frobenius_sq(&g.adjacency), invariant(&mu, &Invariant::FrobeniusSqW).unwrap(), max_relative = 1e-9);
    }

    #[test]
    fn trace_three_way_agreement() {
        let f = WeightFunction::one_minus_exp(2.0).unwrap();
        for seed in 0..5 {
            let c = random_config(&ManifoldSpec::unit_density_canvas(12), 12, seed).unwrap();
            let g = assemble(&c, &f).unwrap();
            let by_spectrum = invariant(&sym_eigenvalues(&g.laplacian).unwrap(), &Invariant::TraceL).unwrap();
            let direct = evaluate(&c, &f, &Invariant::TraceL).unwrap();
            assert_relative_eq!(by_spectrum, g.laplacian.trace(), max_relative = 1e-9);
            assert_relative_eq!(direct, g.laplacian.trace(), max_relative = 1e-9);
        }
    }

    #[test]
    fn rtot_matches_pseudoinverse() {
        let f = WeightFunction::exp_decay(1.0).unwrap();
        for seed in 0..5 {
            let c = random_config(&ManifoldSpec::sphere(3).unwrap(), 8, seed).unwrap();
            let g = assemble(&c, &f).unwrap();
            let e = sym_eigen(&g.laplacian).unwrap();
            // rank-(n-1) reconstruction of the pseudoinverse
            let mut pinv = DMatrix::zeros(8, 8);
            for j in 1..8 {
                let u = e.vectors.column(j);
                pinv += (u * u.transpose()) / e.spectrum.values()[j];
            }
            let rtot = invariant(&e.spectrum, &Invariant::RTot).unwrap();
            assert_relative_eq!(rtot, 8.0 * pinv.trace(), max_relative = 1e-8);
        }
    }

    #[test]
    fn spectrum_contained_in_degree_bounds() {
        let f = WeightFunction::exp_decay(0.5).unwrap();
        for seed in 0..5 {
            let c = random_config(&ManifoldSpec::sphere(4).unwrap(), 10, seed).unwrap();
            let g = assemble(&c, &f).unwrap();
            let dp = g.max_degree();
            let mu = sym_eigenvalues(&g.adjacency).unwrap();
            assert!(mu.values().iter().all(|m| m.abs() <= dp * (1.0 + 1e-12)));
            assert!(mu.values().iter().sum::<f64>().abs() <= 1e-10 * 10.0 * dp);
            let lam = sym_eigenvalues(&g.laplacian).unwrap();
            assert!(lam.values().iter().all(|l| *l >= -1e-12 * dp && *l <= 2.0 * dp * (1.0 + 1e-12)));
        }
    }

    #[test]
    fn disconnected_graph_has_zero_lambda2() {
        // two far-apart clusters under a compactly tiny kernel: weights across
        // the clusters are exactly zero
        let w = vec![1.0, 0.0, 0.0, 0.0, 0.0, 1.0];
        let g = WeightedGraph::from_weights(4, w);
        let lam = sym_eigenvalues(&g.laplacian).unwrap();
        assert!(lam.values()[1].abs() < 1e-14);
        let g = WeightedGraph::from_weights(4, vec![1.0, 0.0, 0.0, 1e-3, 0.0, 1.0]);
        assert!(sym_eigenvalues(&g.laplacian).unwrap().values()[1] > 1e-6);
    }

    #[test]
    fn names_roundtrip() {
        for id in Invariant::catalogue(0.5, 1.5) {
            assert_eq!(id.to_string().parse::<Invariant>().unwrap(), id);
        }
        let o: Objective = "1/lambda2".parse().unwrap();
        assert_eq!(o, Objective::reciprocal(Invariant::Lambda2));
        assert_eq!("-lambda2".parse::<Objective>().unwrap().sense, Sense::Maximize);
        assert!("foo".parse::<Invariant>().is_err());
    }
}
