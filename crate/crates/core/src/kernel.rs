//! Weight functions and assembly of `W`, degrees, `L` and the incidence
//! matrix of the complete graph on a point configuration.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{EdgeIndex, PairGeometry, PointConfig};

/// Kernel `f` applied to squared distances.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", try_from = "KernelRepr", into = "KernelRepr")]
pub enum WeightFunction {
    /// `f(r) = exp(-alpha r)`
    ExpDecay { alpha: f64 },
    /// `f(r) = 1 - exp(-alpha r)`
    OneMinusExp { alpha: f64 },
    /// `f(r) = r^(-s)`
    InversePower { s: f64 },
    /// `f(r) = -log r`
    NegLog,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
enum KernelRepr {
    #[serde(alias = "exp_decay")]
    Exp { alpha: f64 },
    #[serde(alias = "one_minus_exp")]
    OneMinusExp { alpha: f64 },
    #[serde(alias = "inverse_power")]
    Pow { s: f64 },
    #[serde(alias = "neg_log")]
    NegLog,
}

impl TryFrom<KernelRepr> for WeightFunction {
    type Error = Error;
    fn try_from(r: KernelRepr) -> Result<Self> {
        match r {
            KernelRepr::Exp { alpha } => WeightFunction::exp_decay(alpha),
            KernelRepr::OneMinusExp { alpha } => WeightFunction::one_minus_exp(alpha),
            KernelRepr::Pow { s } => WeightFunction::inverse_power(s),
            KernelRepr::NegLog => Ok(WeightFunction::NegLog),
        }
    }
}

impl From<WeightFunction> for KernelRepr {
    fn from(f: WeightFunction) -> Self {
        match f {
            WeightFunction::ExpDecay { alpha } => KernelRepr::Exp { alpha },
            WeightFunction::OneMinusExp { alpha } => KernelRepr::OneMinusExp { alpha },
            WeightFunction::InversePower { s } => KernelRepr::Pow { s },
            WeightFunction::NegLog => KernelRepr::NegLog,
        }
    }
}

/// Shape flags of a kernel on `r > 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KernelFlags {
    pub nonnegative: bool,
    pub decreasing: bool,
    pub increasing: bool,
    pub convex: bool,
    pub concave: bool,
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::BadKernel(format!("{name} must be positive and finite, got {v}")))
    }
}

impl WeightFunction {
    pub fn exp_decay(alpha: f64) -> Result<Self> {
        Ok(WeightFunction::ExpDecay { alpha: positive("alpha", alpha)? })
    }

    pub fn one_minus_exp(alpha: f64) -> Result<Self> {
        Ok(WeightFunction::OneMinusExp { alpha: positive("alpha", alpha)? })
    }

    pub fn inverse_power(s: f64) -> Result<Self> {
        Ok(WeightFunction::InversePower { s: positive("s", s)? })
    }

    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            WeightFunction::ExpDecay { alpha } => (-alpha * r).exp(),
            WeightFunction::OneMinusExp { alpha } => -(-alpha * r).exp_m1(),
            WeightFunction::InversePower { s } => r.powf(-s),
            WeightFunction::NegLog => -r.ln(),
        }
    }

    /// `f'(r)`
    pub fn deriv(&self, r: f64) -> f64 {
        match *self {
            WeightFunction::ExpDecay { alpha } => -alpha * (-alpha * r).exp(),
            WeightFunction::OneMinusExp { alpha } => alpha * (-alpha * r).exp(),
            WeightFunction::InversePower { s } => -s * r.powf(-s - 1.0),
            WeightFunction::NegLog => -1.0 / r,
        }
    }

    /// Kernels that blow up at `r = 0`.
    pub fn singular_at_zero(&self) -> bool {
        matches!(self, WeightFunction::InversePower { .. } | WeightFunction::NegLog)
    }

    pub fn flags(&self) -> KernelFlags {
        match self {
            WeightFunction::ExpDecay { .. } | WeightFunction::InversePower { .. } => KernelFlags {
                nonnegative: true,
                decreasing: true,
                increasing: false,
                convex: true,
                concave: false,
            },
            WeightFunction::OneMinusExp { .. } => KernelFlags {
                nonnegative: true,
                decreasing: false,
                increasing: true,
                convex: false,
                concave: true,
            },
            WeightFunction::NegLog => KernelFlags {
                nonnegative: false,
                decreasing: true,
                increasing: false,
                convex: true,
                concave: false,
            },
        }
    }

    /// `f(r)²`
    pub fn eval_sq(&self, r: f64) -> f64 {
        let v = self.eval(r);
        v * v
    }
}

impl fmt::Display for WeightFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightFunction::ExpDecay { alpha } => write!(f, "exp:{alpha}"),
            WeightFunction::OneMinusExp { alpha } => write!(f, "1mexp:{alpha}"),
            WeightFunction::InversePower { s } => write!(f, "pow:{s}"),
            WeightFunction::NegLog => write!(f, "neglog"),
        }
    }
}

/// Short syntax used on the command line: `exp:2`, `1mexp:2`, `pow:0.5`,
/// `neglog`.
impl FromStr for WeightFunction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "neglog" {
            return Ok(WeightFunction::NegLog);
        }
        let (family, param) =
            s.split_once(':').ok_or_else(|| Error::Parse(format!("kernel '{s}' needs family:param")))?;
        let v: f64 = param.parse().map_err(|_| Error::Parse(format!("bad kernel parameter '{param}'")))?;
        match family {
            "exp" => WeightFunction::exp_decay(v),
            "1mexp" | "one_minus_exp" => WeightFunction::one_minus_exp(v),
            "pow" => WeightFunction::inverse_power(v),
            _ => Err(Error::Parse(format!("unknown kernel family '{family}'"))),
        }
    }
}

/// Edge weights `w_k = f(d²_k)`.
pub fn weight_vector(config: &PointConfig, f: &WeightFunction) -> Result<Vec<f64>> {
    weights_from_geometry(&PairGeometry::compute(config), config.n(), f)
}

pub(crate) fn weights_from_geometry(pg: &PairGeometry, n: usize, f: &WeightFunction) -> Result<Vec<f64>> {
    let edges = EdgeIndex::new(n);
    pg.dist_sq
        .iter()
        .enumerate()
        .map(|(k, &d2)| {
            if f.singular_at_zero() && d2 <= 0.0 {
                let (i, j) = edges.pair(k);
                Err(Error::ZeroDistance { i, j })
            } else {
                Ok(f.eval(d2))
            }
        })
        .collect()
}

/// Adjacency, degrees and Laplacian of a complete weighted graph.
#[derive(Clone, Debug)]
pub struct WeightedGraph {
    pub weights: Vec<f64>,
    pub adjacency: DMatrix<f64>,
    pub degrees: Vec<f64>,
    pub laplacian: DMatrix<f64>,
}

impl WeightedGraph {
    /// Builds the graph from an edge-weight vector ordered by [`EdgeIndex`].
    pub fn from_weights(n: usize, weights: Vec<f64>) -> Self {
        let edges = EdgeIndex::new(n);
        assert_eq!(weights.len(), edges.len(), "weight vector length");
        let mut adjacency = DMatrix::zeros(n, n);
        for (k, (i, j)) in edges.iter().enumerate() {
            adjacency[(i, j)] = weights[k];
            adjacency[(j, i)] = weights[k];
        }
        let degrees: Vec<f64> = (0..n).map(|i| adjacency.row(i).iter().sum()).collect();
        let mut laplacian = -adjacency.clone();
        for (i, d) in degrees.iter().enumerate() {
            laplacian[(i, i)] = *d;
        }
        WeightedGraph { weights, adjacency, degrees, laplacian }
    }

    pub fn n(&self) -> usize {
        self.degrees.len()
    }

    pub fn max_degree(&self) -> f64 {
        self.degrees.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Trace of `L`, i.e. the sum of `f(d²)` over ordered pairs.
    pub fn trace_laplacian(&self) -> f64 {
        2.0 * self.weights.iter().sum::<f64>()
    }
}

pub fn assemble(config: &PointConfig, f: &WeightFunction) -> Result<WeightedGraph> {
    Ok(WeightedGraph::from_weights(config.n(), weight_vector(config, f)?))
}

/// Arc-vertex incidence matrix of the complete graph: row `k` has `+1` at the
/// head (larger index) and `-1` at the tail.
pub fn incidence_matrix(n: usize) -> DMatrix<f64> {
    let edges = EdgeIndex::new(n);
    let mut b = DMatrix::zeros(edges.len(), n);
    for (k, (i, j)) in edges.iter().enumerate() {
        b[(k, j)] = 1.0;
        b[(k, i)] = -1.0;
    }
    b
}
