//! Spectral invariants of distance-weighted graphs built from point
//! configurations.
//!
//! A configuration of `n` points on a unit sphere (chordal metric) or a flat
//! torus (minimum-image metric) defines a complete graph whose edge weights are
//! `f(d²)` for a kernel `f`. This crate assembles the adjacency matrix `W` and
//! the Laplacian `L = D - W`, evaluates spectral invariants of them (trace,
//! spectral radius, algebraic connectivity, effective resistance, condition
//! number, eigenvalue variance, distance of the spectrum to an interval),
//! differentiates those invariants with respect to point positions and edge
//! weights, and minimizes them with a manifold-aware BFGS.
//!
//! The [`lattice`] module treats the infinite-lattice analogue: dispersion
//! relations, density of states and spectral moments of 2-D Bravais lattices,
//! plus the periodic truncations used for fundamental-domain sweeps.
//!
//! ```
//! use specpts_core::{geometry::{ManifoldSpec, PointConfig}, kernel::WeightFunction,
//!     spectral::{Invariant, evaluate}};
//!
//! let tri = PointConfig::new(
//!     ManifoldSpec::sphere(2).unwrap(),
//!     vec![vec![1.0, 0.0], vec![-0.5, 0.75f64.sqrt()], vec![-0.5, -0.75f64.sqrt()]],
//! ).unwrap();
//! let f = WeightFunction::exp_decay(2.0).unwrap();
//! let rtot = evaluate(&tri, &f, &Invariant::RTot).unwrap();
//! assert!((rtot - 2.0 * 6f64.exp()).abs() < 1e-9 * rtot);
//! ```

pub mod error;
pub mod experiments;
pub mod geometry;
pub mod gradients;
pub mod kernel;
pub mod lattice;
pub mod optimize;
pub mod output;
pub mod spectral;

pub use error::{Error, Result};
