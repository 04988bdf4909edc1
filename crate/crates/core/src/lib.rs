//! Numerical toolkit for stochastic semigroups.
//!
//! The crate implements, simulates and cross-checks the long-time behaviour
//! of a family of mass-preserving evolutions on L¹ spaces:
//!
//! - [`transfer`]: transfer operators of piecewise-smooth interval maps
//!   (exact tent-map engine, Ulam discretization, conjugacy transport);
//! - [`chains`]: continuous-time Markov chain semigroups (uniformization,
//!   perturbation series, substitution-model closed forms, birth-death
//!   stationary laws, explosivity);
//! - [`spectral`]: matrix-semigroup asymptotics (dominant-eigenvalue
//!   rank-one limits, Jordan-driven polynomial growth, spectral splitting);
//! - [`sde`]: 1-D population diffusions with environmental noise;
//! - [`pdmp`]: piecewise-deterministic Markov processes (switching systems,
//!   threshold gene models, velocity jumps, semi-Markov holding times);
//! - [`structured`]: structured-population PDE solvers with Malthusian-rate
//!   estimation.
//!
//! Everything is built on [`numerics`] (fixed-step flows, adaptive
//! quadrature, counter-based random streams) and [`density`] (grid densities
//! with L¹ diagnostics). The convention throughout is the row-vector one:
//! states are row vectors and generators act on the right, `x(t) = x e^{tQ}`.

pub mod chains;
pub mod density;
pub mod error;
mod graph;
pub mod linalg;
pub mod numerics;
pub mod pdmp;
pub mod sde;
pub mod spectral;
pub mod structured;
pub mod transfer;

pub use error::{Error, Result};
