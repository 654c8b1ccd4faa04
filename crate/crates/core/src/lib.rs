//! Numerics for bubble decompositions in the fractional Sobolev setting.
//!
//! The crate provides, bottom up:
//! - closed-form parameters and profiles ([`params`], [`bubble`]),
//! - adaptive whole-space quadrature ([`quad`]),
//! - periodic spectral calculus on uniform grids ([`grid`], [`periodize`]),
//! - exact-cell quadrature on tan-graded line grids ([`linegrid`]),
//! - deficit functionals and weighted norms ([`norms`]),
//! - bubble-parameter fitting ([`fitter`]),
//! - the constrained linear theory and damped nonlinear correction
//!   ([`linsolve`]),
//! - eigenanalysis of the linearized operator ([`eigen`]),
//! - sweep orchestration and regression helpers ([`sweep`]).

pub mod bubble;
pub mod error;
pub mod gamma;
pub mod grid;
pub mod linegrid;
pub mod fitter;
pub mod norms;
pub mod params;
pub mod periodize;
pub mod quad;

pub use error::{Error, Result};
pub use params::{Regime, SobolevParams};
