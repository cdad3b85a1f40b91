//! Solver library for positive multi-bump standing waves of
//! `-Δu + a(x)u + b(x)u^q - u^p = 0` on a truncated Dirichlet box.
//!
//! The pipeline: sample the coefficient pair on a grid (`field`), solve the
//! constant-coefficient limit problem for the reference bump profile
//! (`limit`), split candidates at the level `delta` into submerged and
//! emerging parts and project onto the constraint classes (`decomp`,
//! `energy`), run the inner constrained minimization and the outer
//! maximization over bump layouts (`maxmin`), and verify decay, shape,
//! multiplier, and ground-state trends (`diagnostics`).
//!
//! All numerics are generic over the scalar type via [`scalar::Real`];
//! the `*64` aliases below fix `f64`, which is what the CLI and the
//! acceptance suite use.

pub mod config;
pub mod decomp;
pub mod diagnostics;
pub mod energy;
pub mod error;
pub mod field;
pub mod limit;
pub mod maxmin;
pub mod scalar;

pub use error::{Error, Result};

pub type Domain64 = field::Domain<f64>;
pub type GridField64 = field::GridField<f64>;
pub type CoefficientPair64 = field::CoefficientPair<f64>;
pub type LimitPack64 = limit::LimitPack<f64>;
pub type ThresholdSet64 = decomp::ThresholdSet<f64>;
pub type BumpLayout64 = decomp::BumpLayout<f64>;
pub type InnerOptions64 = maxmin::InnerOptions<f64>;
pub type InnerSolveResult64 = maxmin::InnerSolveResult<f64>;
pub type MaxMinReport64 = maxmin::MaxMinReport<f64>;
