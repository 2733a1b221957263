//! Positivity-preserving predictor-corrector SDIRK integration for
//! production-destruction systems written in graph-Laplacian form
//! `y' = G(t, y) y`.
//!
//! A base SDIRK step produces a predictor. When the predictor (or one of
//! its stages) leaves the nonnegative orthant, a Patankar-type corrector
//! rebuilds an averaged graph Laplacian from clipped, ratio-scaled stage
//! data and solves one M-matrix system, which yields a nonnegative
//! solution that conserves every linear invariant in the left kernel of
//! `G`.
//!
//! Modules, bottom up:
//!
//! - [`numerics`]: dense matrices, LU, weighted norms, slope fitting.
//! - [`pds`]: model types, assembly from rates, structural checks.
//! - [`patankar`]: clipping, ratio scaling and the corrector solves.
//! - [`sdirk`]: tableaus, stage solver, steps and the integration driver.
//! - [`problems`]: Robertson, MAPK, stratospheric chemistry and KdV.
//! - [`harness`]: experiment commands behind the `pdint` binary.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod harness;
pub mod numerics;
pub mod patankar;
pub mod pds;
pub mod problems;
pub mod sdirk;

pub use error::{Error, Result};
pub use numerics::{DenseMatrix, Vector};
pub use patankar::{CorrectionDiagnostics, EpsilonMode, ScalingPolicy};
pub use pds::{GraphLaplacianModel, HFormModel, Invariant, Model, StructureReport};
pub use sdirk::{
    integrate, ButcherTableau, CorrectionMode, Method, SolverConfig, StepMode, Trajectory,
    TrajectoryStatus,
};
