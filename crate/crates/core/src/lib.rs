//! Space-time curvature tensors of Ricci flows, the cone of curvature tensors
//! with nonnegative isotropic curvature on `M x R^2`, and numerical checks of
//! the associated matrix and trace Harnack inequalities.
//!
//! Module map:
//! - [`acvt`]: dense algebraic curvature tensors, Kulkarni-Nomizu products, the quadratic map `Q`.
//! - [`cone`]: the isotropic form, cone membership, second-variation and block-matrix algebra.
//! - [`odeflow`]: RK4 integration of `dS/dt = Q(S)` with cone monitoring.
//! - [`geometries`]: bundled Ricci flows (flat, shrinking sphere, cigar soliton, warped numeric flow).
//! - [`spacetime`]: `P`, `M`, the space-time tensor `S`, residual checks and Harnack diagnostics.
//! - [`jet`]: truncated Taylor arithmetic used for exact derivatives.

pub mod acvt;
pub mod cone;
pub mod error;
pub mod geometries;
pub mod jet;
pub mod odeflow;
pub mod spacetime;

pub use acvt::{AlgCurvTensor, ContractionMetric, Sym2, ValidationReport};
pub use error::{Error, Result};
