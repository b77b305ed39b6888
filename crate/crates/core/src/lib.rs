//! Curvature of warped-product Finsler metrics on `ℝ × Bⁿ(ρ)`.
//!
//! A metric is `F = |ȳ| √φ(z, r)` with `z = y⁰/|ȳ|` and `r = |x̄|`. The crate
//! evaluates `φ` as a truncated bivariate Taylor jet and assembles the
//! curvature tensors and the Ricci scalar in closed form from derived scalars.
//! Finite-difference oracles and randomized verification campaigns are
//! included.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod campaign;
pub mod convexity;
pub mod curvature;
pub mod error;
pub mod expr;
pub mod family;
pub mod func;
pub mod jet;
pub mod oracle;
pub mod point;
pub mod quadrature;
pub mod tensor;

pub use campaign::{
    oracle_compare, point_report, scan_convexity, verify, CampaignSpec, CheckKind, CheckResult,
    CurvatureReport, OracleReport, PointReport, ScanReport, TOOL_VERSION,
};
pub use convexity::{convexity_check, rotation_invariance_check, ConvexityGrid, ConvexityReport};
pub use curvature::{
    berwald_tensor, douglas_ode_residuals, douglas_tensor, landsberg_tensor, phi_r,
    projective_flat_residual, ricci_flat_residuals, ricci_scalar, Rank3Tensor, Rank4Tensor,
};
pub use error::{Error, Result};
pub use expr::Expr;
pub use family::{
    phi_g_family, phi_gc_family, phi_randers, preset, preset_names, Domain, FamilyClass,
    FamilySpec, MetricFamily,
};
pub use func::{ExprFunction, GcFunction, JetFn, ScalarFunction1D, SharedFn};
pub use jet::Jet;
pub use oracle::FdConfig;
pub use point::EvalPoint;
pub use tensor::{derived_scalars, fundamental_tensor, spray, spray_divergence, DerivedScalars, FundamentalTensor};
