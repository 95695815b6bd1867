//! Convex constraint geometry at the population optimum `θ*`: active /
//! facet / face index sets, the subspace `L` and its S-orthogonal
//! complement, second-order tangent sets and the cone margin constants.

mod constraint;
mod frame;
mod second_order;

pub use constraint::{ConstraintSet, SmoothConstraint};
pub use frame::{active_set, alpha_constants, ConeFrame, FaceGeometry};
pub use second_order::{tangent_membership, SecondOrderSets, TangentScale};

/// Feasibility tolerance for membership tests.
pub const FEAS_TOL: f64 = 1e-10;
/// Active-set tolerance, scaled by `1 + ‖∇g_j‖`.
pub const ACTIVE_TOL: f64 = 1e-8;
/// LP optimality tolerance.
pub const LP_TOL: f64 = 1e-9;
/// Gradients closer than this (angle between unit vectors) are duplicates.
pub const ANGLE_TOL: f64 = 1e-8;
/// ‖∇Φ(θ*)‖ below this is treated as a vanishing gradient.
pub const MISSPEC_GRAD_TOL: f64 = 1e-6;
