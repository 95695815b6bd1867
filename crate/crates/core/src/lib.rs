//! Numerical verification of posterior limit laws for log-concave Bayesian
//! models under convex constraints.
//!
//! The library builds, for a model with convex negative log-likelihood and a
//! flat prior supported on a convex set `Θ`, the exact rescaled posterior
//! distribution and the matching limit law in each of three regimes:
//!
//! * well-specified — the population optimum `θ*` is interior, the limit is
//!   Gaussian `N(−S⁻¹Yₙ, S⁻¹)` with `S = ∇²Φ(θ*)`;
//! * nearly misspecified — `θ*` sits on the boundary with `∇Φ(θ*) = 0`, the
//!   limit is the same Gaussian conditioned to the tangent cone of `Θ`;
//! * misspecified — `θ*` is on the boundary with `u = ∇Φ(θ*) ≠ 0`, the
//!   `(√n, n)`-rescaled posterior converges to a law supported on the second
//!   order tangent set of `Θ`, with density `∝ exp(−tᵀYₙ − ‖t‖²_S/2 − sᵀu)`.
//!
//! Total-variation distances between the exact and limiting densities are
//! computed by deterministic grid quadrature; an experiment harness sweeps
//! sample sizes and seeds and emits CSV/JSON reports.

pub mod acceptance;
pub mod error;

pub mod geometry;
pub mod harness;
pub mod limit;
pub mod linalg;
pub mod lp;
pub mod model;
pub mod posterior;
pub mod quad;
pub mod tv;

pub use error::{Error, Result};
