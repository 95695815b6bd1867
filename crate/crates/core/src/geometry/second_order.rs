//! Second-order tangent sets and tangent-cone membership.
//!
//! For `t ∈ L` and `s ∈ L^{⊥_S}`:
//!
//! * `J(t) = {j ∈ J̃ : u_j·t = 0}`;
//! * `(t, s) ∈ C₂` iff `t ∈ C ∩ u^⊥` and
//!   `½ tᵀ∇²g_j(θ*)t + u_j·s ≤ 0` for all `j ∈ J(t)`;
//! * `(t, s) ∈ C₂⁽ⁿ⁾` iff `θ* + t/√n + s/n ∈ Θ`.

use nalgebra::DVector;

use super::{ConeFrame, ConstraintSet};

const DOT_TOL: f64 = 1e-10;

/// Frame plus the constraint set, giving both the limiting predicates and
/// their finite-`n` counterparts. Immutable and shareable across threads.
#[derive(Debug, Clone)]
pub struct SecondOrderSets {
    pub frame: ConeFrame,
    pub cs: ConstraintSet,
}

impl SecondOrderSets {
    pub fn new(frame: ConeFrame, cs: ConstraintSet) -> SecondOrderSets {
        SecondOrderSets { frame, cs }
    }

    /// `J(t)` for `t ∈ L`.
    pub fn j_of_t(&self, t: &DVector<f64>) -> Vec<usize> {
        self.frame
            .facet
            .iter()
            .cloned()
            .filter(|&j| {
                let uj = self.frame.grad_of(j);
                uj.dot(t).abs() <= DOT_TOL * (1.0 + uj.norm() * t.norm())
            })
            .collect()
    }

    /// `t ∈ C ∩ u^⊥` for `t ∈ L` (the `u·t = 0` part holds identically on
    /// `L` because `−u` is a positive combination of the `J*` gradients).
    pub fn in_face(&self, t: &DVector<f64>) -> bool {
        self.frame.facet.iter().all(|&j| {
            let uj = self.frame.grad_of(j);
            uj.dot(t) <= DOT_TOL * (1.0 + uj.norm() * t.norm())
        })
    }

    /// Membership in the second-order tangent set `C₂`.
    pub fn c2_membership(&self, t: &DVector<f64>, s: &DVector<f64>) -> bool {
        if !self.in_face(t) {
            return false;
        }
        self.j_of_t(t).into_iter().all(|j| {
            let uj = self.frame.grad_of(j);
            let h = self.frame.hessian_of(j);
            let q = 0.5 * t.dot(&(h * t)) + uj.dot(s);
            q <= DOT_TOL * (1.0 + uj.norm() * s.norm() + t.norm_squared())
        })
    }

    /// Membership in `C₂⁽ⁿ⁾ = {(t,s) : θ* + t/√n + s/n ∈ Θ}`.
    pub fn c2n_membership(&self, t: &DVector<f64>, s: &DVector<f64>, n: usize) -> bool {
        let nf = n as f64;
        let theta = &self.frame.theta_star + t / nf.sqrt() + s / nf;
        self.cs.membership(&theta)
    }
}

#[derive(Debug, Clone, Copy)]
pub enum TangentScale {
    /// `Tₙ = √n(Θ − θ*)`.
    Finite(usize),
    /// The support cone `C` (closure of the tangent cone; the difference is
    /// a Lebesgue-null set).
    Limit,
}

/// Membership of `t` in the scaled tangent set.
pub fn tangent_membership(
    cs: &ConstraintSet,
    frame: &ConeFrame,
    t: &DVector<f64>,
    scale: TangentScale,
) -> bool {
    match scale {
        TangentScale::Finite(n) => {
            let theta = &frame.theta_star + t / (n as f64).sqrt();
            cs.membership(&theta)
        }
        TangentScale::Limit => frame.facet.iter().all(|&j| {
            let uj = frame.grad_of(j);
            uj.dot(t) <= DOT_TOL * (1.0 + uj.norm() * t.norm())
        }),
    }
}
