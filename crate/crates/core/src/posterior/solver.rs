//! Constrained convex solvers: projected gradient with backtracking for
//! smooth objectives, projected subgradient with Polyak-style steps and a
//! shrinking target gap for nonsmooth ones.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::geometry::ConstraintSet;

/// Projected gradient descent for smooth convex objectives. Stops when the
/// gradient mapping `‖x − proj(x − γ∇f)‖/γ` falls below `tol`.
pub fn projected_gradient<F, G>(
    f: F,
    grad: G,
    cs: &ConstraintSet,
    x0: &DVector<f64>,
    max_iter: usize,
    tol: f64,
) -> Result<DVector<f64>>
where
    F: Fn(&DVector<f64>) -> Result<f64>,
    G: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let mut x = cs.project(x0)?;
    let mut step = 1.0f64;
    let mut fx = f(&x)?;
    for _ in 0..max_iter {
        let g = grad(&x)?;
        let mut accepted = None;
        for _ in 0..60 {
            let cand = cs.project(&(&x - &g * step))?;
            let diff = &cand - &x;
            let fc = f(&cand)?;
            // Sufficient-decrease test for the projected step.
            if fc <= fx + g.dot(&diff) + diff.norm_squared() / (2.0 * step) + 1e-15 * fx.abs() {
                accepted = Some((cand, fc, diff.norm()));
                break;
            }
            step *= 0.5;
        }
        let Some((cand, fc, move_norm)) = accepted else {
            return Err(Error::Solver("backtracking failed to make progress".into()));
        };
        x = cand;
        fx = fc;
        if move_norm / step < tol * (1.0 + x.norm()) {
            return Ok(x);
        }
        step = (step * 1.5).min(1e6);
    }
    Err(Error::Solver(format!(
        "projected gradient did not reach tolerance {tol:.1e}"
    )))
}

#[derive(Debug, Clone)]
pub struct SubgradientSolution {
    pub x: DVector<f64>,
    pub value: f64,
    pub iterations: usize,
}

/// Projected subgradient with Polyak steps `α = (f(x) − target)/‖g‖²`,
/// where the target `f_best − δ` shrinks geometrically: each round runs a
/// fixed number of steps from the incumbent, then halves δ. Terminates when
/// δ is negligible relative to the objective scale.
pub fn projected_subgradient<F, G>(
    value: F,
    subgrad: G,
    cs: &ConstraintSet,
    x0: &DVector<f64>,
    steps_per_round: usize,
) -> Result<SubgradientSolution>
where
    F: Fn(&DVector<f64>) -> f64,
    G: Fn(&DVector<f64>) -> DVector<f64>,
{
    let mut x_best = cs.project(x0)?;
    let mut f_best = value(&x_best);
    let scale = 1.0 + f_best.abs();
    let mut delta = 0.5 * scale;
    let mut iterations = 0usize;
    while delta > 1e-14 * scale {
        let mut x = x_best.clone();
        for _ in 0..steps_per_round {
            iterations += 1;
            let g = subgrad(&x);
            let gn2 = g.norm_squared();
            if gn2 < 1e-28 {
                // Zero subgradient: unconstrained optimum.
                let fx = value(&x);
                if fx < f_best {
                    f_best = fx;
                    x_best = x.clone();
                }
                return Ok(SubgradientSolution {
                    x: x_best,
                    value: f_best,
                    iterations,
                });
            }
            let fx = value(&x);
            let alpha = (fx - (f_best - delta)) / gn2;
            x = cs.project(&(&x - &g * alpha))?;
            let fx_new = value(&x);
            if fx_new < f_best {
                f_best = fx_new;
                x_best = x.clone();
            }
        }
        delta *= 0.5;
    }
    Ok(SubgradientSolution {
        x: x_best,
        value: f_best,
        iterations,
    })
}
