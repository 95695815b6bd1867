//! Constraint sets `Θ = {θ : g_j(θ) ≤ 0}` with twice-differentiable convex
//! `g_j`, built-in shapes, and Euclidean projection via Dykstra's algorithm.
//!
//! Shape ids and JSON parameters:
//!
//! * `all` — `{}` (no constraints, `Θ = R^d`)
//! * `halfspace` — `{"normal": [..], "offset": f}` for `normal·θ ≤ offset`
//! * `box` — `{"lower": [..|null], "upper": [..|null]}`
//! * `orthant` — `{"shift": [..]}` for `θ_k ≤ shift_k` (default 0)
//! * `ball` — `{"center": [..], "radius": f}`
//! * `ellipsoid` — `{"center": [..], "matrix": [[..],..]}` for
//!   `(θ−c)ᵀ M (θ−c) ≤ 1`, `M` symmetric positive definite
//! * `intersection` — `{"parts": [shape, ..], "slater": [..]?}`

use nalgebra::{DMatrix, DVector};
use serde_json::Value;

use super::FEAS_TOL;
use crate::error::{Error, Result};

/// One convex constraint `g(θ) ≤ 0` with exact derivatives.
#[derive(Debug, Clone)]
pub enum SmoothConstraint {
    /// `a·θ − b ≤ 0`
    Affine { a: DVector<f64>, b: f64 },
    /// `½ θᵀQθ + a·θ + c ≤ 0` with `Q` positive semidefinite
    Quadratic {
        q: DMatrix<f64>,
        a: DVector<f64>,
        c: f64,
    },
}

impl SmoothConstraint {
    pub fn value(&self, theta: &DVector<f64>) -> f64 {
        match self {
            SmoothConstraint::Affine { a, b } => a.dot(theta) - b,
            SmoothConstraint::Quadratic { q, a, c } => {
                0.5 * theta.dot(&(q * theta)) + a.dot(theta) + c
            }
        }
    }

    pub fn gradient(&self, theta: &DVector<f64>) -> DVector<f64> {
        match self {
            SmoothConstraint::Affine { a, .. } => a.clone(),
            SmoothConstraint::Quadratic { q, a, .. } => q * theta + a,
        }
    }

    pub fn hessian(&self, dim: usize) -> DMatrix<f64> {
        match self {
            SmoothConstraint::Affine { .. } => DMatrix::zeros(dim, dim),
            SmoothConstraint::Quadratic { q, .. } => q.clone(),
        }
    }

    /// The constraint `t ↦ g(anchor + t/scale)`.
    fn rescaled(&self, anchor: &DVector<f64>, scale: f64) -> SmoothConstraint {
        match self {
            SmoothConstraint::Affine { a, b } => SmoothConstraint::Affine {
                a: a / scale,
                b: b - a.dot(anchor),
            },
            SmoothConstraint::Quadratic { q, a, c } => SmoothConstraint::Quadratic {
                q: q / (scale * scale),
                a: (q * anchor + a) / scale,
                c: 0.5 * anchor.dot(&(q * anchor)) + a.dot(anchor) + c,
            },
        }
    }

    /// Euclidean projection onto `{g ≤ 0}`.
    fn project(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        if self.value(z) <= 0.0 {
            return Ok(z.clone());
        }
        match self {
            SmoothConstraint::Affine { a, b } => {
                Ok(z - a * ((a.dot(z) - b) / a.norm_squared()))
            }
            SmoothConstraint::Quadratic { q, a, .. } => {
                let dim = z.len();
                let eye = DMatrix::identity(dim, dim);
                let x_at = |mu: f64| -> Result<DVector<f64>> {
                    let m = &eye + q * mu;
                    let rhs = z - a * mu;
                    m.lu()
                        .solve(&rhs)
                        .ok_or_else(|| Error::Geometry("singular projection system".into()))
                };
                // g(x(μ)) is decreasing in μ; bracket then bisect.
                let mut hi = 1.0;
                let mut iter = 0;
                while self.value(&x_at(hi)?) > 0.0 {
                    hi *= 2.0;
                    iter += 1;
                    if iter > 200 {
                        return Err(Error::Geometry(
                            "projection multiplier bracket failed".into(),
                        ));
                    }
                }
                let mut lo = 0.0;
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if self.value(&x_at(mid)?) > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                x_at(hi)
            }
        }
    }
}

/// Finitely many smooth convex constraints with a strictly feasible
/// (Slater) point.
#[derive(Debug, Clone)]
pub struct ConstraintSet {
    constraints: Vec<SmoothConstraint>,
    dim: usize,
    slater: DVector<f64>,
}

impl ConstraintSet {
    pub fn new(
        dim: usize,
        constraints: Vec<SmoothConstraint>,
        slater: DVector<f64>,
    ) -> Result<ConstraintSet> {
        if slater.len() != dim {
            return Err(Error::Config("slater point has wrong dimension".into()));
        }
        let cs = ConstraintSet {
            constraints,
            dim,
            slater,
        };
        let worst = cs.max_violation(&cs.slater);
        if cs.p() > 0 && worst >= -1e-9 {
            return Err(Error::Geometry(format!(
                "slater point is not strictly feasible (max g = {worst:.3e})"
            )));
        }
        Ok(cs)
    }

    /// `Θ = R^dim`.
    pub fn unconstrained(dim: usize) -> ConstraintSet {
        ConstraintSet {
            constraints: Vec::new(),
            dim,
            slater: DVector::zeros(dim),
        }
    }

    pub fn p(&self) -> usize {
        self.constraints.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn constraints(&self) -> &[SmoothConstraint] {
        &self.constraints
    }

    pub fn slater_point(&self) -> &DVector<f64> {
        &self.slater
    }

    pub fn max_violation(&self, theta: &DVector<f64>) -> f64 {
        self.constraints
            .iter()
            .map(|g| g.value(theta))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn membership(&self, theta: &DVector<f64>) -> bool {
        self.constraints.iter().all(|g| g.value(theta) <= FEAS_TOL)
    }

    /// Euclidean projection onto `Θ` (exact for a single constraint,
    /// Dykstra sweeps for intersections).
    pub fn project(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        match self.constraints.len() {
            0 => Ok(z.clone()),
            1 => self.constraints[0].project(z),
            _ => {
                let mut x = z.clone();
                let mut corrections = vec![DVector::zeros(self.dim); self.constraints.len()];
                let tol = 1e-13 * (1.0 + z.norm());
                for _ in 0..10_000 {
                    let mut moved: f64 = 0.0;
                    for (g, p) in self.constraints.iter().zip(corrections.iter_mut()) {
                        let y = g.project(&(&x + &*p))?;
                        let new_p = &x + &*p - &y;
                        moved = moved.max((&y - &x).norm());
                        *p = new_p;
                        x = y;
                    }
                    if moved < tol && self.membership(&x) {
                        return Ok(x);
                    }
                }
                if self.membership(&x) {
                    Ok(x)
                } else {
                    Err(Error::Solver("Dykstra projection did not converge".into()))
                }
            }
        }
    }

    /// The scaled set `{t : anchor + t/scale ∈ Θ}` (e.g. `Tₙ = √n(Θ−θ*)`
    /// for `anchor = θ*`, `scale = √n`).
    pub fn rescaled(&self, anchor: &DVector<f64>, scale: f64) -> ConstraintSet {
        ConstraintSet {
            constraints: self
                .constraints
                .iter()
                .map(|g| g.rescaled(anchor, scale))
                .collect(),
            dim: self.dim,
            slater: (&self.slater - anchor) * scale,
        }
    }

    /// Build a constraint set from its catalog id and JSON parameters.
    pub fn from_id_params(id: &str, params: &Value, dim: usize) -> Result<ConstraintSet> {
        match id {
            "all" => Ok(ConstraintSet::unconstrained(dim)),
            "halfspace" => {
                let a = vector_param(params, "normal", dim)?;
                let b = number_param(params, "offset")?;
                if a.norm() < 1e-12 {
                    return Err(Error::Config("halfspace normal must be nonzero".into()));
                }
                let slater = &a * ((b - 1.0) / a.norm_squared());
                ConstraintSet::new(dim, vec![SmoothConstraint::Affine { a, b }], slater)
            }
            "box" => {
                let lower = optional_bounds(params, "lower", dim)?;
                let upper = optional_bounds(params, "upper", dim)?;
                let mut constraints = Vec::new();
                let mut slater = DVector::zeros(dim);
                for k in 0..dim {
                    let (lo, hi) = (lower[k], upper[k]);
                    if lo >= hi {
                        return Err(Error::Config(format!("empty box on axis {k}")));
                    }
                    if hi.is_finite() {
                        constraints.push(SmoothConstraint::Affine {
                            a: unit(dim, k, 1.0),
                            b: hi,
                        });
                    }
                    if lo.is_finite() {
                        constraints.push(SmoothConstraint::Affine {
                            a: unit(dim, k, -1.0),
                            b: -lo,
                        });
                    }
                    slater[k] = match (lo.is_finite(), hi.is_finite()) {
                        (true, true) => 0.5 * (lo + hi),
                        (true, false) => lo + 1.0,
                        (false, true) => hi - 1.0,
                        (false, false) => 0.0,
                    };
                }
                ConstraintSet::new(dim, constraints, slater)
            }
            "orthant" => {
                let shift = match params.get("shift") {
                    Some(_) => vector_param(params, "shift", dim)?,
                    None => DVector::zeros(dim),
                };
                let constraints = (0..dim)
                    .map(|k| SmoothConstraint::Affine {
                        a: unit(dim, k, 1.0),
                        b: shift[k],
                    })
                    .collect();
                let slater = &shift - DVector::from_element(dim, 1.0);
                ConstraintSet::new(dim, constraints, slater)
            }
            "ball" => {
                let center = vector_param(params, "center", dim)?;
                let radius = number_param(params, "radius")?;
                if radius <= 0.0 {
                    return Err(Error::Config("ball radius must be positive".into()));
                }
                let q = DMatrix::identity(dim, dim) * 2.0;
                let a = &center * -2.0;
                let c = center.norm_squared() - radius * radius;
                ConstraintSet::new(
                    dim,
                    vec![SmoothConstraint::Quadratic { q, a, c }],
                    center,
                )
            }
            "ellipsoid" => {
                let center = vector_param(params, "center", dim)?;
                let m = matrix_param(params, "matrix", dim)?;
                let q = &m * 2.0;
                let a = -(&m * &center) * 2.0;
                let c = center.dot(&(&m * &center)) - 1.0;
                ConstraintSet::new(
                    dim,
                    vec![SmoothConstraint::Quadratic { q, a, c }],
                    center,
                )
            }
            "intersection" => {
                let parts = params
                    .get("parts")
                    .and_then(Value::as_array)
                    .ok_or_else(|| Error::Config("intersection needs a parts array".into()))?;
                let mut constraints = Vec::new();
                let mut anchors = Vec::new();
                for part in parts {
                    let pid = part
                        .get("id")
                        .and_then(Value::as_str)
                        .ok_or_else(|| Error::Config("intersection part needs an id".into()))?;
                    let pparams = part.get("params").cloned().unwrap_or(Value::Null);
                    let sub = ConstraintSet::from_id_params(pid, &pparams, dim)?;
                    anchors.push(sub.slater.clone());
                    constraints.extend(sub.constraints);
                }
                let mut candidates: Vec<DVector<f64>> = Vec::new();
                if let Some(s) = params.get("slater") {
                    let arr = s
                        .as_array()
                        .ok_or_else(|| Error::Config("slater must be an array".into()))?;
                    candidates.push(vector_from_array(arr, dim)?);
                }
                if !anchors.is_empty() {
                    let mean = anchors.iter().fold(DVector::zeros(dim), |acc, a| acc + a)
                        / anchors.len() as f64;
                    candidates.push(mean);
                }
                candidates.extend(anchors);
                let probe = ConstraintSet {
                    constraints: constraints.clone(),
                    dim,
                    slater: DVector::zeros(dim),
                };
                let slater = candidates
                    .into_iter()
                    .find(|c| probe.max_violation(c) < -1e-9)
                    .ok_or_else(|| {
                        Error::Config(
                            "no strictly feasible point found; pass an explicit \"slater\""
                                .into(),
                        )
                    })?;
                ConstraintSet::new(dim, constraints, slater)
            }
            other => Err(Error::Config(format!("unknown constraint-set id '{other}'"))),
        }
    }
}

fn unit(dim: usize, k: usize, v: f64) -> DVector<f64> {
    let mut e = DVector::zeros(dim);
    e[k] = v;
    e
}

fn number_param(params: &Value, key: &str) -> Result<f64> {
    params
        .get(key)
        .and_then(Value::as_f64)
        .ok_or_else(|| Error::Config(format!("missing numeric parameter '{key}'")))
}

fn vector_from_array(arr: &[Value], dim: usize) -> Result<DVector<f64>> {
    if arr.len() != dim {
        return Err(Error::Config(format!(
            "expected {dim} entries, got {}",
            arr.len()
        )));
    }
    let mut out = DVector::zeros(dim);
    for (k, v) in arr.iter().enumerate() {
        out[k] = v
            .as_f64()
            .ok_or_else(|| Error::Config("vector entries must be numbers".into()))?;
    }
    Ok(out)
}

fn vector_param(params: &Value, key: &str, dim: usize) -> Result<DVector<f64>> {
    let arr = params
        .get(key)
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Config(format!("missing array parameter '{key}'")))?;
    vector_from_array(arr, dim)
}

fn optional_bounds(params: &Value, key: &str, dim: usize) -> Result<Vec<f64>> {
    let default = if key == "lower" {
        f64::NEG_INFINITY
    } else {
        f64::INFINITY
    };
    match params.get(key) {
        None => Ok(vec![default; dim]),
        Some(Value::Array(arr)) => {
            if arr.len() != dim {
                return Err(Error::Config(format!("'{key}' has wrong length")));
            }
            arr.iter()
                .map(|v| {
                    if v.is_null() {
                        Ok(default)
                    } else {
                        v.as_f64()
                            .ok_or_else(|| Error::Config("bounds must be numbers or null".into()))
                    }
                })
                .collect()
        }
        Some(_) => Err(Error::Config(format!("'{key}' must be an array"))),
    }
}

fn matrix_param(params: &Value, key: &str, dim: usize) -> Result<DMatrix<f64>> {
    let rows = params
        .get(key)
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Config(format!("missing matrix parameter '{key}'")))?;
    if rows.len() != dim {
        return Err(Error::Config(format!("'{key}' has wrong row count")));
    }
    let mut m = DMatrix::zeros(dim, dim);
    for (i, row) in rows.iter().enumerate() {
        let row = row
            .as_array()
            .ok_or_else(|| Error::Config("matrix rows must be arrays".into()))?;
        if row.len() != dim {
            return Err(Error::Config(format!("'{key}' row {i} has wrong length")));
        }
        for (j, v) in row.iter().enumerate() {
            m[(i, j)] = v
                .as_f64()
                .ok_or_else(|| Error::Config("matrix entries must be numbers".into()))?;
        }
    }
    if (&m - m.transpose()).norm() > 1e-10 {
        return Err(Error::Config(format!("'{key}' must be symmetric")));
    }
    if crate::linalg::min_eigenvalue(&m) <= 0.0 {
        return Err(Error::Config(format!("'{key}' must be positive definite")));
    }
    Ok(m)
}
