//! The cone frame at `θ*`: active constraints `J`, facet set `J̃`, face set
//! `J*` with positive multipliers, the subspace split `L ⊕ L^{⊥_S}` and the
//! margin constants `α`.
//!
//! Facets and faces are decided by small LPs over the linearized support
//! cone `C = {t : u_j·t ≤ 0, j ∈ J}`:
//!
//! * `j ∈ J̃` iff `max u_j·t` over `{u_k·t ≤ 0 (k≠j), u_j·t ≤ 1}` is
//!   positive (the constraint is non-redundant for the full-dimensional C);
//! * `j ∈ J*` iff `min u_j·t` over `{t ∈ C, u·t = 0, ‖t‖_∞ ≤ 1}` vanishes
//!   (the facet contains the face `C ∩ u^⊥`); this containment test is
//!   representation-free even when the `u_j` are linearly dependent.

use nalgebra::{DMatrix, DVector};

use super::{ConstraintSet, ACTIVE_TOL, ANGLE_TOL, MISSPEC_GRAD_TOL};
use crate::error::{Error, Result};
use crate::linalg::{nnls, null_space_basis, span_basis};
use crate::lp::solve_lp;

/// Geometry that only exists in the misspecified regime (`u ≠ 0`).
#[derive(Debug, Clone)]
pub struct FaceGeometry {
    /// `J*` — facets containing the face `C ∩ u^⊥` (original constraint
    /// indices).
    pub face_set: Vec<usize>,
    /// Positive coefficients with `−u = Σ λ_j u_j` over `J*`.
    pub lambda: Vec<f64>,
    /// Euclidean-orthonormal basis of `L = {t : u_j·t = 0, j ∈ J*}`,
    /// `d × dim(L)`.
    pub l_basis: DMatrix<f64>,
    /// Euclidean-orthonormal basis of the S-orthogonal complement
    /// `L^{⊥_S} = S⁻¹ span{u_j}`; the first column has positive inner
    /// product with `u`.
    pub lperp_basis: DMatrix<f64>,
    /// `min u·s` over unit `s ∈ L^{⊥_S}` with `u_j·s ≤ 0` for `j ∈ J*`.
    pub alpha_finite: f64,
    /// Margin over the feasible cylinder `{s : ∃t ∈ C∩u^⊥, t+s ∈ Θ}`; the
    /// provable bound coincides with `alpha_finite` because `Θ` lies in the
    /// intersection of its `J*` supporting half-spaces.
    pub alpha_feasible: f64,
}

/// All geometry of `Θ` at `θ*` needed by the limit laws.
#[derive(Debug, Clone)]
pub struct ConeFrame {
    pub theta_star: DVector<f64>,
    /// `u = ∇Φ(θ*)`.
    pub grad_phi: DVector<f64>,
    /// `S = ∇²Φ(θ*)`.
    pub fisher: DMatrix<f64>,
    /// Active set `J` (original constraint indices, ascending).
    pub active: Vec<usize>,
    /// `∇g_j(θ*)` for `j ∈ J`, aligned with `active`.
    pub active_grads: Vec<DVector<f64>>,
    /// `∇²g_j(θ*)` for `j ∈ J`, aligned with `active`.
    pub active_hessians: Vec<DMatrix<f64>>,
    /// Active indices that survive duplicate-direction canonicalization.
    pub canonical: Vec<usize>,
    /// Facet set `J̃ ⊆ canonical`.
    pub facet: Vec<usize>,
    /// Face geometry; present exactly when `‖u‖ > MISSPEC_GRAD_TOL`.
    pub face: Option<FaceGeometry>,
}

/// `J = {j : |g_j(θ*)| ≤ tol·(1+‖∇g_j(θ*)‖)}`; errors when `θ*` violates
/// a constraint beyond the tolerance.
pub fn active_set(cs: &ConstraintSet, theta_star: &DVector<f64>, tol: f64) -> Result<Vec<usize>> {
    let mut active = Vec::new();
    for (j, g) in cs.constraints().iter().enumerate() {
        let v = g.value(theta_star);
        let scale = tol * (1.0 + g.gradient(theta_star).norm());
        if v > scale {
            return Err(Error::Geometry(format!(
                "theta_star infeasible: g_{} = {v:.3e}",
                j + 1
            )));
        }
        if v.abs() <= scale {
            active.push(j);
        }
    }
    Ok(active)
}

impl ConeFrame {
    /// Assemble the frame. `grad_phi` and `fisher` are the population
    /// gradient and Hessian at `theta_star`.
    pub fn build(
        cs: &ConstraintSet,
        theta_star: &DVector<f64>,
        grad_phi: DVector<f64>,
        fisher: DMatrix<f64>,
    ) -> Result<ConeFrame> {
        let dim = cs.dim();
        let active = active_set(cs, theta_star, ACTIVE_TOL)?;
        let active_grads: Vec<DVector<f64>> = active
            .iter()
            .map(|&j| cs.constraints()[j].gradient(theta_star))
            .collect();
        let active_hessians: Vec<DMatrix<f64>> = active
            .iter()
            .map(|&j| cs.constraints()[j].hessian(dim))
            .collect();

        // Drop zero gradients and duplicate directions (keep lowest index).
        let mut canonical: Vec<usize> = Vec::new();
        for (pos, &j) in active.iter().enumerate() {
            let uj = &active_grads[pos];
            if uj.norm() < 1e-12 {
                continue;
            }
            let unit_j = uj / uj.norm();
            let dup = canonical.iter().any(|&k| {
                let pos_k = active.iter().position(|&a| a == k).unwrap();
                let uk = &active_grads[pos_k];
                (&unit_j - uk / uk.norm()).norm() < ANGLE_TOL
            });
            if !dup {
                canonical.push(j);
            }
        }

        let mut frame = ConeFrame {
            theta_star: theta_star.clone(),
            grad_phi,
            fisher,
            active,
            active_grads,
            active_hessians,
            canonical,
            facet: Vec::new(),
            face: None,
        };
        frame.facet = frame.facet_set()?;
        if frame.grad_phi.norm() > MISSPEC_GRAD_TOL {
            frame.face = Some(frame.face_geometry()?);
        }
        Ok(frame)
    }

    pub fn dim(&self) -> usize {
        self.theta_star.len()
    }

    /// Gradient `u_j = ∇g_j(θ*)` for an original constraint index `j ∈ J`.
    pub fn grad_of(&self, j: usize) -> &DVector<f64> {
        let pos = self
            .active
            .iter()
            .position(|&a| a == j)
            .expect("index not active");
        &self.active_grads[pos]
    }

    /// Hessian `∇²g_j(θ*)` for an original constraint index `j ∈ J`.
    pub fn hessian_of(&self, j: usize) -> &DMatrix<f64> {
        let pos = self
            .active
            .iter()
            .position(|&a| a == j)
            .expect("index not active");
        &self.active_hessians[pos]
    }

    pub fn face_geometry(&self) -> Result<FaceGeometry> {
        face_geometry(self)
    }

    fn facet_set(&self) -> Result<Vec<usize>> {
        let dim = self.dim();
        let mut facet = Vec::new();
        for &j in &self.canonical {
            let uj = self.grad_of(j);
            let others: Vec<&DVector<f64>> = self
                .canonical
                .iter()
                .filter(|&&k| k != j)
                .map(|&k| self.grad_of(k))
                .collect();
            let mut a_ub = DMatrix::zeros(others.len() + 1, dim);
            let mut b_ub = DVector::zeros(others.len() + 1);
            for (r, uk) in others.iter().enumerate() {
                a_ub.set_row(r, &uk.transpose());
            }
            a_ub.set_row(others.len(), &uj.transpose());
            b_ub[others.len()] = 1.0;
            let sol = solve_lp(
                &(-uj),
                &a_ub,
                &b_ub,
                &DMatrix::zeros(0, dim),
                &DVector::zeros(0),
            )?
            .optimal("testing facet redundancy")?;
            if -sol.value > 0.5 {
                facet.push(j);
            }
        }
        Ok(facet)
    }
}

fn face_geometry(frame: &ConeFrame) -> Result<FaceGeometry> {
    let dim = frame.dim();
    let u = &frame.grad_phi;
    if frame.facet.is_empty() {
        return Err(Error::Geometry(
            "misspecified frame with no facet constraints: -grad cannot lie in the normal cone"
                .into(),
        ));
    }

    // j ∈ J* iff min u_j·t over {t ∈ C, u·t = 0, ‖t‖_∞ ≤ 1} is ≥ 0.
    let mut face_set = Vec::new();
    for &j in &frame.facet {
        let uj = frame.grad_of(j);
        let rows = frame.facet.len() + 2 * dim;
        let mut a_ub = DMatrix::zeros(rows, dim);
        let mut b_ub = DVector::zeros(rows);
        for (r, &k) in frame.facet.iter().enumerate() {
            a_ub.set_row(r, &frame.grad_of(k).transpose());
        }
        for i in 0..dim {
            a_ub[(frame.facet.len() + 2 * i, i)] = 1.0;
            b_ub[frame.facet.len() + 2 * i] = 1.0;
            a_ub[(frame.facet.len() + 2 * i + 1, i)] = -1.0;
            b_ub[frame.facet.len() + 2 * i + 1] = 1.0;
        }
        let mut a_eq = DMatrix::zeros(1, dim);
        a_eq.set_row(0, &u.transpose());
        let b_eq = DVector::zeros(1);
        let sol = solve_lp(uj, &a_ub, &b_ub, &a_eq, &b_eq)?
            .optimal("testing face containment")?;
        if sol.value >= -1e-9 * (1.0 + uj.norm()) {
            face_set.push(j);
        }
    }
    if face_set.is_empty() {
        return Err(Error::Geometry(
            "face set empty: optimality condition -u in N violated".into(),
        ));
    }

    // −u = Σ λ_j u_j with λ_j > 0 over J*.
    let mut m = DMatrix::zeros(dim, face_set.len());
    for (c, &j) in face_set.iter().enumerate() {
        m.set_column(c, frame.grad_of(j));
    }
    let lambda = nnls(&m, &(-u));
    let residual = (u + &m * &lambda).norm();
    if residual > 1e-8 * (1.0 + u.norm()) {
        return Err(Error::Geometry(format!(
            "-grad not representable in the face cone (residual {residual:.3e}); \
             first-order optimality violated"
        )));
    }
    let lam_tol = 1e-10 * (1.0 + u.norm());
    if let Some(pos) = lambda.iter().position(|&l| l <= lam_tol) {
        return Err(Error::Geometry(format!(
            "degenerate face geometry: multiplier for constraint {} vanishes \
             (-u on the relative boundary of the J* cone)",
            face_set[pos] + 1
        )));
    }

    // L = null{u_j : j ∈ J*}; L^{⊥_S} = S⁻¹ span{u_j}.
    let face_grads: Vec<DVector<f64>> = face_set.iter().map(|&j| frame.grad_of(j).clone()).collect();
    let l_basis = null_space_basis(&face_grads, dim);
    let s_lu = frame.fisher.clone().lu();
    let mapped: Vec<DVector<f64>> = face_grads
        .iter()
        .map(|uj| {
            s_lu.solve(uj)
                .ok_or_else(|| Error::Geometry("Fisher matrix is singular".into()))
        })
        .collect::<Result<_>>()?;
    let mut lperp_basis = span_basis(&mapped, dim);
    if l_basis.ncols() + lperp_basis.ncols() != dim {
        return Err(Error::Geometry(
            "subspace split dimensions do not add up".into(),
        ));
    }
    align_first_axis(&mut lperp_basis, u);

    // Cross-term check: ⟨L, L^{⊥_S}⟩_S = 0.
    if l_basis.ncols() > 0 && lperp_basis.ncols() > 0 {
        let cross = (l_basis.transpose() * &frame.fisher * &lperp_basis).norm();
        if cross > 1e-8 {
            return Err(Error::Geometry(format!(
                "S-orthogonality residual {cross:.3e} in subspace split"
            )));
        }
    }

    let alpha = alpha_constants(u, &face_grads, &lperp_basis)?;
    Ok(FaceGeometry {
        face_set,
        lambda: lambda.iter().cloned().collect(),
        l_basis,
        lperp_basis,
        alpha_finite: alpha,
        alpha_feasible: alpha,
    })
}

/// Rotate an orthonormal basis so its first column points along the
/// Euclidean projection of `u` onto the spanned subspace.
fn align_first_axis(basis: &mut DMatrix<f64>, u: &DVector<f64>) {
    let m = basis.ncols();
    if m == 0 {
        return;
    }
    let proj = &*basis * (basis.transpose() * u);
    if proj.norm() < 1e-12 {
        return;
    }
    let mut cols: Vec<DVector<f64>> = vec![proj.normalize()];
    for j in 0..m {
        let mut v = basis.column(j).into_owned();
        for c in &cols {
            v -= c * c.dot(&v);
        }
        if v.norm() > 1e-10 {
            cols.push(v.normalize());
        }
        if cols.len() == m {
            break;
        }
    }
    for (j, c) in cols.iter().enumerate() {
        basis.set_column(j, c);
    }
}

/// `α = min u·s` over unit vectors of the cone
/// `{s ∈ span(basis) : u_j·s ≤ 0 ∀j}`.
///
/// A linear function on the sphere section of a polyhedral cone attains its
/// minimum at a KKT point of some face: `s ∝ ±P_W u` with `W` the
/// span-intersection of an active subset. Dimensions here are at most 3 and
/// `|J*|` is small, so exhaustive subset enumeration is exact and cheap.
pub fn alpha_constants(
    u: &DVector<f64>,
    face_grads: &[DVector<f64>],
    lperp_basis: &DMatrix<f64>,
) -> Result<f64> {
    let m = lperp_basis.ncols();
    if m == 0 {
        return Err(Error::Geometry("alpha undefined: L-perp is trivial".into()));
    }
    let k = face_grads.len();
    if k > 16 {
        return Err(Error::Geometry("too many face constraints for alpha".into()));
    }
    let r = lperp_basis.transpose() * u;
    let cone_rows: Vec<DVector<f64>> = face_grads
        .iter()
        .map(|uj| lperp_basis.transpose() * uj)
        .collect();
    let feasible = |y: &DVector<f64>| cone_rows.iter().all(|a| a.dot(y) <= 1e-10 * (1.0 + a.norm()));

    let mut best: Option<f64> = None;
    for mask in 0..(1u32 << k) {
        let active: Vec<DVector<f64>> = (0..k)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| cone_rows[i].clone())
            .collect();
        let w = null_space_basis(&active, m);
        if w.ncols() == 0 {
            continue;
        }
        let p = &w * (w.transpose() * &r);
        if p.norm() <= 1e-12 * (1.0 + r.norm()) {
            // u ⊥ this face; any feasible unit vector here has u·s = 0.
            for j in 0..w.ncols() {
                for sign in [1.0, -1.0] {
                    let y = w.column(j).into_owned() * sign;
                    if feasible(&y) {
                        return Err(Error::Geometry(
                            "cone margin alpha vanishes (degenerate geometry)".into(),
                        ));
                    }
                }
            }
            continue;
        }
        for sign in [1.0, -1.0] {
            let cand = &p * (sign / p.norm());
            if feasible(&cand) {
                let v = r.dot(&cand);
                best = Some(best.map_or(v, |b: f64| b.min(v)));
            }
        }
    }
    let alpha = best.ok_or_else(|| {
        Error::Geometry("alpha enumeration found no feasible unit direction".into())
    })?;
    if alpha <= 1e-9 * (1.0 + u.norm()) {
        return Err(Error::Geometry(format!(
            "cone margin alpha = {alpha:.3e} is not strictly positive"
        )));
    }
    Ok(alpha)
}
