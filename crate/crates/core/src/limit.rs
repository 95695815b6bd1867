//! The three limit laws with evaluable normalized densities and samplers.
//!
//! * `Gaussian` — `N(−S⁻¹Yₙ, S⁻¹)`, closed-form normalizer;
//! * `ConeTruncated` — the same Gaussian conditioned to the support cone
//!   `C` (closure of the tangent cone; the two differ on a null set);
//! * `SecondOrder` — density `∝ exp(−t·Yₙ − ½‖t‖²_S − s·u)` on the second
//!   order tangent set `C₂ ⊂ L × L^{⊥_S}`.
//!
//! Normalizers integrate the decaying `s` (resp. innermost `t`) direction
//! in closed form over the polyhedral section — an exponential over an
//! interval, or a Gaussian segment via `erfc` — and midpoint quadrature
//! with a two-level Richardson error check on the remaining axes. The
//! finiteness of the `s` integral is exactly the cone margin `u·s ≥ α‖s‖`;
//! a section unbounded against the decay direction is reported as an
//! envelope error.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::geometry::{
    tangent_membership, ConeFrame, ConstraintSet, SecondOrderSets, TangentScale,
};
use crate::posterior::Regime;
use crate::quad::{advance_odometer, log_gaussian_segment, log_sum_exp};

const LN_2PI: f64 = 1.8378770664093453;

/// Quadrature settings for limit-law normalization.
#[derive(Debug, Clone, Copy)]
pub struct NormalizeConfig {
    /// Points per outer axis (halved once for the Richardson check).
    pub points: usize,
    /// Half-width of Gaussian axes in posterior standard deviations.
    pub sds: f64,
    /// Exponential tail cut: the `s` integral is truncated where
    /// `u·s > tail`, discarding mass below `e^{−tail}`.
    pub tail: f64,
    /// Relative error the two-level check must certify.
    pub rel_tol: f64,
}

impl Default for NormalizeConfig {
    fn default() -> Self {
        NormalizeConfig {
            points: 4096,
            sds: 8.0,
            tail: 40.0,
            rel_tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GaussianLimit {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    /// Precision matrix `S`.
    pub precision: DMatrix<f64>,
    chol_cov: DMatrix<f64>,
    log_norm: f64,
}

impl GaussianLimit {
    fn new(precision: DMatrix<f64>, y_n: &DVector<f64>) -> Result<GaussianLimit> {
        let d = precision.nrows();
        let lu = precision.clone().lu();
        let mean = -lu
            .solve(y_n)
            .ok_or_else(|| Error::Numeric("Fisher matrix singular".into()))?;
        let cov = lu
            .try_inverse()
            .ok_or_else(|| Error::Numeric("Fisher matrix singular".into()))?;
        let chol = Cholesky::new(cov.clone())
            .ok_or_else(|| Error::Numeric("covariance not positive definite".into()))?;
        let log_det_prec = Cholesky::new(precision.clone())
            .ok_or_else(|| Error::Numeric("precision not positive definite".into()))?
            .l()
            .diagonal()
            .iter()
            .map(|v| 2.0 * v.ln())
            .sum::<f64>();
        Ok(GaussianLimit {
            mean,
            cov,
            precision,
            chol_cov: chol.l(),
            log_norm: -0.5 * d as f64 * LN_2PI + 0.5 * log_det_prec,
        })
    }

    fn quad_form(&self, t: &DVector<f64>) -> f64 {
        let d = t - &self.mean;
        0.5 * d.dot(&(&self.precision * &d))
    }

    pub fn log_density(&self, t: &DVector<f64>) -> f64 {
        self.log_norm - self.quad_form(t)
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> DVector<f64> {
        let z = DVector::from_fn(self.mean.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
        &self.mean + &self.chol_cov * z
    }
}

#[derive(Debug, Clone)]
pub struct ConeTruncatedLimit {
    pub gauss: GaussianLimit,
    pub frame: ConeFrame,
    cs: ConstraintSet,
    log_a_n: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SecondOrderLimit {
    pub frame: ConeFrame,
    pub y_n: DVector<f64>,
    sets: SecondOrderSets,
    /// `G = B_Lᵀ S B_L` (ℓ×ℓ) and `b = B_LᵀYₙ`: the t-factor in L-coords.
    t_gram: DMatrix<f64>,
    t_lin: DVector<f64>,
    /// Decay rates `r = B_⊥ᵀ u` (first coordinate positive by basis
    /// alignment).
    s_rate: DVector<f64>,
    log_a_n: Option<f64>,
}

/// One of the three limit distributions.
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)] // frames are small and laws short-lived
pub enum LimitLaw {
    Gaussian(GaussianLimit),
    ConeTruncated(ConeTruncatedLimit),
    SecondOrder(SecondOrderLimit),
}

/// Samples from a limit law: ambient `t` points (regimes 1–2) or ambient
/// `(t, s)` pairs (regime 3).
#[derive(Debug, Clone)]
pub enum LawSamples {
    Points(Vec<DVector<f64>>),
    Pairs(Vec<(DVector<f64>, DVector<f64>)>),
}

#[derive(Debug, Clone)]
pub struct SampleReport {
    pub samples: LawSamples,
    pub acceptance_rate: f64,
}

/// Construct the limit law for a regime from the frame and `Yₙ`.
pub fn build_limit(
    regime: Regime,
    frame: &ConeFrame,
    cs: &ConstraintSet,
    y_n: &DVector<f64>,
) -> Result<LimitLaw> {
    match regime {
        Regime::WellSpecified => Ok(LimitLaw::Gaussian(GaussianLimit::new(
            frame.fisher.clone(),
            y_n,
        )?)),
        Regime::NearlyMisspecified => Ok(LimitLaw::ConeTruncated(ConeTruncatedLimit {
            gauss: GaussianLimit::new(frame.fisher.clone(), y_n)?,
            frame: frame.clone(),
            cs: cs.clone(),
            log_a_n: None,
        })),
        Regime::Misspecified => {
            let face = frame.face.as_ref().ok_or_else(|| {
                Error::Geometry("misspecified limit law requires face geometry".into())
            })?;
            let t_gram = face.l_basis.transpose() * &frame.fisher * &face.l_basis;
            let t_lin = face.l_basis.transpose() * y_n;
            let s_rate = face.lperp_basis.transpose() * &frame.grad_phi;
            if s_rate[0] <= 0.0 {
                return Err(Error::Geometry("decay direction not aligned with u".into()));
            }
            Ok(LimitLaw::SecondOrder(SecondOrderLimit {
                frame: frame.clone(),
                y_n: y_n.clone(),
                sets: SecondOrderSets::new(frame.clone(), cs.clone()),
                t_gram,
                t_lin,
                s_rate,
                log_a_n: None,
            }))
        }
    }
}

impl LimitLaw {
    /// Unnormalized log-density in grid coordinates (ambient `t` for
    /// regimes 1–2, `(t-coords | s-coords)` for the second-order law).
    pub fn log_density_unnorm_coords(&self, y: &[f64]) -> f64 {
        match self {
            LimitLaw::Gaussian(g) => -g.quad_form(&DVector::from_column_slice(y)),
            LimitLaw::ConeTruncated(c) => {
                let t = DVector::from_column_slice(y);
                if !tangent_membership(&c.cs, &c.frame, &t, TangentScale::Limit) {
                    return f64::NEG_INFINITY;
                }
                -c.gauss.quad_form(&t)
            }
            LimitLaw::SecondOrder(s) => s.log_density_unnorm_coords(y),
        }
    }

    /// Normalized log-density. The Gaussian law is always normalized;
    /// the truncated laws must have been `normalize`d first.
    pub fn log_density_coords(&self, y: &[f64]) -> f64 {
        match self {
            LimitLaw::Gaussian(g) => g.log_density(&DVector::from_column_slice(y)),
            LimitLaw::ConeTruncated(c) => {
                let log_a = c.log_a_n.expect("normalize the law before log_density");
                let v = self.log_density_unnorm_coords(y);
                if v.is_finite() {
                    v + log_a
                } else {
                    v
                }
            }
            LimitLaw::SecondOrder(s) => {
                let log_a = s.log_a_n.expect("normalize the law before log_density");
                let v = self.log_density_unnorm_coords(y);
                if v.is_finite() {
                    v + log_a
                } else {
                    v
                }
            }
        }
    }

    /// Normalized log-density at an ambient point (regimes 1–2 only).
    pub fn log_density_point(&self, t: &DVector<f64>) -> f64 {
        self.log_density_coords(t.as_slice())
    }

    /// Normalized log-density of the second-order law at ambient `(t, s)`.
    pub fn log_density_pair(&self, t: &DVector<f64>, s: &DVector<f64>) -> f64 {
        match self {
            LimitLaw::SecondOrder(law) => {
                let face = law.frame.face.as_ref().unwrap();
                let yt = face.l_basis.transpose() * t;
                let ys = face.lperp_basis.transpose() * s;
                let mut y = Vec::with_capacity(yt.len() + ys.len());
                y.extend(yt.iter());
                y.extend(ys.iter());
                self.log_density_coords(&y)
            }
            _ => self.log_density_point(t),
        }
    }

    pub fn log_a_n(&self) -> Option<f64> {
        match self {
            LimitLaw::Gaussian(g) => Some(g.log_norm),
            LimitLaw::ConeTruncated(c) => c.log_a_n,
            LimitLaw::SecondOrder(s) => s.log_a_n,
        }
    }

    /// Compute and cache `log Aₙ` so the density integrates to one.
    pub fn normalize(&mut self, cfg: &NormalizeConfig) -> Result<f64> {
        match self {
            LimitLaw::Gaussian(g) => Ok(g.log_norm),
            LimitLaw::ConeTruncated(c) => {
                let v = -c.log_mass(cfg)?;
                c.log_a_n = Some(v);
                Ok(v)
            }
            LimitLaw::SecondOrder(s) => {
                let v = -s.log_mass(cfg)?;
                s.log_a_n = Some(v);
                Ok(v)
            }
        }
    }

    /// Draw `count` samples. Truncated laws use rejection and report the
    /// acceptance rate; rates below 1e−4 are an envelope error.
    pub fn sample(&self, count: usize, seed: u64) -> Result<SampleReport> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        match self {
            LimitLaw::Gaussian(g) => {
                let pts = (0..count).map(|_| g.draw(&mut rng)).collect();
                Ok(SampleReport {
                    samples: LawSamples::Points(pts),
                    acceptance_rate: 1.0,
                })
            }
            LimitLaw::ConeTruncated(c) => {
                let mut pts = Vec::with_capacity(count);
                let mut draws = 0usize;
                let max_draws = 10_000usize.max(count.saturating_mul(10_000));
                while pts.len() < count && draws < max_draws {
                    draws += 1;
                    let t = c.gauss.draw(&mut rng);
                    if tangent_membership(&c.cs, &c.frame, &t, TangentScale::Limit) {
                        pts.push(t);
                    }
                }
                let rate = pts.len() as f64 / draws as f64;
                if pts.len() < count {
                    return Err(Error::Numeric(format!(
                        "cone rejection acceptance rate {rate:.2e} below 1e-4"
                    )));
                }
                Ok(SampleReport {
                    samples: LawSamples::Points(pts),
                    acceptance_rate: rate,
                })
            }
            LimitLaw::SecondOrder(s) => s.sample(count, &mut rng),
        }
    }
}

impl ConeTruncatedLimit {
    /// `log ∫_C e^{−½‖t−a‖²_S} dt`: innermost axis in closed form
    /// (Gaussian segment over the cone's interval section), midpoint on
    /// the outer axes.
    fn log_mass(&self, cfg: &NormalizeConfig) -> Result<f64> {
        let d = self.gauss.mean.len();
        let rows: Vec<DVector<f64>> = self
            .frame
            .facet
            .iter()
            .map(|&j| self.frame.grad_of(j).clone())
            .collect();
        if rows.is_empty() {
            return Ok(-self.gauss.log_norm);
        }
        // Innermost axis: the one most loaded by the facet normals.
        let inner = (0..d)
            .max_by(|&a, &b| {
                let wa: f64 = rows.iter().map(|r| r[a].abs()).sum();
                let wb: f64 = rows.iter().map(|r| r[b].abs()).sum();
                wa.total_cmp(&wb)
            })
            .unwrap();
        let outer_axes: Vec<usize> = (0..d).filter(|&k| k != inner).collect();

        if outer_axes.is_empty() {
            let t0 = DVector::zeros(d);
            return self
                .inner_segment(&rows, inner, &t0)
                .ok_or_else(|| Error::Numeric("empty cone section".into()));
        }
        let eval = |points: usize| -> f64 {
            let mut widths = 1.0;
            let mut grids: Vec<Vec<f64>> = Vec::new();
            for &k in &outer_axes {
                let sd = self.gauss.cov[(k, k)].sqrt();
                let lo = self.gauss.mean[k] - cfg.sds * sd;
                let h = 2.0 * cfg.sds * sd / points as f64;
                widths *= h;
                grids.push((0..points).map(|i| lo + (i as f64 + 0.5) * h).collect());
            }
            let radix = vec![points; outer_axes.len()];
            let mut idx = vec![0usize; outer_axes.len()];
            let mut terms = Vec::new();
            loop {
                let mut t = DVector::zeros(d);
                for (pos, &k) in outer_axes.iter().enumerate() {
                    t[k] = grids[pos][idx[pos]];
                }
                if let Some(v) = self.inner_segment(&rows, inner, &t) {
                    terms.push(v);
                }
                if !advance_odometer(&mut idx, &radix) {
                    break;
                }
            }
            log_sum_exp(&terms) + widths.ln()
        };
        // Two outer axes: cap the per-axis count to keep the product grid
        // tractable (the innermost axis is exact either way).
        let points = if outer_axes.len() >= 2 {
            cfg.points.min(512)
        } else {
            cfg.points
        };
        let coarse = eval(points / 2);
        let fine = eval(points);
        let rel = ((coarse - fine).exp() - 1.0).abs();
        if rel > cfg.rel_tol {
            return Err(Error::Numeric(format!(
                "cone normalizer Richardson error {rel:.2e} above {:.1e}",
                cfg.rel_tol
            )));
        }
        Ok(fine)
    }

    /// Closed-form Gaussian mass of the inner-axis interval at outer
    /// point `t` (coordinate `inner` ignored); `None` when the section is
    /// empty.
    fn inner_segment(&self, rows: &[DVector<f64>], inner: usize, t: &DVector<f64>) -> Option<f64> {
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for r in rows {
            let coef = r[inner];
            let mut rest = 0.0;
            for k in 0..t.len() {
                if k != inner {
                    rest += r[k] * t[k];
                }
            }
            // coef·x + rest ≤ 0
            if coef.abs() < 1e-14 {
                if rest > 0.0 {
                    return None;
                }
            } else if coef > 0.0 {
                hi = hi.min(-rest / coef);
            } else {
                lo = lo.max(-rest / coef);
            }
        }
        if hi <= lo {
            return None;
        }
        // ½(t(x) − a)ᵀ S (t(x) − a) = A x² + B x + C along the inner axis.
        let mut base = t.clone();
        base[inner] = 0.0;
        let s = &self.gauss.precision;
        let diff = &base - &self.gauss.mean;
        let a_coef = 0.5 * s[(inner, inner)];
        let b_coef = (s * &diff)[inner];
        let c_coef = 0.5 * diff.dot(&(s * &diff));
        Some(log_gaussian_segment(a_coef, b_coef, c_coef, lo, hi))
    }
}

impl SecondOrderLimit {
    fn face(&self) -> &crate::geometry::FaceGeometry {
        self.frame.face.as_ref().unwrap()
    }

    pub fn dim_l(&self) -> usize {
        self.face().l_basis.ncols()
    }

    pub fn dim_lperp(&self) -> usize {
        self.face().lperp_basis.ncols()
    }

    fn log_density_unnorm_coords(&self, y: &[f64]) -> f64 {
        let l = self.dim_l();
        let yt = DVector::from_column_slice(&y[..l]);
        let ys = DVector::from_column_slice(&y[l..]);
        let face = self.face();
        let t = &face.l_basis * &yt;
        let s = &face.lperp_basis * &ys;
        if !self.sets.c2_membership(&t, &s) {
            return f64::NEG_INFINITY;
        }
        -self.t_lin.dot(&yt) - 0.5 * yt.dot(&(&self.t_gram * &yt)) - self.s_rate.dot(&ys)
    }

    /// The s-section of `C₂(t)` in basis coordinates: inequality rows
    /// `a_j · ys ≤ c_j` over `J(t)`, or `None` when `t ∉ C ∩ u^⊥`.
    fn section_rows(&self, t: &DVector<f64>) -> Option<Vec<(DVector<f64>, f64)>> {
        if !self.sets.in_face(t) {
            return None;
        }
        let face = self.face();
        Some(
            self.sets
                .j_of_t(t)
                .into_iter()
                .map(|j| {
                    let uj = self.frame.grad_of(j);
                    let h = self.frame.hessian_of(j);
                    (face.lperp_basis.transpose() * uj, -0.5 * t.dot(&(h * t)))
                })
                .collect(),
        )
    }

    /// `log ∫ e^{−r·ys} dys` over the section at `t`; the innermost
    /// (decay-aligned) coordinate is integrated in closed form, outer
    /// coordinates by midpoint over LP bounds. `None` for an empty
    /// section.
    fn log_section_integral(&self, t: &DVector<f64>, tail: f64) -> Result<Option<f64>> {
        let rows = match self.section_rows(t) {
            None => return Ok(None),
            Some(r) => r,
        };
        let m = self.dim_lperp();
        if m > 3 {
            return Err(Error::Numeric(
                "s-dimension above 3 not supported by quadrature".into(),
            ));
        }
        let mut fixed = Vec::new();
        section_mass(&rows, &self.s_rate, m - 1, &mut fixed, tail)
    }

    /// `log ∫∫ e^{−b·yt − ½ytᵀG yt − r·ys}` over `C₂`, with the t-axes on
    /// a midpoint grid (two-level Richardson check) and the s-section in
    /// closed form.
    fn log_mass(&self, cfg: &NormalizeConfig) -> Result<f64> {
        let l = self.dim_l();
        let face = self.face();
        if l == 0 {
            let t0 = DVector::zeros(self.frame.dim());
            return self
                .log_section_integral(&t0, cfg.tail)?
                .ok_or_else(|| Error::Numeric("empty second-order section at t=0".into()));
        }
        let g_inv = self
            .t_gram
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Numeric("singular t-Gram matrix".into()))?;
        let mean = -(&g_inv * &self.t_lin);
        let eval = |points: usize| -> Result<f64> {
            let mut grids = Vec::new();
            let mut widths = 1.0;
            for k in 0..l {
                let sd = g_inv[(k, k)].sqrt();
                let lo = mean[k] - cfg.sds * sd;
                let h = 2.0 * cfg.sds * sd / points as f64;
                widths *= h;
                grids.push(
                    (0..points)
                        .map(move |i| lo + (i as f64 + 0.5) * h)
                        .collect::<Vec<_>>(),
                );
            }
            let radix = vec![points; l];
            let mut idx = vec![0usize; l];
            let mut terms = Vec::new();
            loop {
                let yt = DVector::from_fn(l, |k, _| grids[k][idx[k]]);
                let t = &face.l_basis * &yt;
                if let Some(sec) = self.log_section_integral(&t, cfg.tail)? {
                    terms.push(-self.t_lin.dot(&yt) - 0.5 * yt.dot(&(&self.t_gram * &yt)) + sec);
                }
                if !advance_odometer(&mut idx, &radix) {
                    break;
                }
            }
            Ok(log_sum_exp(&terms) + widths.ln())
        };
        let points = if l >= 2 { cfg.points.min(512) } else { cfg.points };
        let coarse = eval(points / 2)?;
        let fine = eval(points)?;
        let rel = ((coarse - fine).exp() - 1.0).abs();
        if rel > cfg.rel_tol {
            return Err(Error::Numeric(format!(
                "second-order normalizer Richardson error {rel:.2e} above {:.1e}",
                cfg.rel_tol
            )));
        }
        Ok(fine)
    }

    /// Normalized log-density of the `t`-marginal at the L-coordinate
    /// `yt` (one-dimensional `L` only).
    pub fn t_marginal_log_density(&self, yt: f64, cfg: &NormalizeConfig) -> Result<f64> {
        if self.dim_l() != 1 {
            return Err(Error::Numeric("t-marginal requires dim L = 1".into()));
        }
        let log_a = self
            .log_a_n
            .ok_or_else(|| Error::Numeric("normalize the law before the marginal".into()))?;
        let face = self.face();
        let t = &face.l_basis * DVector::from_element(1, yt);
        match self.log_section_integral(&t, cfg.tail)? {
            None => Ok(f64::NEG_INFINITY),
            Some(sec) => Ok(log_a - self.t_lin[0] * yt - 0.5 * self.t_gram[(0, 0)] * yt * yt + sec),
        }
    }

    /// Two-stage rejection sampler: `t` from the Gaussian t-factor
    /// restricted to `C ∩ u^⊥`; `s` from the isotropic envelope
    /// `e^{−α‖s‖}` thinned to `e^{−u·s}` on the `J*` cone; then a joint
    /// `C₂` acceptance.
    fn sample(&self, count: usize, rng: &mut ChaCha12Rng) -> Result<SampleReport> {
        let face = self.face();
        let l = self.dim_l();
        let m = self.dim_lperp();
        let alpha = face.alpha_finite;
        let (t_mean, t_chol) = if l > 0 {
            let g_inv = self
                .t_gram
                .clone()
                .try_inverse()
                .ok_or_else(|| Error::Numeric("singular t-Gram matrix".into()))?;
            let chol = Cholesky::new(g_inv.clone())
                .ok_or_else(|| Error::Numeric("t covariance not PD".into()))?;
            (-(&g_inv * &self.t_lin), Some(chol))
        } else {
            (DVector::zeros(0), None)
        };
        let gamma = Gamma::new(m as f64, 1.0 / alpha)
            .map_err(|e| Error::Numeric(format!("gamma envelope: {e}")))?;

        let mut pairs = Vec::with_capacity(count);
        let mut draws = 0usize;
        let max_draws = 10_000usize.max(count.saturating_mul(10_000));
        while pairs.len() < count && draws < max_draws {
            draws += 1;
            let t = if l == 0 {
                DVector::zeros(self.frame.dim())
            } else {
                let z = DVector::from_fn(l, |_, _| rng.sample::<f64, _>(StandardNormal));
                let yt = &t_mean + t_chol.as_ref().unwrap().l() * z;
                &face.l_basis * yt
            };
            if !self.sets.in_face(&t) {
                continue;
            }
            let rho: f64 = gamma.sample(rng);
            let dir = loop {
                let v = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
                let n = v.norm();
                if n > 1e-12 {
                    break v / n;
                }
            };
            let ys = dir * rho;
            let s = &face.lperp_basis * &ys;
            let in_cone = face
                .face_set
                .iter()
                .all(|&j| self.frame.grad_of(j).dot(&s) <= 0.0);
            if !in_cone {
                continue;
            }
            let u_dot_s = self.frame.grad_phi.dot(&s);
            let thin = (-(u_dot_s - alpha * s.norm())).exp();
            if rng.random::<f64>() >= thin {
                continue;
            }
            if self.sets.c2_membership(&t, &s) {
                pairs.push((t, s));
            }
        }
        let rate = pairs.len() as f64 / draws as f64;
        if pairs.len() < count {
            return Err(Error::Numeric(format!(
                "second-order rejection acceptance rate {rate:.2e} below 1e-4"
            )));
        }
        Ok(SampleReport {
            samples: LawSamples::Pairs(pairs),
            acceptance_rate: rate,
        })
    }
}

/// Interval for one coordinate imposed by rows `a·y ≤ c` with the other
/// coordinates fixed; `None` when empty.
fn interval_from_rows(
    rows: &[(DVector<f64>, f64)],
    axis: usize,
    fixed: &[(usize, f64)],
) -> Option<(f64, f64)> {
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for (a, c) in rows {
        let mut rhs = *c;
        for &(k, v) in fixed {
            rhs -= a[k] * v;
        }
        let coef = a[axis];
        if coef.abs() < 1e-14 {
            if rhs < -1e-12 {
                return None;
            }
        } else if coef > 0.0 {
            hi = hi.min(rhs / coef);
        } else {
            lo = lo.max(rhs / coef);
        }
    }
    if hi < lo {
        None
    } else {
        Some((lo, hi))
    }
}

/// `log ∫ e^{−r x}` over `[lo, hi] ∩ {r x ≤ tail-ish}` with `r > 0`.
fn log_exp_interval(r: f64, lo: f64, hi: f64, tail: f64) -> Result<f64> {
    if r <= 0.0 {
        return Err(Error::Numeric(
            "nonpositive decay rate in s-integral (alpha envelope violated)".into(),
        ));
    }
    if lo == f64::NEG_INFINITY {
        return Err(Error::Numeric(
            "s-section unbounded against the decay direction".into(),
        ));
    }
    let hi = hi.min(lo + tail / r + tail);
    if hi <= lo {
        return Ok(f64::NEG_INFINITY);
    }
    // ∫_lo^hi e^{−r x} = e^{−r·lo}(1 − e^{−r(hi−lo)})/r
    Ok(-r * lo + (-(-r * (hi - lo)).exp()).ln_1p() - r.ln())
}

/// Midpoint cells per outer coordinate of a polyhedral section integral.
const SECTION_POINTS: usize = 1025;

/// `log ∫ e^{−r·y}` over the first `axis + 1` coordinates of the section
/// `{a·y ≤ c}` with the trailing coordinates pinned in `fixed`. Axis 0
/// (aligned with the decay direction, `r[0] > 0`) is exact; higher axes
/// use midpoint quadrature over LP bounds.
fn section_mass(
    rows: &[(DVector<f64>, f64)],
    r: &DVector<f64>,
    axis: usize,
    fixed: &mut Vec<(usize, f64)>,
    tail: f64,
) -> Result<Option<f64>> {
    if axis == 0 {
        let (lo, hi) = match interval_from_rows(rows, 0, fixed) {
            None => return Ok(None),
            Some(b) => b,
        };
        return Ok(Some(log_exp_interval(r[0], lo, hi, tail)?));
    }
    let Some((lo, hi)) = axis_bounds(rows, r, axis, fixed, tail)? else {
        return Ok(None);
    };
    if hi <= lo {
        return Ok(None);
    }
    let h = (hi - lo) / SECTION_POINTS as f64;
    let mut terms = Vec::with_capacity(SECTION_POINTS);
    for i in 0..SECTION_POINTS {
        let y = lo + (i as f64 + 0.5) * h;
        fixed.push((axis, y));
        let inner = section_mass(rows, r, axis - 1, fixed, tail)?;
        fixed.pop();
        if let Some(v) = inner {
            terms.push(v - r[axis] * y);
        }
    }
    if terms.is_empty() {
        return Ok(None);
    }
    Ok(Some(log_sum_exp(&terms) + h.ln()))
}

/// LP bounds of coordinate `axis` over the section (restricted to the
/// free coordinates `0..=axis`, trailing ones substituted) intersected
/// with the decay cap `r·y ≤ tail-ish`. `None` when infeasible.
fn axis_bounds(
    rows: &[(DVector<f64>, f64)],
    r: &DVector<f64>,
    axis: usize,
    fixed: &[(usize, f64)],
    tail: f64,
) -> Result<Option<(f64, f64)>> {
    use crate::lp::{solve_lp, LpOutcome};
    let nv = axis + 1;
    let mut a_ub = DMatrix::zeros(rows.len() + 1, nv);
    let mut b_ub = DVector::zeros(rows.len() + 1);
    for (i, (a, c)) in rows.iter().enumerate() {
        let mut rhs = *c;
        for &(k, v) in fixed {
            rhs -= a[k] * v;
        }
        for j in 0..nv {
            a_ub[(i, j)] = a[j];
        }
        b_ub[i] = rhs;
    }
    let mut cap_rhs = tail + tail / r[0].max(1e-6);
    for &(k, v) in fixed {
        cap_rhs -= r[k] * v;
    }
    for j in 0..nv {
        a_ub[(rows.len(), j)] = r[j];
    }
    b_ub[rows.len()] = cap_rhs;
    let mut c = DVector::zeros(nv);
    c[axis] = 1.0;
    let (a_eq, b_eq) = (DMatrix::zeros(0, nv), DVector::zeros(0));
    let min = match solve_lp(&c, &a_ub, &b_ub, &a_eq, &b_eq)? {
        LpOutcome::Infeasible => return Ok(None),
        other => other.optimal("bounding s-section")?.value,
    };
    let max = match solve_lp(&(-&c), &a_ub, &b_ub, &a_eq, &b_eq)? {
        LpOutcome::Infeasible => return Ok(None),
        other => -other.optimal("bounding s-section")?.value,
    };
    Ok(Some((min - 0.25, max + 0.25)))
}
