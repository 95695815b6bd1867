//! Statistical models with convex negative log-likelihood.
//!
//! A [`ModelSpec`] bundles, for one family and one data-generating parameter
//! `θ̄`: the per-observation loss `φ(x, θ)` with a measurable subgradient
//! selection, a deterministic sampler, and the population risk
//! `Φ(θ) = E[φ(X, θ)]` with gradient and Hessian. Models with closed-form
//! population quantities (Gaussian/Laplace location, log-parameterized
//! exponential) use them; logistic regression evaluates `Φ`, `∇Φ`, `∇²Φ`
//! through one-dimensional Gaussian integrals obtained by Stein identities,
//! so no Monte-Carlo noise enters the curvature used downstream.
//!
//! All randomness flows through `ChaCha12`, a counter-based generator seeded
//! from a single `u64`, so datasets regenerate bit-identically.

mod builtin;
mod empirical;

pub use builtin::{builtin_model_ids, model_from_id};
pub use empirical::EmpiricalRisk;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{fd_gradient, fd_hessian, min_eigenvalue};
use crate::quad::gaussian_expectation;

/// Open box domain `Θ₀` (−∞/+∞ entries for unbounded axes).
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Domain {
    pub fn all(dim: usize) -> Self {
        Domain {
            lower: vec![f64::NEG_INFINITY; dim],
            upper: vec![f64::INFINITY; dim],
        }
    }

    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        Domain { lower, upper }
    }

    /// Strict membership (the domain is open).
    pub fn contains(&self, theta: &DVector<f64>) -> bool {
        theta
            .iter()
            .enumerate()
            .all(|(k, &v)| v > self.lower[k] && v < self.upper[k])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }
}

/// A generated i.i.d. sample. Same `(θ̄, n, seed)` always reproduces the
/// same bytes.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub observations: Vec<Vec<f64>>,
    pub seed: u64,
    pub n: usize,
}

/// Per-observation subgradients at `θ*` and their scaled sum
/// `Yₙ = n^{-1/2} Σ Uᵢ`.
#[derive(Debug, Clone)]
pub struct SubgradientSummary {
    pub u_list: Vec<DVector<f64>>,
    pub y_n: DVector<f64>,
    pub second_moment_estimate: f64,
}

/// Model family kinds bundled with the crate.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    /// Independent Gaussian coordinates with known per-axis deviations;
    /// `φ(x, θ) = ½ Σ (x_k − θ_k)²/σ_k²`.
    GaussianLocation { sigma: DVector<f64> },
    /// Independent Laplace coordinates with common scale `b`;
    /// `φ(x, θ) = Σ |x_k − θ_k| / b` (nonsmooth loss).
    LaplaceLocation { scale: f64 },
    /// Logistic regression with standard normal covariates; an observation
    /// is `[x_1, …, x_d, y]`, `φ = softplus(xᵀθ) − y xᵀθ`.
    LogisticRegression,
    /// Exponential observations with rate `e^θ` (log-parameterization,
    /// d = 1); `φ(x, θ) = −θ + e^θ x`.
    ExponentialRate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub theta_bar: DVector<f64>,
    pub domain: Domain,
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid_deriv(z: f64) -> f64 {
    let s = logistic(z);
    s * (1.0 - s)
}

fn sigmoid_deriv3(z: f64) -> f64 {
    let s = logistic(z);
    let s1 = s * (1.0 - s);
    s1 * (1.0 - 2.0 * s) * (1.0 - 2.0 * s) - 2.0 * s1 * s1
}

fn sign0(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl ModelSpec {
    pub fn new(kind: ModelKind, theta_bar: DVector<f64>) -> Self {
        let dim = theta_bar.len();
        ModelSpec {
            kind,
            theta_bar,
            domain: Domain::all(dim),
        }
    }

    pub fn with_domain(mut self, domain: Domain) -> Result<Self> {
        if domain.dim() != self.dim() {
            return Err(Error::Config("domain dimension mismatch".into()));
        }
        if !domain.contains(&self.theta_bar) {
            return Err(Error::Config("theta_bar outside the open domain".into()));
        }
        self.domain = domain;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.theta_bar.len()
    }

    pub fn id(&self) -> &'static str {
        match self.kind {
            ModelKind::GaussianLocation { .. } => "gaussian-location",
            ModelKind::LaplaceLocation { .. } => "laplace-location",
            ModelKind::LogisticRegression => "logistic-regression",
            ModelKind::ExponentialRate => "exponential-rate",
        }
    }

    pub fn truth(&self) -> &DVector<f64> {
        &self.theta_bar
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    fn check_domain(&self, theta: &DVector<f64>) -> Result<()> {
        if theta.len() != self.dim() {
            return Err(Error::Domain(format!(
                "theta has dimension {}, model has {}",
                theta.len(),
                self.dim()
            )));
        }
        if !self.domain.contains(theta) {
            return Err(Error::Domain(format!(
                "theta {:?} outside the open domain",
                theta.as_slice()
            )));
        }
        Ok(())
    }

    /// Per-observation loss `φ(x, θ)`.
    pub fn loss(&self, obs: &[f64], theta: &DVector<f64>) -> f64 {
        match &self.kind {
            ModelKind::GaussianLocation { sigma } => (0..theta.len())
                .map(|k| {
                    let r = (obs[k] - theta[k]) / sigma[k];
                    0.5 * r * r
                })
                .sum(),
            ModelKind::LaplaceLocation { scale } => (0..theta.len())
                .map(|k| (obs[k] - theta[k]).abs() / scale)
                .sum(),
            ModelKind::LogisticRegression => {
                let d = theta.len();
                let z: f64 = (0..d).map(|k| obs[k] * theta[k]).sum();
                softplus(z) - obs[d] * z
            }
            ModelKind::ExponentialRate => -theta[0] + theta[0].exp() * obs[0],
        }
    }

    /// A measurable subgradient selection of `φ(x, ·)` at `theta`
    /// (`sign(0) = 0` at Laplace kinks).
    pub fn loss_subgradient(&self, obs: &[f64], theta: &DVector<f64>) -> DVector<f64> {
        match &self.kind {
            ModelKind::GaussianLocation { sigma } => DVector::from_fn(theta.len(), |k, _| {
                (theta[k] - obs[k]) / (sigma[k] * sigma[k])
            }),
            ModelKind::LaplaceLocation { scale } => {
                DVector::from_fn(theta.len(), |k, _| -sign0(obs[k] - theta[k]) / scale)
            }
            ModelKind::LogisticRegression => {
                let d = theta.len();
                let z: f64 = (0..d).map(|k| obs[k] * theta[k]).sum();
                let w = logistic(z) - obs[d];
                DVector::from_fn(d, |k, _| obs[k] * w)
            }
            ModelKind::ExponentialRate => {
                DVector::from_element(1, -1.0 + theta[0].exp() * obs[0])
            }
        }
    }

    /// Draw `n` observations under `theta_gen`.
    pub fn sample_with(&self, theta_gen: &DVector<f64>, n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let d = self.dim();
        let observations = (0..n)
            .map(|_| match &self.kind {
                ModelKind::GaussianLocation { sigma } => (0..d)
                    .map(|k| {
                        let z: f64 = rng.sample(StandardNormal);
                        theta_gen[k] + sigma[k] * z
                    })
                    .collect(),
                ModelKind::LaplaceLocation { scale } => (0..d)
                    .map(|k| {
                        let mag: f64 = rng.sample(Exp1);
                        let sgn = if rng.random::<bool>() { 1.0 } else { -1.0 };
                        theta_gen[k] + scale * sgn * mag
                    })
                    .collect(),
                ModelKind::LogisticRegression => {
                    let mut row: Vec<f64> =
                        (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                    let z: f64 = (0..d).map(|k| row[k] * theta_gen[k]).sum();
                    let y = if rng.random::<f64>() < logistic(z) { 1.0 } else { 0.0 };
                    row.push(y);
                    row
                }
                ModelKind::ExponentialRate => {
                    let e: f64 = rng.sample(Exp1);
                    vec![e / theta_gen[0].exp()]
                }
            })
            .collect();
        Dataset {
            observations,
            seed,
            n,
        }
    }

    /// Draw `n` observations under the model's own `θ̄`.
    pub fn sample(&self, n: usize, seed: u64) -> Dataset {
        self.sample_with(&self.theta_bar.clone(), n, seed)
    }

    /// Population risk `Φ(θ) = E_{θ̄}[φ(X, θ)]`.
    pub fn pop_risk(&self, theta: &DVector<f64>) -> Result<f64> {
        self.check_domain(theta)?;
        Ok(match &self.kind {
            ModelKind::GaussianLocation { sigma } => (0..theta.len())
                .map(|k| {
                    let d = theta[k] - self.theta_bar[k];
                    (d * d + sigma[k] * sigma[k]) / (2.0 * sigma[k] * sigma[k])
                })
                .sum(),
            ModelKind::LaplaceLocation { scale } => (0..theta.len())
                .map(|k| {
                    let a = (theta[k] - self.theta_bar[k]).abs() / scale;
                    a + (-a).exp()
                })
                .sum(),
            ModelKind::LogisticRegression => {
                let s = theta.norm();
                let s_bar = self.theta_bar.norm();
                gaussian_expectation(s, softplus)
                    - theta.dot(&self.theta_bar) * gaussian_expectation(s_bar, sigmoid_deriv)
            }
            ModelKind::ExponentialRate => -theta[0] + (theta[0] - self.theta_bar[0]).exp(),
        })
    }

    /// `∇Φ(θ)`.
    pub fn pop_grad(&self, theta: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_domain(theta)?;
        Ok(match &self.kind {
            ModelKind::GaussianLocation { sigma } => DVector::from_fn(theta.len(), |k, _| {
                (theta[k] - self.theta_bar[k]) / (sigma[k] * sigma[k])
            }),
            ModelKind::LaplaceLocation { scale } => DVector::from_fn(theta.len(), |k, _| {
                let d = theta[k] - self.theta_bar[k];
                sign0(d) * (1.0 - (-d.abs() / scale).exp()) / scale
            }),
            ModelKind::LogisticRegression => {
                let h = gaussian_expectation(theta.norm(), sigmoid_deriv);
                let h_bar = gaussian_expectation(self.theta_bar.norm(), sigmoid_deriv);
                theta * h - &self.theta_bar * h_bar
            }
            ModelKind::ExponentialRate => {
                DVector::from_element(1, -1.0 + (theta[0] - self.theta_bar[0]).exp())
            }
        })
    }

    /// `∇²Φ(θ)` (symmetric; positive definite at `θ*` for all bundled
    /// models).
    pub fn pop_hess(&self, theta: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_domain(theta)?;
        Ok(match &self.kind {
            ModelKind::GaussianLocation { sigma } => DMatrix::from_fn(
                theta.len(),
                theta.len(),
                |i, j| {
                    if i == j {
                        1.0 / (sigma[i] * sigma[i])
                    } else {
                        0.0
                    }
                },
            ),
            ModelKind::LaplaceLocation { scale } => {
                DMatrix::from_fn(theta.len(), theta.len(), |i, j| {
                    if i == j {
                        let d = (theta[i] - self.theta_bar[i]).abs();
                        (-d / scale).exp() / (scale * scale)
                    } else {
                        0.0
                    }
                })
            }
            ModelKind::LogisticRegression => {
                let h = gaussian_expectation(theta.norm(), sigmoid_deriv);
                let h3 = gaussian_expectation(theta.norm(), sigmoid_deriv3);
                DMatrix::identity(theta.len(), theta.len()) * h + theta * theta.transpose() * h3
            }
            ModelKind::ExponentialRate => {
                DMatrix::from_element(1, 1, (theta[0] - self.theta_bar[0]).exp())
            }
        })
    }
}

/// `Φₙ(θ) = n⁻¹ Σ φ(Xᵢ, θ)` evaluated directly from the observation list.
pub fn empirical_risk(model: &ModelSpec, data: &Dataset, theta: &DVector<f64>) -> Result<f64> {
    model.check_domain(theta)?;
    let sum: f64 = data
        .observations
        .iter()
        .map(|obs| model.loss(obs, theta))
        .sum();
    Ok(sum / data.n as f64)
}

/// Subgradients `Uᵢ` of `φ(Xᵢ, ·)` at `theta_star`, `Yₙ`, and the
/// second-moment estimate `mean ‖Uᵢ‖²`.
pub fn subgradient_summary(
    model: &ModelSpec,
    data: &Dataset,
    theta_star: &DVector<f64>,
) -> Result<SubgradientSummary> {
    model.check_domain(theta_star)?;
    let u_list: Vec<DVector<f64>> = data
        .observations
        .iter()
        .map(|obs| model.loss_subgradient(obs, theta_star))
        .collect();
    let mut y_n = DVector::zeros(model.dim());
    let mut sq = 0.0;
    for u in &u_list {
        y_n += u;
        sq += u.norm_squared();
    }
    y_n /= (data.n as f64).sqrt();
    Ok(SubgradientSummary {
        y_n,
        second_moment_estimate: sq / data.n as f64,
        u_list,
    })
}

/// Diagnostics for the standing assumptions: finite `E‖U₁‖²`, positive
/// definite `∇²Φ(θ*)`, and agreement of the analytic population derivatives
/// with central finite differences.
#[derive(Debug, Clone)]
pub struct AssumptionReport {
    pub second_moment_estimate: f64,
    /// Monte-Carlo confidence interval (±4 standard errors).
    pub second_moment_ci: (f64, f64),
    pub min_hessian_eigenvalue: f64,
    pub hessian_pd: bool,
    pub grad_fd_rel_err: f64,
    pub hess_fd_abs_err: f64,
    pub derivatives_ok: bool,
}

impl AssumptionReport {
    pub fn ok(&self) -> bool {
        self.hessian_pd && self.derivatives_ok && self.second_moment_estimate.is_finite()
    }
}

pub fn assumption_check(
    model: &ModelSpec,
    theta_star: &DVector<f64>,
    n_probe: usize,
    seed: u64,
) -> Result<AssumptionReport> {
    model.check_domain(theta_star)?;
    let data = model.sample(n_probe, seed);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for obs in &data.observations {
        let v = model.loss_subgradient(obs, theta_star).norm_squared();
        sum += v;
        sum_sq += v * v;
    }
    let nf = n_probe as f64;
    let mean = sum / nf;
    let var = (sum_sq / nf - mean * mean).max(0.0);
    let se = (var / nf).sqrt();

    let hess = model.pop_hess(theta_star)?;
    let min_eig = min_eigenvalue(&hess);

    let h = 1e-5 * (1.0 + theta_star.norm());
    let fd_g = fd_gradient(|x| model.pop_risk(x).unwrap(), theta_star, h);
    let g = model.pop_grad(theta_star)?;
    let grad_fd_rel_err = (&fd_g - &g).norm() / (1.0 + g.norm());
    let fd_h = fd_hessian(|x| model.pop_risk(x).unwrap(), theta_star, 1e-4);
    let hess_fd_abs_err = (&fd_h - &hess).norm();

    Ok(AssumptionReport {
        second_moment_estimate: mean,
        second_moment_ci: (mean - 4.0 * se, mean + 4.0 * se),
        min_hessian_eigenvalue: min_eig,
        hessian_pd: min_eig > 0.0,
        grad_fd_rel_err,
        hess_fd_abs_err,
        derivatives_ok: grad_fd_rel_err < 1e-5 && hess_fd_abs_err < 1e-3,
    })
}

#[cfg(test)]
mod tests;
