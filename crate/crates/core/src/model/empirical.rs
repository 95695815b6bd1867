//! Compiled empirical risk.
//!
//! Rescaled densities evaluate `Φₙ` on tens of thousands of grid points, so
//! the location families get sufficient-statistic forms: a quadratic in the
//! sample mean for Gaussian losses, per-coordinate sorted prefix sums for
//! Laplace losses. Both compute exactly the same function as the direct
//! average of per-observation losses (property-tested); everything else
//! falls back to the direct sum.

use nalgebra::DVector;

use super::{Dataset, ModelKind, ModelSpec};

#[derive(Debug, Clone)]
pub enum EmpiricalRisk {
    /// `Φₙ(θ) = ½ Σ_k w_k (θ_k − m_k)² + offset`.
    Quadratic {
        weights: DVector<f64>,
        mean: DVector<f64>,
        offset: f64,
    },
    /// `Φₙ(θ) = (nb)⁻¹ Σ_k Σ_i |x_{ik} − θ_k|` via sorted columns.
    CoordinateAbs {
        sorted: Vec<Vec<f64>>,
        /// prefix[k][j] = Σ_{i<j} sorted[k][i]
        prefix: Vec<Vec<f64>>,
        inv_scale: f64,
        n: usize,
    },
    /// Direct average of the model loss.
    Generic {
        model: ModelSpec,
        observations: Vec<Vec<f64>>,
    },
}

impl EmpiricalRisk {
    pub fn compile(model: &ModelSpec, data: &Dataset) -> EmpiricalRisk {
        let d = model.dim();
        let nf = data.n as f64;
        match &model.kind {
            ModelKind::GaussianLocation { sigma } => {
                let mut mean = DVector::zeros(d);
                let mut mean_sq = DVector::zeros(d);
                for obs in &data.observations {
                    for k in 0..d {
                        mean[k] += obs[k];
                        mean_sq[k] += obs[k] * obs[k];
                    }
                }
                mean /= nf;
                mean_sq /= nf;
                let weights = DVector::from_fn(d, |k, _| 1.0 / (sigma[k] * sigma[k]));
                let offset: f64 = (0..d)
                    .map(|k| 0.5 * weights[k] * (mean_sq[k] - mean[k] * mean[k]))
                    .sum();
                EmpiricalRisk::Quadratic {
                    weights,
                    mean,
                    offset,
                }
            }
            ModelKind::LaplaceLocation { scale } => {
                let mut sorted = vec![Vec::with_capacity(data.n); d];
                for obs in &data.observations {
                    for k in 0..d {
                        sorted[k].push(obs[k]);
                    }
                }
                for col in sorted.iter_mut() {
                    col.sort_by(f64::total_cmp);
                }
                let prefix = sorted
                    .iter()
                    .map(|col| {
                        let mut p = Vec::with_capacity(col.len() + 1);
                        let mut acc = 0.0;
                        p.push(0.0);
                        for &v in col {
                            acc += v;
                            p.push(acc);
                        }
                        p
                    })
                    .collect();
                EmpiricalRisk::CoordinateAbs {
                    sorted,
                    prefix,
                    inv_scale: 1.0 / scale,
                    n: data.n,
                }
            }
            _ => EmpiricalRisk::Generic {
                model: model.clone(),
                observations: data.observations.clone(),
            },
        }
    }

    pub fn value(&self, theta: &DVector<f64>) -> f64 {
        match self {
            EmpiricalRisk::Quadratic {
                weights,
                mean,
                offset,
            } => {
                let mut v = *offset;
                for k in 0..theta.len() {
                    let r = theta[k] - mean[k];
                    v += 0.5 * weights[k] * r * r;
                }
                v
            }
            EmpiricalRisk::CoordinateAbs {
                sorted,
                prefix,
                inv_scale,
                n,
            } => {
                let nf = *n as f64;
                let mut total = 0.0;
                for k in 0..theta.len() {
                    let col = &sorted[k];
                    let p = &prefix[k];
                    let t = theta[k];
                    let k0 = col.partition_point(|&x| x < t);
                    // Σ|x−t| = t·(2 k0 − n) + total − 2 prefix[k0]
                    total += t * (2.0 * k0 as f64 - nf) + p[*n] - 2.0 * p[k0];
                }
                total * inv_scale / nf
            }
            EmpiricalRisk::Generic {
                model,
                observations,
            } => {
                let s: f64 = observations.iter().map(|o| model.loss(o, theta)).sum();
                s / observations.len() as f64
            }
        }
    }

    pub fn subgradient(&self, theta: &DVector<f64>) -> DVector<f64> {
        match self {
            EmpiricalRisk::Quadratic { weights, mean, .. } => {
                DVector::from_fn(theta.len(), |k, _| weights[k] * (theta[k] - mean[k]))
            }
            EmpiricalRisk::CoordinateAbs {
                sorted,
                inv_scale,
                n,
                ..
            } => {
                let nf = *n as f64;
                DVector::from_fn(theta.len(), |k, _| {
                    let col = &sorted[k];
                    let t = theta[k];
                    let less = col.partition_point(|&x| x < t);
                    let leq = col.partition_point(|&x| x <= t);
                    let greater = *n - leq;
                    (less as f64 - greater as f64) * inv_scale / nf
                })
            }
            EmpiricalRisk::Generic {
                model,
                observations,
            } => {
                let mut g = DVector::zeros(theta.len());
                for o in observations {
                    g += model.loss_subgradient(o, theta);
                }
                g / observations.len() as f64
            }
        }
    }

    /// `Φₙ(base + disp) − Φₙ(base)`, computed without the large common
    /// offset for the quadratic form so that `n · delta` stays accurate.
    pub fn delta(&self, base: &DVector<f64>, disp: &DVector<f64>) -> f64 {
        match self {
            EmpiricalRisk::Quadratic { weights, mean, .. } => {
                let mut v = 0.0;
                for k in 0..base.len() {
                    v += weights[k] * (disp[k] * (base[k] - mean[k]) + 0.5 * disp[k] * disp[k]);
                }
                v
            }
            _ => {
                let shifted = base + disp;
                self.value(&shifted) - self.value(base)
            }
        }
    }
}
