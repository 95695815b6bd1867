//! Catalog lookup: model ids and JSON parameter objects.
//!
//! Parameter schemas (all fields optional unless noted):
//!
//! * `gaussian-location` — `{"sigma": number | [number; d]}` (default 1.0)
//! * `laplace-location` — `{"scale": number}` (default 1.0)
//! * `logistic-regression` — `{}`
//! * `exponential-rate` — `{}` (d = 1)
//!
//! Any model accepts `{"domain": {"lower": [...], "upper": [...]}}` to
//! restrict the open box `Θ₀` (entries may be null for unbounded axes).

use nalgebra::DVector;
use serde_json::Value;

use super::{Domain, ModelKind, ModelSpec};
use crate::error::{Error, Result};

pub fn builtin_model_ids() -> &'static [&'static str] {
    &[
        "gaussian-location",
        "laplace-location",
        "logistic-regression",
        "exponential-rate",
    ]
}

fn positive_number(v: &Value, what: &str) -> Result<f64> {
    let x = v
        .as_f64()
        .ok_or_else(|| Error::Config(format!("{what} must be a number")))?;
    if x <= 0.0 || !x.is_finite() {
        return Err(Error::Config(format!("{what} must be positive, got {x}")));
    }
    Ok(x)
}

fn sigma_vector(params: &Value, dim: usize) -> Result<DVector<f64>> {
    match params.get("sigma") {
        None => Ok(DVector::from_element(dim, 1.0)),
        Some(Value::Array(arr)) => {
            if arr.len() != dim {
                return Err(Error::Config(format!(
                    "sigma array has length {}, expected {dim}",
                    arr.len()
                )));
            }
            let mut out = DVector::zeros(dim);
            for (k, v) in arr.iter().enumerate() {
                out[k] = positive_number(v, "sigma entry")?;
            }
            Ok(out)
        }
        Some(v) => Ok(DVector::from_element(dim, positive_number(v, "sigma")?)),
    }
}

fn bound(v: &Value, default: f64) -> Result<f64> {
    if v.is_null() {
        return Ok(default);
    }
    v.as_f64()
        .ok_or_else(|| Error::Config("domain bounds must be numbers or null".into()))
}

fn domain_from_params(params: &Value, dim: usize) -> Result<Option<Domain>> {
    let Some(dom) = params.get("domain") else {
        return Ok(None);
    };
    let lower = dom
        .get("lower")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Config("domain.lower must be an array".into()))?;
    let upper = dom
        .get("upper")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Config("domain.upper must be an array".into()))?;
    if lower.len() != dim || upper.len() != dim {
        return Err(Error::Config("domain bounds have wrong dimension".into()));
    }
    let lo = lower
        .iter()
        .map(|v| bound(v, f64::NEG_INFINITY))
        .collect::<Result<Vec<_>>>()?;
    let hi = upper
        .iter()
        .map(|v| bound(v, f64::INFINITY))
        .collect::<Result<Vec<_>>>()?;
    Ok(Some(Domain::boxed(lo, hi)))
}

/// Build a bundled model from its string id, JSON parameters and `θ̄`.
pub fn model_from_id(id: &str, params: &Value, theta_bar: &[f64]) -> Result<ModelSpec> {
    let theta_bar = DVector::from_column_slice(theta_bar);
    let dim = theta_bar.len();
    if dim == 0 {
        return Err(Error::Config("theta_bar must be non-empty".into()));
    }
    let kind = match id {
        "gaussian-location" => ModelKind::GaussianLocation {
            sigma: sigma_vector(params, dim)?,
        },
        "laplace-location" => ModelKind::LaplaceLocation {
            scale: match params.get("scale") {
                None => 1.0,
                Some(v) => positive_number(v, "scale")?,
            },
        },
        "logistic-regression" => ModelKind::LogisticRegression,
        "exponential-rate" => {
            if dim != 1 {
                return Err(Error::Config("exponential-rate requires d = 1".into()));
            }
            ModelKind::ExponentialRate
        }
        other => {
            return Err(Error::Config(format!(
                "unknown model id '{other}' (known: {})",
                builtin_model_ids().join(", ")
            )))
        }
    };
    let spec = ModelSpec::new(kind, theta_bar);
    match domain_from_params(params, dim)? {
        Some(domain) => spec.with_domain(domain),
        None => Ok(spec),
    }
}
