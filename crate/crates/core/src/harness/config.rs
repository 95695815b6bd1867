//! Experiment configuration: JSON schema, validation, and catalog lookups.
//!
//! ```json
//! {
//!   "model":       {"id": "gaussian-location", "params": {"sigma": 1.0}},
//!   "constraints": {"id": "ball", "params": {"center": [0,0], "radius": 1.0}},
//!   "theta_bar":   [2.0, 0.0],
//!   "n_list":      [256, 1024, 4096],
//!   "seeds":       [1, 2, 3],
//!   "grid":        {"points": 257, "points_s": 1025, "half_width_sds": 8.0,
//!                   "s_tail": 40.0, "sup_gap_half_width": 3.0,
//!                   "sup_gap_step": 0.1},
//!   "tv_threshold": 0.15,
//!   "output_dir":  "out",
//!   "emit_slices": false
//! }
//! ```
//!
//! `grid` and everything after it are optional. Thread count is controlled
//! only by the `BVM_THREADS` environment variable.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::geometry::ConstraintSet;
use crate::model::{model_from_id, ModelSpec};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComponentConfig {
    pub id: String,
    #[serde(default)]
    pub params: Value,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSettings {
    /// Midpoint cells per Gaussian-rate axis (doubled once internally for
    /// the Richardson level). Unset: sized by grid dimension.
    pub points: Option<usize>,
    /// Cells for exponential-rate (s) axes of the misspecified regime.
    /// Unset: sized by grid dimension.
    pub points_s: Option<usize>,
    /// Half-width of Gaussian axes in limit-law standard deviations.
    pub half_width_sds: f64,
    /// s-axis extent: covers `u·s ≤ s_tail` (omitted mass below
    /// `e^{−s_tail}`).
    pub s_tail: f64,
    /// Box half-width for the sup-gap diagnostics.
    pub sup_gap_half_width: f64,
    pub sup_gap_step: f64,
}

impl Default for GridSettings {
    fn default() -> Self {
        GridSettings {
            points: None,
            points_s: None,
            half_width_sds: 8.0,
            s_tail: 40.0,
            sup_gap_half_width: 3.0,
            sup_gap_step: 0.1,
        }
    }
}

impl GridSettings {
    /// Cells per Gaussian-rate axis for a grid of `total_dim` axes.
    pub fn t_points(&self, total_dim: usize) -> usize {
        self.points.unwrap_or(match total_dim {
            1 => 2049,
            2 => 257,
            _ => 49,
        })
    }

    /// Cells per exponential-rate axis for a grid of `total_dim` axes.
    pub fn s_points(&self, total_dim: usize) -> usize {
        self.points_s.unwrap_or(match total_dim {
            1 => 2049,
            2 => 1025,
            _ => 129,
        })
    }
}

fn default_tv_threshold() -> f64 {
    0.15
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ComponentConfig,
    pub constraints: ComponentConfig,
    pub theta_bar: Vec<f64>,
    pub n_list: Vec<usize>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub grid: GridSettings,
    /// The trend verdict requires the final median TV at or below this.
    #[serde(default = "default_tv_threshold")]
    pub tv_threshold: f64,
    #[serde(default)]
    pub output_dir: Option<String>,
    #[serde(default)]
    pub emit_slices: bool,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("invalid config {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.theta_bar.is_empty() {
            return Err(Error::Config("theta_bar must be non-empty".into()));
        }
        if self.theta_bar.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("theta_bar entries must be finite".into()));
        }
        if self.n_list.is_empty() {
            return Err(Error::Config("n_list must be non-empty".into()));
        }
        if self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("n_list must be strictly increasing".into()));
        }
        if self.n_list[0] == 0 {
            return Err(Error::Config("sample sizes must be positive".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must be non-empty".into()));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("seeds must be distinct".into()));
        }
        for p in [self.grid.points, self.grid.points_s].into_iter().flatten() {
            if p < 8 {
                return Err(Error::Config("grid points must be at least 8".into()));
            }
        }
        Ok(())
    }

    /// Instantiate the model (validates `θ̄ ∈ Θ₀`).
    pub fn build_model(&self) -> Result<ModelSpec> {
        model_from_id(&self.model.id, &self.model.params, &self.theta_bar)
    }

    /// Instantiate the constraint set in the model's dimension.
    pub fn build_constraints(&self) -> Result<ConstraintSet> {
        ConstraintSet::from_id_params(
            &self.constraints.id,
            &self.constraints.params,
            self.theta_bar.len(),
        )
    }
}

/// Per-replicate dataset seed: a SplitMix64 mix of the experiment seed and
/// the sample size, so each `(n, seed)` cell draws an independent stream.
pub fn mix_seed(seed: u64, n: usize) -> u64 {
    let mut z = seed ^ (n as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
