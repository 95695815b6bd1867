//! Pipeline orchestration: data → regime → geometry → posterior → limit →
//! TV, swept over `(n, seed)` cells in a work pool with deterministic
//! aggregation.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use super::config::{mix_seed, ExperimentConfig, GridSettings};
use crate::error::{Error, Result};
use crate::geometry::{ConeFrame, ConstraintSet, FaceGeometry};
use crate::limit::build_limit;
use crate::lp::solve_lp;
use crate::model::ModelSpec;
use crate::posterior::{
    classify_regime, map_estimate, mle_residual_nearly, mle_residual_wellspec, solve_theta_star,
    Regime, RegimeLabel, RescaledPosterior,
};
use crate::tv::{misspec_gap, sup_gn_gap, tv_distance, GridAxis, QuadratureGrid};

/// Data-independent context computed once per experiment.
#[derive(Debug, Clone)]
pub struct PipelineContext {
    pub model: ModelSpec,
    pub cs: ConstraintSet,
    pub theta_star: DVector<f64>,
    pub label: RegimeLabel,
    pub frame: ConeFrame,
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<PipelineContext> {
    let model = cfg.build_model()?;
    let cs = cfg.build_constraints()?;
    let theta_star = solve_theta_star(&model, &cs)?;
    let label = classify_regime(&model, &cs, &theta_star)?;
    let frame = ConeFrame::build(
        &cs,
        &theta_star,
        model.pop_grad(&theta_star)?,
        model.pop_hess(&theta_star)?,
    )?;
    Ok(PipelineContext {
        model,
        cs,
        theta_star,
        label,
        frame,
    })
}

/// Machine-readable geometry dossier (constraint indices are 1-based,
/// matching the usual j = 1..p numbering).
#[derive(Debug, Clone, Serialize)]
pub struct GeometryDossier {
    pub regime: String,
    pub interior: bool,
    pub grad_norm: f64,
    pub theta_star: Vec<f64>,
    pub grad_phi: Vec<f64>,
    pub fisher: Vec<Vec<f64>>,
    pub active: Vec<usize>,
    pub facet: Vec<usize>,
    pub face_set: Vec<usize>,
    pub lambda: Vec<f64>,
    pub alpha_finite: Option<f64>,
    pub alpha_feasible: Option<f64>,
    pub dim_l: Option<usize>,
    pub l_basis: Vec<Vec<f64>>,
    pub lperp_basis: Vec<Vec<f64>>,
}

pub fn geometry_dossier(ctx: &PipelineContext) -> GeometryDossier {
    let frame = &ctx.frame;
    let col_vecs = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
        (0..m.ncols())
            .map(|j| m.column(j).iter().cloned().collect())
            .collect()
    };
    let (face_set, lambda, alpha_f, alpha_k, dim_l, l_basis, lperp_basis) = match &frame.face {
        Some(FaceGeometry {
            face_set,
            lambda,
            l_basis,
            lperp_basis,
            alpha_finite,
            alpha_feasible,
        }) => (
            face_set.iter().map(|j| j + 1).collect(),
            lambda.clone(),
            Some(*alpha_finite),
            Some(*alpha_feasible),
            Some(l_basis.ncols()),
            col_vecs(l_basis),
            col_vecs(lperp_basis),
        ),
        None => (Vec::new(), Vec::new(), None, None, None, Vec::new(), Vec::new()),
    };
    GeometryDossier {
        regime: ctx.label.regime.as_str().to_string(),
        interior: ctx.label.interior,
        grad_norm: ctx.label.grad_norm,
        theta_star: ctx.theta_star.iter().cloned().collect(),
        grad_phi: frame.grad_phi.iter().cloned().collect(),
        fisher: (0..frame.fisher.nrows())
            .map(|i| frame.fisher.row(i).iter().cloned().collect())
            .collect(),
        active: frame.active.iter().map(|j| j + 1).collect(),
        facet: frame.facet.iter().map(|j| j + 1).collect(),
        face_set,
        lambda,
        alpha_finite: alpha_f,
        alpha_feasible: alpha_k,
        dim_l,
        l_basis,
        lperp_basis,
    }
}

/// One `(n, seed)` result row. Undefined diagnostics are NaN; a failed row
/// carries the stage tag in `error` and `error:<stage>` in the regime
/// column of the CSV.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentRow {
    pub n: usize,
    pub seed: u64,
    pub regime: String,
    pub tv: f64,
    pub tv_error: f64,
    pub sup_gap: f64,
    pub mle_residual: f64,
    pub alpha: f64,
    pub runtime_ms: u128,
    pub error: Option<RowError>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RowError {
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct PerNSummary {
    pub n: usize,
    pub rows: usize,
    pub median_tv: f64,
    pub q25_tv: f64,
    pub q75_tv: f64,
    pub median_sup_gap: f64,
    pub median_mle_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrendVerdict {
    pub median_tv_nonincreasing: bool,
    pub final_median_tv: f64,
    pub tv_threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentSummary {
    pub regime: String,
    pub geometry: GeometryDossier,
    pub per_n: Vec<PerNSummary>,
    pub trend: TrendVerdict,
    pub partial: bool,
    pub errors: Vec<RowErrorRecord>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RowErrorRecord {
    pub n: usize,
    pub seed: u64,
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub rows: Vec<ExperimentRow>,
    pub summary: ExperimentSummary,
}

/// Quadrature grid for one replicate: Gaussian axes centered at the
/// limit mean with `half_width_sds` deviations; exponential s-axes sized
/// from the cone box `{u_j·s ≤ 0} ∩ {u·s ≤ s_tail}`.
pub fn build_grid(
    frame: &ConeFrame,
    regime: Regime,
    y_n: &DVector<f64>,
    settings: &GridSettings,
) -> Result<QuadratureGrid> {
    let dim = frame.dim();
    match regime {
        Regime::WellSpecified | Regime::NearlyMisspecified => {
            let lu = frame.fisher.clone().lu();
            let mean = -lu
                .solve(y_n)
                .ok_or_else(|| Error::Numeric("Fisher matrix singular".into()))?;
            let cov = lu
                .try_inverse()
                .ok_or_else(|| Error::Numeric("Fisher matrix singular".into()))?;
            let axes = (0..dim)
                .map(|k| {
                    let sd = cov[(k, k)].sqrt();
                    GridAxis {
                        lo: mean[k] - settings.half_width_sds * sd,
                        hi: mean[k] + settings.half_width_sds * sd,
                        points: settings.t_points(dim),
                    }
                })
                .collect();
            Ok(QuadratureGrid::new(axes))
        }
        Regime::Misspecified => {
            let face = frame
                .face
                .as_ref()
                .ok_or_else(|| Error::Geometry("missing face geometry".into()))?;
            let l = face.l_basis.ncols();
            let mut axes = Vec::new();
            if l > 0 {
                let gram = face.l_basis.transpose() * &frame.fisher * &face.l_basis;
                let g_inv = gram
                    .try_inverse()
                    .ok_or_else(|| Error::Numeric("singular t-Gram matrix".into()))?;
                let mean = -(&g_inv * (face.l_basis.transpose() * y_n));
                for k in 0..l {
                    let sd = g_inv[(k, k)].sqrt();
                    axes.push(GridAxis {
                        lo: mean[k] - settings.half_width_sds * sd,
                        hi: mean[k] + settings.half_width_sds * sd,
                        points: settings.t_points(dim),
                    });
                }
            }
            for (lo, hi) in s_box(frame, face, settings.s_tail)? {
                axes.push(GridAxis {
                    lo,
                    hi,
                    points: settings.s_points(dim),
                });
            }
            Ok(QuadratureGrid::new(axes))
        }
    }
}

/// Coordinate bounds of `{ys : u_j·s ≤ 0 ∀j∈J*, u·s ≤ tail}` in the
/// `L^{⊥_S}` basis, padded slightly.
fn s_box(frame: &ConeFrame, face: &FaceGeometry, tail: f64) -> Result<Vec<(f64, f64)>> {
    let m = face.lperp_basis.ncols();
    let rows = face.face_set.len() + 1;
    let mut a_ub = DMatrix::zeros(rows, m);
    let b_ub = {
        let mut b = DVector::zeros(rows);
        b[rows - 1] = tail;
        b
    };
    for (i, &j) in face.face_set.iter().enumerate() {
        a_ub.set_row(i, &(face.lperp_basis.transpose() * frame.grad_of(j)).transpose());
    }
    a_ub.set_row(
        rows - 1,
        &(face.lperp_basis.transpose() * &frame.grad_phi).transpose(),
    );
    let mut out = Vec::with_capacity(m);
    for k in 0..m {
        let mut c = DVector::zeros(m);
        c[k] = 1.0;
        let lo = solve_lp(&c, &a_ub, &b_ub, &DMatrix::zeros(0, m), &DVector::zeros(0))?
            .optimal("bounding the s-axis")?
            .value;
        let hi = -solve_lp(&(-&c), &a_ub, &b_ub, &DMatrix::zeros(0, m), &DVector::zeros(0))?
            .optimal("bounding the s-axis")?
            .value;
        let pad = 0.02 * (hi - lo) + 0.25;
        out.push((lo - pad, hi + pad));
    }
    Ok(out)
}

struct RowMetrics {
    tv: f64,
    tv_error: f64,
    sup_gap: f64,
    mle_residual: f64,
}

fn stage<T>(name: &str, r: Result<T>) -> std::result::Result<T, RowError> {
    r.map_err(|e| RowError {
        stage: name.to_string(),
        message: e.to_string(),
    })
}

fn run_cell(
    ctx: &PipelineContext,
    cfg: &ExperimentConfig,
    n: usize,
    seed: u64,
) -> std::result::Result<RowMetrics, RowError> {
    let regime = ctx.label.regime;
    let data = ctx.model.sample(n, mix_seed(seed, n));
    let post = stage(
        "posterior",
        RescaledPosterior::build(&ctx.model, &ctx.cs, &ctx.frame, regime, &data),
    )?;
    let law = stage(
        "limit",
        build_limit(regime, &ctx.frame, &ctx.cs, post.y_n()),
    )?;
    let grid = stage(
        "grid",
        build_grid(&ctx.frame, regime, post.y_n(), &cfg.grid),
    )?;
    let tv = stage(
        "tv",
        tv_distance(
            &|y: &[f64]| post.log_density_coords(y),
            &|y: &[f64]| law.log_density_unnorm_coords(y),
            &grid,
        ),
    )?;
    let sup = stage(
        "sup-gap",
        match regime {
            Regime::Misspecified => misspec_gap(
                &post,
                cfg.grid.sup_gap_half_width,
                cfg.grid.sup_gap_step,
            ),
            _ => sup_gn_gap(&post, cfg.grid.sup_gap_half_width, cfg.grid.sup_gap_step),
        },
    )?;
    let mle_residual = match regime {
        Regime::WellSpecified => {
            let hat = stage("mle", map_estimate(&ctx.model, &ctx.cs, &data))?;
            stage(
                "mle",
                mle_residual_wellspec(&ctx.frame, &hat, n, post.y_n()),
            )?
            .inverse_version
        }
        Regime::NearlyMisspecified => {
            let hat = stage("mle", map_estimate(&ctx.model, &ctx.cs, &data))?;
            stage(
                "mle",
                mle_residual_nearly(&ctx.cs, &ctx.frame, &hat, n, post.y_n()),
            )?
        }
        Regime::Misspecified => f64::NAN,
    };
    Ok(RowMetrics {
        tv: tv.tv,
        tv_error: tv.error_estimate,
        sup_gap: sup,
        mle_residual,
    })
}

fn median(sorted: &[f64]) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let idx = ((sorted.len() as f64 - 1.0) * q).round() as usize;
    sorted[idx]
}

/// Run the full sweep. Every `(n, seed)` cell is independent: it draws a
/// fresh dataset and never aborts other cells on failure.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let ctx = prepare(cfg)?;
    let alpha = ctx
        .frame
        .face
        .as_ref()
        .map(|f| f.alpha_finite)
        .unwrap_or(f64::NAN);
    let cells: Vec<(usize, u64)> = cfg
        .n_list
        .iter()
        .flat_map(|&n| cfg.seeds.iter().map(move |&s| (n, s)))
        .collect();
    let rows: Vec<ExperimentRow> = cells
        .par_iter()
        .map(|&(n, seed)| {
            let start = Instant::now();
            let outcome = run_cell(&ctx, cfg, n, seed);
            let runtime_ms = start.elapsed().as_millis();
            match outcome {
                Ok(m) => ExperimentRow {
                    n,
                    seed,
                    regime: ctx.label.regime.as_str().to_string(),
                    tv: m.tv,
                    tv_error: m.tv_error,
                    sup_gap: m.sup_gap,
                    mle_residual: m.mle_residual,
                    alpha,
                    runtime_ms,
                    error: None,
                },
                Err(e) => ExperimentRow {
                    n,
                    seed,
                    regime: format!("error:{}", e.stage),
                    tv: f64::NAN,
                    tv_error: f64::NAN,
                    sup_gap: f64::NAN,
                    mle_residual: f64::NAN,
                    alpha,
                    runtime_ms,
                    error: Some(e),
                },
            }
        })
        .collect();

    let mut per_n = Vec::new();
    for &n in &cfg.n_list {
        let mut tvs: Vec<f64> = rows
            .iter()
            .filter(|r| r.n == n && r.error.is_none())
            .map(|r| r.tv)
            .collect();
        tvs.sort_by(f64::total_cmp);
        let mut gaps: Vec<f64> = rows
            .iter()
            .filter(|r| r.n == n && r.error.is_none())
            .map(|r| r.sup_gap)
            .collect();
        gaps.sort_by(f64::total_cmp);
        let mut res: Vec<f64> = rows
            .iter()
            .filter(|r| r.n == n && r.error.is_none() && r.mle_residual.is_finite())
            .map(|r| r.mle_residual)
            .collect();
        res.sort_by(f64::total_cmp);
        per_n.push(PerNSummary {
            n,
            rows: tvs.len(),
            median_tv: median(&tvs),
            q25_tv: quantile(&tvs, 0.25),
            q75_tv: quantile(&tvs, 0.75),
            median_sup_gap: median(&gaps),
            median_mle_residual: median(&res),
        });
    }
    let medians: Vec<f64> = per_n.iter().map(|p| p.median_tv).collect();
    let nonincreasing = medians.windows(2).all(|w| !w[0].is_nan() && w[1] <= w[0] + 1e-12)
        && medians.iter().all(|m| m.is_finite());
    let final_median = *medians.last().unwrap_or(&f64::NAN);
    let errors: Vec<RowErrorRecord> = rows
        .iter()
        .filter_map(|r| {
            r.error.as_ref().map(|e| RowErrorRecord {
                n: r.n,
                seed: r.seed,
                stage: e.stage.clone(),
                message: e.message.clone(),
            })
        })
        .collect();
    let partial = !errors.is_empty();
    let summary = ExperimentSummary {
        regime: ctx.label.regime.as_str().to_string(),
        geometry: geometry_dossier(&ctx),
        trend: TrendVerdict {
            median_tv_nonincreasing: nonincreasing,
            final_median_tv: final_median,
            tv_threshold: cfg.tv_threshold,
            pass: nonincreasing && final_median <= cfg.tv_threshold,
        },
        per_n,
        partial,
        errors,
    };
    Ok(ExperimentOutput { rows, summary })
}

/// Normalized density slices along each grid axis through the cell
/// closest to the grid center, for the largest `n` and smallest seed.
/// Returns `(axis, coordinate, log_posterior, log_limit)` records.
pub fn density_slices(cfg: &ExperimentConfig) -> Result<Vec<(usize, f64, f64, f64)>> {
    let ctx = prepare(cfg)?;
    let n = *cfg.n_list.last().unwrap();
    let seed = *cfg.seeds.iter().min().unwrap();
    let data = ctx.model.sample(n, mix_seed(seed, n));
    let post = RescaledPosterior::build(&ctx.model, &ctx.cs, &ctx.frame, ctx.label.regime, &data)?;
    let mut law = build_limit(ctx.label.regime, &ctx.frame, &ctx.cs, post.y_n())?;
    law.normalize(&crate::limit::NormalizeConfig::default())?;
    let grid = build_grid(&ctx.frame, ctx.label.regime, post.y_n(), &cfg.grid)?;
    // Normalize the posterior on the grid.
    let mut logs = Vec::with_capacity(grid.total_cells());
    grid.for_each_center(|y, _| logs.push(post.log_density_coords(y)));
    let log_z = crate::quad::log_sum_exp(&logs) + grid.cell_volume().ln();
    let mut out = Vec::new();
    for (axis, ax) in grid.axes.iter().enumerate() {
        let center: Vec<f64> = grid.axes.iter().map(|a| a.center(a.points / 2)).collect();
        for i in 0..ax.points {
            let mut y = center.clone();
            y[axis] = ax.center(i);
            out.push((
                axis,
                y[axis],
                post.log_density_coords(&y) - log_z,
                law.log_density_coords(&y),
            ));
        }
    }
    Ok(out)
}
