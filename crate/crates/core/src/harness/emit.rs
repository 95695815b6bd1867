//! Report writers: per-row CSV, JSON summary, and plot-ready aggregates.
//!
//! `rows.csv` schema (exact header):
//! `n,seed,regime,tv,tv_error,sup_gap,mle_residual,alpha,runtime_ms`
//!
//! Float columns use Rust's shortest round-trip formatting so the summary
//! is recomputable from the CSV alone; undefined diagnostics print as NaN.
//! `runtime_ms` is wall time and is the only nondeterministic column.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::Result;

use super::run::{ExperimentOutput, ExperimentRow};

pub const ROWS_HEADER: &str = "n,seed,regime,tv,tv_error,sup_gap,mle_residual,alpha,runtime_ms";

pub fn rows_csv(rows: &[ExperimentRow]) -> String {
    let mut out = String::from(ROWS_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.n, r.seed, r.regime, r.tv, r.tv_error, r.sup_gap, r.mle_residual, r.alpha,
            r.runtime_ms
        ));
    }
    out
}

pub fn plot_csv(output: &ExperimentOutput) -> String {
    let mut out = String::from("n,median_tv,q25,q75\n");
    for p in &output.summary.per_n {
        out.push_str(&format!(
            "{},{},{},{}\n",
            p.n, p.median_tv, p.q25_tv, p.q75_tv
        ));
    }
    out
}

pub fn summary_json(output: &ExperimentOutput) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&output.summary)?;
    s.push('\n');
    Ok(s)
}

/// Write `rows.csv`, `summary.json` and `plot.csv` under `dir`; returns
/// the paths written.
pub fn emit_outputs(output: &ExperimentOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let rows_path = dir.join("rows.csv");
    fs::write(&rows_path, rows_csv(&output.rows))?;
    let summary_path = dir.join("summary.json");
    fs::write(&summary_path, summary_json(output)?)?;
    let plot_path = dir.join("plot.csv");
    fs::write(&plot_path, plot_csv(output))?;
    Ok(vec![rows_path, summary_path, plot_path])
}

/// Optional density-slice dump: `axis,coord,log_posterior,log_limit`.
pub fn slices_csv(records: &[(usize, f64, f64, f64)]) -> String {
    let mut out = String::from("axis,coord,log_posterior,log_limit\n");
    for (axis, coord, lp, lq) in records {
        out.push_str(&format!("{axis},{coord},{lp},{lq}\n"));
    }
    out
}

/// Limit-law sample dump: one coordinate column per ambient dimension
/// (`t_*` for points, `t_*` and `s_*` for second-order pairs).
pub fn samples_csv(samples: &crate::limit::LawSamples) -> String {
    use crate::limit::LawSamples;
    match samples {
        LawSamples::Points(pts) => {
            let d = pts.first().map_or(0, |p| p.len());
            let mut out = (0..d)
                .map(|k| format!("t_{k}"))
                .collect::<Vec<_>>()
                .join(",");
            out.push('\n');
            for p in pts {
                let line = p
                    .iter()
                    .map(|v| format!("{v}"))
                    .collect::<Vec<_>>()
                    .join(",");
                out.push_str(&line);
                out.push('\n');
            }
            out
        }
        LawSamples::Pairs(pairs) => {
            let d = pairs.first().map_or(0, |(t, _)| t.len());
            let mut cols: Vec<String> = (0..d).map(|k| format!("t_{k}")).collect();
            cols.extend((0..d).map(|k| format!("s_{k}")));
            let mut out = cols.join(",");
            out.push('\n');
            for (t, s) in pairs {
                let line = t
                    .iter()
                    .chain(s.iter())
                    .map(|v| format!("{v}"))
                    .collect::<Vec<_>>()
                    .join(",");
                out.push_str(&line);
                out.push('\n');
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::run::{
        ExperimentSummary, GeometryDossier, PerNSummary, TrendVerdict,
    };

    fn dummy_row(n: usize, seed: u64) -> ExperimentRow {
        ExperimentRow {
            n,
            seed,
            regime: "well-specified".into(),
            tv: 0.5,
            tv_error: 1e-5,
            sup_gap: 0.1,
            mle_residual: f64::NAN,
            alpha: f64::NAN,
            runtime_ms: 3,
            error: None,
        }
    }

    #[test]
    fn empty_rows_give_header_only() {
        let csv = rows_csv(&[]);
        assert_eq!(csv, format!("{ROWS_HEADER}\n"));
    }

    #[test]
    fn two_rows_give_three_lines() {
        let csv = rows_csv(&[dummy_row(16, 1), dummy_row(16, 2)]);
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.lines().nth(1).unwrap().starts_with("16,1,well-specified,0.5,"));
        assert!(csv.contains("NaN"));
    }

    #[test]
    fn sample_dump_has_coordinate_columns() {
        use crate::limit::LawSamples;
        use nalgebra::DVector;
        let pts = LawSamples::Points(vec![DVector::from_vec(vec![1.0, 2.0])]);
        assert_eq!(samples_csv(&pts), "t_0,t_1\n1,2\n");
        let pairs = LawSamples::Pairs(vec![(
            DVector::from_vec(vec![0.5, 0.0]),
            DVector::from_vec(vec![-1.0, 0.0]),
        )]);
        assert_eq!(samples_csv(&pairs), "t_0,t_1,s_0,s_1\n0.5,0,-1,0\n");
    }

    #[test]
    fn summary_serializes() {
        let summary = ExperimentSummary {
            regime: "well-specified".into(),
            geometry: GeometryDossier {
                regime: "well-specified".into(),
                interior: true,
                grad_norm: 0.0,
                theta_star: vec![0.0],
                grad_phi: vec![0.0],
                fisher: vec![vec![1.0]],
                active: vec![],
                facet: vec![],
                face_set: vec![],
                lambda: vec![],
                alpha_finite: None,
                alpha_feasible: None,
                dim_l: None,
                l_basis: vec![],
                lperp_basis: vec![],
            },
            per_n: vec![PerNSummary {
                n: 16,
                rows: 2,
                median_tv: 0.5,
                q25_tv: 0.5,
                q75_tv: 0.5,
                median_sup_gap: 0.1,
                median_mle_residual: f64::NAN,
            }],
            trend: TrendVerdict {
                median_tv_nonincreasing: true,
                final_median_tv: 0.5,
                tv_threshold: 0.15,
                pass: false,
            },
            partial: false,
            errors: vec![],
        };
        let out = ExperimentOutput {
            rows: vec![dummy_row(16, 1), dummy_row(16, 2)],
            summary,
        };
        let json = summary_json(&out).unwrap();
        assert!(json.contains("\"median_tv\": 0.5"));
        let plot = plot_csv(&out);
        assert_eq!(plot.lines().count(), 2);
    }
}
