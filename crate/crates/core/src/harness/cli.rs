//! Command-line entry point.
//!
//! Subcommands: `run <config.json>`, `geometry <config.json>`,
//! `selftest [--only <substring>]`, `list-models`.
//! Exit codes: 0 success, 1 configuration error, 2 numeric failure.

use std::path::{Path, PathBuf};

use crate::acceptance;
use crate::error::Result;
use crate::geometry::ConstraintSet;
use crate::model::builtin_model_ids;

use super::config::ExperimentConfig;
use super::emit;
use super::run::{density_slices, geometry_dossier, prepare, run_experiment};

const USAGE: &str = "\
bvm — posterior limit-law verification at desk scale

USAGE:
  bvm run <config.json>        run the sweep, write rows.csv/summary.json/plot.csv
  bvm geometry <config.json>   print the geometry dossier as JSON
  bvm selftest [--only NAME]   run the acceptance criteria (optionally filtered)
  bvm list-models              list model and constraint-set ids

EXIT CODES:
  0 success, 1 configuration error, 2 numeric failure
";

fn configure_threads() {
    if let Ok(v) = std::env::var("BVM_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

/// Print without panicking when stdout is a closed pipe.
fn out_line(line: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout(), "{line}");
}

fn cmd_run(path: &Path) -> Result<i32> {
    let cfg = ExperimentConfig::from_path(path)?;
    let out = run_experiment(&cfg)?;
    let dir = PathBuf::from(cfg.output_dir.clone().unwrap_or_else(|| "out".into()));
    let files = emit::emit_outputs(&out, &dir)?;
    if cfg.emit_slices {
        let slices = density_slices(&cfg)?;
        std::fs::write(dir.join("slices.csv"), emit::slices_csv(&slices))?;
    }
    for f in &files {
        out_line(&format!("wrote {}", f.display()));
    }
    let t = &out.summary.trend;
    out_line(&format!(
        "regime={} rows={} final_median_tv={} nonincreasing={} partial={}",
        out.summary.regime,
        out.rows.len(),
        t.final_median_tv,
        t.median_tv_nonincreasing,
        out.summary.partial
    ));
    if out.summary.partial {
        for e in &out.summary.errors {
            eprintln!("row n={} seed={} failed at {}: {}", e.n, e.seed, e.stage, e.message);
        }
        return Ok(2);
    }
    Ok(0)
}

fn cmd_geometry(path: &Path) -> Result<i32> {
    let cfg = ExperimentConfig::from_path(path)?;
    let ctx = prepare(&cfg)?;
    let dossier = geometry_dossier(&ctx);
    out_line(&serde_json::to_string_pretty(&dossier)?);
    Ok(0)
}

fn cmd_selftest(filter: Option<&str>) -> i32 {
    let outcomes = acceptance::run_criteria(filter, true);
    if outcomes.is_empty() {
        eprintln!("no acceptance criterion matches the filter");
        return 1;
    }
    if outcomes.iter().all(|o| o.pass) {
        0
    } else {
        2
    }
}

fn cmd_list_models() -> i32 {
    out_line("models:");
    for id in builtin_model_ids() {
        out_line(&format!("  {id}"));
    }
    out_line("constraint sets:");
    for id in [
        "all",
        "halfspace",
        "box",
        "orthant",
        "ball",
        "ellipsoid",
        "intersection",
    ] {
        // Touch the catalog so the listing cannot drift from it.
        let _ = ConstraintSet::from_id_params(id, &serde_json::Value::Null, 1);
        out_line(&format!("  {id}"));
    }
    0
}

/// Dispatch `argv[1..]`; returns the process exit code.
pub fn run_cli(args: &[String]) -> i32 {
    configure_threads();
    let mut it = args.iter();
    let Some(cmd) = it.next() else {
        eprint!("{USAGE}");
        return 1;
    };
    let code = match cmd.as_str() {
        "run" | "geometry" => {
            let Some(path) = it.next() else {
                eprintln!("missing <config.json> argument");
                return 1;
            };
            let path = Path::new(path);
            let r = if cmd == "run" {
                cmd_run(path)
            } else {
                cmd_geometry(path)
            };
            match r {
                Ok(code) => code,
                Err(e) => {
                    eprintln!("error: {e}");
                    e.exit_code()
                }
            }
        }
        "selftest" => {
            let filter = match (it.next().map(String::as_str), it.next()) {
                (Some("--only"), Some(name)) => Some(name.as_str()),
                (None, _) => None,
                _ => {
                    eprintln!("usage: bvm selftest [--only NAME]");
                    return 1;
                }
            };
            cmd_selftest(filter)
        }
        "list-models" => cmd_list_models(),
        "help" | "--help" | "-h" => {
            print!("{USAGE}");
            0
        }
        other => {
            eprintln!("unknown subcommand '{other}'\n{USAGE}");
            1
        }
    };
    code
}
