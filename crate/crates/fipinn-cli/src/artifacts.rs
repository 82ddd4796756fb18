//! On-disk layout of a finished run.
//!
//! Each run owns one directory under the output root and writes:
//! `config.resolved` (canonical settings), `metrics.csv` (per-epoch
//! losses plus periodic relative L2), `events.jsonl` (one restart per
//! line), `samples_final.csv` (final interior collocation set),
//! `summary.json` (headline numbers) and `network.txt` (checkpoint).
//! Everything except the wall time in the summary is a pure function of
//! the configuration, so repeated runs produce byte-identical metrics.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use fipinn::autodiff::Network;
use fipinn::trainer::TrainReport;
use serde_json::json;

use crate::config::{canonical, run_dir_name, RunSpec};

/// Output root: explicit flag, then the FIPINN_OUT_DIR environment
/// variable, then `./runs`.
pub fn out_root(flag: Option<&Path>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Ok(env) = std::env::var("FIPINN_OUT_DIR") {
        if !env.is_empty() {
            return PathBuf::from(env);
        }
    }
    PathBuf::from("runs")
}

/// Create (or reuse) the run directory for `spec` under `root`.
pub fn run_dir(root: &Path, spec: &RunSpec) -> Result<PathBuf> {
    let dir = root.join(run_dir_name(spec));
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn metrics_csv(report: &TrainReport) -> String {
    // snapshots are keyed by completed epochs; epoch 0 (untrained net)
    // has no loss row and lands in summary.json as initial_rel_l2
    let snap: HashMap<usize, f64> = report.snapshots.iter().copied().collect();
    let mut s = String::from("epoch,loss_total,loss_pde,loss_bnd,rel_l2\n");
    for (i, rec) in report.losses.iter().enumerate() {
        let epoch = i + 1;
        let _ = write!(s, "{epoch},{},{},{}", rec.total, rec.pde, rec.bnd);
        match snap.get(&epoch) {
            Some(v) => {
                let _ = writeln!(s, ",{v}");
            }
            None => s.push_str(",\n"),
        }
    }
    s
}

fn events_jsonl(report: &TrainReport) -> String {
    let mut s = String::new();
    for ev in &report.restarts {
        let line = json!({
            "epoch": ev.epoch,
            "eta": ev.eta,
            "p_hat": ev.p_hat,
            "n_failure": ev.n_failure,
            "n_s": ev.n_s,
            "levels": ev.levels,
            "capped": ev.capped,
            "n_kept": ev.n_kept,
            "n_adaptive": ev.n_adaptive,
            "n_fresh": ev.n_fresh,
            "early_stop": ev.early_stop,
        });
        s.push_str(&line.to_string());
        s.push('\n');
    }
    s
}

fn samples_csv(report: &TrainReport) -> String {
    let dim = report.final_interior.first().map_or(0, Vec::len);
    let mut s = (0..dim)
        .map(|i| format!("x{i}"))
        .collect::<Vec<_>>()
        .join(",");
    s.push('\n');
    for p in &report.final_interior {
        let row = p.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        s.push_str(&row);
        s.push('\n');
    }
    s
}

fn summary_json(spec: &RunSpec, report: &TrainReport, wall_time_s: f64) -> String {
    let initial_rel_l2 = report.snapshots.first().map(|&(_, v)| v);
    let v = json!({
        "problem": spec.problem,
        "method": spec.train.method.as_str(),
        "n_c": spec.train.n_c,
        "n_b": spec.train.n_b,
        "seed": spec.train.seed,
        "stop_reason": report.stop.as_str(),
        "restart_count": report.restarts.len(),
        "final_rel_l2": report.final_rel_l2,
        "initial_rel_l2": initial_rel_l2,
        "wall_time_s": wall_time_s,
        "epochs_run": report.losses.len(),
        "warnings": report.warnings,
    });
    serde_json::to_string_pretty(&v).expect("json encoding cannot fail") + "\n"
}

/// Write the full artifact set for one finished run.
pub fn write_artifacts(
    dir: &Path,
    spec: &RunSpec,
    net: &Network,
    report: &TrainReport,
    wall_time_s: f64,
) -> Result<()> {
    std::fs::write(dir.join("config.resolved"), canonical(spec))?;
    std::fs::write(dir.join("metrics.csv"), metrics_csv(report))?;
    std::fs::write(dir.join("events.jsonl"), events_jsonl(report))?;
    std::fs::write(dir.join("samples_final.csv"), samples_csv(report))?;
    std::fs::write(dir.join("summary.json"), summary_json(spec, report, wall_time_s))?;
    net.save(&dir.join("network.txt"))
        .with_context(|| format!("saving checkpoint in {}", dir.display()))?;
    Ok(())
}
