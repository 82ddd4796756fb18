//! Experiment front end: train single runs, sweep method/size/seed grids,
//! check the failure-probability estimator against closed-form cases, and
//! summarize finished runs.
//!
//! Exit codes: 0 on success (including early stops), 1 when a run fails
//! numerically or artifacts cannot be written, 2 for configuration errors.

mod artifacts;
mod config;
mod pf;

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Result;
use clap::{Parser, Subcommand};
use fipinn::problems::ProblemSpec;
use fipinn::subsim::SubsetSimConfig;
use fipinn::trainer::{train, Method, StopReason};

use config::{build_spec, RunSpec};

#[derive(Parser)]
#[command(name = "fipinn", version, about = "Failure-informed PINN experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train one run from a config file and write its artifacts.
    Train {
        /// Path to a key=value config file.
        config: PathBuf,
        /// Override a config key, e.g. --set t_max=5000 (repeatable).
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Output root (default: $FIPINN_OUT_DIR, then ./runs).
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Run a grid of methods, collocation sizes and seeds sequentially.
    Sweep {
        /// Path to the base key=value config file.
        config: PathBuf,
        /// Collocation sizes, comma separated (default: the config's n_c).
        #[arg(long, value_delimiter = ',')]
        n_c: Vec<usize>,
        /// Methods, comma separated (default: the config's method).
        #[arg(long, value_delimiter = ',')]
        methods: Vec<String>,
        /// Seeds, comma separated (default: the config's seed).
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        /// Override a config key before the grid is applied (repeatable).
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Output root (default: $FIPINN_OUT_DIR, then ./runs).
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Estimate a closed-form failure probability and compare with truth.
    EstimatePf {
        /// Performance function: linear-coordinate, max-norm, sphere-exterior.
        #[arg(long)]
        q: String,
        /// Dimension of the [-1,1]^d cube.
        #[arg(long, default_value_t = 2)]
        dim: usize,
        /// Failure threshold.
        #[arg(long)]
        eps_r: f64,
        /// Samples per level.
        #[arg(long, default_value_t = 1000)]
        n_s: usize,
        /// Conditional level probability.
        #[arg(long, default_value_t = 0.1)]
        p: f64,
        /// Proposal half-width as a fraction of the domain width.
        #[arg(long, default_value_t = 0.25)]
        width_frac: f64,
        /// Level cap.
        #[arg(long, default_value_t = 20)]
        max_levels: usize,
        /// Independent repetitions.
        #[arg(long, default_value_t = 1)]
        repeats: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also run plain Monte Carlo on each repetition's budget.
        #[arg(long)]
        mc_baseline: bool,
        /// Where to write pf_runs.csv (default: $FIPINN_OUT_DIR, then ./runs).
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Tabulate every summary.json under the output root.
    Report {
        /// Output root to scan (default: $FIPINN_OUT_DIR, then ./runs).
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

fn main() {
    let cli = Cli::parse();
    let code = match cli.cmd {
        Cmd::Train { config, set, out_dir } => cmd_train(&config, &set, out_dir.as_deref()),
        Cmd::Sweep {
            config,
            n_c,
            methods,
            seeds,
            set,
            out_dir,
        } => cmd_sweep(&config, &n_c, &methods, &seeds, &set, out_dir.as_deref()),
        Cmd::EstimatePf {
            q,
            dim,
            eps_r,
            n_s,
            p,
            width_frac,
            max_levels,
            repeats,
            seed,
            mc_baseline,
            out_dir,
        } => cmd_estimate_pf(
            &q,
            dim,
            eps_r,
            n_s,
            p,
            width_frac,
            max_levels,
            repeats,
            seed,
            mc_baseline,
            out_dir.as_deref(),
        ),
        Cmd::Report { out_dir } => cmd_report(out_dir.as_deref()),
    };
    std::process::exit(code);
}

fn config_error(e: &anyhow::Error) -> i32 {
    eprintln!("config error: {e:#}");
    2
}

fn run_error(e: &anyhow::Error) -> i32 {
    // invalid settings surface as exit 2 even mid-run
    if let Some(fipinn::Error::Config(_)) = e.downcast_ref::<fipinn::Error>() {
        return config_error(e);
    }
    eprintln!("error: {e:#}");
    1
}

struct RunOutcome {
    dir: PathBuf,
    stop: StopReason,
    epochs: usize,
    restarts: usize,
    final_rel_l2: f64,
}

fn run_one(spec: &RunSpec, root: &Path) -> Result<RunOutcome> {
    let problem = ProblemSpec::by_name(&spec.problem)?;
    let t0 = Instant::now();
    let (net, report) = train(&problem, &spec.train)?;
    let wall = t0.elapsed().as_secs_f64();
    // artifacts are written even when the run died numerically, so the
    // partial history stays inspectable
    let dir = artifacts::run_dir(root, spec)?;
    artifacts::write_artifacts(&dir, spec, &net, &report, wall)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    Ok(RunOutcome {
        dir,
        stop: report.stop,
        epochs: report.losses.len(),
        restarts: report.restarts.len(),
        final_rel_l2: report.final_rel_l2,
    })
}

fn print_outcome(spec: &RunSpec, out: &RunOutcome) {
    println!(
        "{} {} seed={}: stop={} epochs={} restarts={} rel_l2={:.6e} -> {}",
        spec.problem,
        spec.train.method.as_str(),
        spec.train.seed,
        out.stop.as_str(),
        out.epochs,
        out.restarts,
        out.final_rel_l2,
        out.dir.display()
    );
}

fn cmd_train(config_path: &Path, set: &[String], out_dir: Option<&Path>) -> i32 {
    let text = match std::fs::read_to_string(config_path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", config_path.display());
            return 1;
        }
    };
    let spec = match build_spec(&text, set) {
        Ok(s) => s,
        Err(e) => return config_error(&e),
    };
    let root = artifacts::out_root(out_dir);
    match run_one(&spec, &root) {
        Ok(out) => {
            print_outcome(&spec, &out);
            match out.stop {
                StopReason::NumericalError => 1,
                _ => 0,
            }
        }
        Err(e) => run_error(&e),
    }
}

fn cmd_sweep(
    config_path: &Path,
    n_c: &[usize],
    methods: &[String],
    seeds: &[u64],
    set: &[String],
    out_dir: Option<&Path>,
) -> i32 {
    let text = match std::fs::read_to_string(config_path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", config_path.display());
            return 1;
        }
    };
    let base = match build_spec(&text, set) {
        Ok(s) => s,
        Err(e) => return config_error(&e),
    };
    let methods: Vec<Method> = if methods.is_empty() {
        vec![base.train.method]
    } else {
        match methods.iter().map(|m| m.trim().parse()).collect() {
            Ok(v) => v,
            Err(e) => return config_error(&anyhow::Error::from(e)),
        }
    };
    let sizes = if n_c.is_empty() { vec![base.train.n_c] } else { n_c.to_vec() };
    let seeds = if seeds.is_empty() { vec![base.train.seed] } else { seeds.to_vec() };

    let root = artifacts::out_root(out_dir);
    if let Err(e) = std::fs::create_dir_all(&root) {
        eprintln!("error: cannot create {}: {e}", root.display());
        return 1;
    }
    let mut rows = String::from("method,n_c,seed,final_rel_l2,stop_reason\n");
    let mut failures: Vec<String> = Vec::new();
    for &method in &methods {
        for &size in &sizes {
            for &seed in &seeds {
                let mut spec = base.clone();
                spec.train.method = method;
                spec.train.n_c = size;
                spec.train.seed = seed;
                spec.train = match spec.train.validated() {
                    Ok(t) => t,
                    Err(e) => return config_error(&anyhow::Error::from(e)),
                };
                let label = format!("{} n_c={size} seed={seed}", method.as_str());
                match run_one(&spec, &root) {
                    Ok(out) => {
                        print_outcome(&spec, &out);
                        rows.push_str(&format!(
                            "{},{},{},{},{}\n",
                            method.as_str(),
                            size,
                            seed,
                            out.final_rel_l2,
                            out.stop.as_str()
                        ));
                        if out.stop == StopReason::NumericalError {
                            failures.push(format!("{label}: numerical error"));
                        }
                    }
                    Err(e) => {
                        eprintln!("error: {label}: {e:#}");
                        failures.push(format!("{label}: {e:#}"));
                    }
                }
            }
        }
    }
    let summary_path = root.join("sweep_summary.csv");
    if let Err(e) = std::fs::write(&summary_path, rows) {
        eprintln!("error: cannot write {}: {e}", summary_path.display());
        return 1;
    }
    println!("sweep summary -> {}", summary_path.display());
    if failures.is_empty() {
        0
    } else {
        eprintln!("{} run(s) failed:", failures.len());
        for f in &failures {
            eprintln!("  {f}");
        }
        1
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_estimate_pf(
    q: &str,
    dim: usize,
    eps_r: f64,
    n_s: usize,
    p: f64,
    width_frac: f64,
    max_levels: usize,
    repeats: usize,
    seed: u64,
    mc_baseline: bool,
    out_dir: Option<&Path>,
) -> i32 {
    let q: pf::AnalyticQ = match q.parse() {
        Ok(q) => q,
        Err(e) => return config_error(&e),
    };
    let cfg = SubsetSimConfig {
        n_s,
        p,
        eps_r,
        width_frac,
        max_levels,
    };
    let cfg = match cfg.validated() {
        Ok(c) => c,
        Err(e) => return config_error(&anyhow::Error::from(e)),
    };
    // reject impossible geometry before spending any samples
    if dim == 0 {
        eprintln!("config error: dimension must be positive");
        return 2;
    }
    if let Err(e) = q.truth(dim, eps_r) {
        return config_error(&e);
    }
    let est = match pf::estimate(q, dim, &cfg, repeats, seed, mc_baseline) {
        Ok(est) => est,
        Err(e) => return run_error(&e),
    };
    println!(
        "p_hat mean={:.6e} std={:.6e} truth={:.6e} over {} run(s)",
        est.mean(),
        est.std(),
        est.truth,
        est.runs.len()
    );
    let root = artifacts::out_root(out_dir);
    if let Err(e) = std::fs::create_dir_all(&root) {
        eprintln!("error: cannot create {}: {e}", root.display());
        return 1;
    }
    let path = root.join("pf_runs.csv");
    if let Err(e) = std::fs::write(&path, est.runs_csv()) {
        eprintln!("error: cannot write {}: {e}", path.display());
        return 1;
    }
    println!("runs -> {}", path.display());
    0
}

fn cmd_report(out_dir: Option<&Path>) -> i32 {
    let root = artifacts::out_root(out_dir);
    let entries = match std::fs::read_dir(&root) {
        Ok(it) => it,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", root.display());
            return 1;
        }
    };
    let mut dirs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("summary.json").is_file())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        println!("no runs under {}", root.display());
        return 0;
    }
    let mut csv = String::from("run,problem,method,n_c,seed,stop_reason,restarts,final_rel_l2\n");
    println!(
        "{:<42} {:<10} {:<9} {:>5} {:>4} {:<24} {:>8} {:>12}",
        "run", "problem", "method", "n_c", "seed", "stop", "restarts", "final_rel_l2"
    );
    for dir in &dirs {
        let text = match std::fs::read_to_string(dir.join("summary.json")) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: cannot read {}: {e}", dir.display());
                return 1;
            }
        };
        let v: serde_json::Value = match serde_json::from_str(&text) {
            Ok(v) => v,
            Err(e) => {
                eprintln!("error: bad summary in {}: {e}", dir.display());
                return 1;
            }
        };
        let name = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let rel = v["final_rel_l2"].as_f64().unwrap_or(f64::NAN);
        println!(
            "{:<42} {:<10} {:<9} {:>5} {:>4} {:<24} {:>8} {:>12.6e}",
            name,
            v["problem"].as_str().unwrap_or("?"),
            v["method"].as_str().unwrap_or("?"),
            v["n_c"],
            v["seed"],
            v["stop_reason"].as_str().unwrap_or("?"),
            v["restart_count"],
            rel
        );
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            name,
            v["problem"].as_str().unwrap_or("?"),
            v["method"].as_str().unwrap_or("?"),
            v["n_c"],
            v["seed"],
            v["stop_reason"].as_str().unwrap_or("?"),
            v["restart_count"],
            rel
        ));
    }
    let path = root.join("report.csv");
    if let Err(e) = std::fs::write(&path, csv) {
        eprintln!("error: cannot write {}: {e}", path.display());
        return 1;
    }
    println!("report -> {}", path.display());
    0
}
