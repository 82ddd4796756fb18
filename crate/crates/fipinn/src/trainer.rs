//! End-to-end training orchestration: loss assembly, optimization epochs,
//! plateau-triggered restarts with failure-probability estimation, dataset
//! recomposition, early stopping and metric reporting.

use crate::anneal::{recompose, AnnealParams, RestartPolicy};
use crate::autodiff::{ChannelSet, Network};
use crate::optim::{AdamState, LbfgsState};
use crate::performance::{estimate_norm, PerformanceFn, PerformanceKind};
use crate::problems::{OpCoeffs, Operator, ProblemSpec};
use crate::seed::{child_seed, rng_from};
use crate::subsim::{mc_failure_probability, subset_simulation, SubsetSimConfig};
use crate::{Error, Point, Result};

/// Training variant. The failure-informed variants differ in how they
/// estimate the failure probability at a restart and in which performance
/// indicator defines "failure".
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Fixed collocation set, no restarts.
    Vanilla,
    /// Restarts with a plain Monte Carlo failure estimate; never stops early.
    McFiPinn,
    /// Restarts with subset simulation on the normalized residual.
    RFiPinn,
    /// Restarts with subset simulation on the residual-gradient norm.
    GFiPinn,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Vanilla => "vanilla",
            Method::McFiPinn => "mc_fipinn",
            Method::RFiPinn => "r_fipinn",
            Method::GFiPinn => "g_fipinn",
        }
    }

    fn performance_kind(&self) -> PerformanceKind {
        match self {
            Method::GFiPinn => PerformanceKind::ResidualGradient,
            _ => PerformanceKind::Residual,
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vanilla" => Ok(Method::Vanilla),
            "mc_fipinn" => Ok(Method::McFiPinn),
            "r_fipinn" => Ok(Method::RFiPinn),
            "g_fipinn" => Ok(Method::GFiPinn),
            other => Err(Error::Config(format!(
                "unknown method {other:?}; expected vanilla, mc_fipinn, r_fipinn or g_fipinn"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Adam,
    Lbfgs,
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adam" => Ok(OptimizerKind::Adam),
            "lbfgs" => Ok(OptimizerKind::Lbfgs),
            other => Err(Error::Config(format!(
                "unknown optimizer {other:?}; expected adam or lbfgs"
            ))),
        }
    }
}

impl OptimizerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            OptimizerKind::Adam => "adam",
            OptimizerKind::Lbfgs => "lbfgs",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxEpochs,
    EarlyStopFailureProb,
    NumericalError,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::MaxEpochs => "max_epochs",
            StopReason::EarlyStopFailureProb => "early_stop_failure_prob",
            StopReason::NumericalError => "numerical_error",
        }
    }
}

/// Curvature pairs kept by the quasi-Newton optimizer.
const LBFGS_MEMORY: usize = 10;

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub method: Method,
    /// Interior collocation points.
    pub n_c: usize,
    /// Constraint points, pooled across all groups.
    pub n_b: usize,
    /// Weight of the constraint loss term.
    pub lambda_b: f64,
    /// Performance tolerance: a point fails when Q exceeds it.
    pub eps_r: f64,
    /// Failure-probability tolerance for early stopping.
    pub eps_p: f64,
    /// Epoch budget.
    pub t_max: usize,
    pub optimizer: OptimizerKind,
    pub lr: f64,
    pub hidden_layers: usize,
    pub hidden_width: usize,
    /// Input-layer weight scale at init; 1 keeps plain Glorot. Values
    /// above 1 seed sharp, domain-anchored first-layer features, which a
    /// small fixed step size cannot grow within a desk-scale budget.
    pub first_layer_scale: f64,
    pub anneal: AnnealParams,
    pub restart: RestartPolicy,
    /// Level probability of the subset-simulation estimator.
    pub ss_p: f64,
    pub ss_width_frac: f64,
    pub ss_max_levels: usize,
    /// Sample count for the one-time residual-norm estimate.
    pub norm_samples: usize,
    /// Epochs between relative-L2 snapshots.
    pub snapshot_period: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn defaults(method: Method) -> Self {
        TrainConfig {
            method,
            n_c: 1000,
            n_b: 800,
            lambda_b: 1.0,
            eps_r: 0.1,
            eps_p: 0.01,
            t_max: 20_000,
            optimizer: OptimizerKind::Adam,
            lr: 1e-3,
            hidden_layers: 3,
            hidden_width: 48,
            first_layer_scale: 1.0,
            anneal: AnnealParams::default(),
            restart: RestartPolicy::default(),
            ss_p: 0.1,
            ss_width_frac: 0.25,
            ss_max_levels: 20,
            norm_samples: 10_000,
            snapshot_period: 10,
            seed: 0,
        }
    }

    pub fn validated(self) -> Result<Self> {
        if self.n_c == 0 || self.n_b == 0 {
            return Err(Error::Config("dataset sizes must be at least 1".into()));
        }
        if !(self.lambda_b.is_finite() && self.lambda_b >= 0.0) {
            return Err(Error::Config(format!(
                "constraint weight must be non-negative, got {}",
                self.lambda_b
            )));
        }
        for (name, v) in [
            ("eps_r", self.eps_r),
            ("eps_p", self.eps_p),
            ("lr", self.lr),
            ("first_layer_scale", self.first_layer_scale),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.t_max == 0 {
            return Err(Error::Config("epoch budget must be at least 1".into()));
        }
        if self.hidden_layers == 0 || self.hidden_width == 0 {
            return Err(Error::Config("network needs at least one hidden unit".into()));
        }
        if self.norm_samples == 0 {
            return Err(Error::Config("norm estimate needs at least one sample".into()));
        }
        if self.snapshot_period == 0 {
            return Err(Error::Config("snapshot period must be at least 1".into()));
        }
        self.anneal.validated()?;
        self.restart.validated()?;
        // a unit-seed stand-in validates the level probability and walk
        // parameters before any restart happens
        let inv_p = (1.0 / self.ss_p).round();
        if !(self.ss_p > 0.0 && self.ss_p < 1.0) || !inv_p.is_finite() {
            return Err(Error::Config(format!(
                "level probability must lie in (0, 1), got {}",
                self.ss_p
            )));
        }
        SubsetSimConfig {
            n_s: inv_p as usize,
            p: self.ss_p,
            eps_r: self.eps_r,
            width_frac: self.ss_width_frac,
            max_levels: self.ss_max_levels,
        }
        .validated()?;
        Ok(self)
    }

    fn widths(&self, input_dim: usize) -> Vec<usize> {
        let mut w = vec![input_dim];
        w.extend(std::iter::repeat(self.hidden_width).take(self.hidden_layers));
        w.push(1);
        w
    }
}

/// Interior and per-group constraint points for one training phase.
#[derive(Debug, Clone)]
pub struct CollocationSets {
    pub interior: Vec<Point>,
    pub groups: Vec<Vec<Point>>,
}

impl CollocationSets {
    /// Draw a fresh dataset: `n_c` interior points and `n_b` constraint
    /// points split as evenly as possible across the groups.
    pub fn sample(problem: &ProblemSpec, n_c: usize, n_b: usize, seed: u64) -> Self {
        let mut rng = rng_from(seed, "interior");
        let interior = problem.domain.sample_n(n_c, &mut rng);
        let g = problem.constraints.len().max(1);
        let mut groups = Vec::with_capacity(problem.constraints.len());
        for (gi, c) in problem.constraints.iter().enumerate() {
            let count = n_b / g + usize::from(gi < n_b % g);
            let mut rng = rng_from(seed, &format!("boundary/{gi}"));
            groups.push(
                (0..count)
                    .map(|_| c.region.sample(&problem.domain, &mut rng))
                    .collect(),
            );
        }
        CollocationSets { interior, groups }
    }

    pub fn n_boundary(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LossBreakdown {
    pub total: f64,
    /// Mean squared interior residual.
    pub j_c: f64,
    /// Mean squared constraint value, pooled over all groups.
    pub j_b: f64,
}

/// Loss of a network state on a dataset: `j_c + lambda_b * j_b`.
pub fn compute_loss(
    net: &Network,
    problem: &ProblemSpec,
    sets: &CollocationSets,
    lambda_b: f64,
) -> Result<LossBreakdown> {
    if sets.interior.is_empty() || sets.n_boundary() == 0 {
        return Err(Error::Contract("loss needs non-empty datasets".into()));
    }
    let tape = net.forward_batch(&sets.interior)?;
    let mut j_c = 0.0;
    for (k, x) in sets.interior.iter().enumerate() {
        let r = problem.interior.residual(x, &tape.bundle(k));
        if !r.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite residual at interior point {k}"
            )));
        }
        j_c += r * r;
    }
    j_c /= sets.interior.len() as f64;

    let mut j_b = 0.0;
    for (gi, pts) in sets.groups.iter().enumerate() {
        if pts.is_empty() {
            continue;
        }
        let tape = net.forward_batch(pts)?;
        for (k, x) in pts.iter().enumerate() {
            let b = problem.constraints[gi].op.residual(x, &tape.bundle(k));
            if !b.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite constraint value at group {gi} point {k}"
                )));
            }
            j_b += b * b;
        }
    }
    j_b /= sets.n_boundary() as f64;
    Ok(LossBreakdown {
        total: j_c + lambda_b * j_b,
        j_c,
        j_b,
    })
}

/// Relative L2 error of the network against the closed-form solution:
/// `sqrt(sum (u - u_net)^2) / sqrt(sum u^2)` over the test points.
pub fn relative_l2(net: &Network, problem: &ProblemSpec, pts: &[Point]) -> Result<f64> {
    if pts.is_empty() {
        return Err(Error::Contract("relative error needs test points".into()));
    }
    let vals = net.forward_values(pts)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, v) in pts.iter().zip(&vals) {
        let u = problem.exact(x);
        num += (u - v) * (u - v);
        den += u * u;
    }
    if den == 0.0 {
        return Err(Error::Contract(
            "exact solution vanishes on the test set; relative error undefined".into(),
        ));
    }
    Ok((num / den).sqrt())
}

/// Grid side for 2-D evaluation.
pub const TEST_GRID_SIDE: usize = 256;
/// Evaluation points for higher-dimensional problems.
pub const TEST_MC_POINTS: usize = 10_000;
/// Fixed seed for the high-dimensional test set, shared by every run so
/// errors are comparable across methods and training seeds.
pub const TEST_POINT_SEED: u64 = 424_242;

/// The evaluation set for a problem: a full grid in 2-D, a fixed-seed
/// uniform cloud otherwise.
pub fn test_points(problem: &ProblemSpec) -> Vec<Point> {
    let d = problem.dim();
    if d == 2 {
        let n = TEST_GRID_SIDE;
        let (l0, w0) = (problem.domain.lower()[0], problem.domain.width(0));
        let (l1, w1) = (problem.domain.lower()[1], problem.domain.width(1));
        let mut pts = Vec::with_capacity(n * n);
        for i in 0..n {
            let x0 = l0 + w0 * i as f64 / (n - 1) as f64;
            for j in 0..n {
                pts.push(vec![x0, l1 + w1 * j as f64 / (n - 1) as f64]);
            }
        }
        pts
    } else {
        problem
            .domain
            .sample_n(TEST_MC_POINTS, &mut rng_from(TEST_POINT_SEED, "test-points"))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LossRecord {
    pub total: f64,
    pub pde: f64,
    pub bnd: f64,
}

/// One restart: the failure-probability probe and, unless the run stopped
/// early, the dataset recomposition that followed.
#[derive(Debug, Clone)]
pub struct RestartEvent {
    /// Epoch index (0-based) at which the plateau fired.
    pub epoch: usize,
    /// Replacement proportion from the cosine schedule.
    pub eta: f64,
    /// Estimated failure probability.
    pub p_hat: f64,
    /// Failure samples produced by the estimator.
    pub n_failure: usize,
    /// Sample budget given to the estimator.
    pub n_s: usize,
    /// Intermediate levels used (0 for the Monte Carlo estimator).
    pub levels: usize,
    /// True when the level cap cut the estimator short.
    pub capped: bool,
    /// Composition of the recomposed interior set. On an early stop no
    /// recomposition happens and the set is recorded as fully kept.
    pub n_kept: usize,
    pub n_adaptive: usize,
    pub n_fresh: usize,
    pub early_stop: bool,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    /// One record per completed epoch, evaluated before the step.
    pub losses: Vec<LossRecord>,
    /// (completed epochs, relative L2) pairs; the first is the untrained
    /// network, the last matches `final_rel_l2`.
    pub snapshots: Vec<(usize, f64)>,
    pub restarts: Vec<RestartEvent>,
    pub stop: StopReason,
    pub final_rel_l2: f64,
    /// Final interior collocation set.
    pub final_interior: Vec<Point>,
    pub warnings: Vec<String>,
}

enum OptState {
    Adam(AdamState),
    Lbfgs(LbfgsState),
}

impl OptState {
    fn step(&mut self, params: &mut [f64], loss: f64, grad: &[f64]) -> Result<()> {
        match self {
            OptState::Adam(a) => a.step(params, grad),
            OptState::Lbfgs(l) => l.step(params, loss, grad),
        }
    }

    fn on_recompose(&mut self) {
        // a resampled dataset reshapes the objective; moment and curvature
        // history gathered on the old one no longer applies
        match self {
            OptState::Adam(a) => a.reset(),
            OptState::Lbfgs(l) => l.clear(),
        }
    }
}

/// One dataset's points with precomputed operator coefficients and the
/// smallest derivative channel set its operator touches on them, so
/// value-only constraint groups skip the derivative rows entirely.
struct SubBatch {
    points: Vec<Point>,
    coeffs: Vec<OpCoeffs>,
    ch: ChannelSet,
}

impl SubBatch {
    fn build(op: &Operator, pts: &[Point]) -> SubBatch {
        let coeffs: Vec<OpCoeffs> = pts.iter().map(|x| op.coeffs(x)).collect();
        let mut ch = ChannelSet::Value;
        for c in &coeffs {
            if c.c_hess.iter().any(|v| *v != 0.0) {
                ch = ChannelSet::Full;
                break;
            }
            if c.c_grad.iter().any(|v| *v != 0.0) {
                ch = ChannelSet::Grad;
            }
        }
        SubBatch {
            points: pts.to_vec(),
            coeffs,
            ch,
        }
    }

    /// Partial loss `sum(v^2) / denom` with the matching parameter
    /// gradient, plus the index of the first non-finite residual if any.
    fn loss_part(&self, net: &Network, denom: usize) -> Result<(f64, Vec<f64>, Option<usize>)> {
        let mut first_bad = None;
        let (part, grad) = net.parameter_gradient_on(self.ch, &self.points, |bundles| {
            let mut adj = Vec::with_capacity(bundles.len());
            let mut sum = 0.0;
            for (k, b) in bundles.iter().enumerate() {
                let v = self.coeffs[k].apply(b);
                if !v.is_finite() && first_bad.is_none() {
                    first_bad = Some(k);
                }
                sum += v * v;
                adj.push(self.coeffs[k].adjoint(2.0 * v / denom as f64));
            }
            (sum / denom as f64, adj)
        })?;
        Ok((part, grad, first_bad))
    }
}

/// Collocation data in evaluation-ready form, one sub-batch per dataset.
struct Batch {
    interior: SubBatch,
    groups: Vec<SubBatch>,
    n_b: usize,
}

impl Batch {
    fn assemble(problem: &ProblemSpec, sets: &CollocationSets) -> Batch {
        Batch {
            interior: SubBatch::build(&problem.interior, &sets.interior),
            groups: sets
                .groups
                .iter()
                .enumerate()
                .map(|(gi, pts)| SubBatch::build(&problem.constraints[gi].op, pts))
                .collect(),
            n_b: sets.n_boundary(),
        }
    }
}

struct RestartProbe {
    eta: f64,
    p_hat: f64,
    failures: Vec<Point>,
    levels: usize,
    capped: bool,
    n_s: usize,
}

/// Estimate the failure probability of the current network state with the
/// method's estimator. The residual norm is measured once, on the first
/// restart, and reused afterwards.
fn probe_failure(
    net: &Network,
    problem: &ProblemSpec,
    cfg: &TrainConfig,
    epoch: usize,
    t_s: usize,
    restart_idx: usize,
    norm: &mut Option<f64>,
    warnings: &mut Vec<String>,
) -> Result<RestartProbe> {
    let eta = cfg.anneal.proportion(t_s, epoch, cfg.t_max)?;
    if norm.is_none() {
        let est = estimate_norm(
            net,
            &problem.interior,
            &problem.domain,
            cfg.norm_samples,
            &mut rng_from(cfg.seed, "norm"),
        )?;
        if est.degenerate {
            warnings.push("interior residual norm estimated as zero; normalizing by 1".into());
        }
        *norm = Some(est.value);
    }
    let perf = PerformanceFn::with_norm(
        net,
        &problem.interior,
        &problem.domain,
        cfg.method.performance_kind(),
        norm.expect("set above"),
    )?;

    // budget scales with the replaced fraction, padded so the level
    // arithmetic stays integral
    let inv_p = (1.0 / cfg.ss_p).round() as usize;
    let raw = (eta * cfg.n_c as f64).ceil() as usize;
    let n_s = raw.div_ceil(inv_p).max(1) * inv_p;
    let restart_seed = child_seed(cfg.seed, &format!("restart{restart_idx}"));

    match cfg.method {
        Method::McFiPinn => {
            let (p_hat, failures) = mc_failure_probability(
                |x| perf.q(x),
                &problem.domain,
                n_s,
                cfg.eps_r,
                restart_seed,
            )?;
            Ok(RestartProbe {
                eta,
                p_hat,
                failures,
                levels: 0,
                capped: false,
                n_s,
            })
        }
        Method::RFiPinn | Method::GFiPinn => {
            let ss_cfg = SubsetSimConfig {
                n_s,
                p: cfg.ss_p,
                eps_r: cfg.eps_r,
                width_frac: cfg.ss_width_frac,
                max_levels: cfg.ss_max_levels,
            }
            .validated()?;
            let r = subset_simulation(|x| perf.q(x), &problem.domain, &ss_cfg, restart_seed)?;
            Ok(RestartProbe {
                eta,
                p_hat: r.p_hat,
                failures: r.failure_samples,
                levels: r.levels,
                capped: r.capped,
                n_s,
            })
        }
        Method::Vanilla => Err(Error::Contract(
            "the fixed-dataset method never probes failure".into(),
        )),
    }
}

fn push_snapshot(
    net: &Network,
    problem: &ProblemSpec,
    test_pts: &[Point],
    epoch: usize,
    snapshots: &mut Vec<(usize, f64)>,
    warnings: &mut Vec<String>,
) {
    match relative_l2(net, problem, test_pts) {
        Ok(v) if v.is_finite() => snapshots.push((epoch, v)),
        Ok(v) => warnings.push(format!("relative error at epoch {epoch} was {v}; skipped")),
        Err(e) => warnings.push(format!("relative error at epoch {epoch} failed: {e}")),
    }
}

/// Run one training job. Numerical breakdowns stop the run and are
/// reported in the result; only invalid inputs produce an error.
pub fn train(problem: &ProblemSpec, config: &TrainConfig) -> Result<(Network, TrainReport)> {
    let cfg = config.clone().validated()?;
    if problem.constraints.is_empty() {
        return Err(Error::Contract(format!(
            "problem {} has no constraint groups",
            problem.name
        )));
    }
    let mut net = Network::glorot(&cfg.widths(problem.dim()), &mut rng_from(cfg.seed, "init"))?;
    if cfg.first_layer_scale != 1.0 {
        let anchors = problem
            .domain
            .sample_n(cfg.hidden_width, &mut rng_from(cfg.seed, "init/anchors"));
        net.spread_input_layer(cfg.first_layer_scale, &anchors)?;
    }
    let mut opt = match cfg.optimizer {
        OptimizerKind::Adam => OptState::Adam(AdamState::new(net.param_count(), cfg.lr)?),
        OptimizerKind::Lbfgs => OptState::Lbfgs(LbfgsState::new(LBFGS_MEMORY, cfg.lr)?),
    };
    let mut sets = CollocationSets::sample(problem, cfg.n_c, cfg.n_b, cfg.seed);
    if sets.n_boundary() == 0 {
        return Err(Error::Config("no constraint points were allocated".into()));
    }
    let mut batch = Batch::assemble(problem, &sets);
    let test_pts = test_points(problem);

    let mut report = TrainReport {
        losses: Vec::with_capacity(cfg.t_max),
        snapshots: Vec::new(),
        restarts: Vec::new(),
        stop: StopReason::MaxEpochs,
        final_rel_l2: f64::NAN,
        final_interior: Vec::new(),
        warnings: Vec::new(),
    };
    push_snapshot(&net, problem, &test_pts, 0, &mut report.snapshots, &mut report.warnings);

    let mut totals: Vec<f64> = Vec::with_capacity(cfg.t_max);
    let mut t_s = 0usize;
    let mut norm: Option<f64> = None;

    for e in 0..cfg.t_max {
        // interior and constraint groups are separate batches so each can
        // run with its own (minimal) channel set; gradients add linearly
        let step = (|| -> Result<(f64, f64, Vec<f64>, Option<String>)> {
            let n_i = batch.interior.points.len();
            let (j_c, mut grad, bad_i) = batch.interior.loss_part(&net, n_i)?;
            let mut first_bad = bad_i.map(|k| format!("interior point {k}"));
            let mut j_b = 0.0;
            for (gi, g) in batch.groups.iter().enumerate() {
                if g.points.is_empty() {
                    continue;
                }
                let (part, gg, bad) = g.loss_part(&net, batch.n_b)?;
                j_b += part;
                for (a, b) in grad.iter_mut().zip(&gg) {
                    *a += cfg.lambda_b * b;
                }
                if first_bad.is_none() {
                    first_bad = bad.map(|k| format!("constraint group {gi} point {k}"));
                }
            }
            Ok((j_c, j_b, grad, first_bad))
        })();
        let (j_c, j_b, grad, first_bad) = match step {
            Ok(v) => v,
            Err(err) => {
                report.warnings.push(format!("epoch {e}: {err}"));
                report.stop = StopReason::NumericalError;
                break;
            }
        };
        let total = j_c + cfg.lambda_b * j_b;
        if !total.is_finite() {
            let at = first_bad.map_or(String::new(), |w| format!(" (first at {w})"));
            report
                .warnings
                .push(format!("epoch {e}: loss became {total}{at}"));
            report.stop = StopReason::NumericalError;
            break;
        }
        report.losses.push(LossRecord {
            total,
            pde: j_c,
            bnd: j_b,
        });
        totals.push(total);

        let mut params = net.params();
        if let Err(err) = opt.step(&mut params, total, &grad) {
            report.warnings.push(format!("epoch {e}: {err}"));
            report.stop = StopReason::NumericalError;
            break;
        }
        net.set_params(&params)?;

        if (e + 1) % cfg.snapshot_period == 0 {
            push_snapshot(&net, problem, &test_pts, e + 1, &mut report.snapshots, &mut report.warnings);
        }

        // a recomposition needs a full gap of retraining before the budget
        // ends, or the final model is measured mid-shock
        let gap_remains = e + cfg.restart.min_gap < cfg.t_max;
        if cfg.method != Method::Vanilla && gap_remains && cfg.restart.should_restart(&totals, t_s) {
            let idx = report.restarts.len();
            let probe = match probe_failure(
                &net,
                problem,
                &cfg,
                e,
                t_s,
                idx,
                &mut norm,
                &mut report.warnings,
            ) {
                Ok(p) => p,
                Err(Error::Numerical(m)) => {
                    report.warnings.push(format!("restart at epoch {e}: {m}"));
                    report.stop = StopReason::NumericalError;
                    break;
                }
                Err(other) => return Err(other),
            };
            let early = matches!(cfg.method, Method::RFiPinn | Method::GFiPinn)
                && probe.p_hat < cfg.eps_p;
            if early {
                report.restarts.push(RestartEvent {
                    epoch: e,
                    eta: probe.eta,
                    p_hat: probe.p_hat,
                    n_failure: probe.failures.len(),
                    n_s: probe.n_s,
                    levels: probe.levels,
                    capped: probe.capped,
                    n_kept: cfg.n_c,
                    n_adaptive: 0,
                    n_fresh: 0,
                    early_stop: true,
                });
                report.stop = StopReason::EarlyStopFailureProb;
                break;
            }
            let rec = recompose(
                &sets.interior,
                &probe.failures,
                probe.eta,
                &problem.domain,
                cfg.seed,
                &format!("recompose/restart{idx}"),
            )?;
            report.restarts.push(RestartEvent {
                epoch: e,
                eta: probe.eta,
                p_hat: probe.p_hat,
                n_failure: probe.failures.len(),
                n_s: probe.n_s,
                levels: probe.levels,
                capped: probe.capped,
                n_kept: rec.n_kept,
                n_adaptive: rec.n_adaptive,
                n_fresh: rec.n_fresh,
                early_stop: false,
            });
            sets.interior = rec.points;
            batch = Batch::assemble(problem, &sets);
            opt.on_recompose();
            t_s = e;
        }
    }

    let completed = report.losses.len();
    if report.snapshots.last().map(|s| s.0) != Some(completed) {
        push_snapshot(&net, problem, &test_pts, completed, &mut report.snapshots, &mut report.warnings);
    }
    if let Some(&(_, v)) = report.snapshots.last() {
        report.final_rel_l2 = v;
    }
    report.final_interior = sets.interior.clone();
    Ok((net, report))
}
