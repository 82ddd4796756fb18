//! Subset simulation for small failure probabilities.
//!
//! The failure event `{Q(x) > eps_r}` under a uniform prior on the domain
//! box is decomposed into a chain of nested intermediate events, each of
//! prior-conditional probability `p`. Level 0 is plain Monte Carlo; each
//! later level seeds Markov chains at the current top samples and advances
//! them with a componentwise modified Metropolis walk conditioned on the
//! intermediate threshold. The estimate is `p^m * q` where `m` is the
//! number of intermediate levels and `q` the failure fraction at the last
//! level.
//!
//! All randomness is derived from the call's seed with per-level, per-chain
//! labels, so results do not depend on evaluation order.

use crate::problems::DomainBox;
use crate::seed::rng_from;
use crate::{Error, Point, Result};
use rand::Rng;

#[derive(Debug, Clone, Copy)]
pub struct SubsetSimConfig {
    /// Samples per level.
    pub n_s: usize,
    /// Conditional probability of each intermediate level; `1/p` and
    /// `n_s * p` must be integers.
    pub p: f64,
    /// Failure threshold on the performance function.
    pub eps_r: f64,
    /// Proposal half-width as a fraction of each coordinate's width.
    pub width_frac: f64,
    /// Hard cap on intermediate levels.
    pub max_levels: usize,
}

fn near_integer(v: f64) -> Option<usize> {
    let r = v.round();
    if (v - r).abs() < 1e-9 && r >= 1.0 {
        Some(r as usize)
    } else {
        None
    }
}

impl SubsetSimConfig {
    pub fn new(n_s: usize, p: f64, eps_r: f64) -> Result<Self> {
        SubsetSimConfig {
            n_s,
            p,
            eps_r,
            width_frac: 0.25,
            max_levels: 20,
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self> {
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::Config(format!(
                "level probability must lie in (0, 1), got {}",
                self.p
            )));
        }
        if near_integer(1.0 / self.p).is_none() {
            return Err(Error::Config(format!(
                "1/p must be an integer, got p = {}",
                self.p
            )));
        }
        if near_integer(self.n_s as f64 * self.p).is_none() {
            return Err(Error::Config(format!(
                "n_s * p must be a positive integer, got {} * {}",
                self.n_s, self.p
            )));
        }
        if !self.eps_r.is_finite() {
            return Err(Error::Config("failure threshold must be finite".into()));
        }
        if !(self.width_frac.is_finite() && self.width_frac > 0.0) {
            return Err(Error::Config(format!(
                "proposal width fraction must be positive, got {}",
                self.width_frac
            )));
        }
        if self.max_levels == 0 {
            return Err(Error::Config("need at least one level".into()));
        }
        Ok(self)
    }

    /// Seeds per level, `n_s * p`.
    pub fn n_seeds(&self) -> usize {
        near_integer(self.n_s as f64 * self.p).expect("validated")
    }

    /// States emitted per chain, `1/p - 1`.
    pub fn chain_len(&self) -> usize {
        near_integer(1.0 / self.p).expect("validated") - 1
    }
}

#[derive(Debug, Clone)]
pub struct SubsetSimResult {
    pub p_hat: f64,
    /// Number of intermediate levels actually generated.
    pub levels: usize,
    /// Intermediate thresholds, one per level.
    pub thresholds: Vec<f64>,
    /// Final-level points with `Q > eps_r`.
    pub failure_samples: Vec<Point>,
    /// True when the level cap stopped the loop.
    pub capped: bool,
    /// Total performance-function evaluations.
    pub q_evals: usize,
}

fn check_finite(q: f64, x: &[f64]) -> Result<f64> {
    if q.is_finite() {
        Ok(q)
    } else {
        Err(Error::Numerical(format!(
            "performance function returned {q} at {x:?}"
        )))
    }
}

/// One modified Metropolis step sequence. Each step proposes every
/// coordinate independently, uniform in a window around the current value;
/// a coordinate falling outside the box keeps its value. The assembled
/// candidate replaces the state only if its performance exceeds the
/// threshold; either way the resulting state is emitted.
///
/// Exactly one Q evaluation per step, `d` uniform draws per step.
fn mma_steps<Q>(
    q_fn: &mut Q,
    start: (Point, f64),
    n_steps: usize,
    threshold: f64,
    domain: &DomainBox,
    width_frac: f64,
    rng: &mut impl Rng,
) -> Result<Vec<(Point, f64)>>
where
    Q: FnMut(&[f64]) -> Result<f64>,
{
    let d = domain.dim();
    let widths: Vec<f64> = (0..d).map(|i| width_frac * domain.width(i)).collect();
    let mut cur = start;
    let mut out = Vec::with_capacity(n_steps);
    for _ in 0..n_steps {
        let mut cand = cur.0.clone();
        for i in 0..d {
            let prop = rng.random_range(cur.0[i] - widths[i]..cur.0[i] + widths[i]);
            if prop >= domain.lower()[i] && prop <= domain.upper()[i] {
                cand[i] = prop;
            }
        }
        let qc = check_finite(q_fn(&cand)?, &cand)?;
        if qc > threshold {
            cur = (cand, qc);
        }
        out.push(cur.clone());
    }
    Ok(out)
}

/// Conditional-sampling chain with a strict seed precondition.
pub fn mma_chain<Q>(
    mut q_fn: Q,
    seed_point: &[f64],
    n_steps: usize,
    threshold: f64,
    domain: &DomainBox,
    width_frac: f64,
    rng: &mut impl Rng,
) -> Result<Vec<Point>>
where
    Q: FnMut(&[f64]) -> Result<f64>,
{
    if !domain.contains(seed_point) {
        return Err(Error::Contract(format!(
            "chain seed {seed_point:?} lies outside the domain"
        )));
    }
    let q0 = check_finite(q_fn(seed_point)?, seed_point)?;
    if !(q0 > threshold) {
        return Err(Error::Contract(format!(
            "chain seed has Q = {q0}, not above the threshold {threshold}"
        )));
    }
    let states = mma_steps(
        &mut q_fn,
        (seed_point.to_vec(), q0),
        n_steps,
        threshold,
        domain,
        width_frac,
        rng,
    )?;
    Ok(states.into_iter().map(|(x, _)| x).collect())
}

/// The multi-level estimator.
pub fn subset_simulation<Q>(
    mut q_fn: Q,
    domain: &DomainBox,
    cfg: &SubsetSimConfig,
    seed: u64,
) -> Result<SubsetSimResult>
where
    Q: FnMut(&[f64]) -> Result<f64>,
{
    let cfg = cfg.validated()?;
    let n_seeds = cfg.n_seeds();
    let chain_len = cfg.chain_len();

    let mut rng0 = rng_from(seed, "ss/level0");
    let mut entries: Vec<(Point, f64)> = Vec::with_capacity(cfg.n_s);
    for _ in 0..cfg.n_s {
        let x = domain.sample(&mut rng0);
        let q = check_finite(q_fn(&x)?, &x)?;
        entries.push((x, q));
    }
    let mut q_evals = cfg.n_s;

    let sort_desc =
        |v: &mut Vec<(Point, f64)>| v.sort_unstable_by(|a, b| b.1.total_cmp(&a.1));
    sort_desc(&mut entries);
    let count_failures =
        |v: &[(Point, f64)]| v.iter().take_while(|e| e.1 > cfg.eps_r).count();
    let mut n_f = count_failures(&entries);

    let mut levels = 0;
    let mut thresholds = Vec::new();
    while n_f <= n_seeds && levels < cfg.max_levels {
        // threshold: the (n_seeds + 1)-th largest performance value
        let eps_k = entries[n_seeds].1;
        thresholds.push(eps_k);
        let mut next: Vec<(Point, f64)> = Vec::with_capacity(cfg.n_s);
        for ci in 0..n_seeds {
            let seed_entry = entries[ci].clone();
            let mut chain_rng = rng_from(seed, &format!("ss/level{levels}/chain{ci}"));
            // Ties at the threshold can leave a seed with Q == eps_k; the
            // walk then only emits repeats, which is the intended
            // degenerate behavior (constant Q collapses to the cap).
            let states = mma_steps(
                &mut q_fn,
                seed_entry.clone(),
                chain_len,
                eps_k,
                domain,
                cfg.width_frac,
                &mut chain_rng,
            )?;
            q_evals += chain_len;
            next.push(seed_entry);
            next.extend(states);
        }
        debug_assert_eq!(next.len(), cfg.n_s);
        entries = next;
        sort_desc(&mut entries);
        n_f = count_failures(&entries);
        levels += 1;
    }
    let capped = n_f <= n_seeds;

    let q_frac = n_f as f64 / cfg.n_s as f64;
    let p_hat = cfg.p.powi(levels as i32) * q_frac;
    let failure_samples = entries
        .into_iter()
        .filter(|e| e.1 > cfg.eps_r)
        .map(|e| e.0)
        .collect();
    Ok(SubsetSimResult {
        p_hat,
        levels,
        thresholds,
        failure_samples,
        capped,
        q_evals,
    })
}

/// Plain Monte Carlo baseline: `n` prior draws, count exceedances.
pub fn mc_failure_probability<Q>(
    mut q_fn: Q,
    domain: &DomainBox,
    n: usize,
    eps_r: f64,
    seed: u64,
) -> Result<(f64, Vec<Point>)>
where
    Q: FnMut(&[f64]) -> Result<f64>,
{
    if n == 0 {
        return Err(Error::Config("Monte Carlo estimate needs n >= 1".into()));
    }
    let mut rng = rng_from(seed, "mc");
    let mut failures = Vec::new();
    for _ in 0..n {
        let x = domain.sample(&mut rng);
        let q = check_finite(q_fn(&x)?, &x)?;
        if q > eps_r {
            failures.push(x);
        }
    }
    Ok((failures.len() as f64 / n as f64, failures))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_box(d: usize) -> DomainBox {
        DomainBox::cube(d, -1.0, 1.0).unwrap()
    }

    #[test]
    fn config_rejects_incompatible_budgets() {
        assert!(SubsetSimConfig::new(1000, 0.1, 0.5).is_ok());
        assert!(SubsetSimConfig::new(1000, 0.3, 0.5).is_err()); // 1/p not integer
        assert!(SubsetSimConfig::new(105, 0.1, 0.5).is_err()); // n_s * p not integer
        assert!(SubsetSimConfig::new(1000, 0.0, 0.5).is_err());
        assert!(SubsetSimConfig::new(1000, 1.0, 0.5).is_err());
        let cfg = SubsetSimConfig::new(1000, 0.1, 0.5).unwrap();
        assert_eq!(cfg.n_seeds(), 100);
        assert_eq!(cfg.chain_len(), 9);
    }

    #[test]
    fn certain_failure_skips_the_loop() {
        let cfg = SubsetSimConfig::new(200, 0.1, 0.1).unwrap();
        let r = subset_simulation(|_x| Ok(10.0), &unit_box(2), &cfg, 1).unwrap();
        assert_eq!(r.p_hat, 1.0);
        assert_eq!(r.levels, 0);
        assert!(r.thresholds.is_empty());
        assert!(!r.capped);
        assert_eq!(r.failure_samples.len(), 200);
        assert_eq!(r.q_evals, 200);
    }

    #[test]
    fn impossible_failure_collapses_to_the_cap() {
        let cfg = SubsetSimConfig::new(100, 0.1, 0.1).unwrap();
        let r = subset_simulation(|_x| Ok(0.0), &unit_box(2), &cfg, 2).unwrap();
        assert_eq!(r.p_hat, 0.0);
        assert_eq!(r.levels, 20);
        assert!(r.capped);
        assert!(r.thresholds.iter().all(|&e| e == 0.0));
        assert!(r.failure_samples.is_empty());
    }

    #[test]
    fn moderate_halfspace_probability_is_recovered() {
        // P(x1 > 0.5) = 0.25 under uniform on [-1,1]^2
        let cfg = SubsetSimConfig::new(1000, 0.1, 0.5).unwrap();
        let r = subset_simulation(|x: &[f64]| Ok(x[0]), &unit_box(2), &cfg, 3).unwrap();
        assert_eq!(r.levels, 0, "one in four samples fails, no levels needed");
        assert!((r.p_hat - 0.25).abs() < 0.05, "p_hat = {}", r.p_hat);
    }

    #[test]
    fn rare_event_estimate_is_unbiased_enough() {
        // P(x1 > 1 - 2e-3) = 1e-3 under uniform on [-1,1]^2
        let truth = 1e-3;
        let cfg = SubsetSimConfig {
            n_s: 500,
            p: 0.1,
            eps_r: 1.0 - 2e-3,
            width_frac: 0.25,
            max_levels: 20,
        }
        .validated()
        .unwrap();
        let runs: Vec<SubsetSimResult> = (0..20)
            .map(|k| subset_simulation(|x: &[f64]| Ok(x[0]), &unit_box(2), &cfg, 100 + k).unwrap())
            .collect();
        let mean = runs.iter().map(|r| r.p_hat).sum::<f64>() / runs.len() as f64;
        assert!(
            (mean - truth).abs() / truth < 0.3,
            "mean {mean} too far from {truth}"
        );
        assert!(runs.iter().all(|r| r.levels >= 2), "thresholds escalated");
        for r in &runs {
            let mut prev = f64::NEG_INFINITY;
            for &t in &r.thresholds {
                assert!(t >= prev, "thresholds must not decrease");
                prev = t;
            }
        }
    }

    #[test]
    fn failure_samples_exceed_the_threshold_on_reevaluation() {
        let cfg = SubsetSimConfig::new(500, 0.1, 0.8).unwrap();
        let q = |x: &[f64]| Ok(x[0].abs().max(x[1].abs()));
        let r = subset_simulation(q, &unit_box(2), &cfg, 4).unwrap();
        assert!(!r.failure_samples.is_empty());
        let domain = unit_box(2);
        for x in &r.failure_samples {
            assert!(domain.contains(x));
            assert!(x[0].abs().max(x[1].abs()) > 0.8);
        }
    }

    #[test]
    fn identical_seeds_reproduce_bitwise() {
        let cfg = SubsetSimConfig::new(300, 0.1, 0.9).unwrap();
        let q = |x: &[f64]| Ok(x[0].abs().max(x[1].abs()));
        let a = subset_simulation(q, &unit_box(2), &cfg, 9).unwrap();
        let b = subset_simulation(q, &unit_box(2), &cfg, 9).unwrap();
        assert_eq!(a.p_hat.to_bits(), b.p_hat.to_bits());
        assert_eq!(a.thresholds, b.thresholds);
        assert_eq!(a.failure_samples, b.failure_samples);
        assert_eq!(a.q_evals, b.q_evals);
        let c = subset_simulation(q, &unit_box(2), &cfg, 10).unwrap();
        assert_ne!(a.p_hat.to_bits(), c.p_hat.to_bits());
    }

    #[test]
    fn level_cap_is_respected() {
        let cfg = SubsetSimConfig {
            n_s: 200,
            p: 0.1,
            eps_r: 1.0 - 1e-6,
            width_frac: 0.25,
            max_levels: 1,
        }
        .validated()
        .unwrap();
        let r = subset_simulation(|x: &[f64]| Ok(x[0]), &unit_box(2), &cfg, 5).unwrap();
        assert!(r.capped);
        assert_eq!(r.levels, 1);
    }

    #[test]
    fn chain_contract_requires_a_failing_seed() {
        let domain = unit_box(2);
        let mut rng = crate::seed::rng_from(7, "chain");
        let err = mma_chain(
            |x: &[f64]| Ok(x[0]),
            &[0.0, 0.0],
            5,
            0.9,
            &domain,
            0.25,
            &mut rng,
        );
        assert!(err.is_err());
        let states = mma_chain(
            |x: &[f64]| Ok(x[0]),
            &[0.95, 0.0],
            200,
            0.9,
            &domain,
            0.25,
            &mut rng,
        )
        .unwrap();
        assert_eq!(states.len(), 200);
        assert!(states.iter().all(|s| s[0] > 0.9 && domain.contains(s)));
    }

    #[test]
    fn non_finite_performance_is_reported() {
        let cfg = SubsetSimConfig::new(100, 0.1, 0.5).unwrap();
        let r = subset_simulation(|_x| Ok(f64::NAN), &unit_box(2), &cfg, 6);
        assert!(matches!(r, Err(Error::Numerical(_))));
    }

    #[test]
    fn mc_baseline_matches_halfspace() {
        let (p_hat, fails) =
            mc_failure_probability(|x: &[f64]| Ok(x[0]), &unit_box(2), 2000, 0.0, 11).unwrap();
        assert!((p_hat - 0.5).abs() < 0.05, "p_hat = {p_hat}");
        assert!(fails.iter().all(|x| x[0] > 0.0));
        assert!(mc_failure_probability(|x: &[f64]| Ok(x[0]), &unit_box(2), 0, 0.0, 1).is_err());
    }
}
