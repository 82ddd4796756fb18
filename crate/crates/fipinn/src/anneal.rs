//! Annealed resampling schedule: how much of the collocation set is
//! replaced at a restart, when restarts fire, and how the new set is
//! assembled from kept points, failure-region samples, and fresh prior
//! draws.

use crate::problems::DomainBox;
use crate::seed::rng_from;
use crate::{Error, Point, Result};
use rand::seq::index::sample as index_sample;

/// Cosine schedule `eta = a * (1 + b * cos(pi * (t_r - t_s) / (t_max - t_s)))`.
///
/// The replaced fraction starts at `a * (1 + b)` right after a restart at
/// `t_s` and decays toward `a * (1 - b)` as training approaches `t_max`.
#[derive(Debug, Clone, Copy)]
pub struct AnnealParams {
    pub a: f64,
    pub b: f64,
}

impl Default for AnnealParams {
    fn default() -> Self {
        AnnealParams { a: 0.5, b: 1.0 }
    }
}

impl AnnealParams {
    pub fn validated(self) -> Result<Self> {
        if !(self.a.is_finite() && self.a > 0.0) {
            return Err(Error::Config(format!("amplitude a must be positive, got {}", self.a)));
        }
        if !(self.b.is_finite() && (0.0..=1.0).contains(&self.b)) {
            return Err(Error::Config(format!("modulation b must lie in [0, 1], got {}", self.b)));
        }
        if self.a * (1.0 + self.b) > 1.0 + 1e-12 {
            return Err(Error::Config(format!(
                "a * (1 + b) = {} exceeds 1; the schedule would replace more \
                 points than exist",
                self.a * (1.0 + self.b)
            )));
        }
        Ok(self)
    }

    /// Replacement proportion at epoch `t_r` for a run restarted at `t_s`
    /// with horizon `t_max`. Requires `t_s <= t_r < t_max`.
    pub fn proportion(&self, t_s: usize, t_r: usize, t_max: usize) -> Result<f64> {
        if t_r < t_s || t_r >= t_max {
            return Err(Error::Contract(format!(
                "need t_s <= t_r < t_max, got t_s = {t_s}, t_r = {t_r}, t_max = {t_max}"
            )));
        }
        let phase = (t_r - t_s) as f64 / (t_max - t_s) as f64;
        Ok(self.a * (1.0 + self.b * (std::f64::consts::PI * phase).cos()))
    }
}

/// Plateau detector on the loss history.
#[derive(Debug, Clone, Copy)]
pub struct RestartPolicy {
    /// Window length for the plateau comparison.
    pub window: usize,
    /// Required relative improvement between consecutive windows.
    pub delta: f64,
    /// Minimum epochs between restarts.
    pub min_gap: usize,
}

impl Default for RestartPolicy {
    fn default() -> Self {
        RestartPolicy {
            window: 500,
            delta: 1e-3,
            min_gap: 1000,
        }
    }
}

impl RestartPolicy {
    pub fn validated(self) -> Result<Self> {
        if self.window == 0 {
            return Err(Error::Config("plateau window must be positive".into()));
        }
        if !(self.delta.is_finite() && (0.0..1.0).contains(&self.delta)) {
            return Err(Error::Config(format!(
                "improvement threshold must lie in [0, 1), got {}",
                self.delta
            )));
        }
        if self.min_gap < 2 * self.window {
            // both comparison windows must lie after the previous restart
            return Err(Error::Config(format!(
                "min_gap ({}) must cover two windows ({})",
                self.min_gap,
                2 * self.window
            )));
        }
        Ok(self)
    }

    /// True when training has plateaued: the best loss in the last window
    /// fails to improve on the best of the preceding window by a relative
    /// `delta`, and at least `min_gap` epochs have passed since `t_s`.
    ///
    /// The loss at index `t_s` predates the recomposition done at that
    /// epoch, so the cycle is measured from `t_s + 1`; both comparison
    /// windows then lie strictly inside the current cycle and the
    /// post-restart spike cannot be mistaken for a plateau.
    pub fn should_restart(&self, losses: &[f64], t_s: usize) -> bool {
        let n = losses.len();
        let start = t_s.saturating_add(1);
        if n < start || n - start < self.min_gap.max(2 * self.window) {
            return false;
        }
        let min_of = |s: &[f64]| s.iter().copied().fold(f64::INFINITY, f64::min);
        let recent = min_of(&losses[n - self.window..]);
        let previous = min_of(&losses[n - 2 * self.window..n - self.window]);
        recent > (1.0 - self.delta) * previous
    }
}

/// A recomposed collocation set, in kept / adaptive / fresh order.
#[derive(Debug, Clone)]
pub struct Recomposition {
    pub points: Vec<Point>,
    pub n_kept: usize,
    pub n_adaptive: usize,
    pub n_fresh: usize,
}

/// Rebuild a collocation set of the same size: replace `floor(eta * n_c)`
/// points with failure-region samples, topping up from the prior when too
/// few are available. The kept points are a uniform subset of the current
/// set; all draws come from a stream derived from `seed` and `label`.
pub fn recompose(
    current: &[Point],
    failures: &[Point],
    eta: f64,
    domain: &DomainBox,
    seed: u64,
    label: &str,
) -> Result<Recomposition> {
    let n_c = current.len();
    if n_c == 0 {
        return Err(Error::Contract("cannot recompose an empty collocation set".into()));
    }
    if !(eta.is_finite() && (0.0..=1.0).contains(&eta)) {
        return Err(Error::Contract(format!(
            "replacement proportion must lie in [0, 1], got {eta}"
        )));
    }
    let n_new = (eta * n_c as f64).floor() as usize;
    let n_keep = n_c - n_new;
    let mut rng = rng_from(seed, label);

    let mut points = Vec::with_capacity(n_c);
    let mut keep_idx = index_sample(&mut rng, n_c, n_keep).into_vec();
    keep_idx.sort_unstable();
    for i in keep_idx {
        points.push(current[i].clone());
    }

    let (n_adaptive, n_fresh) = if failures.len() < n_new {
        points.extend(failures.iter().cloned());
        let fresh = n_new - failures.len();
        points.extend(domain.sample_n(fresh, &mut rng));
        (failures.len(), fresh)
    } else {
        let mut pick = index_sample(&mut rng, failures.len(), n_new).into_vec();
        pick.sort_unstable();
        for i in pick {
            points.push(failures[i].clone());
        }
        (n_new, 0)
    };
    debug_assert_eq!(points.len(), n_c);
    Ok(Recomposition {
        points,
        n_kept: n_keep,
        n_adaptive,
        n_fresh,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn schedule_hits_its_frozen_values() {
        let p = AnnealParams::default().validated().unwrap();
        // right after a restart the whole set is replaced
        assert_eq!(p.proportion(0, 0, 100).unwrap(), 1.0);
        // midpoint of the remaining horizon replaces half
        assert!((p.proportion(0, 50, 100).unwrap() - 0.5).abs() < 1e-12);
        // late epochs approach a * (1 - b) = 0
        assert!(p.proportion(0, 99, 100).unwrap() < 0.01);
        assert!(p.proportion(0, 100, 100).is_err());
        assert!(p.proportion(10, 5, 100).is_err());
    }

    #[test]
    fn schedule_parameters_are_validated() {
        assert!(AnnealParams { a: 0.5, b: 1.0 }.validated().is_ok());
        assert!(AnnealParams { a: -0.5, b: 1.0 }.validated().is_err());
        assert!(AnnealParams { a: 0.5, b: 1.5 }.validated().is_err());
        assert!(AnnealParams { a: 0.9, b: 1.0 }.validated().is_err(), "would exceed 1");
    }

    #[test]
    fn plateau_fires_and_improvement_does_not() {
        let policy = RestartPolicy::default().validated().unwrap();
        let flat = vec![1.0; 2000];
        assert!(policy.should_restart(&flat, 0));
        let improving: Vec<f64> = (0..2000).map(|k| 1.0 / (k + 1) as f64).collect();
        assert!(!policy.should_restart(&improving, 0));
        // gap since the last restart not yet reached
        assert!(!policy.should_restart(&flat, 1500));
        // not enough history for two windows
        assert!(!policy.should_restart(&vec![1.0; 900], 0));
    }

    #[test]
    fn recovery_from_a_restart_spike_is_not_a_plateau() {
        let policy = RestartPolicy::default().validated().unwrap();
        // low pre-restart loss at t_s, then a spike decaying briskly; the
        // cheap pre-restart value must not serve as the comparison floor
        let mut losses: Vec<f64> = (0..1500).map(|k| 1.0 / (k + 1) as f64).collect();
        let t_s = losses.len() - 1;
        for k in 0..1200 {
            losses.push(1000.0 * 0.99f64.powi(k));
        }
        assert!(!policy.should_restart(&losses, t_s));
        // once the recovery itself flattens, the plateau fires again
        losses.extend(std::iter::repeat(5.0).take(1100));
        assert!(policy.should_restart(&losses, t_s));
    }

    #[test]
    fn marginal_improvement_still_counts_as_a_plateau() {
        let policy = RestartPolicy::default().validated().unwrap();
        // each window improves by only 0.01%, below the 0.1% requirement
        let slow: Vec<f64> = (0..3000).map(|k| 1.0 - 1e-7 * k as f64).collect();
        assert!(policy.should_restart(&slow, 0));
    }

    #[test]
    fn policy_validation_rejects_straddling_windows() {
        assert!(RestartPolicy { window: 500, delta: 1e-3, min_gap: 999 }
            .validated()
            .is_err());
        assert!(RestartPolicy { window: 0, delta: 1e-3, min_gap: 1000 }
            .validated()
            .is_err());
        assert!(RestartPolicy { window: 500, delta: 1.0, min_gap: 1000 }
            .validated()
            .is_err());
    }

    fn grid(n: usize) -> Vec<Point> {
        (0..n).map(|k| vec![k as f64 / n as f64, 0.0]).collect()
    }

    #[test]
    fn recompose_hits_the_frozen_split() {
        let domain = DomainBox::cube(2, 0.0, 1.0).unwrap();
        let current = grid(10);
        let failures: Vec<Point> = (0..5).map(|k| vec![0.5, 0.1 * k as f64]).collect();
        // floor(0.37 * 10) = 3 replaced, 7 kept, failures are plentiful
        let r = recompose(&current, &failures, 0.37, &domain, 21, "t").unwrap();
        assert_eq!((r.n_kept, r.n_adaptive, r.n_fresh), (7, 3, 0));
        assert_eq!(r.points.len(), 10);
        // short on failures: 2 adaptive + 1 fresh
        let r = recompose(&current, &failures[..2], 0.37, &domain, 21, "t").unwrap();
        assert_eq!((r.n_kept, r.n_adaptive, r.n_fresh), (7, 2, 1));
        for p in &r.points {
            assert!(domain.contains(p));
        }
    }

    #[test]
    fn full_replacement_keeps_nothing() {
        let domain = DomainBox::cube(2, 0.0, 1.0).unwrap();
        let r = recompose(&grid(8), &[], 1.0, &domain, 3, "t").unwrap();
        assert_eq!((r.n_kept, r.n_adaptive, r.n_fresh), (0, 0, 8));
    }

    proptest! {
        #[test]
        fn proportion_stays_in_band(a in 0.05f64..0.5, b in 0.0f64..1.0,
                                    t_r in 0usize..999, t_max in 1000usize..2000) {
            let p = AnnealParams { a, b }.validated().unwrap();
            let eta = p.proportion(0, t_r, t_max).unwrap();
            prop_assert!(eta >= a * (1.0 - b) - 1e-12);
            prop_assert!(eta <= a * (1.0 + b) + 1e-12);
        }

        #[test]
        fn proportion_decays_monotonically(t1 in 0usize..500, step in 1usize..400) {
            let p = AnnealParams::default().validated().unwrap();
            let e1 = p.proportion(0, t1, 1000).unwrap();
            let e2 = p.proportion(0, t1 + step, 1000).unwrap();
            prop_assert!(e2 <= e1 + 1e-12);
        }

        #[test]
        fn recompose_counts_always_reconcile(n_c in 1usize..40, n_f in 0usize..40,
                                             eta in 0.0f64..1.0, seed in 0u64..100) {
            let domain = DomainBox::cube(2, 0.0, 1.0).unwrap();
            let current = grid(n_c);
            let failures: Vec<Point> =
                (0..n_f).map(|k| vec![0.25, k as f64 / 40.0]).collect();
            let r = recompose(&current, &failures, eta, &domain, seed, "p").unwrap();
            prop_assert_eq!(r.points.len(), n_c);
            prop_assert_eq!(r.n_kept + r.n_adaptive + r.n_fresh, n_c);
            prop_assert_eq!(r.n_adaptive + r.n_fresh, (eta * n_c as f64).floor() as usize);
            // kept points really come from the current set, adaptive from failures
            for p in &r.points[..r.n_kept] {
                prop_assert!(current.contains(p));
            }
            for p in &r.points[r.n_kept..r.n_kept + r.n_adaptive] {
                prop_assert!(failures.contains(p));
            }
        }
    }
}
