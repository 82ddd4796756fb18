//! Small sampling diagnostics.

use crate::{Error, Result};

/// Two-sided Kolmogorov-Smirnov distance between a sample and a reference
/// CDF: `sup_x |F_n(x) - F(x)|`, evaluated at the jump points.
pub fn ks_statistic<F>(samples: &[f64], cdf: F) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if samples.is_empty() {
        return Err(Error::Contract("KS statistic needs samples".into()));
    }
    let mut xs = samples.to_vec();
    xs.sort_unstable_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::Contract(format!("CDF({x}) = {f} outside [0, 1]")));
        }
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        d = d.max((f - lo).abs()).max((hi - f).abs());
    }
    Ok(d)
}

/// CDF of the uniform distribution on `[lo, hi]`.
pub fn uniform_cdf(lo: f64, hi: f64) -> impl Fn(f64) -> f64 {
    move |x| ((x - lo) / (hi - lo)).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn tiny_case_matches_hand_computation() {
        // against U[0,1]: max deviation is |1/3 - 0.1| = 7/30 at x = 0.1
        let d = ks_statistic(&[0.5, 0.1, 0.9], uniform_cdf(0.0, 1.0)).unwrap();
        assert!((d - 7.0 / 30.0).abs() < 1e-12, "d = {d}");
    }

    #[test]
    fn uniform_samples_score_low_and_shifted_samples_high() {
        let mut rng = crate::seed::rng_from(17, "ks");
        let xs: Vec<f64> = (0..4000).map(|_| rng.random_range(0.0..1.0)).collect();
        let d = ks_statistic(&xs, uniform_cdf(0.0, 1.0)).unwrap();
        // 1% critical value is 1.628 / sqrt(n) ~ 0.0257
        assert!(d < 0.0257, "d = {d}");
        let shifted: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let d2 = ks_statistic(&shifted, uniform_cdf(0.0, 1.0)).unwrap();
        assert!(d2 > 0.1, "d2 = {d2}");
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        assert!(ks_statistic(&[], uniform_cdf(0.0, 1.0)).is_err());
        assert!(ks_statistic(&[0.5], |_| 2.0).is_err());
    }
}
