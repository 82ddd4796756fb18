//! Pointwise failure indicators built on the PDE residual.
//!
//! A point "fails" when its indicator exceeds the residual tolerance. The
//! residual is normalized by an estimate of its domain norm at the first
//! resampling decision, so the tolerance is scale-free across problems. The
//! gradient variant differentiates the normalized residual with central
//! differences; the step falls back to a one-sided difference at domain
//! edges so the residual is never evaluated outside the box.

use rand::Rng;

use crate::autodiff::Network;
use crate::problems::{DomainBox, Operator};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerformanceKind {
    /// |r(x)| / norm
    Residual,
    /// Euclidean norm of d(r/norm)/dx, by finite differences.
    ResidualGradient,
}

impl std::str::FromStr for PerformanceKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "residual" => Ok(PerformanceKind::Residual),
            "residual_gradient" => Ok(PerformanceKind::ResidualGradient),
            other => Err(Error::Config(format!(
                "unknown performance kind {other:?}; expected residual or residual_gradient"
            ))),
        }
    }
}

/// Relative step for the gradient variant, as a fraction of each
/// coordinate's domain width.
const GRAD_FD_STEP_FRAC: f64 = 1e-4;

/// A performance function bound to one network state.
pub struct PerformanceFn<'a> {
    net: &'a Network,
    op: &'a Operator,
    domain: &'a DomainBox,
    kind: PerformanceKind,
    norm: f64,
}

impl<'a> PerformanceFn<'a> {
    /// Unnormalized indicator (norm 1); used before the first norm estimate.
    pub fn new(
        net: &'a Network,
        op: &'a Operator,
        domain: &'a DomainBox,
        kind: PerformanceKind,
    ) -> Self {
        PerformanceFn {
            net,
            op,
            domain,
            kind,
            norm: 1.0,
        }
    }

    pub fn with_norm(
        net: &'a Network,
        op: &'a Operator,
        domain: &'a DomainBox,
        kind: PerformanceKind,
        norm: f64,
    ) -> Result<Self> {
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::Config(format!(
                "residual norm must be finite and positive, got {norm}"
            )));
        }
        Ok(PerformanceFn {
            net,
            op,
            domain,
            kind,
            norm,
        })
    }

    fn residual(&self, x: &[f64]) -> Result<f64> {
        Ok(self.op.residual(x, &self.net.evaluate(x)?))
    }

    /// The indicator value at one point.
    pub fn q(&self, x: &[f64]) -> Result<f64> {
        match self.kind {
            PerformanceKind::Residual => Ok(self.residual(x)?.abs() / self.norm),
            PerformanceKind::ResidualGradient => {
                let d = self.domain.dim();
                let mut sq = 0.0;
                for i in 0..d {
                    let h = GRAD_FD_STEP_FRAC * self.domain.width(i);
                    let (lo, hi) = (self.domain.lower()[i], self.domain.upper()[i]);
                    let mut xp = x.to_vec();
                    let mut xm = x.to_vec();
                    let deriv = if x[i] + h > hi {
                        xm[i] -= h;
                        (self.residual(x)? - self.residual(&xm)?) / h
                    } else if x[i] - h < lo {
                        xp[i] += h;
                        (self.residual(&xp)? - self.residual(x)?) / h
                    } else {
                        xp[i] += h;
                        xm[i] -= h;
                        (self.residual(&xp)? - self.residual(&xm)?) / (2.0 * h)
                    };
                    sq += deriv * deriv;
                }
                Ok(sq.sqrt() / self.norm)
            }
        }
    }
}

/// Monte Carlo estimate of the residual norm over the domain.
#[derive(Debug, Clone, Copy)]
pub struct NormEstimate {
    pub value: f64,
    /// True when the raw estimate was zero and the value fell back to 1.
    pub degenerate: bool,
}

/// `sqrt(volume * mean r^2)` over `n_samples` uniform points. A zero
/// estimate (identically zero residual) falls back to 1 so downstream
/// normalization stays well defined; the flag reports that case.
pub fn estimate_norm<R: Rng>(
    net: &Network,
    op: &Operator,
    domain: &DomainBox,
    n_samples: usize,
    rng: &mut R,
) -> Result<NormEstimate> {
    if n_samples == 0 {
        return Err(Error::Config("norm estimate needs at least one sample".into()));
    }
    let mut mean_sq = 0.0;
    for _ in 0..n_samples {
        let x = domain.sample(rng);
        let r = op.residual(&x, &net.evaluate(&x)?);
        if !r.is_finite() {
            return Err(Error::Numerical(format!(
                "residual is not finite at {x:?} during norm estimation"
            )));
        }
        mean_sq += r * r;
    }
    mean_sq /= n_samples as f64;
    let value = (domain.volume() * mean_sq).sqrt();
    if value == 0.0 {
        Ok(NormEstimate {
            value: 1.0,
            degenerate: true,
        })
    } else {
        Ok(NormEstimate {
            value,
            degenerate: false,
        })
    }
}
