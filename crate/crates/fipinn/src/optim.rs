//! First-order optimizers over flat parameter vectors.
//!
//! Both optimizers mutate the parameter slice in place; the caller owns the
//! loss/gradient evaluation loop.

use crate::{Error, Result};
use std::collections::VecDeque;

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(n_params: usize, lr: f64) -> Result<Self> {
        AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self> {
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.lr)));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Config(format!("{name} must lie in [0, 1), got {b}")));
            }
        }
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(Error::Config(format!("eps must be positive, got {}", self.eps)));
        }
        Ok(self)
    }

    /// Drop the moment estimates and restart bias correction. The slow
    /// second moment misscales steps for hundreds of epochs when the
    /// objective changes out from under it.
    pub fn reset(&mut self) {
        self.m.iter_mut().for_each(|x| *x = 0.0);
        self.v.iter_mut().for_each(|x| *x = 0.0);
        self.t = 0;
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grad.len() != self.m.len() {
            return Err(Error::Contract(format!(
                "optimizer built for {} parameters, got {} params / {} grads",
                self.m.len(),
                params.len(),
                grad.len()
            )));
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numerical("non-finite gradient".into()));
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

/// Limited-memory BFGS with a fixed step length (no line search). The
/// caller supplies loss and gradient at the current parameters; curvature
/// pairs are formed against the previous call.
#[derive(Debug, Clone)]
pub struct LbfgsState {
    pub step: f64,
    pub memory: usize,
    s_list: VecDeque<Vec<f64>>,
    y_list: VecDeque<Vec<f64>>,
    rho_list: VecDeque<f64>,
    last: Option<(Vec<f64>, Vec<f64>)>, // (params, grad) at the previous call
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl LbfgsState {
    pub fn new(memory: usize, step: f64) -> Result<Self> {
        if memory == 0 {
            return Err(Error::Config("history size must be positive".into()));
        }
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::Config(format!("step length must be positive, got {step}")));
        }
        Ok(LbfgsState {
            step,
            memory,
            s_list: VecDeque::new(),
            y_list: VecDeque::new(),
            rho_list: VecDeque::new(),
            last: None,
        })
    }

    /// Drop curvature history and the cached previous point. Called when
    /// the objective changes shape under the optimizer (e.g. the
    /// collocation set was resampled), since stale pairs then describe a
    /// different function.
    pub fn clear(&mut self) {
        self.s_list.clear();
        self.y_list.clear();
        self.rho_list.clear();
        self.last = None;
    }

    /// One quasi-Newton update at the current (params, loss, grad). On a
    /// non-finite loss or gradient the parameters are restored to the last
    /// good point, the history is cleared, and an error is returned so the
    /// caller can switch strategy.
    pub fn step(&mut self, params: &mut [f64], loss: f64, grad: &[f64]) -> Result<()> {
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            if let Some((px, _)) = &self.last {
                params.copy_from_slice(px);
            }
            self.clear();
            return Err(Error::Numerical(
                "non-finite objective; parameters restored to the last good point".into(),
            ));
        }
        if let Some((px, pg)) = &self.last {
            if px.len() != params.len() {
                return Err(Error::Contract("parameter count changed between calls".into()));
            }
            let s: Vec<f64> = params.iter().zip(px).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = grad.iter().zip(pg).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            // only positive-curvature pairs keep the inverse Hessian
            // estimate positive definite
            if sy > 1e-10 {
                if self.s_list.len() == self.memory {
                    self.s_list.pop_front();
                    self.y_list.pop_front();
                    self.rho_list.pop_front();
                }
                self.s_list.push_back(s);
                self.y_list.push_back(y);
                self.rho_list.push_back(1.0 / sy);
            }
        }
        self.last = Some((params.to_vec(), grad.to_vec()));

        // two-loop recursion for d = -H * grad
        let k = self.s_list.len();
        let mut q = grad.to_vec();
        let mut alpha = vec![0.0; k];
        for i in (0..k).rev() {
            alpha[i] = self.rho_list[i] * dot(&self.s_list[i], &q);
            for (qj, yj) in q.iter_mut().zip(&self.y_list[i]) {
                *qj -= alpha[i] * yj;
            }
        }
        let gamma = if k > 0 {
            let y = &self.y_list[k - 1];
            dot(&self.s_list[k - 1], y) / dot(y, y)
        } else {
            1.0
        };
        for qj in q.iter_mut() {
            *qj *= gamma;
        }
        for i in 0..k {
            let beta = self.rho_list[i] * dot(&self.y_list[i], &q);
            for (qj, sj) in q.iter_mut().zip(&self.s_list[i]) {
                *qj += (alpha[i] - beta) * sj;
            }
        }
        for (p, d) in params.iter_mut().zip(&q) {
            *p -= self.step * d;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn adam_two_steps_match_the_recursion_by_hand() {
        // with a constant unit gradient the bias-corrected moments are both
        // exactly 1, so each step moves by lr / (1 + eps)
        let mut adam = AdamState::new(1, 0.1).unwrap();
        let mut x = vec![0.0];
        adam.step(&mut x, &[1.0]).unwrap();
        adam.step(&mut x, &[1.0]).unwrap();
        let expected = -2.0 * 0.1 / (1.0 + 1e-8);
        assert!((x[0] - expected).abs() < 1e-9, "x = {}", x[0]);
    }

    #[test]
    fn adam_minimizes_a_quadratic() {
        let mut adam = AdamState::new(2, 0.05).unwrap();
        let mut x = vec![3.0, -2.0];
        for _ in 0..2000 {
            let g: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
            adam.step(&mut x, &g).unwrap();
        }
        assert!(x.iter().all(|v| v.abs() < 1e-3), "x = {x:?}");
    }

    #[test]
    fn adam_rejects_bad_inputs() {
        assert!(AdamState::new(2, 0.0).is_err());
        let mut adam = AdamState::new(2, 0.1).unwrap();
        assert!(adam.step(&mut [0.0, 0.0], &[1.0]).is_err());
        assert!(adam.step(&mut [0.0, 0.0], &[f64::NAN, 0.0]).is_err());
    }

    fn quad(c: &[f64], x: &[f64]) -> (f64, Vec<f64>) {
        let f = x.iter().zip(c).map(|(xi, ci)| ci * xi * xi).sum();
        let g = x.iter().zip(c).map(|(xi, ci)| 2.0 * ci * xi).collect();
        (f, g)
    }

    #[test]
    fn lbfgs_solves_a_quadratic_to_high_precision() {
        let c = [0.5, 2.0, 1.0];
        let mut opt = LbfgsState::new(10, 1.0).unwrap();
        let mut x = vec![1.0, -2.0, 3.0];
        for _ in 0..80 {
            let (f, g) = quad(&c, &x);
            opt.step(&mut x, f, &g).unwrap();
        }
        let norm = dot(&x, &x).sqrt();
        assert!(norm < 1e-8, "|x| = {norm}");
    }

    #[test]
    fn lbfgs_zero_gradient_is_a_fixed_point()  {
        let mut opt = LbfgsState::new(5, 1.0).unwrap();
        let mut x = vec![1.5f64, -0.5];
        let before = x.clone();
        opt.step(&mut x, 0.0, &[0.0, 0.0]).unwrap();
        assert_eq!(x, before);
    }

    #[test]
    fn lbfgs_restores_the_last_good_point_on_nan() {
        let mut opt = LbfgsState::new(5, 1.0).unwrap();
        let mut x = vec![1.0, 1.0];
        let (f, g) = quad(&[1.0, 1.0], &x);
        // [1, 1] is the last point whose evaluation was finite; the step
        // moves away from it, and the NaN report must move back to it
        let evaluated_at = x.clone();
        opt.step(&mut x, f, &g).unwrap();
        assert_ne!(x, evaluated_at);
        let err = opt.step(&mut x, f64::NAN, &[0.0, 0.0]);
        assert!(matches!(err, Err(Error::Numerical(_))));
        assert_eq!(x, evaluated_at, "parameters restored");
        // the optimizer keeps working after the reset
        let (f, g) = quad(&[1.0, 1.0], &x);
        opt.step(&mut x, f, &g).unwrap();
    }

    #[test]
    fn flat_curvature_is_skipped_without_breaking_the_direction() {
        let mut opt = LbfgsState::new(5, 0.5).unwrap();
        let mut x = vec![2.0];
        // identical consecutive points give s = 0; the pair must be dropped
        opt.step(&mut x.clone(), 4.0, &[4.0]).unwrap();
        opt.step(&mut x, 4.0, &[4.0]).unwrap();
        assert_eq!(opt.s_list.len(), 0);
        assert!((x[0] - 0.0).abs() < 1e-12, "still took the scaled gradient step");
    }

    #[test]
    fn history_is_bounded_by_the_memory_size() {
        let mut opt = LbfgsState::new(3, 0.2).unwrap();
        let mut x = vec![1.0, -2.0];
        for _ in 0..20 {
            let (f, g) = quad(&[1.0, 3.0], &x);
            opt.step(&mut x, f, &g).unwrap();
        }
        assert!(opt.s_list.len() <= 3);
        opt.clear();
        assert_eq!(opt.s_list.len(), 0);
    }

    proptest! {
        #[test]
        fn lbfgs_reduces_tame_quadratics(
            c0 in 0.5f64..2.0, c1 in 0.5f64..2.0,
            x0 in -3.0f64..3.0, x1 in -3.0f64..3.0,
        ) {
            let c = [c0, c1];
            let mut opt = LbfgsState::new(8, 0.3).unwrap();
            let mut x = vec![x0, x1];
            let (f_start, _) = quad(&c, &x);
            for _ in 0..60 {
                let (f, g) = quad(&c, &x);
                opt.step(&mut x, f, &g).unwrap();
            }
            let (f_end, _) = quad(&c, &x);
            prop_assert!(f_end <= f_start + 1e-12);
            prop_assert!(f_end < 1e-6, "f_end = {}", f_end);
        }
    }
}
