//! Adam optimizer with bias correction.

use crate::tensor::{ParamId, ParamSet};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// First/second moment per parameter, lazily sized.
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: Vec::new(),
            v: Vec::new(),
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// Apply one update. `grads` carries `(parameter, gradient)` pairs;
    /// parameters not listed keep their value and moments.
    pub fn step(&mut self, params: &mut ParamSet, grads: &[(ParamId, Vec<f64>)]) -> Result<()> {
        if self.m.len() < params.len() {
            self.m.resize(params.len(), Vec::new());
            self.v.resize(params.len(), Vec::new());
        }
        self.t += 1;
        let correction1 = 1.0 - self.beta1.powi(self.t as i32);
        let correction2 = 1.0 - self.beta2.powi(self.t as i32);
        for (id, grad) in grads {
            if grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteGradient(params.name(*id).to_string()));
            }
            let idx = id.index();
            let value = params.value_mut(*id);
            let m = &mut self.m[idx];
            let v = &mut self.v[idx];
            if m.is_empty() {
                m.resize(value.len(), 0.0);
                v.resize(value.len(), 0.0);
            }
            for ((p, g), (m, v)) in value
                .data_mut()
                .iter_mut()
                .zip(grad)
                .zip(m.iter_mut().zip(v.iter_mut()))
            {
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                let m_hat = *m / correction1;
                let v_hat = *v / correction2;
                *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::NdArray;

    fn setup(values: Vec<f64>) -> (ParamSet, ParamId) {
        let mut params = ParamSet::new();
        let id = params.add("p", NdArray::from_vec(values));
        (params, id)
    }

    #[test]
    fn first_step_moves_by_about_lr() {
        let (mut params, id) = setup(vec![1.0, -2.0, 0.5]);
        let mut adam = Adam::new(1e-4);
        adam.step(&mut params, &[(id, vec![1.0, 1.0, 1.0])]).unwrap();
        for (before, after) in [1.0, -2.0, 0.5].iter().zip(params.value(id).data()) {
            let delta = before - after;
            assert!((delta - 1e-4).abs() < 1e-11, "delta {delta}");
        }
    }

    #[test]
    fn zero_gradient_keeps_parameters_and_increments_t() {
        let (mut params, id) = setup(vec![3.0]);
        let mut adam = Adam::new(1e-2);
        adam.step(&mut params, &[(id, vec![0.0])]).unwrap();
        assert_eq!(params.value(id).data(), &[3.0]);
        assert_eq!(adam.step_count(), 1);
    }

    #[test]
    fn five_steps_on_quadratic_match_hand_rolled_adam() {
        // Minimize f(p) = p^2 / 2, gradient p.
        let (mut params, id) = setup(vec![1.0]);
        let (lr, b1, b2, eps) = (0.1, 0.9, 0.999, 1e-8);
        let mut adam = Adam::new(lr);

        let (mut p_ref, mut m, mut v) = (1.0f64, 0.0f64, 0.0f64);
        for t in 1..=5u32 {
            let g = params.value(id).data()[0];
            adam.step(&mut params, &[(id, vec![g])]).unwrap();

            let g_ref = p_ref;
            m = b1 * m + (1.0 - b1) * g_ref;
            v = b2 * v + (1.0 - b2) * g_ref * g_ref;
            let m_hat = m / (1.0 - b1.powi(t as i32));
            let v_hat = v / (1.0 - b2.powi(t as i32));
            p_ref -= lr * m_hat / (v_hat.sqrt() + eps);

            let got = params.value(id).data()[0];
            assert!((got - p_ref).abs() < 1e-12, "step {t}: {got} vs {p_ref}");
        }
    }

    #[test]
    fn non_finite_gradient_names_parameter() {
        let (mut params, id) = setup(vec![1.0]);
        let mut adam = Adam::new(1e-3);
        let err = adam
            .step(&mut params, &[(id, vec![f64::NAN])])
            .unwrap_err();
        assert!(err.to_string().contains('p'), "{err}");
    }
}
