use super::ParamStore;
use crate::error::{Error, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Adam with decoupled weight decay.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub weight_decay: f64,
}

impl Adam {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        Adam { lr, weight_decay }
    }

    /// Applies one update to every parameter and zeroes the gradients.
    ///
    /// All gradients are checked before any value moves, so a failed step
    /// leaves the store untouched.
    pub fn step(&self, store: &mut ParamStore) -> Result<()> {
        for p in store.iter_mut() {
            if !p.grad.is_finite() {
                return Err(Error::NonFiniteGradient {
                    name: p.name.clone(),
                });
            }
        }
        for p in store.iter_mut() {
            p.step_count += 1;
            let t = p.step_count as i32;
            let bias1 = 1.0 - ADAM_BETA1.powi(t);
            let bias2 = 1.0 - ADAM_BETA2.powi(t);
            let decay = self.lr * self.weight_decay;
            let value = p.value.data_mut();
            let (m, v) = (p.adam_m.data_mut(), p.adam_v.data_mut());
            for (i, g) in p.grad.data_mut().iter_mut().enumerate() {
                value[i] -= decay * value[i];
                m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * *g;
                v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * *g * *g;
                let m_hat = m[i] / bias1;
                let v_hat = v[i] / bias2;
                value[i] -= self.lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
                *g = 0.0;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn scalar_store(w: f64) -> (ParamStore, crate::tensor::ParamId) {
        let mut s = ParamStore::new();
        let id = s.register("w", Tensor::scalar(w)).unwrap();
        (s, id)
    }

    #[test]
    fn zero_gradient_without_decay_is_identity() {
        let (mut s, id) = scalar_store(0.7);
        Adam::new(0.1, 0.0).step(&mut s).unwrap();
        assert_eq!(s.value(id).item(), 0.7);
    }

    #[test]
    fn one_step_descends_on_square() {
        let (mut s, id) = scalar_store(1.0);
        s.get_mut(id).grad = Tensor::scalar(2.0); // d/dw w^2 at 1
        Adam::new(0.1, 0.0).step(&mut s).unwrap();
        assert!(s.value(id).item() < 1.0);
        assert_eq!(s.get(id).grad.item(), 0.0);
    }

    #[test]
    fn converges_on_shifted_square() {
        // scalar recursion on f(w) = (w - 3)^2
        let (mut s, id) = scalar_store(0.0);
        let adam = Adam::new(0.1, 0.0);
        for _ in 0..200 {
            let w = s.value(id).item();
            s.get_mut(id).grad = Tensor::scalar(2.0 * (w - 3.0));
            adam.step(&mut s).unwrap();
        }
        assert!((s.value(id).item() - 3.0).abs() < 0.05);
    }

    #[test]
    fn non_finite_gradient_names_parameter() {
        let (mut s, id) = scalar_store(1.0);
        s.get_mut(id).grad = Tensor::scalar(f64::NAN);
        match Adam::new(0.1, 0.0).step(&mut s) {
            Err(Error::NonFiniteGradient { name }) => assert_eq!(name, "w"),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(s.value(id).item(), 1.0);
    }

    #[test]
    fn decoupled_decay_shrinks_before_delta() {
        let (mut s, id) = scalar_store(2.0);
        Adam::new(0.1, 0.5).step(&mut s).unwrap();
        // zero grad: Adam delta is 0, only decay applies
        assert!((s.value(id).item() - (2.0 - 0.1 * 0.5 * 2.0)).abs() < 1e-15);
    }
}
