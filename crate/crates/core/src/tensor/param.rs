use std::hash::{DefaultHasher, Hash, Hasher};

use rand::Rng;

use super::{Shape, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A trainable tensor with its gradient accumulator and Adam moments.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
    pub adam_m: Tensor,
    pub adam_v: Tensor,
    pub step_count: u64,
}

impl Parameter {
    pub fn new(name: impl Into<String>, value: Tensor) -> Self {
        let shape = value.shape();
        Parameter {
            name: name.into(),
            value,
            grad: Tensor::zeros(shape),
            adam_m: Tensor::zeros(shape),
            adam_v: Tensor::zeros(shape),
            step_count: 0,
        }
    }

    pub fn shape(&self) -> Shape {
        self.value.shape()
    }
}

/// Uniform initialization in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
pub fn init_uniform<R: Rng + ?Sized>(shape: Shape, fan_in: usize, rng: &mut R) -> Tensor {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    let data = (0..shape.len())
        .map(|_| rng.random_range(-bound..=bound))
        .collect();
    Tensor::new(shape, data).expect("length matches shape")
}

/// Owner of every trainable tensor. Names are unique.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Parameter>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, name: impl Into<String>, value: Tensor) -> Result<ParamId> {
        let name = name.into();
        if self.params.iter().any(|p| p.name == name) {
            return Err(Error::Config(format!("parameter `{name}` registered twice")));
        }
        self.params.push(Parameter::new(name, value));
        Ok(ParamId(self.params.len() - 1))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Parameter)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter> {
        self.params.iter_mut()
    }

    pub fn add_grads(&mut self, grads: &[(ParamId, Tensor)]) {
        for (id, g) in grads {
            self.get_mut(*id).grad.add_assign(g);
        }
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.data_mut().iter_mut().for_each(|g| *g = 0.0);
        }
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Hash over names, shapes and the exact bit patterns of all values.
    pub fn checksum(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for p in &self.params {
            p.name.hash(&mut h);
            p.value.shape().hash(&mut h);
            for x in p.value.data() {
                x.to_bits().hash(&mut h);
            }
        }
        h.finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn init_within_fan_in_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = init_uniform(Shape::Matrix(16, 4), 16, &mut rng);
        assert!(t.data().iter().all(|x| x.abs() <= 0.25));
        let again = init_uniform(Shape::Matrix(16, 4), 16, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(t, again);
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut s = ParamStore::new();
        s.register("w", Tensor::scalar(1.0)).unwrap();
        assert!(s.register("w", Tensor::scalar(2.0)).is_err());
    }
}
