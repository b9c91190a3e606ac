//! Central finite-difference verification of tape gradients.

use super::{Graph, ParamStore, Tensor, Var};
use crate::error::{Error, Result};

pub const FD_STEP: f64 = 1e-5;
/// Magnitude below which errors are measured absolutely. Central differences
/// of an O(1) function carry roughly 1e-11 of rounding noise at `FD_STEP`, so
/// gradient entries much smaller than this floor cannot be resolved.
pub const REL_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Max relative error between `analytic` and central differences of `eval`
/// around `x0`.
pub fn compare_gradients<F>(x0: &[f64], analytic: &[f64], mut eval: F, h: f64) -> Result<f64>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if x0.len() != analytic.len() {
        return Err(Error::Check(format!(
            "{} coordinates but {} gradient entries",
            x0.len(),
            analytic.len()
        )));
    }
    let mut x = x0.to_vec();
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        x[i] = x0[i] + h;
        let plus = eval(&x)?;
        x[i] = x0[i] - h;
        let minus = eval(&x)?;
        x[i] = x0[i];
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::Check(format!("non-finite output at coordinate {i}")));
        }
        let numeric = (plus - minus) / (2.0 * h);
        worst = worst.max(relative_error(analytic[i], numeric));
    }
    Ok(worst)
}

fn scalar_output(g: &Graph<'_>, v: Var) -> Result<f64> {
    let t = g.value(v);
    if t.len() != 1 {
        return Err(Error::Check(format!("output shape {} is not scalar", t.shape())));
    }
    let y = t.data()[0];
    if !y.is_finite() {
        return Err(Error::Check("non-finite function output".into()));
    }
    Ok(y)
}

/// Checks gradients with respect to every coordinate of `inputs`.
pub fn grad_check<F>(inputs: &[Tensor], f: F) -> Result<f64>
where
    F: Fn(&mut Graph<'_>, &[Var]) -> Result<Var>,
{
    let mut g = Graph::detached();
    let vars: Vec<Var> = inputs.iter().map(|t| g.input(t.clone())).collect();
    let out = f(&mut g, &vars)?;
    scalar_output(&g, out)?;
    let grads = g.backward(out)?;
    let mut analytic = Vec::new();
    let mut x0 = Vec::new();
    for (t, &v) in inputs.iter().zip(&vars) {
        x0.extend_from_slice(t.data());
        match grads.wrt(v) {
            Some(gt) => analytic.extend_from_slice(gt.data()),
            None => analytic.extend(std::iter::repeat_n(0.0, t.len())),
        }
    }
    let eval = |x: &[f64]| {
        let mut g = Graph::detached();
        let mut offset = 0;
        let vars: Vec<Var> = inputs
            .iter()
            .map(|t| {
                let data = x[offset..offset + t.len()].to_vec();
                offset += t.len();
                g.input(Tensor::new(t.shape(), data).expect("same shape"))
            })
            .collect();
        let out = f(&mut g, &vars)?;
        scalar_output(&g, out)
    };
    compare_gradients(&x0, &analytic, eval, FD_STEP)
}

/// Tape gradient of `f` with respect to every stored parameter, flattened
/// in store order.
pub fn param_gradient<F>(store: &ParamStore, f: &F) -> Result<(f64, Vec<f64>)>
where
    F: Fn(&mut Graph<'_>) -> Result<Var>,
{
    let mut g = Graph::new(store);
    let out = f(&mut g)?;
    let y = scalar_output(&g, out)?;
    let grads = g.backward(out)?;
    let mut acc = store.clone();
    acc.zero_grad();
    grads.accumulate(&g, &mut acc);
    let flat = acc.iter().flat_map(|(_, p)| p.grad.data().to_vec()).collect();
    Ok((y, flat))
}

pub fn flatten_values(store: &ParamStore) -> Vec<f64> {
    store.iter().flat_map(|(_, p)| p.value.data().to_vec()).collect()
}

/// Writes a flat coordinate vector back into the store's values.
pub fn assign_values(store: &mut ParamStore, x: &[f64]) {
    let mut offset = 0;
    for p in store.iter_mut() {
        let n = p.value.len();
        p.value.data_mut().copy_from_slice(&x[offset..offset + n]);
        offset += n;
    }
}

/// Checks gradients with respect to every parameter in `store`.
pub fn grad_check_params<F>(store: &ParamStore, f: F) -> Result<f64>
where
    F: Fn(&mut Graph<'_>) -> Result<Var>,
{
    let (_, analytic) = param_gradient(store, &f)?;
    check_params_against(store, &analytic, f)
}

/// Compares a supplied analytic gradient against finite differences of `f`.
pub fn check_params_against<F>(store: &ParamStore, analytic: &[f64], f: F) -> Result<f64>
where
    F: Fn(&mut Graph<'_>) -> Result<Var>,
{
    let x0 = flatten_values(store);
    let mut probe = store.clone();
    let eval = |x: &[f64]| {
        assign_values(&mut probe, x);
        let mut g = Graph::new(&probe);
        let out = f(&mut g)?;
        scalar_output(&g, out)
    };
    compare_gradients(&x0, analytic, eval, FD_STEP)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Shape;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normal(shape: Shape, rng: &mut ChaCha8Rng) -> Tensor {
        let data = (0..shape.len()).map(|_| StandardNormal.sample(rng)).collect();
        Tensor::new(shape, data).unwrap()
    }

    #[test]
    fn linear_function_is_exact() {
        let x = Tensor::vector(vec![0.3, -1.2, 2.0]);
        let err = grad_check(&[x], |g, v| {
            let s = g.scale(v[0], 3.5);
            Ok(g.sum(s))
        })
        .unwrap();
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn matmul_gradient_matches_fd() {
        let a = Tensor::matrix(1, 2, vec![1.0, 2.0]).unwrap();
        let b = Tensor::matrix(2, 1, vec![3.0, 4.0]).unwrap();
        let err = grad_check(&[a, b], |g, v| {
            let c = g.matmul(v[0], v[1])?;
            Ok(g.sum(c))
        })
        .unwrap();
        assert!(err < 1e-9);
    }

    #[test]
    fn sign_flip_is_detected() {
        let x0 = [0.5, -0.25];
        // f = x0^2 + 3 x1; correct gradient is (1.0, 3.0)
        let f = |x: &[f64]| Ok(x[0] * x[0] + 3.0 * x[1]);
        let good = compare_gradients(&x0, &[1.0, 3.0], f, FD_STEP).unwrap();
        let bad = compare_gradients(&x0, &[-1.0, -3.0], f, FD_STEP).unwrap();
        assert!(good < 1e-8);
        assert!(bad > 1.0);
    }

    #[test]
    #[cfg(not(debug_assertions))]
    fn non_finite_output_is_a_check_error() {
        let x = Tensor::vector(vec![1.0]);
        let r = grad_check(&[x], |g, v| {
            let big = g.scale(v[0], f64::INFINITY);
            Ok(g.sum(big))
        });
        assert!(matches!(r, Err(Error::Check(_))));
    }

    #[test]
    #[cfg(debug_assertions)]
    #[should_panic(expected = "non-finite value")]
    fn non_finite_value_trips_debug_assertion() {
        let x = Tensor::vector(vec![1.0]);
        let _ = grad_check(&[x], |g, v| Ok(g.scale(v[0], f64::INFINITY)));
    }

    /// Every differentiable primitive against finite differences on
    /// N(0,1) inputs, 20 seeds each.
    #[test]
    fn every_primitive_passes_on_random_inputs() {
        type Case = (&'static str, Vec<Shape>, fn(&mut Graph<'_>, &[Var]) -> Result<Var>);
        let cases: Vec<Case> = vec![
            ("matmul", vec![Shape::Matrix(3, 4), Shape::Matrix(4, 2)], |g, v| {
                let c = g.matmul(v[0], v[1])?;
                let t = g.tanh(c);
                Ok(g.sum(t))
            }),
            ("matmul_t", vec![Shape::Matrix(3, 4), Shape::Matrix(2, 4)], |g, v| {
                let c = g.matmul_t(v[0], v[1])?;
                let t = g.sigmoid(c);
                Ok(g.sum(t))
            }),
            ("transpose", vec![Shape::Matrix(2, 3), Shape::Matrix(2, 3)], |g, v| {
                let t = g.transpose(v[0]);
                let c = g.matmul(v[1], t)?;
                let s = g.tanh(c);
                Ok(g.sum(s))
            }),
            ("elementwise", vec![Shape::Vector(5), Shape::Vector(5)], |g, v| {
                let a = g.add(v[0], v[1])?;
                let m = g.mul(a, v[1])?;
                let s = g.sub(m, v[0])?;
                let t = g.tanh(s);
                let r = g.sigmoid(t);
                let k = g.scale(r, -1.7);
                Ok(g.sum(k))
            }),
            ("scalar_broadcast", vec![Shape::Vector(4), Shape::Matrix(1, 1)], |g, v| {
                let m = g.mul(v[0], v[1])?;
                let a = g.add(m, v[1])?;
                let t = g.tanh(a);
                Ok(g.sum(t))
            }),
            ("relu", vec![Shape::Vector(6)], |g, v| {
                let r = g.relu(v[0]);
                let m = g.mul(r, v[0])?;
                Ok(g.sum(m))
            }),
            ("add_row", vec![Shape::Matrix(3, 2), Shape::Vector(2)], |g, v| {
                let a = g.add_row(v[0], v[1])?;
                let t = g.tanh(a);
                Ok(g.sum(t))
            }),
            ("concat", vec![Shape::Vector(2), Shape::Vector(3)], |g, v| {
                let c = g.concat(v[0], v[1])?;
                let t = g.tanh(c);
                let m = g.mul(t, c)?;
                Ok(g.sum(m))
            }),
            ("hcat_vstack_gather", vec![Shape::Matrix(2, 2), Shape::Matrix(2, 3)], |g, v| {
                let h = g.hcat(&[v[0], v[1]])?;
                let s = g.vstack(&[h, h])?;
                let r = g.gather_rows(s, &[3, 0, 0, 2])?;
                let t = g.tanh(r);
                let m = g.mul(t, r)?;
                Ok(g.sum(m))
            }),
            ("softmax", vec![Shape::Matrix(2, 4), Shape::Matrix(2, 4)], |g, v| {
                let s = g.softmax(v[0])?;
                let m = g.mul(s, v[1])?;
                Ok(g.sum(m))
            }),
            ("log_sum_exp", vec![Shape::Matrix(3, 4)], |g, v| {
                let l = g.log_sum_exp_rows(v[0])?;
                let t = g.tanh(l);
                Ok(g.sum(t))
            }),
            ("normalize_row_dot", vec![Shape::Matrix(3, 4), Shape::Matrix(3, 4)], |g, v| {
                let a = g.normalize_rows(v[0]);
                let b = g.normalize_rows(v[1]);
                let d = g.row_dot(a, b)?;
                let t = g.scale(d, 2.0);
                let e = g.mul(t, d)?;
                Ok(g.sum(e))
            }),
            ("cosine_sim", vec![Shape::Vector(5), Shape::Vector(5)], |g, v| g.cosine_sim(v[0], v[1])),
            ("sum_rows", vec![Shape::Matrix(3, 2)], |g, v| {
                let s = g.sum_rows(v[0]);
                let t = g.tanh(s);
                Ok(g.sum(t))
            }),
        ];
        for (name, shapes, f) in cases {
            for seed in 0..20 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let inputs: Vec<Tensor> = shapes.iter().map(|&s| normal(s, &mut rng)).collect();
                let err = grad_check(&inputs, f).unwrap();
                assert!(err < 1e-4, "{name} seed {seed}: {err}");
            }
        }
    }
}
