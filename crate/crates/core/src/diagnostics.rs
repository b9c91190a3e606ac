//! Finite-difference verification of every differentiable component.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::model::{Generator, ModelConfig, Slade, Updater};
use crate::stream::TemporalEdge;
use crate::tensor::gradcheck::{check_params_against, param_gradient};
use crate::tensor::{Adam, Graph, Shape, Tensor, Var};
use crate::train::{batch_objective, train_batch, LossWeights, TrainConfig, TrainState};

/// Tolerance on the max relative error of a passing component.
pub const TOLERANCE: f64 = 1e-4;

/// Deliberate gradient corruption, used to confirm the harness can fail.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fault {
    /// Negates every analytic gradient before comparison.
    SignFlip,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComponentCheck {
    pub component: String,
    pub max_rel_error: f64,
    pub passed: bool,
}

fn tiny(updater: Updater, generator: Generator) -> ModelConfig {
    ModelConfig {
        memory_dim: 4,
        message_dim: 3,
        time_dim: 2,
        neighbors: 3,
        heads: 2,
        dropout: 0.0,
        updater,
        generator,
        ..ModelConfig::default()
    }
}

fn toy_edges() -> Vec<TemporalEdge> {
    vec![
        TemporalEdge::new(0, 1, 1.0),
        TemporalEdge::new(1, 2, 2.0),
        TemporalEdge::new(2, 0, 3.0),
        TemporalEdge::new(0, 1, 4.5),
        TemporalEdge::new(0, 2, 6.0),
        TemporalEdge::new(3, 0, 7.0),
    ]
}

fn check<F>(name: String, model: &Slade, fault: Option<Fault>, f: F) -> Result<ComponentCheck>
where
    F: Fn(&mut Graph<'_>) -> Result<Var>,
{
    let (_, mut analytic) = param_gradient(model.params(), &f)?;
    if fault == Some(Fault::SignFlip) {
        analytic.iter_mut().for_each(|g| *g = -*g);
    }
    let err = check_params_against(model.params(), &analytic, f)?;
    Ok(ComponentCheck {
        component: name,
        max_rel_error: err,
        passed: err < TOLERANCE,
    })
}

/// Batch objective after one warm-up batch, under the given loss weights.
fn objective_check(
    name: String,
    updater: Updater,
    generator: Generator,
    weights: LossWeights,
    seed: u64,
    fault: Option<Fault>,
) -> Result<ComponentCheck> {
    let model = Slade::new(tiny(updater, generator), seed)?;
    let cfg = TrainConfig {
        weights,
        ..TrainConfig::default()
    };
    let edges = toy_edges();
    let mut state = TrainState::new(&model, seed);
    let mut warm = model.clone();
    train_batch(&mut warm, &mut state, &edges[..3], &cfg, &Adam::new(0.0, 0.0))?;
    let (memory, registry) = (state.memory.clone(), state.registry.clone());
    check(name, &model, fault, |g| {
        let mut mem = memory.clone();
        let mut reg = registry.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        Ok(batch_objective(&model, g, &mut mem, &mut reg, &edges[3..], &cfg, None, &mut rng)?.total)
    })
}

/// Runs every component check for `seed`.
pub fn gradcheck_suite(seed: u64, fault: Option<Fault>) -> Result<Vec<ComponentCheck>> {
    let mut out = Vec::new();
    for updater in [Updater::Gru, Updater::Mlp] {
        let model = Slade::new(tiny(updater, Generator::Sum), seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = Tensor::new(Shape::Matrix(2, 6), uniform(&mut rng, 12))?;
        let s = Tensor::new(Shape::Matrix(2, 4), uniform(&mut rng, 8))?;
        out.push(check(format!("message+{updater}"), &model, fault, |g| {
            let rv = g.constant(r.clone());
            let sv = g.constant(s.clone());
            let msg = model.message_net(g, rv)?;
            let upd = model.update(g, msg, sv)?;
            let t = g.tanh(upd);
            Ok(g.sum(t))
        })?);
    }
    let generation_only = LossWeights {
        contrast_source: 0.0,
        contrast_destination: 0.0,
        ..LossWeights::default()
    };
    let contrast_only = LossWeights {
        generation_source: 0.0,
        generation_destination: 0.0,
        ..LossWeights::default()
    };
    for generator in [Generator::Tgat, Generator::Gat, Generator::Sum] {
        out.push(objective_check(
            format!("generation-loss[{generator}]"),
            Updater::Gru,
            generator,
            generation_only,
            seed,
            fault,
        )?);
    }
    out.push(objective_check(
        "contrast-loss[gru]".into(),
        Updater::Gru,
        Generator::Tgat,
        contrast_only,
        seed,
        fault,
    )?);
    for (updater, generator) in [(Updater::Gru, Generator::Tgat), (Updater::Mlp, Generator::Tgat)] {
        out.push(objective_check(
            format!("objective[{updater}/{generator}]"),
            updater,
            generator,
            LossWeights::default(),
            seed,
            fault,
        )?);
    }
    Ok(out)
}

fn uniform(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    use rand::Rng;
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}
