//! Self-supervised objectives and the training loop.

use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

use rand::seq::index::sample;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::memory::MemoryStore;
use crate::model::{engine, BatchForward, GenQuery, MemoryTable, Slade};
use crate::stream::{EdgeStream, NodeId, NodeRegistry, TemporalEdge};
use crate::tensor::{cosine_sim, log_sum_exp, Adam, Graph, Shape, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub contrast_source: f64,
    pub contrast_destination: f64,
    pub generation_source: f64,
    pub generation_destination: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            contrast_source: 1.0,
            contrast_destination: 1.0,
            generation_source: 0.1,
            generation_destination: 0.1,
        }
    }
}

impl LossWeights {
    pub fn scaled(self, c: f64) -> Self {
        LossWeights {
            contrast_source: self.contrast_source * c,
            contrast_destination: self.contrast_destination * c,
            generation_source: self.generation_source * c,
            generation_destination: self.generation_destination * c,
        }
    }

    fn check(&self) -> Result<()> {
        let all = [
            self.contrast_source,
            self.contrast_destination,
            self.generation_source,
            self.generation_destination,
        ];
        if all.iter().all(|w| w.is_finite() && *w >= 0.0) {
            Ok(())
        } else {
            Err(Error::Config(format!("loss weights must be finite and nonnegative: {all:?}")))
        }
    }
}

/// Which registry nodes enter the contrastive denominators.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Negatives {
    /// Every node seen so far in the epoch.
    #[default]
    Full,
    /// A fresh uniform sample of this many registry nodes per batch.
    Sample(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub negatives: Negatives,
    pub weights: LossWeights,
    /// Drops each node's own memory from its temporal contrast denominator.
    pub exclude_self: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 100,
            lr: 3e-6,
            weight_decay: 1e-4,
            epochs: 10,
            negatives: Negatives::Full,
            weights: LossWeights::default(),
            exclude_self: false,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if !(self.lr.is_finite() && self.lr >= 0.0) || !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::Config("lr and weight_decay must be finite and nonnegative".into()));
        }
        if self.negatives == Negatives::Sample(0) {
            return Err(Error::Config("negative sample size must be at least 1".into()));
        }
        self.weights.check()
    }
}

/// `-log(exp(sim(s, s_prev)) / sum_k exp(sim(s, s_k)))` over `registry`.
pub fn temporal_contrast_loss(s: &[f64], s_prev: &[f64], registry: &[&[f64]]) -> Result<f64> {
    info_nce(s, s_prev, registry)
}

/// `-log(exp(sim(s_hat, s)) / sum_k exp(sim(s_hat, s_k)))` over `registry`.
pub fn generation_loss(s_hat: &[f64], s: &[f64], registry: &[&[f64]]) -> Result<f64> {
    info_nce(s_hat, s, registry)
}

fn info_nce(anchor: &[f64], positive: &[f64], registry: &[&[f64]]) -> Result<f64> {
    if registry.is_empty() {
        return Err(Error::Training("empty negative set".into()));
    }
    let sims = registry
        .iter()
        .map(|k| cosine_sim(anchor, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(log_sum_exp(&sims) - cosine_sim(anchor, positive)?)
}

/// Graph nodes of one batch objective.
pub struct BatchObjective {
    pub forward: BatchForward,
    pub contrast: Var,
    pub generation: Var,
    pub total: Var,
    /// Size of the denominator set.
    pub negatives: usize,
}

/// Mutable training state carried across batches.
#[derive(Clone, Debug)]
pub struct TrainState {
    pub memory: MemoryStore,
    pub registry: NodeRegistry,
    dropout_rng: ChaCha8Rng,
    negative_rng: ChaCha8Rng,
}

impl TrainState {
    pub fn new(model: &Slade, seed: u64) -> Self {
        let c = model.config();
        let mut dropout_rng = ChaCha8Rng::seed_from_u64(seed);
        dropout_rng.set_stream(1);
        let mut negative_rng = ChaCha8Rng::seed_from_u64(seed);
        negative_rng.set_stream(2);
        TrainState {
            memory: MemoryStore::new(c.memory_dim, c.raw_message_dim(), c.neighbors),
            registry: NodeRegistry::new(),
            dropout_rng,
            negative_rng,
        }
    }

    pub fn reset(&mut self) {
        self.memory.reset_all();
        self.registry.clear();
    }
}

/// Builds the weighted batch loss after the memory update.
///
/// Mutates `memory` (neighbor buffers) and `registry`; memories themselves
/// are written back only by [`train_batch`]. Dropout is active when
/// `dropout` is supplied.
#[allow(clippy::too_many_arguments)]
pub fn batch_objective(
    model: &Slade,
    g: &mut Graph<'_>,
    memory: &mut MemoryStore,
    registry: &mut NodeRegistry,
    edges: &[TemporalEdge],
    cfg: &TrainConfig,
    dropout: Option<&mut dyn RngCore>,
    negative_rng: &mut dyn RngCore,
) -> Result<BatchObjective> {
    let forward = model.forward_batch(g, memory, edges)?;
    engine::record_neighbors(memory, edges);
    for e in edges {
        registry.observe_edge(e);
    }

    let negatives: Vec<NodeId> = match cfg.negatives {
        Negatives::Full => registry.nodes().to_vec(),
        Negatives::Sample(n) if n >= registry.len() => registry.nodes().to_vec(),
        Negatives::Sample(n) => {
            let all = registry.nodes();
            sample(negative_rng, all.len(), n).into_iter().map(|i| all[i]).collect()
        }
    };
    if negatives.is_empty() {
        return Err(Error::Training("empty negative set".into()));
    }
    let mut others = negatives.clone();
    if matches!(cfg.negatives, Negatives::Sample(_)) {
        let present: HashSet<NodeId> = negatives.iter().copied().collect();
        for &n in &forward.nodes {
            for (j, _) in memory.recent_neighbors(n) {
                if !present.contains(&j) {
                    others.push(j);
                }
            }
        }
    }
    let table = MemoryTable::with_updates(g, &forward.nodes, forward.updated, memory, &others)?;
    let queries: Vec<GenQuery> = forward
        .nodes
        .iter()
        .zip(&forward.times)
        .map(|(&node, &time)| GenQuery { node, time })
        .collect();
    let generated = model.generate(g, &table, memory, &queries, dropout)?;

    let m = forward.nodes.len();
    let touched: Vec<usize> = (0..m).collect();
    let neg_rows = negatives.iter().map(|&n| table.row(n)).collect::<Result<Vec<_>>>()?;
    let unit = g.normalize_rows(table.var());
    let s = g.gather_rows(unit, &touched)?;
    let r = g.gather_rows(unit, &neg_rows)?;
    let prev = g.constant(forward.previous.clone());
    let prev = g.normalize_rows(prev);
    let s_hat = g.normalize_rows(generated.s_hat);

    let mut contrast_scores = g.matmul_t(s, r)?;
    if cfg.exclude_self {
        let mut mask = Tensor::zeros(Shape::Matrix(m, negatives.len()));
        for (i, &node) in forward.nodes.iter().enumerate() {
            if let Some(k) = negatives.iter().position(|&x| x == node) {
                mask.data_mut()[i * negatives.len() + k] = -1e30;
            }
        }
        let mask = g.constant(mask);
        contrast_scores = g.add(contrast_scores, mask)?;
    }
    let lse_c = g.log_sum_exp_rows(contrast_scores)?;
    let pos_c = g.row_dot(s, prev)?;
    let loss_c = g.sub(lse_c, pos_c)?;

    let gen_scores = g.matmul_t(s_hat, r)?;
    let lse_g = g.log_sum_exp_rows(gen_scores)?;
    let pos_g = g.row_dot(s_hat, s)?;
    let loss_g = g.sub(lse_g, pos_g)?;

    // Every occurrence of a node shares its pooled update, so the per-edge
    // sums collapse to one weighted term per touched node.
    let slot: std::collections::HashMap<NodeId, usize> =
        forward.nodes.iter().enumerate().map(|(i, &n)| (n, i)).collect();
    let mut wc = vec![0.0; m];
    let mut wg = vec![0.0; m];
    let inv = 1.0 / edges.len() as f64;
    let w = cfg.weights;
    for e in edges {
        wc[slot[&e.source]] += w.contrast_source * inv;
        wc[slot[&e.destination]] += w.contrast_destination * inv;
        wg[slot[&e.source]] += w.generation_source * inv;
        wg[slot[&e.destination]] += w.generation_destination * inv;
    }
    let wc = g.constant(Tensor::matrix(m, 1, wc)?);
    let wg = g.constant(Tensor::matrix(m, 1, wg)?);
    let weighted_c = g.mul(loss_c, wc)?;
    let weighted_g = g.mul(loss_g, wg)?;
    let contrast = g.sum(weighted_c);
    let generation = g.sum(weighted_g);
    let total = g.add(contrast, generation)?;
    Ok(BatchObjective {
        forward,
        contrast,
        generation,
        total,
        negatives: negatives.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub epoch: usize,
    pub batch: usize,
    #[serde(rename = "L_c")]
    pub contrast: f64,
    #[serde(rename = "L_g")]
    pub generation: f64,
    #[serde(rename = "L")]
    pub total: f64,
}

/// One optimisation step on `edges`; returns `(L_c, L_g, L)`.
pub fn train_batch(
    model: &mut Slade,
    state: &mut TrainState,
    edges: &[TemporalEdge],
    cfg: &TrainConfig,
    adam: &Adam,
) -> Result<(f64, f64, f64)> {
    let (grads, values, forward, losses) = {
        let mut g = Graph::new(model.params());
        let TrainState {
            memory,
            registry,
            dropout_rng,
            negative_rng,
        } = state;
        let obj = batch_objective(model, &mut g, memory, registry, edges, cfg, Some(dropout_rng as &mut dyn RngCore), negative_rng)?;
        let losses = (
            g.value(obj.contrast).item(),
            g.value(obj.generation).item(),
            g.value(obj.total).item(),
        );
        if !losses.2.is_finite() {
            return Err(Error::Training(format!("non-finite loss {}", losses.2)));
        }
        let mut grads = g.backward(obj.total)?;
        let values = g.value(obj.forward.updated).clone();
        (grads.take_param_grads(&g), values, obj.forward, losses)
    };
    engine::apply_batch(&mut state.memory, &forward, &values)?;
    model.params_mut().add_grads(&grads);
    adam.step(model.params_mut())?;
    Ok(losses)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    pub history: Vec<LossRecord>,
}

impl TrainReport {
    /// Mean total loss of each epoch.
    pub fn epoch_means(&self) -> Vec<f64> {
        let mut sums: Vec<(f64, usize)> = Vec::new();
        for r in &self.history {
            if sums.len() <= r.epoch {
                sums.resize(r.epoch + 1, (0.0, 0));
            }
            sums[r.epoch].0 += r.total;
            sums[r.epoch].1 += 1;
        }
        sums.into_iter().map(|(s, n)| if n == 0 { f64::NAN } else { s / n as f64 }).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.history {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::file(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

/// Trains `model` on `stream`, resetting memories at the start of every epoch.
pub fn train(model: &mut Slade, stream: &EdgeStream, cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    stream.validate()?;
    let adam = Adam::new(cfg.lr, cfg.weight_decay);
    let mut state = TrainState::new(model, cfg.seed);
    let mut report = TrainReport::default();
    for epoch in 0..cfg.epochs {
        state.reset();
        for batch in stream.batches(cfg.batch_size)? {
            let (contrast, generation, total) =
                train_batch(model, &mut state, batch.edges, cfg, &adam).map_err(|e| match e {
                    Error::Training(_) => Error::NonFiniteLoss {
                        epoch,
                        batch: batch.index,
                    },
                    other => other,
                })?;
            report.history.push(LossRecord {
                epoch,
                batch: batch.index,
                contrast,
                generation,
                total,
            });
        }
        if let Some(mean) = report.epoch_means().get(epoch) {
            log::info!("epoch {} mean loss {mean:.6}", epoch + 1);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Generator, ModelConfig, Updater};
    use crate::tensor::gradcheck::grad_check_params;

    const TWO_NODE: f64 = 0.313_261_687_518_222_8; // ln(1 + e^-1)

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

    #[test]
    fn scalar_loss_examples() {
        let s = [1.0, 0.0];
        let other = [0.0, 1.0];
        let l = temporal_contrast_loss(&s, &s, &[&s, &other]).unwrap();
        assert!((l - TWO_NODE).abs() < 1e-12);
        let l = temporal_contrast_loss(&s, &other, &[&s]).unwrap();
        assert!((l - 1.0).abs() < 1e-12);
        assert_eq!(generation_loss(&s, &s, &[&s]).unwrap(), 0.0);
        let l = generation_loss(&s, &s, &[&s, &other]).unwrap();
        assert!((l - TWO_NODE).abs() < 1e-12);
        let zero = [0.0, 0.0];
        let third = [1.0, 1.0];
        let l = generation_loss(&zero, &s, &[&s, &other, &third]).unwrap();
        assert!((l - 3f64.ln()).abs() < 1e-12);
        assert!(matches!(temporal_contrast_loss(&s, &s, &[]), Err(Error::Training(_))));
        // Rescaling a pure negative leaves the loss unchanged.
        let scaled = [0.0, 7.5];
        let a = temporal_contrast_loss(&s, &third, &[&s, &other]).unwrap();
        let b = temporal_contrast_loss(&s, &third, &[&s, &scaled]).unwrap();
        assert_eq!(a, b);
    }

    fn toy_stream() -> Vec<TemporalEdge> {
        vec![
            TemporalEdge::new(0, 1, 1.0),
            TemporalEdge::new(1, 2, 2.0),
            TemporalEdge::new(2, 0, 3.0),
            TemporalEdge::new(0, 1, 4.5),
            TemporalEdge::new(0, 2, 6.0),
        ]
    }

    fn objective_value(
        model: &Slade,
        memory: &MemoryStore,
        registry: &NodeRegistry,
        edges: &[TemporalEdge],
        cfg: &TrainConfig,
    ) -> (f64, f64, f64, Tensor, usize) {
        let mut g = Graph::new(model.params());
        let mut mem = memory.clone();
        let mut reg = registry.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let obj = batch_objective(model, &mut g, &mut mem, &mut reg, edges, cfg, None, &mut rng).unwrap();
        (
            g.value(obj.contrast).item(),
            g.value(obj.generation).item(),
            g.value(obj.total).item(),
            g.value(obj.forward.updated).clone(),
            obj.negatives,
        )
    }

    /// Recomputes the batch loss edge by edge with the scalar reference losses.
    #[test]
    fn batch_loss_matches_per_edge_reference() {
        for generator in [Generator::Tgat, Generator::Gat, Generator::Sum] {
            let model = Slade::new(tiny(Updater::Gru, generator), 11).unwrap();
            let cfg = TrainConfig {
                weights: LossWeights {
                    contrast_source: 1.0,
                    contrast_destination: 0.7,
                    generation_source: 0.3,
                    generation_destination: 0.2,
                },
                ..TrainConfig::default()
            };
            let edges = toy_stream();
            let mut state = TrainState::new(&model, 0);
            let mut warm = model.clone();
            let frozen = TrainConfig { lr: 0.0, weight_decay: 0.0, ..cfg.clone() };
            train_batch(&mut warm, &mut state, &edges[..2], &frozen, &Adam::new(0.0, 0.0)).unwrap();

            let batch = &edges[2..];
            let (lc, lg, lt, updated, count) = objective_value(&model, &state.memory, &state.registry, batch, &cfg);
            assert_eq!(count, 3);

            let mut mem = state.memory.clone();
            let mut g = Graph::new(model.params());
            let fwd = model.forward_batch(&mut g, &mut mem, batch).unwrap();
            engine::record_neighbors(&mut mem, batch);
            let table = MemoryTable::with_updates(&mut g, &fwd.nodes, fwd.updated, &mem, &[0, 1, 2]).unwrap();
            let q: Vec<GenQuery> = fwd.nodes.iter().zip(&fwd.times).map(|(&node, &time)| GenQuery { node, time }).collect();
            let gen = model.generate(&mut g, &table, &mem, &q, None).unwrap();
            let s_hat = g.value(gen.s_hat).clone();
            let slot = |n: NodeId| fwd.nodes.iter().position(|&x| x == n).unwrap();
            let registry: Vec<&[f64]> = (0..3).map(|n| updated.row(slot(n))).collect();
            let mut want_c = 0.0;
            let mut want_g = 0.0;
            for e in batch {
                for (node, wc, wg) in [
                    (e.source, cfg.weights.contrast_source, cfg.weights.generation_source),
                    (e.destination, cfg.weights.contrast_destination, cfg.weights.generation_destination),
                ] {
                    let i = slot(node);
                    want_c += wc * temporal_contrast_loss(updated.row(i), fwd.previous.row(i), &registry).unwrap();
                    want_g += wg * generation_loss(s_hat.row(i), updated.row(i), &registry).unwrap();
                }
            }
            let n = batch.len() as f64;
            assert!((lc - want_c / n).abs() < 1e-12, "{generator}");
            assert!((lg - want_g / n).abs() < 1e-12, "{generator}");
            assert!((lt - (lc + lg)).abs() < 1e-15);
        }
    }

    #[test]
    fn weight_linearity() {
        let model = Slade::new(tiny(Updater::Gru, Generator::Tgat), 2).unwrap();
        let edges = toy_stream();
        let memory = MemoryStore::new(4, 6, 3);
        let reg = NodeRegistry::new();
        let base = TrainConfig::default();
        let zero = TrainConfig {
            weights: base.weights.scaled(0.0),
            ..base.clone()
        };
        let double = TrainConfig {
            weights: base.weights.scaled(2.0),
            ..base.clone()
        };
        let (_, _, l0, _, _) = objective_value(&model, &memory, &reg, &edges, &zero);
        let (_, _, l1, _, _) = objective_value(&model, &memory, &reg, &edges, &base);
        let (_, _, l2, _, _) = objective_value(&model, &memory, &reg, &edges, &double);
        assert_eq!(l0, 0.0);
        assert!((l2 - 2.0 * l1).abs() < 1e-12);

        let one = &edges[..1];
        let w = LossWeights {
            contrast_source: 1.0,
            contrast_destination: 0.0,
            generation_source: 0.0,
            generation_destination: 0.0,
        };
        let (lc, _, _, _, n) = objective_value(&model, &memory, &reg, one, &TrainConfig { weights: w, ..base.clone() });
        assert_eq!(n, 2);
        assert!(lc > 0.0);
    }

    #[test]
    fn exclude_self_and_sampling() {
        let model = Slade::new(tiny(Updater::Gru, Generator::Tgat), 2).unwrap();
        let edges = toy_stream();
        let memory = MemoryStore::new(4, 6, 3);
        let reg = NodeRegistry::new();
        let full = TrainConfig::default();
        let excl = TrainConfig {
            exclude_self: true,
            ..full.clone()
        };
        let (a, ..) = objective_value(&model, &memory, &reg, &edges, &full);
        let (b, ..) = objective_value(&model, &memory, &reg, &edges, &excl);
        assert!(b < a);
        let sampled = TrainConfig {
            negatives: Negatives::Sample(2),
            ..full.clone()
        };
        let (.., n) = objective_value(&model, &memory, &reg, &edges, &sampled);
        assert_eq!(n, 2);
        let big = TrainConfig {
            negatives: Negatives::Sample(50),
            ..full
        };
        let (.., n) = objective_value(&model, &memory, &reg, &edges, &big);
        assert_eq!(n, 3);
    }

    /// Full composed objective against finite differences, all variants.
    #[test]
    fn composed_loss_gradient_check() {
        let variants = [
            (Updater::Gru, Generator::Tgat),
            (Updater::Mlp, Generator::Tgat),
            (Updater::Gru, Generator::Gat),
            (Updater::Gru, Generator::Sum),
        ];
        for (updater, generator) in variants {
            for seed in 0..20u64 {
                let model = Slade::new(tiny(updater, generator), seed).unwrap();
                let cfg = TrainConfig::default();
                let edges = toy_stream();
                let mut state = TrainState::new(&model, seed);
                let mut warm = model.clone();
                train_batch(&mut warm, &mut state, &edges[..2], &cfg, &Adam::new(0.0, 0.0)).unwrap();
                let (memory, registry) = (state.memory.clone(), state.registry.clone());
                let err = grad_check_params(model.params(), |g| {
                    let mut mem = memory.clone();
                    let mut reg = registry.clone();
                    let mut rng = ChaCha8Rng::seed_from_u64(0);
                    let obj = batch_objective(&model, g, &mut mem, &mut reg, &edges[2..], &cfg, None, &mut rng)?;
                    Ok(obj.total)
                })
                .unwrap();
                assert!(err < 1e-4, "{updater}/{generator} seed {seed}: {err}");
            }
        }
    }

    #[test]
    fn constant_batch_start_memory() {
        // A memory never read by the batch cannot influence its gradients.
        let model = Slade::new(tiny(Updater::Gru, Generator::Tgat), 5).unwrap();
        let edges = [TemporalEdge::new(0, 1, 1.0)];
        let cfg = TrainConfig::default();
        let grads = |memory: &MemoryStore| {
            let mut g = Graph::new(model.params());
            let mut mem = memory.clone();
            let mut reg = NodeRegistry::new();
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let obj = batch_objective(&model, &mut g, &mut mem, &mut reg, &edges, &cfg, None, &mut rng).unwrap();
            let mut gr = g.backward(obj.total).unwrap();
            gr.take_param_grads(&g)
        };
        let mut a = MemoryStore::new(4, 6, 3);
        a.apply_update(0, &[0.1, 0.2, -0.3, 0.4], 0.5).unwrap();
        let mut b = a.clone();
        b.apply_update(7, &[9.0, -9.0, 3.0, 1.0], 0.5).unwrap();
        assert_eq!(grads(&a), grads(&b));
    }

    fn periodic_stream(n: usize) -> EdgeStream {
        let edges = (0..n)
            .map(|i| {
                let src = i % 6;
                let dst = 6 + (i % 3);
                TemporalEdge::new(src, dst, i as f64 * 10.0)
            })
            .collect();
        EdgeStream::from_edges(edges)
    }

    #[test]
    fn training_reduces_loss_and_is_deterministic() {
        let config = ModelConfig {
            memory_dim: 16,
            message_dim: 8,
            time_dim: 8,
            neighbors: 5,
            ..ModelConfig::default()
        };
        let stream = periodic_stream(500);
        let cfg = TrainConfig {
            batch_size: 50,
            lr: 1e-3,
            seed: 3,
            ..TrainConfig::default()
        };
        let mut a = Slade::new(config.clone(), 1).unwrap();
        let ra = train(&mut a, &stream, &cfg).unwrap();
        let means = ra.epoch_means();
        assert_eq!(means.len(), 10);
        assert!(means[9] < means[0], "{means:?}");

        let mut b = Slade::new(config, 1).unwrap();
        let rb = train(&mut b, &stream, &cfg).unwrap();
        assert_eq!(ra, rb);
        assert_eq!(a.params().checksum(), b.params().checksum());

        let mut buf = Vec::new();
        ra.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("epoch,batch,L_c,L_g,L\n"));
        assert_eq!(text.lines().count(), 1 + 100);
    }

    #[test]
    fn degenerate_configs() {
        let mut m = Slade::new(tiny(Updater::Gru, Generator::Tgat), 0).unwrap();
        let before = m.params().checksum();
        let empty = EdgeStream::default();
        let r = train(&mut m, &empty, &TrainConfig { epochs: 1, ..TrainConfig::default() }).unwrap();
        assert!(r.history.is_empty());
        assert_eq!(m.params().checksum(), before);
        assert!(train(&mut m, &empty, &TrainConfig { epochs: 0, ..TrainConfig::default() }).is_err());
        assert!(train(&mut m, &empty, &TrainConfig { batch_size: 0, ..TrainConfig::default() }).is_err());
    }
}
