//! Memory generators: temporal attention, memory-only attention and temporal sum.

use rand::{Rng, RngCore};

use super::{Generator, GeneratorParams, HeadParams, MemoryTable, Slade};
use crate::error::Result;
use crate::memory::MemoryStore;
use crate::stream::NodeId;
use crate::tensor::{Graph, Shape, Tensor, Var};

/// A node whose memory should be generated from its neighbor buffer at `time`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GenQuery {
    pub node: NodeId,
    pub time: f64,
}

pub struct GenerationOutput {
    /// One generated memory per query, `queries x d_s`.
    pub s_hat: Var,
    /// Attention weights per query and head (empty for the sum generator
    /// and for queries without neighbors).
    pub weights: Vec<Vec<Vec<f64>>>,
}

struct Neighborhood {
    rows: Vec<usize>,
    gaps: Vec<f64>,
}

impl Slade {
    fn neighborhood(&self, table: &MemoryTable, memory: &MemoryStore, q: &GenQuery) -> Result<Neighborhood> {
        let recent = memory.recent_neighbors(q.node);
        let mut rows = Vec::with_capacity(recent.len());
        let mut gaps = Vec::with_capacity(recent.len());
        for (j, t) in recent {
            // A self-loop would let the generator copy the node's own memory.
            rows.push(if j == q.node { table.zero_row() } else { table.row(j)? });
            gaps.push(q.time - t);
        }
        Ok(Neighborhood { rows, gaps })
    }

    fn gap_encoding(&self, gaps: &[f64]) -> Result<Tensor> {
        let dt = self.config.time_dim;
        let mut data = vec![0.0; gaps.len() * dt];
        for (chunk, &gap) in data.chunks_mut(dt).zip(gaps) {
            self.time.encode_into(gap, chunk)?;
        }
        Tensor::matrix(gaps.len(), dt, data)
    }

    /// Keys and values for one neighborhood.
    fn neighbor_inputs(&self, g: &mut Graph<'_>, table: &MemoryTable, hood: &Neighborhood) -> Result<Var> {
        let mem = g.gather_rows(table.var(), &hood.rows)?;
        if self.config.generator == Generator::Gat {
            return Ok(mem);
        }
        let phi = g.constant(self.gap_encoding(&hood.gaps)?);
        g.hcat(&[mem, phi])
    }

    /// Generates memories for `queries` using the shared `table`.
    ///
    /// Dropout on attention weights is applied only when `rng` is supplied.
    pub fn generate(
        &self,
        g: &mut Graph<'_>,
        table: &MemoryTable,
        memory: &MemoryStore,
        queries: &[GenQuery],
        rng: Option<&mut dyn RngCore>,
    ) -> Result<GenerationOutput> {
        let hoods = queries
            .iter()
            .map(|q| self.neighborhood(table, memory, q))
            .collect::<Result<Vec<_>>>()?;
        match &self.generator {
            GeneratorParams::Sum { w1, w2 } => {
                let (w1, w2) = (*w1, *w2);
                let raw = self.config.raw_message_dim();
                let mut sums = Vec::with_capacity(queries.len());
                for hood in &hoods {
                    if hood.rows.is_empty() {
                        sums.push(g.constant(Tensor::zeros(Shape::Matrix(1, raw))));
                    } else {
                        let k = self.neighbor_inputs(g, table, hood)?;
                        sums.push(g.sum_rows(k));
                    }
                }
                let stacked = g.vstack(&sums)?;
                let w1 = g.param(w1);
                let pre = g.matmul(stacked, w1)?;
                let s_bar = g.relu(pre);
                let ones = g.constant(Tensor::filled(
                    Shape::Matrix(queries.len(), self.config.time_dim),
                    1.0,
                ));
                let joined = g.hcat(&[s_bar, ones])?;
                let w2 = g.param(w2);
                let s_hat = g.matmul(joined, w2)?;
                Ok(GenerationOutput {
                    s_hat,
                    weights: vec![Vec::new(); queries.len()],
                })
            }
            GeneratorParams::Attention { heads, output } => {
                self.attend(g, table, queries, &hoods, heads, output, rng)
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn attend(
        &self,
        g: &mut Graph<'_>,
        table: &MemoryTable,
        queries: &[GenQuery],
        hoods: &[Neighborhood],
        heads: &[HeadParams],
        output: &super::Affine,
        mut rng: Option<&mut dyn RngCore>,
    ) -> Result<GenerationOutput> {
        let ds = self.config.memory_dim;
        let scale = 1.0 / (self.config.head_dim() as f64).sqrt();
        let active: Vec<usize> = (0..queries.len()).filter(|&i| !hoods[i].rows.is_empty()).collect();
        let mut weights = vec![Vec::new(); queries.len()];
        if active.is_empty() {
            let s_hat = g.constant(Tensor::zeros(Shape::Matrix(queries.len(), ds)));
            return Ok(GenerationOutput { s_hat, weights });
        }

        // Scores use x W_k q = x (q W_k^T)^T, so each head projects the query
        // into input space once instead of projecting every neighbor.
        let query_input = match self.config.generator {
            Generator::Gat => {
                let rows = active
                    .iter()
                    .map(|&i| table.row(queries[i].node))
                    .collect::<Result<Vec<_>>>()?;
                g.gather_rows(table.var(), &rows)?
            }
            _ => g.constant(Tensor::filled(Shape::Matrix(1, self.config.time_dim), 1.0)),
        };
        let keys = active
            .iter()
            .map(|&i| self.neighbor_inputs(g, table, &hoods[i]))
            .collect::<Result<Vec<_>>>()?;

        let mut head_outputs = Vec::with_capacity(heads.len());
        for head in heads {
            let q = head.query.forward(g, query_input)?;
            let wk = g.param(head.key);
            let u = g.matmul_t(q, wk)?;
            let u = g.scale(u, scale);
            let mut contexts = Vec::with_capacity(active.len());
            let mut masses = Vec::with_capacity(active.len());
            for (slot, &i) in active.iter().enumerate() {
                let ui = if self.config.generator == Generator::Gat {
                    g.gather_rows(u, &[slot])?
                } else {
                    u
                };
                let scores = g.matmul_t(ui, keys[slot])?;
                let mut a = g.softmax(scores)?;
                weights[i].push(g.value(a).data().to_vec());
                if let Some(r) = rng.as_deref_mut() {
                    let p = self.config.dropout;
                    if p > 0.0 {
                        let n = g.value(a).len();
                        let mask = (0..n)
                            .map(|_| if r.random::<f64>() < p { 0.0 } else { 1.0 / (1.0 - p) })
                            .collect();
                        let mask = g.constant(Tensor::matrix(1, n, mask)?);
                        a = g.mul(a, mask)?;
                    }
                }
                contexts.push(g.matmul(a, keys[slot])?);
                masses.push(g.sum(a));
            }
            // sum_j a_j (x_j W_v + b_v) == (a X) W_v + (sum a) b_v
            let c = g.vstack(&contexts)?;
            let mass = g.vstack(&masses)?;
            let wv = g.param(head.value.weight);
            let proj = g.matmul(c, wv)?;
            let bias = g.param(head.value.bias.expect("value projection has a bias"));
            let shift = g.matmul(mass, bias)?;
            head_outputs.push(g.add(proj, shift)?);
        }
        let joined = g.hcat(&head_outputs)?;
        let out = output.forward(g, joined)?;
        if active.len() == queries.len() {
            return Ok(GenerationOutput { s_hat: out, weights });
        }
        let zero = g.constant(Tensor::zeros(Shape::Matrix(1, ds)));
        let padded = g.vstack(&[out, zero])?;
        let mut order = vec![active.len(); queries.len()];
        for (slot, &i) in active.iter().enumerate() {
            order[i] = slot;
        }
        let s_hat = g.gather_rows(padded, &order)?;
        Ok(GenerationOutput { s_hat, weights })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::small_config;
    use crate::model::Updater;
    use crate::tensor::gradcheck::grad_check_params;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn store_with(neighbors: &[(NodeId, f64, [f64; 4])]) -> MemoryStore {
        let mut m = MemoryStore::new(4, 6, 8);
        for &(j, t, s) in neighbors {
            m.apply_update(j, &s, t).unwrap();
            m.record_neighbor(0, j, t);
        }
        m.apply_update(0, &[0.3, -0.2, 0.5, 0.1], 1.0).unwrap();
        m
    }

    fn run(model: &Slade, memory: &MemoryStore, time: f64) -> (Vec<f64>, Vec<Vec<Vec<f64>>>) {
        let mut g = Graph::new(model.params());
        let nodes: Vec<NodeId> = (0..memory.allocated()).collect();
        let table = MemoryTable::constant(&mut g, memory, &nodes).unwrap();
        let out = model
            .generate(&mut g, &table, memory, &[GenQuery { node: 0, time }], None)
            .unwrap();
        (g.value(out.s_hat).data().to_vec(), out.weights)
    }

    #[test]
    fn empty_neighborhood_is_zero_for_attention() {
        for gen in [Generator::Tgat, Generator::Gat] {
            let m = Slade::new(small_config(Updater::Gru, gen), 0).unwrap();
            let (s, w) = run(&m, &store_with(&[]), 2.0);
            assert_eq!(s, vec![0.0; 4]);
            assert!(w[0].is_empty());
        }
    }

    #[test]
    fn empty_neighborhood_flows_through_sum() {
        let m = Slade::new(small_config(Updater::Gru, Generator::Sum), 0).unwrap();
        let (s, _) = run(&m, &store_with(&[]), 2.0);
        let w2 = m.params().value(m.params().find("sum.w2").unwrap());
        // [0 || 1 1] W2 is the sum of the last two rows.
        for (c, v) in s.iter().enumerate() {
            assert!((v - (w2.at(4, c) + w2.at(5, c))).abs() < 1e-12);
        }
    }

    #[test]
    fn singleton_and_symmetric_weights() {
        for gen in [Generator::Tgat, Generator::Gat] {
            let m = Slade::new(small_config(Updater::Gru, gen), 4).unwrap();
            let (_, w) = run(&m, &store_with(&[(1, 0.5, [1.0, 0.0, -1.0, 2.0])]), 2.0);
            assert_eq!(w[0].len(), 2);
            assert!(w[0].iter().all(|h| h == &vec![1.0]));

            let same = [0.4, 0.4, -0.3, 0.9];
            let (_, w) = run(&m, &store_with(&[(1, 0.5, same), (2, 0.5, same)]), 2.0);
            for h in &w[0] {
                assert!((h[0] - 0.5).abs() < 1e-12 && (h[1] - 0.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gat_zero_query_gives_uniform_weights() {
        let mut m = Slade::new(small_config(Updater::Gru, Generator::Gat), 5).unwrap();
        for p in m.params_mut().iter_mut() {
            if p.name.contains("query") {
                p.value.data_mut().fill(0.0);
            }
        }
        let memory = store_with(&[(1, 0.1, [1.0, 2.0, 3.0, 4.0]), (2, 0.2, [-1.0, 0.5, 0.0, 2.0]), (3, 0.3, [0.0, 0.0, 1.0, 1.0])]);
        let (_, w) = run(&m, &memory, 1.0);
        for h in &w[0] {
            for x in h {
                assert!((x - 1.0 / 3.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn weights_form_a_distribution() {
        let m = Slade::new(small_config(Updater::Gru, Generator::Tgat), 6).unwrap();
        let memory = store_with(&[(1, 0.1, [1.0, 2.0, 3.0, 4.0]), (2, 0.7, [-1.0, 0.5, 0.0, 2.0])]);
        let (_, w) = run(&m, &memory, 3.0);
        for h in &w[0] {
            assert!(h.iter().all(|&x| x >= 0.0));
            assert!((h.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn permutation_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let base: Vec<(NodeId, f64, [f64; 4])> = (1..6)
            .map(|j| {
                let s = [rng.random::<f64>() - 0.5, rng.random(), -rng.random::<f64>(), rng.random::<f64>() * 2.0];
                (j, j as f64 * 0.3, s)
            })
            .collect();
        for gen in [Generator::Tgat, Generator::Gat, Generator::Sum] {
            let m = Slade::new(small_config(Updater::Gru, gen), 7).unwrap();
            let (reference, _) = run(&m, &store_with(&base), 4.0);
            for _ in 0..10 {
                let mut shuffled = base.clone();
                shuffled.shuffle(&mut rng);
                let (got, _) = run(&m, &store_with(&shuffled), 4.0);
                for (a, b) in got.iter().zip(&reference) {
                    assert!((a - b).abs() < 1e-10, "{gen}");
                }
            }
        }
    }

    #[test]
    fn sum_single_zero_neighbor_substitution() {
        let m = Slade::new(small_config(Updater::Gru, Generator::Sum), 8).unwrap();
        let memory = store_with(&[(1, 2.0, [0.0; 4])]);
        let (got, _) = run(&m, &memory, 2.0);
        let p = m.params();
        let w1 = p.value(p.find("sum.w1").unwrap());
        let w2 = p.value(p.find("sum.w2").unwrap());
        let s_bar: Vec<f64> = (0..4).map(|c| (w1.at(4, c) + w1.at(5, c)).max(0.0)).collect();
        for (c, v) in got.iter().enumerate() {
            let want: f64 = (0..4).map(|i| s_bar[i] * w2.at(i, c)).sum::<f64>() + w2.at(4, c) + w2.at(5, c);
            assert!((v - want).abs() < 1e-12);
        }
    }

    #[test]
    fn negative_gap_is_rejected() {
        let m = Slade::new(small_config(Updater::Gru, Generator::Tgat), 0).unwrap();
        let memory = store_with(&[(1, 5.0, [1.0; 4])]);
        let mut g = Graph::new(m.params());
        let table = MemoryTable::constant(&mut g, &memory, &[0, 1]).unwrap();
        let r = m.generate(&mut g, &table, &memory, &[GenQuery { node: 0, time: 1.0 }], None);
        assert!(r.is_err());
    }

    #[test]
    fn generator_gradients_match_finite_differences() {
        for gen in [Generator::Tgat, Generator::Gat, Generator::Sum] {
            for seed in 0..20u64 {
                let m = Slade::new(small_config(Updater::Gru, gen), seed).unwrap();
                let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
                let hood: Vec<(NodeId, f64, [f64; 4])> = (1..4)
                    .map(|j| {
                        let s = [0; 4].map(|_: i32| rng.random::<f64>() * 2.0 - 1.0);
                        (j, j as f64 * 0.4, s)
                    })
                    .collect();
                let memory = store_with(&hood);
                let err = grad_check_params(m.params(), |g| {
                    let table = MemoryTable::constant(g, &memory, &[0, 1, 2, 3])?;
                    let q = [GenQuery { node: 0, time: 2.0 }, GenQuery { node: 2, time: 2.0 }];
                    let out = m.generate(g, &table, &memory, &q, None)?;
                    let t = g.tanh(out.s_hat);
                    let sq = g.mul(t, t)?;
                    Ok(g.sum(sq))
                })
                .unwrap();
                assert!(err < 1e-4, "{gen} seed {seed}: {err}");
            }
        }
    }
}
