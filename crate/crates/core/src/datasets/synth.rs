//! Community-structured synthetic communication streams.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{Error, Result};
use crate::stream::{EdgeStream, TemporalEdge};

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub n_nodes: usize,
    pub n_edges: usize,
    pub n_communities: usize,
    /// Probability that a receiver is drawn from the sender's community.
    pub intra_prob: f64,
    /// Mean of the exponential inter-event gap, in seconds.
    pub mean_gap: f64,
    /// Share of nodes that stop interacting partway through the stream.
    /// Retired nodes give the hijack injector its candidate pool.
    pub retire_fraction: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_nodes: 200,
            n_edges: 100_000,
            n_communities: 8,
            intra_prob: 0.9,
            mean_gap: 200.0,
            retire_fraction: 0.1,
            seed: 0,
        }
    }
}

/// Retirement happens at a uniform point in this share of the timeline.
const RETIRE_WINDOW: (f64, f64) = (0.3, 0.85);

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_nodes < 2 || self.n_edges == 0 || self.n_communities == 0 {
            return Err(Error::Config(
                "synthetic stream needs at least 2 nodes, 1 edge and 1 community".into(),
            ));
        }
        if self.n_communities > self.n_nodes {
            return Err(Error::Config("more communities than nodes".into()));
        }
        if !(0.0..=1.0).contains(&self.intra_prob) || !(0.0..1.0).contains(&self.retire_fraction) {
            return Err(Error::Config("intra_prob must be in [0,1] and retire_fraction in [0,1)".into()));
        }
        if !(self.mean_gap > 0.0 && self.mean_gap.is_finite()) {
            return Err(Error::Config("mean_gap must be positive".into()));
        }
        Ok(())
    }

    /// Community of node `v`: round-robin so every community is populated.
    pub fn community(&self, v: usize) -> usize {
        v % self.n_communities
    }
}

/// Generates a stream with the remaining settings at their defaults.
pub fn generate_normal_stream(n_nodes: usize, n_edges: usize, n_communities: usize, seed: u64) -> Result<EdgeStream> {
    generate(&SynthConfig {
        n_nodes,
        n_edges,
        n_communities,
        seed,
        ..SynthConfig::default()
    })
}

pub fn generate(cfg: &SynthConfig) -> Result<EdgeStream> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let gap = Exp::new(1.0 / cfg.mean_gap).map_err(|e| Error::Config(e.to_string()))?;

    // retire_at[v] is the edge index after which v stops appearing
    let mut retire_at = vec![usize::MAX; cfg.n_nodes];
    let n_retire = ((cfg.n_nodes as f64) * cfg.retire_fraction).floor() as usize;
    // keep at least two nodes in every community active
    let retirable: Vec<usize> = (0..cfg.n_nodes).filter(|&v| v >= 2 * cfg.n_communities).collect();
    for v in retirable.choose_multiple(&mut rng, n_retire.min(retirable.len())) {
        let frac = rng.random_range(RETIRE_WINDOW.0..RETIRE_WINDOW.1);
        retire_at[*v] = (frac * cfg.n_edges as f64) as usize;
    }

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); cfg.n_communities];
    for v in 0..cfg.n_nodes {
        members[cfg.community(v)].push(v);
    }
    let mut active: Vec<usize> = (0..cfg.n_nodes).collect();
    let mut retire_order: Vec<(usize, usize)> = retire_at
        .iter()
        .enumerate()
        .filter(|(_, &at)| at != usize::MAX)
        .map(|(v, &at)| (at, v))
        .collect();
    retire_order.sort_unstable();
    let mut next_retire = 0;

    let mut t = 0.0;
    let mut edges = Vec::with_capacity(cfg.n_edges);
    for i in 0..cfg.n_edges {
        while next_retire < retire_order.len() && retire_order[next_retire].0 <= i {
            let v = retire_order[next_retire].1;
            active.retain(|&u| u != v);
            members[cfg.community(v)].retain(|&u| u != v);
            next_retire += 1;
        }
        t += gap.sample(&mut rng);
        let src = *active.choose(&mut rng).expect("active set is never empty");
        let own = &members[cfg.community(src)];
        let pool = if rng.random_bool(cfg.intra_prob) && own.len() >= 2 {
            own
        } else {
            &active
        };
        let dst = loop {
            let d = *pool.choose(&mut rng).expect("pool holds at least two nodes");
            if d != src {
                break d;
            }
        };
        edges.push(TemporalEdge::new(src, dst, t).labeled(false));
    }
    Ok(EdgeStream::new(edges, cfg.n_nodes))
}
