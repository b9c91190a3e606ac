//! Burst-style anomaly injection into the tail of a clean stream.

use std::fmt;
use std::str::FromStr;

use rand::seq::{index, IndexedRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::score::TypeTag;
use crate::stream::{EdgeStream, NodeId, TemporalEdge};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InjectionMode {
    /// Reuse identities that were active earlier and went quiet.
    Hijack,
    /// Mint identities that never appeared before.
    New,
}

impl fmt::Display for InjectionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InjectionMode::Hijack => "hijack",
            InjectionMode::New => "new",
        })
    }
}

impl FromStr for InjectionMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hijack" => Ok(InjectionMode::Hijack),
            "new" => Ok(InjectionMode::New),
            _ => Err(Error::Config(format!("unknown injection mode '{s}' (hijack|new)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InjectionConfig {
    pub mode: InjectionMode,
    pub n_anomalous_nodes: usize,
    pub burst_destinations: usize,
    pub jitter_seconds: f64,
    pub target_ratio: f64,
    pub eval_region_fraction: f64,
    pub seed: u64,
}

impl InjectionConfig {
    pub fn new(mode: InjectionMode, seed: u64) -> Self {
        InjectionConfig {
            mode,
            n_anomalous_nodes: 10,
            burst_destinations: 10,
            jitter_seconds: 300.0,
            target_ratio: 0.01,
            eval_region_fraction: 0.10,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_anomalous_nodes == 0 || self.burst_destinations == 0 {
            return Err(Error::Config("anomalous node and burst counts must be positive".into()));
        }
        if !(self.jitter_seconds >= 0.0 && self.jitter_seconds.is_finite()) {
            return Err(Error::Config("jitter_seconds must be finite and non-negative".into()));
        }
        for (name, v) in [("target_ratio", self.target_ratio), ("eval_region_fraction", self.eval_region_fraction)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0,1), got {v}")));
            }
        }
        Ok(())
    }
}

/// Result of an injection: the merged stream and one tag per edge.
#[derive(Clone, Debug, PartialEq)]
pub struct Injected {
    pub stream: EdgeStream,
    pub tags: Vec<TypeTag>,
    pub anomalous_nodes: Vec<NodeId>,
    pub injected_edges: usize,
}

/// Interactions per anomalous node tagged with the mode's early type.
pub const EARLY_INTERACTIONS: usize = 20;

pub fn inject_anomalies(stream: &EdgeStream, cfg: &InjectionConfig) -> Result<Injected> {
    cfg.validate()?;
    stream.validate()?;
    let n = stream.len();
    let start = ((n as f64) * (1.0 - cfg.eval_region_fraction)).floor() as usize;
    if start == 0 || start >= n {
        return Err(Error::Injection(format!("evaluation region is empty or covers the whole {n}-edge stream")));
    }
    let (before, region) = stream.edges.split_at(start);
    let (t_lo, t_hi) = (region[0].timestamp, region[region.len() - 1].timestamp);

    let mut seen_before = vec![false; stream.node_count];
    let mut seen_region = vec![false; stream.node_count];
    for e in before {
        seen_before[e.source] = true;
        seen_before[e.destination] = true;
    }
    for e in region {
        seen_region[e.source] = true;
        seen_region[e.destination] = true;
    }
    let quiet = |v: NodeId| seen_before[v] && !seen_region[v];
    let hijackable: Vec<NodeId> = (0..stream.node_count).filter(|&v| quiet(v)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (anomalous, node_count) = match cfg.mode {
        InjectionMode::Hijack => {
            if hijackable.len() < cfg.n_anomalous_nodes {
                return Err(Error::Injection(format!(
                    "need {} hijack candidates but only {} nodes are quiet in the evaluation region",
                    cfg.n_anomalous_nodes,
                    hijackable.len()
                )));
            }
            let picked = index::sample(&mut rng, hijackable.len(), cfg.n_anomalous_nodes)
                .into_iter()
                .map(|i| hijackable[i])
                .collect::<Vec<_>>();
            (picked, stream.node_count)
        }
        InjectionMode::New => {
            let fresh: Vec<NodeId> = (stream.node_count..stream.node_count + cfg.n_anomalous_nodes).collect();
            (fresh, stream.node_count + cfg.n_anomalous_nodes)
        }
    };

    // every node outside the quiet pool that occurs at all is active in the region
    let destinations: Vec<NodeId> = (0..stream.node_count).filter(|&v| seen_region[v]).collect();
    if destinations.len() < cfg.burst_destinations {
        return Err(Error::Injection(format!(
            "need {} distinct burst destinations but only {} normal nodes are available",
            cfg.burst_destinations,
            destinations.len()
        )));
    }

    let target = ((n as f64) * cfg.target_ratio).ceil() as usize;
    let mut injected: Vec<TemporalEdge> = Vec::with_capacity(target);
    while injected.len() < target {
        let t = if t_hi > t_lo { rng.random_range(t_lo..=t_hi) } else { t_lo };
        let src = *anomalous.choose(&mut rng).expect("at least one anomalous node");
        let take = cfg.burst_destinations.min(target - injected.len());
        for i in index::sample(&mut rng, destinations.len(), cfg.burst_destinations).into_iter().take(take) {
            let jitter = if cfg.jitter_seconds > 0.0 {
                rng.random_range(-cfg.jitter_seconds..=cfg.jitter_seconds)
            } else {
                0.0
            };
            let at = (t + jitter).clamp(t_lo, t_hi);
            injected.push(TemporalEdge::new(src, destinations[i], at).labeled(true));
        }
    }

    let injected_edges = injected.len();
    let mut merged: Vec<TemporalEdge> = stream
        .edges
        .iter()
        .map(|e| TemporalEdge {
            source_label: Some(false),
            ..*e
        })
        .collect();
    merged.extend(injected);
    // stable: on equal times normal edges stay ahead of injected ones
    merged.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));

    let early = match cfg.mode {
        InjectionMode::Hijack => TypeTag::T1,
        InjectionMode::New => TypeTag::T2,
    };
    let mut counts = vec![0usize; node_count];
    let tags = merged
        .iter()
        .map(|e| {
            if e.source_label != Some(true) {
                return TypeTag::Normal;
            }
            counts[e.source] += 1;
            if counts[e.source] <= EARLY_INTERACTIONS {
                early
            } else {
                TypeTag::T3
            }
        })
        .collect();

    log::info!(
        "injected {injected_edges} edges from {} {} nodes into {n} normal edges",
        anomalous.len(),
        cfg.mode
    );
    Ok(Injected {
        stream: EdgeStream::new(merged, node_count),
        tags,
        anomalous_nodes: anomalous,
        injected_edges,
    })
}
