//! Continuous-time edge streams: ordering, node registry, splits and batches.

use crate::error::{Error, Result};

pub type NodeId = usize;

/// One timestamped directed interaction.
///
/// `source_label` describes the source (actor) at this edge's time and is
/// used only for evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TemporalEdge {
    pub source: NodeId,
    pub destination: NodeId,
    pub timestamp: f64,
    pub source_label: Option<bool>,
}

impl TemporalEdge {
    pub fn new(source: NodeId, destination: NodeId, timestamp: f64) -> Self {
        TemporalEdge {
            source,
            destination,
            timestamp,
            source_label: None,
        }
    }

    pub fn labeled(mut self, abnormal: bool) -> Self {
        self.source_label = Some(abnormal);
        self
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EdgeStream {
    pub edges: Vec<TemporalEdge>,
    pub node_count: usize,
}

impl EdgeStream {
    pub fn new(edges: Vec<TemporalEdge>, node_count: usize) -> Self {
        EdgeStream { edges, node_count }
    }

    /// Builds a stream whose node count covers every referenced id.
    pub fn from_edges(edges: Vec<TemporalEdge>) -> Self {
        let node_count = edges
            .iter()
            .map(|e| e.source.max(e.destination) + 1)
            .max()
            .unwrap_or(0);
        EdgeStream { edges, node_count }
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let mut previous = f64::NEG_INFINITY;
        for (index, e) in self.edges.iter().enumerate() {
            if !e.timestamp.is_finite() || e.timestamp < 0.0 {
                return Err(Error::InvalidTimestamp {
                    index,
                    time: e.timestamp,
                });
            }
            if e.timestamp < previous {
                return Err(Error::OutOfOrder {
                    index,
                    previous,
                    time: e.timestamp,
                });
            }
            for node in [e.source, e.destination] {
                if node >= self.node_count {
                    return Err(Error::DanglingNode {
                        index,
                        node,
                        node_count: self.node_count,
                    });
                }
            }
            previous = e.timestamp;
        }
        Ok(())
    }

    /// Contiguous train/valid/test split by edge count.
    ///
    /// Boundaries are floored; the test part takes the remainder.
    pub fn chronological_split(&self, ratios: SplitRatios) -> Result<(EdgeStream, EdgeStream, EdgeStream)> {
        ratios.validate()?;
        let n = self.edges.len();
        let n_train = (n as f64 * ratios.train).floor() as usize;
        let n_valid = ((n as f64 * ratios.valid).floor() as usize).min(n - n_train);
        let part = |range: std::ops::Range<usize>| EdgeStream {
            edges: self.edges[range].to_vec(),
            node_count: self.node_count,
        };
        Ok((
            part(0..n_train),
            part(n_train..n_train + n_valid),
            part(n_train + n_valid..n),
        ))
    }

    /// Split boundaries as edge indices: `(valid_start, test_start)`.
    pub fn split_points(&self, ratios: SplitRatios) -> Result<(usize, usize)> {
        ratios.validate()?;
        let n = self.edges.len();
        let n_train = (n as f64 * ratios.train).floor() as usize;
        let n_valid = ((n as f64 * ratios.valid).floor() as usize).min(n - n_train);
        Ok((n_train, n_train + n_valid))
    }

    pub fn batches(&self, batch_size: usize) -> Result<BatchIter<'_>> {
        batch_iter(&self.edges, batch_size)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub valid: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.70,
            valid: 0.15,
            test: 0.15,
        }
    }
}

impl SplitRatios {
    pub fn new(train: f64, valid: f64, test: f64) -> Self {
        SplitRatios { train, valid, test }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.train, self.valid, self.test];
        if all.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::Config(format!("split ratios must be positive: {all:?}")));
        }
        if (all.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split ratios must sum to 1: {all:?}")));
        }
        Ok(())
    }
}

/// A contiguous slice of the stream.
#[derive(Clone, Copy, Debug)]
pub struct Batch<'a> {
    pub index: usize,
    /// Position of the first edge in the underlying slice.
    pub offset: usize,
    pub edges: &'a [TemporalEdge],
}

pub struct BatchIter<'a> {
    edges: &'a [TemporalEdge],
    size: usize,
    next: usize,
}

impl<'a> Iterator for BatchIter<'a> {
    type Item = Batch<'a>;

    fn next(&mut self) -> Option<Batch<'a>> {
        let offset = self.next * self.size;
        if offset >= self.edges.len() {
            return None;
        }
        let end = (offset + self.size).min(self.edges.len());
        let batch = Batch {
            index: self.next,
            offset,
            edges: &self.edges[offset..end],
        };
        self.next += 1;
        Some(batch)
    }
}

pub fn batch_iter(edges: &[TemporalEdge], batch_size: usize) -> Result<BatchIter<'_>> {
    if batch_size == 0 {
        return Err(Error::Config("batch size must be at least 1".into()));
    }
    Ok(BatchIter {
        edges,
        size: batch_size,
        next: 0,
    })
}

/// The set of nodes seen so far, with first-seen times.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NodeRegistry {
    first_seen: Vec<Option<f64>>,
    order: Vec<NodeId>,
}

impl NodeRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn observe(&mut self, node: NodeId, time: f64) {
        if node >= self.first_seen.len() {
            self.first_seen.resize(node + 1, None);
        }
        if self.first_seen[node].is_none() {
            self.first_seen[node] = Some(time);
            self.order.push(node);
        }
    }

    pub fn observe_edge(&mut self, e: &TemporalEdge) {
        self.observe(e.source, e.timestamp);
        self.observe(e.destination, e.timestamp);
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.first_seen.get(node).is_some_and(|t| t.is_some())
    }

    pub fn first_seen(&self, node: NodeId) -> Option<f64> {
        self.first_seen.get(node).copied().flatten()
    }

    /// Seen nodes in order of first appearance.
    pub fn nodes(&self) -> &[NodeId] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn clear(&mut self) {
        self.first_seen.clear();
        self.order.clear();
    }
}
