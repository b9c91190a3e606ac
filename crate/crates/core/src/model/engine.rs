//! Batch-level memory update shared by training and inference.

use std::collections::HashMap;

use super::Slade;
use crate::error::{Error, Result};
use crate::memory::MemoryStore;
use crate::stream::{NodeId, TemporalEdge};
use crate::tensor::{Graph, Shape, Tensor, Var};

/// Memory rows visible to the generator and the losses.
///
/// Rows `0..n` hold node memories, row `n` is all zeros.
#[derive(Clone, Debug)]
pub struct MemoryTable {
    var: Var,
    rows: HashMap<NodeId, usize>,
    nodes: Vec<NodeId>,
}

impl MemoryTable {
    /// A table of constant memories for `nodes` (duplicates ignored).
    pub fn constant(g: &mut Graph<'_>, memory: &MemoryStore, nodes: &[NodeId]) -> Result<Self> {
        let placeholder = g.constant(Tensor::zeros(Shape::Matrix(0, memory.memory_dim())));
        let mut table = MemoryTable {
            var: placeholder,
            rows: HashMap::with_capacity(nodes.len()),
            nodes: Vec::with_capacity(nodes.len()),
        };
        table.push_nodes(nodes);
        let t = table.constant_rows(memory, 0, true)?;
        table.var = g.constant(t);
        Ok(table)
    }

    /// Rows for `updated` first (taken from the differentiable `values`),
    /// then constant rows for `others` not already present.
    pub fn with_updates(
        g: &mut Graph<'_>,
        updated: &[NodeId],
        values: Var,
        memory: &MemoryStore,
        others: &[NodeId],
    ) -> Result<Self> {
        if g.value(values).rows() != updated.len() {
            return Err(Error::dim(
                "with_updates",
                format!("{} nodes vs {} rows", updated.len(), g.value(values).rows()),
            ));
        }
        let mut table = MemoryTable {
            var: values,
            rows: HashMap::with_capacity(updated.len() + others.len()),
            nodes: Vec::with_capacity(updated.len() + others.len()),
        };
        table.push_nodes(updated);
        if table.nodes.len() != updated.len() {
            return Err(Error::Contract("updated node list contains duplicates".into()));
        }
        table.push_nodes(others);
        let rest = g.constant(table.constant_rows(memory, updated.len(), true)?);
        table.var = g.vstack(&[values, rest])?;
        Ok(table)
    }

    fn push_nodes(&mut self, nodes: &[NodeId]) {
        for &n in nodes {
            if !self.rows.contains_key(&n) {
                self.rows.insert(n, self.nodes.len());
                self.nodes.push(n);
            }
        }
    }

    fn constant_rows(&self, memory: &MemoryStore, from: usize, zero_row: bool) -> Result<Tensor> {
        let d = memory.memory_dim();
        let count = self.nodes.len() - from + usize::from(zero_row);
        let mut data = Vec::with_capacity(count * d);
        for &n in &self.nodes[from..] {
            data.extend_from_slice(memory.current(n));
        }
        if zero_row {
            data.resize(count * d, 0.0);
        }
        Tensor::new(Shape::Matrix(count, d), data)
    }

    pub fn var(&self) -> Var {
        self.var
    }

    pub fn row(&self, node: NodeId) -> Result<usize> {
        self.rows
            .get(&node)
            .copied()
            .ok_or_else(|| Error::Contract(format!("node {node} is missing from the memory table")))
    }

    pub fn zero_row(&self) -> usize {
        self.nodes.len()
    }

    /// Nodes in row order (the zero row excluded).
    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }
}

/// Result of pooling a batch's messages and running the updater.
#[derive(Clone, Debug)]
pub struct BatchForward {
    /// Touched nodes in order of first appearance in the batch.
    pub nodes: Vec<NodeId>,
    /// Latest interaction time of each touched node within the batch.
    pub times: Vec<f64>,
    /// Batch-start memories of the touched nodes.
    pub previous: Tensor,
    /// Updated memories, one row per touched node.
    pub updated: Var,
}

impl Slade {
    /// Builds raw messages from batch-start state, mean-pools them per node
    /// and applies the message network and updater.
    pub fn forward_batch(
        &self,
        g: &mut Graph<'_>,
        memory: &mut MemoryStore,
        edges: &[TemporalEdge],
    ) -> Result<BatchForward> {
        if edges.is_empty() {
            return Err(Error::Contract("forward_batch called with no edges".into()));
        }
        let mut latest: HashMap<NodeId, f64> = HashMap::new();
        for e in edges {
            let r_src = self.raw_message(memory.current(e.destination), e.timestamp, memory.last_time(e.source))?;
            let r_dst = self.raw_message(memory.current(e.source), e.timestamp, memory.last_time(e.destination))?;
            memory.stage_raw_message(e.source, r_src)?;
            memory.stage_raw_message(e.destination, r_dst)?;
            for n in [e.source, e.destination] {
                let t = latest.entry(n).or_insert(e.timestamp);
                *t = t.max(e.timestamp);
            }
        }
        let pooled = memory.flush_stage();
        let raw_dim = self.config.raw_message_dim();
        let ds = self.config.memory_dim;
        let mut nodes = Vec::with_capacity(pooled.len());
        let mut raw = Vec::with_capacity(pooled.len() * raw_dim);
        let mut prev = Vec::with_capacity(pooled.len() * ds);
        for (n, r) in pooled {
            nodes.push(n);
            raw.extend_from_slice(&r);
            prev.extend_from_slice(memory.current(n));
        }
        let m_rows = nodes.len();
        let times = nodes.iter().map(|n| latest[n]).collect();
        let previous = Tensor::matrix(m_rows, ds, prev)?;
        let raw = g.constant(Tensor::matrix(m_rows, raw_dim, raw)?);
        let s = g.constant(previous.clone());
        let m = self.message_net(g, raw)?;
        let updated = self.update(g, m, s)?;
        Ok(BatchForward {
            nodes,
            times,
            previous,
            updated,
        })
    }
}

/// Appends each edge endpoint to the other's neighbor buffer.
pub(crate) fn record_neighbors(memory: &mut MemoryStore, edges: &[TemporalEdge]) {
    for e in edges {
        memory.record_neighbor(e.source, e.destination, e.timestamp);
        memory.record_neighbor(e.destination, e.source, e.timestamp);
    }
}

/// Writes updated memories back into the store.
pub(crate) fn apply_batch(memory: &mut MemoryStore, fwd: &BatchForward, values: &Tensor) -> Result<()> {
    for (i, (&n, &t)) in fwd.nodes.iter().zip(&fwd.times).enumerate() {
        memory.apply_update(n, values.row(i), t)?;
    }
    Ok(())
}
