//! Per-node mutable state: memories, neighbor buffers and the raw-message stage.

use std::collections::{HashMap, VecDeque};

use crate::error::{Error, Result};
use crate::stream::NodeId;

/// Owned copy of one node's state.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeMemory {
    pub s: Vec<f64>,
    pub s_prev: Vec<f64>,
    /// Time of the most recent interaction; `None` before the first one.
    pub last_time: Option<f64>,
}

/// The `k` most recent `(neighbor, time)` interactions, oldest first.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NeighborBuffer {
    entries: VecDeque<(NodeId, f64)>,
}

impl NeighborBuffer {
    fn push(&mut self, neighbor: NodeId, time: f64, capacity: usize) {
        if capacity == 0 {
            return;
        }
        while self.entries.len() >= capacity {
            self.entries.pop_front();
        }
        self.entries.push_back((neighbor, time));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Insertion order, oldest first.
    pub fn iter(&self) -> impl DoubleEndedIterator<Item = &(NodeId, f64)> {
        self.entries.iter()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MemoryStore {
    pub(crate) memory_dim: usize,
    pub(crate) message_dim: usize,
    pub(crate) capacity: usize,
    pub(crate) s: Vec<f64>,
    pub(crate) s_prev: Vec<f64>,
    pub(crate) last_time: Vec<Option<f64>>,
    pub(crate) buffers: Vec<NeighborBuffer>,
    stage_order: Vec<NodeId>,
    stage: HashMap<NodeId, Vec<Vec<f64>>>,
    zeros: Vec<f64>,
}

impl MemoryStore {
    /// `message_dim` is the raw-message width `d_s + d_t`; `capacity` is `k`.
    pub fn new(memory_dim: usize, message_dim: usize, capacity: usize) -> Self {
        MemoryStore {
            memory_dim,
            message_dim,
            capacity,
            s: Vec::new(),
            s_prev: Vec::new(),
            last_time: Vec::new(),
            buffers: Vec::new(),
            stage_order: Vec::new(),
            stage: HashMap::new(),
            zeros: vec![0.0; memory_dim],
        }
    }

    pub fn memory_dim(&self) -> usize {
        self.memory_dim
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Number of node slots allocated (ids below this may hold state).
    pub fn allocated(&self) -> usize {
        self.last_time.len()
    }

    fn ensure(&mut self, node: NodeId) {
        if node >= self.last_time.len() {
            let n = node + 1;
            self.s.resize(n * self.memory_dim, 0.0);
            self.s_prev.resize(n * self.memory_dim, 0.0);
            self.last_time.resize(n, None);
            self.buffers.resize_with(n, NeighborBuffer::default);
        }
    }

    /// The current memory `s`; zero for unseen nodes.
    pub fn current(&self, node: NodeId) -> &[f64] {
        if node < self.last_time.len() {
            let d = self.memory_dim;
            &self.s[node * d..(node + 1) * d]
        } else {
            &self.zeros
        }
    }

    /// The memory immediately before the latest update; zero for unseen nodes.
    pub fn previous(&self, node: NodeId) -> &[f64] {
        if node < self.last_time.len() {
            let d = self.memory_dim;
            &self.s_prev[node * d..(node + 1) * d]
        } else {
            &self.zeros
        }
    }

    pub fn last_time(&self, node: NodeId) -> Option<f64> {
        self.last_time.get(node).copied().flatten()
    }

    pub fn get_memory(&self, node: NodeId) -> NodeMemory {
        NodeMemory {
            s: self.current(node).to_vec(),
            s_prev: self.previous(node).to_vec(),
            last_time: self.last_time(node),
        }
    }

    /// Replaces `s` with `new_s`, moving the old value into `s_prev`.
    pub fn apply_update(&mut self, node: NodeId, new_s: &[f64], time: f64) -> Result<()> {
        let d = self.memory_dim;
        if new_s.len() != d {
            return Err(Error::dim("apply_update", format!("{} vs memory dim {d}", new_s.len())));
        }
        self.ensure(node);
        let range = node * d..(node + 1) * d;
        self.s_prev[range.clone()].copy_from_slice(&self.s[range.clone()]);
        self.s[range].copy_from_slice(new_s);
        self.last_time[node] = Some(time);
        Ok(())
    }

    pub fn stage_raw_message(&mut self, node: NodeId, r: Vec<f64>) -> Result<()> {
        if r.len() != self.message_dim {
            return Err(Error::dim(
                "stage_raw_message",
                format!("{} vs raw message dim {}", r.len(), self.message_dim),
            ));
        }
        let list = self.stage.entry(node).or_insert_with(|| {
            self.stage_order.push(node);
            Vec::new()
        });
        list.push(r);
        Ok(())
    }

    pub fn has_staged(&self) -> bool {
        !self.stage_order.is_empty()
    }

    pub fn message_dim(&self) -> usize {
        self.message_dim
    }

    pub fn staged_len(&self, node: NodeId) -> usize {
        self.stage.get(&node).map_or(0, Vec::len)
    }

    /// Mean of each node's staged messages, in first-staged order; clears the stage.
    pub fn flush_stage(&mut self) -> Vec<(NodeId, Vec<f64>)> {
        let order = std::mem::take(&mut self.stage_order);
        let mut stage = std::mem::take(&mut self.stage);
        order
            .into_iter()
            .map(|node| {
                let msgs = stage.remove(&node).expect("staged node");
                let mut mean = vec![0.0; self.message_dim];
                for m in &msgs {
                    for (acc, x) in mean.iter_mut().zip(m) {
                        *acc += x;
                    }
                }
                let n = msgs.len() as f64;
                mean.iter_mut().for_each(|x| *x /= n);
                (node, mean)
            })
            .collect()
    }

    pub fn record_neighbor(&mut self, node: NodeId, neighbor: NodeId, time: f64) {
        self.ensure(node);
        let cap = self.capacity;
        self.buffers[node].push(neighbor, time, cap);
    }

    pub fn buffer_len(&self, node: NodeId) -> usize {
        self.buffers.get(node).map_or(0, NeighborBuffer::len)
    }

    /// Buffer contents newest first.
    pub fn recent_neighbors(&self, node: NodeId) -> Vec<(NodeId, f64)> {
        self.buffers
            .get(node)
            .map(|b| b.iter().rev().copied().collect())
            .unwrap_or_default()
    }

    pub fn reset_all(&mut self) {
        self.s.clear();
        self.s_prev.clear();
        self.last_time.clear();
        self.buffers.clear();
        self.stage.clear();
        self.stage_order.clear();
    }
}
