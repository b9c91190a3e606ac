//! Wall-clock latency of streaming inference over growing prefixes.

use std::time::Instant;

use serde::Serialize;

use crate::error::Result;
use crate::memory::MemoryStore;
use crate::model::Slade;
use crate::score::{stream_inference, InferenceConfig};
use crate::stream::TemporalEdge;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LatencyRow {
    pub n_edges: usize,
    pub total_seconds: f64,
    pub per_edge_seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct LatencyReport {
    pub rows: Vec<LatencyRow>,
    /// Coefficient of determination of `total_seconds ~ a + b * n_edges`;
    /// absent with fewer than two rows.
    pub r_squared: Option<f64>,
}

impl LatencyReport {
    /// Per-edge time of the last prefix over that of the first.
    pub fn per_edge_ratio(&self) -> Option<f64> {
        match (self.rows.first(), self.rows.last()) {
            (Some(a), Some(b)) if a.per_edge_seconds > 0.0 => Some(b.per_edge_seconds / a.per_edge_seconds),
            _ => None,
        }
    }
}

/// Times batch-1 inference from `initial` state on each prefix length.
///
/// Every prefix is timed `repeats` times, cycling through the prefixes so
/// that transient machine load spreads across all of them, and the fastest
/// run is kept.
pub fn latency_bench(
    model: &Slade,
    initial: &MemoryStore,
    edges: &[TemporalEdge],
    prefixes: &[usize],
    repeats: usize,
) -> Result<LatencyReport> {
    let cfg = InferenceConfig::default();
    let lengths: Vec<usize> = prefixes.iter().map(|&n| n.min(edges.len())).collect();
    let mut best = vec![f64::INFINITY; lengths.len()];
    for round in 0..repeats.max(1) {
        for (slot, &n) in lengths.iter().enumerate() {
            let mut memory = initial.clone();
            let start = Instant::now();
            let records = stream_inference(model, &mut memory, &edges[..n], 0, &cfg)?;
            let total = start.elapsed().as_secs_f64();
            debug_assert_eq!(records.len(), n);
            best[slot] = best[slot].min(total);
            log::info!("latency prefix {n} round {}: {total:.3}s", round + 1);
        }
    }
    let rows: Vec<LatencyRow> = lengths
        .iter()
        .zip(&best)
        .map(|(&n, &total)| LatencyRow {
            n_edges: n,
            total_seconds: total,
            per_edge_seconds: if n == 0 { 0.0 } else { total / n as f64 },
        })
        .collect();
    let xs: Vec<f64> = rows.iter().map(|r| r.n_edges as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.total_seconds).collect();
    Ok(LatencyReport {
        r_squared: linear_fit_r2(&xs, &ys),
        rows,
    })
}

/// Prefix lengths at the given fractions of `n`.
pub fn prefix_lengths(n: usize, fractions: &[f64]) -> Vec<usize> {
    fractions.iter().map(|f| ((n as f64) * f).round() as usize).collect()
}

/// R^2 of an ordinary least-squares line through `(xs, ys)`.
pub fn linear_fit_r2(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() < 2 || xs.len() != ys.len() {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    if syy == 0.0 {
        return Some(1.0);
    }
    let slope = sxy / sxx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - (my + slope * (x - mx))).powi(2))
        .sum();
    Some(1.0 - ss_res / syy)
}
