//! Rank-based detection metrics.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::score::ScoreRecord;

/// Area under the ROC curve by average ranks; tied scores count one half.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_inputs(scores, labels)?;
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Metric(format!(
            "AUC needs both classes (got {n_pos} positive, {n_neg} negative)"
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their mean
        let mean_rank = (i + j + 2) as f64 / 2.0;
        for &k in &order[i..=j] {
            if labels[k] {
                rank_sum += mean_rank;
            }
        }
        i = j + 1;
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Average precision: mean of precision at each positive, ranking by
/// descending score with ties kept in input order.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_inputs(scores, labels)?;
    let n_pos = labels.iter().filter(|&&l| l).count();
    if n_pos == 0 {
        return Err(Error::Metric("AP needs at least one positive".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut hits = 0usize;
    let mut total = 0.0;
    for (rank, &k) in order.iter().enumerate() {
        if labels[k] {
            hits += 1;
            total += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(total / n_pos as f64)
}

fn check_inputs(scores: &[f64], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::Metric(format!("{} scores but {} labels", scores.len(), labels.len())));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Metric("scores must be finite".into()));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub auc: f64,
    pub ap: f64,
    pub n_pos: usize,
    pub n_neg: usize,
}

impl MetricReport {
    /// Evaluates labeled records (unlabeled ones are skipped) in edge order.
    pub fn from_records(records: &[ScoreRecord]) -> Result<Self> {
        let mut labeled: Vec<&ScoreRecord> = records.iter().filter(|r| r.label.is_some()).collect();
        labeled.sort_by_key(|r| r.edge_index);
        let scores: Vec<f64> = labeled.iter().map(|r| r.sc).collect();
        let labels: Vec<bool> = labeled.iter().map(|r| r.label == Some(true)).collect();
        let n_pos = labels.iter().filter(|&&l| l).count();
        Ok(MetricReport {
            auc: auc(&scores, &labels)?,
            ap: average_precision(&scores, &labels)?,
            n_pos,
            n_neg: labels.len() - n_pos,
        })
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::file(path, e))
    }
}
