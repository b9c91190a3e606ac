//! Signed trust networks: `source,target,rating,time` rows without a header.
//!
//! Labels come in two stages. A user is abnormal overall when the ratings it
//! receives over the whole stream sum below zero. An overall-abnormal user is
//! then abnormal exactly on the edges where it receives a negative rating.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use super::{sort_chronologically, Dataset, NodeMap};
use crate::error::{Error, Result};
use crate::stream::{EdgeStream, NodeId, TemporalEdge};

pub const RATING_RANGE: std::ops::RangeInclusive<i64> = -10..=10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SignedRating {
    pub source: NodeId,
    pub target: NodeId,
    pub rating: i64,
    pub time: f64,
}

/// Per-row dynamic label of the rated user, in input order.
pub fn two_stage_labels(rows: &[SignedRating]) -> Vec<bool> {
    let mut received: HashMap<NodeId, i64> = HashMap::new();
    for r in rows {
        *received.entry(r.target).or_insert(0) += r.rating;
    }
    rows.iter()
        .map(|r| received[&r.target] < 0 && r.rating < 0)
        .collect()
}

pub fn load_signed_network(path: &Path, reverse_direction: bool) -> Result<Dataset> {
    let f = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
    read_signed(std::io::BufReader::new(f), reverse_direction)
}

/// With `reverse_direction` each edge points from the rated user to the rater
/// so the labeled actor is the source. Otherwise labels are left unset, since
/// they describe the destination.
pub fn read_signed<R: Read>(input: R, reverse_direction: bool) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut nodes = NodeMap::new();
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 1;
        let rec = rec.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        if rec.len() != 4 {
            return Err(Error::Parse {
                line,
                message: format!("expected 4 columns, found {}", rec.len()),
            });
        }
        let rating: i64 = rec[2].parse().map_err(|_| Error::Parse {
            line,
            message: format!("rating '{}' is not an integer", &rec[2]),
        })?;
        if !RATING_RANGE.contains(&rating) {
            return Err(Error::Parse {
                line,
                message: format!("rating {rating} outside [-10, 10]"),
            });
        }
        let time: f64 = rec[3].parse().map_err(|_| Error::Parse {
            line,
            message: format!("bad time '{}'", &rec[3]),
        })?;
        if !time.is_finite() {
            return Err(Error::Parse {
                line,
                message: "non-finite time".into(),
            });
        }
        rows.push(SignedRating {
            source: nodes.intern(&rec[0]),
            target: nodes.intern(&rec[1]),
            rating,
            time,
        });
    }
    let labels = two_stage_labels(&rows);
    let mut edges: Vec<TemporalEdge> = rows
        .iter()
        .zip(labels)
        .map(|(r, abnormal)| {
            if reverse_direction {
                TemporalEdge::new(r.target, r.source, r.time).labeled(abnormal)
            } else {
                TemporalEdge::new(r.source, r.target, r.time)
            }
        })
        .collect();
    if sort_chronologically(&mut edges) {
        log::warn!("rating rows were not sorted by time; applied a stable sort");
    }
    let stream = EdgeStream::new(edges, nodes.len());
    stream.validate()?;
    Ok(Dataset { stream, nodes })
}
