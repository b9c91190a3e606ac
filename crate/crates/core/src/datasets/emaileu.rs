//! Whitespace-separated `src dst time` email logs.

use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use super::{sort_chronologically, Dataset, NodeMap};
use crate::error::{Error, Result};
use crate::stream::{EdgeStream, TemporalEdge};

/// Open interval of timestamps kept by default: the log's active period.
pub const DEFAULT_ACTIVE_WINDOW: (f64, f64) = (4.06e7, 4.54e7);

pub fn load_email_eu(path: &Path, window: Option<(f64, f64)>) -> Result<Dataset> {
    let f = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
    read_email_eu(f, window)
}

/// Keeps rows with `lo < time < hi` when a window is given. Every edge is
/// labeled normal.
pub fn read_email_eu<R: Read>(input: R, window: Option<(f64, f64)>) -> Result<Dataset> {
    let mut nodes = NodeMap::new();
    let mut edges = Vec::new();
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') || text.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = text.split_whitespace().collect();
        if fields.len() < 3 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 'src dst time', found '{text}'"),
            });
        }
        let time: f64 = fields[2].parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("bad time '{}'", fields[2]),
        })?;
        if let Some((lo, hi)) = window {
            if !(time > lo && time < hi) {
                continue;
            }
        }
        let s = nodes.intern(fields[0]);
        let d = nodes.intern(fields[1]);
        edges.push(TemporalEdge::new(s, d, time).labeled(false));
    }
    if sort_chronologically(&mut edges) {
        log::warn!("email log was not sorted by time; applied a stable sort");
    }
    let stream = EdgeStream::new(edges, nodes.len());
    stream.validate()?;
    Ok(Dataset { stream, nodes })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_filters_and_ids_are_dense() {
        let text = "5 6 40000000\n5 7 40700000\n7 5 45000000\n6 5 45500000\n";
        let d = read_email_eu(text.as_bytes(), Some(DEFAULT_ACTIVE_WINDOW)).unwrap();
        assert_eq!(d.stream.len(), 2);
        assert_eq!(d.stream.node_count, 2);
        assert_eq!((d.stream.edges[0].source, d.stream.edges[0].destination), (0, 1));
        assert_eq!(d.nodes.name(1), Some("7"));
        let all = read_email_eu(text.as_bytes(), None).unwrap();
        assert_eq!(all.stream.len(), 4);
        assert!(all.stream.edges.iter().all(|e| e.source_label == Some(false)));
    }

    #[test]
    fn bad_line_is_reported() {
        let err = read_email_eu("1 2 3\n1 2\n".as_bytes(), None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }
}
