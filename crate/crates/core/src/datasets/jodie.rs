//! User-item interaction logs with a dynamic user-state label.
//!
//! Rows are `user,item,timestamp,state_label,features...` after one header
//! line. Users take ids `0..U` and items follow, so the two ranges are
//! disjoint. Feature columns are ignored.

use std::io::Read;
use std::path::Path;

use super::{sort_chronologically, Dataset, NodeMap};
use crate::error::{Error, Result};
use crate::stream::{EdgeStream, TemporalEdge};

pub fn load_jodie_csv(path: &Path) -> Result<Dataset> {
    let f = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
    read_jodie(std::io::BufReader::new(f))
}

pub fn read_jodie<R: Read>(input: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        if rec.len() < 4 {
            return Err(Error::Parse {
                line,
                message: format!("expected at least 4 columns, found {}", rec.len()),
            });
        }
        let time: f64 = rec[2].parse().map_err(|_| Error::Parse {
            line,
            message: format!("bad timestamp '{}'", &rec[2]),
        })?;
        if !time.is_finite() {
            return Err(Error::Parse {
                line,
                message: format!("non-finite timestamp '{}'", &rec[2]),
            });
        }
        let label = match rec[3].parse::<f64>() {
            Ok(1.0) => true,
            Ok(0.0) => false,
            _ => {
                return Err(Error::Parse {
                    line,
                    message: format!("state label must be 0 or 1, found '{}'", &rec[3]),
                })
            }
        };
        rows.push((rec[0].to_string(), rec[1].to_string(), time, label));
    }

    // users first so their ids form a prefix
    let mut users = NodeMap::new();
    for (u, _, _, _) in &rows {
        users.intern(u);
    }
    let mut items = NodeMap::new();
    for (_, it, _, _) in &rows {
        items.intern(it);
    }
    let offset = users.len();
    let mut nodes = NodeMap::new();
    for id in 0..users.len() {
        nodes.intern(&format!("u:{}", users.name(id).unwrap_or_default()));
    }
    for id in 0..items.len() {
        nodes.intern(&format!("i:{}", items.name(id).unwrap_or_default()));
    }

    let mut edges: Vec<TemporalEdge> = rows
        .iter()
        .map(|(u, it, t, l)| {
            TemporalEdge::new(users.get(u).unwrap_or(0), offset + items.get(it).unwrap_or(0), *t).labeled(*l)
        })
        .collect();
    if sort_chronologically(&mut edges) {
        log::warn!("interaction log was not sorted by timestamp; applied a stable sort");
    }
    let stream = EdgeStream::new(edges, nodes.len());
    stream.validate()?;
    Ok(Dataset { stream, nodes })
}
