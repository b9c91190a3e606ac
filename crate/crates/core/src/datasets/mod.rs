//! Dataset ingestion, anomaly injection, synthetic streams and checkpoints.

pub mod checkpoint;
pub mod emaileu;
pub mod inject;
pub mod jodie;
pub mod signed;
pub mod synth;

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::score::TypeTag;
use crate::stream::{EdgeStream, NodeId, TemporalEdge};

/// Dense node ids for the original identifiers of a raw file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NodeMap {
    names: Vec<String>,
    index: HashMap<String, NodeId>,
}

impl NodeMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// The id of `name`, assigning the next id on first sight.
    pub fn intern(&mut self, name: &str) -> NodeId {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self.names.len();
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), id);
        id
    }

    pub fn get(&self, name: &str) -> Option<NodeId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: NodeId) -> Option<&str> {
        self.names.get(id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["node", "original_id"])?;
        for (i, n) in self.names.iter().enumerate() {
            w.write_record([i.to_string(), n.clone()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// A loaded stream with the mapping back to raw identifiers.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub stream: EdgeStream,
    pub nodes: NodeMap,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StreamStats {
    pub edges: usize,
    pub nodes: usize,
    pub abnormal_edges: usize,
    /// Abnormal edges over all edges.
    pub anomaly_ratio: f64,
}

impl StreamStats {
    pub fn of(stream: &EdgeStream) -> Self {
        let abnormal = stream.edges.iter().filter(|e| e.source_label == Some(true)).count();
        let mut seen = vec![false; stream.node_count];
        for e in &stream.edges {
            seen[e.source] = true;
            seen[e.destination] = true;
        }
        StreamStats {
            edges: stream.len(),
            nodes: seen.iter().filter(|&&s| s).count(),
            abnormal_edges: abnormal,
            anomaly_ratio: if stream.is_empty() {
                0.0
            } else {
                abnormal as f64 / stream.len() as f64
            },
        }
    }
}

pub const EDGE_HEADER: [&str; 4] = ["src", "dst", "time", "label"];

/// Writes the normalized `src,dst,time,label` form.
pub fn write_edges<W: Write>(stream: &EdgeStream, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(EDGE_HEADER)?;
    for e in &stream.edges {
        let label = match e.source_label {
            Some(true) => "1",
            Some(false) => "0",
            None => "",
        };
        w.write_record([
            e.source.to_string(),
            e.destination.to_string(),
            e.timestamp.to_string(),
            label.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_edges(stream: &EdgeStream, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::file(path, e))?;
    write_edges(stream, std::io::BufWriter::new(f))
}

/// Reads the normalized edge form and validates ordering.
pub fn read_edges<R: Read>(input: R) -> Result<EdgeStream> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers()?.clone();
    if header.iter().ne(EDGE_HEADER.iter().copied()) {
        return Err(Error::Format(format!(
            "expected header src,dst,time,label, found {}",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut edges = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let line = i + 2;
        let bad = |what: &str, v: &str| Error::Parse {
            line,
            message: format!("bad {what} '{v}'"),
        };
        let get = |k: usize| row.get(k).unwrap_or("");
        let src: NodeId = get(0).parse().map_err(|_| bad("src", get(0)))?;
        let dst: NodeId = get(1).parse().map_err(|_| bad("dst", get(1)))?;
        let time: f64 = get(2).parse().map_err(|_| bad("time", get(2)))?;
        let label = match get(3) {
            "" => None,
            "1" => Some(true),
            "0" => Some(false),
            v => return Err(bad("label", v)),
        };
        edges.push(TemporalEdge {
            source: src,
            destination: dst,
            timestamp: time,
            source_label: label,
        });
    }
    let stream = EdgeStream::from_edges(edges);
    stream.validate()?;
    Ok(stream)
}

pub fn load_edges(path: &Path) -> Result<EdgeStream> {
    let f = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
    read_edges(std::io::BufReader::new(f))
}

/// Node-map sidecar path for an edge file: `x.csv` becomes `x.nodes.csv`.
pub fn node_map_path(edges: &Path) -> PathBuf {
    sidecar(edges, "nodes")
}

/// Type-tag sidecar path: `x.csv` becomes `x.tags.csv`.
pub fn tags_path(edges: &Path) -> PathBuf {
    sidecar(edges, "tags")
}

fn sidecar(edges: &Path, kind: &str) -> PathBuf {
    let stem = edges.file_stem().and_then(|s| s.to_str()).unwrap_or("stream");
    edges.with_file_name(format!("{stem}.{kind}.csv"))
}

pub fn write_tags<W: Write>(tags: &[TypeTag], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["edge_index", "type"])?;
    for (i, t) in tags.iter().enumerate() {
        w.write_record([i.to_string(), t.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_tags(tags: &[TypeTag], path: &Path) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::file(path, e))?;
    write_tags(tags, std::io::BufWriter::new(f))
}

/// Reads `edge_index,type` rows into a dense per-edge vector.
pub fn load_tags(path: &Path) -> Result<Vec<TypeTag>> {
    let f = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
    let mut rdr = csv::Reader::from_reader(std::io::BufReader::new(f));
    let mut tags = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let line = i + 2;
        let idx: usize = row.get(0).unwrap_or("").parse().map_err(|_| Error::Parse {
            line,
            message: "bad edge_index".into(),
        })?;
        let tag: TypeTag = row.get(1).unwrap_or("").parse().map_err(|e: Error| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        if idx >= tags.len() {
            tags.resize(idx + 1, TypeTag::Normal);
        }
        tags[idx] = tag;
    }
    Ok(tags)
}

/// Stable chronological sort, reporting whether anything moved.
pub(crate) fn sort_chronologically(edges: &mut [TemporalEdge]) -> bool {
    let sorted = edges.windows(2).all(|w| w[0].timestamp <= w[1].timestamp);
    if !sorted {
        edges.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
    }
    !sorted
}
