//! Anomaly scores, streaming inference and anomaly-type exports.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::memory::{MemoryStore, NodeMemory};
use crate::model::{engine, GenQuery, MemoryTable, Slade};
use crate::stream::{batch_iter, EdgeStream, NodeId, SplitRatios, TemporalEdge};
use crate::tensor::{cosine_sim, Graph};

/// Cosine distance between the current and previous memory, in `[0, 2]`.
pub fn contrast_score(mem: &NodeMemory) -> Result<f64> {
    Ok(1.0 - cosine_sim(&mem.s, &mem.s_prev)?)
}

/// Cosine distance between the generated and current memory, in `[0, 2]`.
pub fn generation_score(s_hat: &[f64], s: &[f64]) -> Result<f64> {
    Ok(1.0 - cosine_sim(s_hat, s)?)
}

/// Combined score in `[0, 1]`.
pub fn final_score(sc_c: f64, sc_g: f64) -> f64 {
    (sc_c + sc_g) / 4.0
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreRecord {
    /// Position of the scored edge in the full stream.
    pub edge_index: usize,
    pub node: NodeId,
    pub time: f64,
    pub sc_c: f64,
    pub sc_g: f64,
    pub sc: f64,
    pub label: Option<bool>,
}

pub const SCORE_HEADER: [&str; 7] = ["edge_index", "node", "time", "sc_c", "sc_g", "sc", "label"];

pub fn write_scores<W: Write>(records: &[ScoreRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SCORE_HEADER)?;
    for r in records {
        let label = match r.label {
            Some(true) => "1",
            Some(false) => "0",
            None => "",
        };
        w.write_record([
            r.edge_index.to_string(),
            r.node.to_string(),
            r.time.to_string(),
            r.sc_c.to_string(),
            r.sc_g.to_string(),
            r.sc.to_string(),
            label.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_scores(records: &[ScoreRecord], path: &Path) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::file(path, e))?;
    write_scores(records, std::io::BufWriter::new(f))
}

pub fn load_scores(path: &Path) -> Result<Vec<ScoreRecord>> {
    let f = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
    let mut rdr = csv::Reader::from_reader(std::io::BufReader::new(f));
    let header = rdr.headers()?.clone();
    if header.iter().ne(SCORE_HEADER.iter().copied()) {
        return Err(Error::Format(format!("unexpected score header {header:?}")));
    }
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let line = i + 2;
        let field = |k: usize| row.get(k).unwrap_or("");
        let num = |k: usize| -> Result<f64> {
            field(k).parse().map_err(|_| Error::Parse {
                line,
                message: format!("bad number '{}' in column {}", field(k), SCORE_HEADER[k]),
            })
        };
        let int = |k: usize| -> Result<usize> {
            field(k).parse().map_err(|_| Error::Parse {
                line,
                message: format!("bad integer '{}' in column {}", field(k), SCORE_HEADER[k]),
            })
        };
        let label = match field(6) {
            "" => None,
            "1" | "true" => Some(true),
            "0" | "false" => Some(false),
            other => {
                return Err(Error::Parse {
                    line,
                    message: format!("bad label '{other}'"),
                })
            }
        };
        out.push(ScoreRecord {
            edge_index: int(0)?,
            node: int(1)?,
            time: num(2)?,
            sc_c: num(3)?,
            sc_g: num(4)?,
            sc: num(5)?,
            label,
        });
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InferenceConfig {
    /// Edges processed per memory update; 1 scores every edge against
    /// fully up-to-date state.
    pub batch_size: usize,
    /// Also emit (unlabeled) records for destination endpoints.
    pub score_destinations: bool,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig {
            batch_size: 1,
            score_destinations: false,
        }
    }
}

/// An empty memory store sized for `model`.
pub fn new_memory(model: &Slade) -> MemoryStore {
    let c = model.config();
    MemoryStore::new(c.memory_dim, c.raw_message_dim(), c.neighbors)
}

/// Scores every edge's source from pre-edge state, then applies the
/// memory update for the edge. Parameters are never modified.
///
/// `offset` is the stream position of `edges[0]`, used for `edge_index`.
pub fn stream_inference(
    model: &Slade,
    memory: &mut MemoryStore,
    edges: &[TemporalEdge],
    offset: usize,
    cfg: &InferenceConfig,
) -> Result<Vec<ScoreRecord>> {
    let mut records = Vec::with_capacity(edges.len() * (1 + usize::from(cfg.score_destinations)));
    for batch in batch_iter(edges, cfg.batch_size)? {
        let mut g = Graph::new(model.params());
        // (edge slot, node, is the labeled source)
        let mut targets: Vec<(usize, NodeId, bool)> = Vec::with_capacity(batch.edges.len());
        for (i, e) in batch.edges.iter().enumerate() {
            targets.push((i, e.source, true));
            if cfg.score_destinations {
                targets.push((i, e.destination, false));
            }
        }
        let mut needed: Vec<NodeId> = Vec::new();
        for &(_, n, _) in &targets {
            needed.push(n);
            needed.extend(memory.recent_neighbors(n).into_iter().map(|(j, _)| j));
        }
        let table = MemoryTable::constant(&mut g, memory, &needed)?;
        let queries: Vec<GenQuery> = targets
            .iter()
            .map(|&(i, node, _)| GenQuery {
                node,
                time: batch.edges[i].timestamp,
            })
            .collect();
        let generated = model.generate(&mut g, &table, memory, &queries, None)?;
        let s_hat = g.value(generated.s_hat);
        for (q, &(i, node, is_source)) in targets.iter().enumerate() {
            let e = &batch.edges[i];
            let mem = memory.get_memory(node);
            let sc_c = contrast_score(&mem)?;
            let sc_g = generation_score(s_hat.row(q), &mem.s)?;
            records.push(ScoreRecord {
                edge_index: offset + batch.offset + i,
                node,
                time: e.timestamp,
                sc_c,
                sc_g,
                sc: final_score(sc_c, sc_g),
                label: if is_source { e.source_label } else { None },
            });
        }
        advance(model, &mut g, memory, batch.edges)?;
    }
    Ok(records)
}

fn advance(model: &Slade, g: &mut Graph<'_>, memory: &mut MemoryStore, edges: &[TemporalEdge]) -> Result<()> {
    let fwd = model.forward_batch(g, memory, edges)?;
    let values = g.value(fwd.updated).clone();
    engine::record_neighbors(memory, edges);
    engine::apply_batch(memory, &fwd, &values)
}

/// Applies memory updates for `edges` without scoring or learning.
pub fn replay(model: &Slade, memory: &mut MemoryStore, edges: &[TemporalEdge], batch_size: usize) -> Result<()> {
    for batch in batch_iter(edges, batch_size)? {
        let mut g = Graph::new(model.params());
        advance(model, &mut g, memory, batch.edges)?;
    }
    Ok(())
}

/// Warms fresh memory on the training and validation edges, then scores the
/// chronological test split.
pub fn score_test_split(
    model: &Slade,
    stream: &EdgeStream,
    ratios: SplitRatios,
    cfg: &InferenceConfig,
) -> Result<Vec<ScoreRecord>> {
    stream.validate()?;
    let (_, test_start) = stream.split_points(ratios)?;
    let mut memory = new_memory(model);
    replay(model, &mut memory, &stream.edges[..test_start], cfg.batch_size)?;
    stream_inference(model, &mut memory, &stream.edges[test_start..], test_start, cfg)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TypeTag {
    Normal,
    T1,
    T2,
    T3,
}

impl fmt::Display for TypeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TypeTag::Normal => "NORMAL",
            TypeTag::T1 => "T1",
            TypeTag::T2 => "T2",
            TypeTag::T3 => "T3",
        })
    }
}

impl FromStr for TypeTag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "NORMAL" | "Normal" | "normal" => Ok(TypeTag::Normal),
            "T1" => Ok(TypeTag::T1),
            "T2" => Ok(TypeTag::T2),
            "T3" => Ok(TypeTag::T3),
            _ => Err(Error::Format(format!("unknown anomaly type '{s}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TypedScore {
    pub tag: TypeTag,
    pub time: f64,
    pub score: f64,
}

/// Joins scores with per-edge type tags (indexed by stream position; edges
/// beyond the tag list count as normal).
pub fn export_type_distributions(records: &[ScoreRecord], tags: &[TypeTag]) -> Vec<TypedScore> {
    records
        .iter()
        .map(|r| TypedScore {
            tag: tags.get(r.edge_index).copied().unwrap_or(TypeTag::Normal),
            time: r.time,
            score: r.sc,
        })
        .collect()
}

/// Mean score per type, for types that occur.
pub fn mean_score_by_type(rows: &[TypedScore]) -> BTreeMap<TypeTag, f64> {
    let mut acc: BTreeMap<TypeTag, (f64, usize)> = BTreeMap::new();
    for r in rows {
        let e = acc.entry(r.tag).or_default();
        e.0 += r.score;
        e.1 += 1;
    }
    acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
}

/// `type,score` rows for density estimates.
pub fn write_type_scores<W: Write>(rows: &[TypedScore], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["type", "score"])?;
    for r in rows {
        w.write_record([r.tag.to_string(), r.score.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `time,score,type` rows for time-series plots.
pub fn write_type_series<W: Write>(rows: &[TypedScore], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["time", "score", "type"])?;
    for r in rows {
        w.write_record([r.time.to_string(), r.score.to_string(), r.tag.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Generator, ModelConfig, Updater};

    fn mem(s: &[f64], p: &[f64]) -> NodeMemory {
        NodeMemory {
            s: s.to_vec(),
            s_prev: p.to_vec(),
            last_time: Some(0.0),
        }
    }

    #[test]
    fn score_examples() {
        assert!(contrast_score(&mem(&[1.0, 2.0], &[1.0, 2.0])).unwrap().abs() < 1e-15);
        assert!((contrast_score(&mem(&[1.0, 0.0], &[0.0, 3.0])).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(contrast_score(&mem(&[0.0, 0.0], &[0.0, 0.0])).unwrap(), 1.0);
        assert!(generation_score(&[2.0, 1.0], &[2.0, 1.0]).unwrap().abs() < 1e-15);
        assert!((generation_score(&[-2.0, 1.0], &[2.0, -1.0]).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(generation_score(&[0.0, 0.0], &[2.0, -1.0]).unwrap(), 1.0);
        assert_eq!(final_score(0.0, 0.0), 0.0);
        assert_eq!(final_score(2.0, 2.0), 1.0);
        assert_eq!(final_score(1.0, 0.0), 0.25);
    }

    fn small_model(generator: Generator) -> Slade {
        Slade::new(
            ModelConfig {
                memory_dim: 8,
                message_dim: 4,
                time_dim: 4,
                neighbors: 4,
                generator,
                updater: Updater::Gru,
                ..ModelConfig::default()
            },
            7,
        )
        .unwrap()
    }

    #[test]
    fn first_edge_of_new_source_scores_half() {
        let model = small_model(Generator::Tgat);
        let mut memory = new_memory(&model);
        let edges = [TemporalEdge::new(0, 1, 1.0).labeled(true), TemporalEdge::new(0, 1, 2.0)];
        let before = model.params().checksum();
        let recs = stream_inference(&model, &mut memory, &edges, 10, &InferenceConfig::default()).unwrap();
        assert_eq!(recs[0].sc, 0.5);
        assert_eq!(recs[0].edge_index, 10);
        assert_eq!(recs[0].label, Some(true));
        assert_eq!(recs[1].label, None);
        assert!(recs[1].sc != 0.5);
        assert_eq!(model.params().checksum(), before);
        assert_eq!(memory.last_time(0), Some(2.0));
        for r in &recs {
            assert!((0.0..=1.0).contains(&r.sc));
            assert!((0.0..=2.0).contains(&r.sc_c) && (0.0..=2.0).contains(&r.sc_g));
        }
    }

    #[test]
    fn batched_inference_matches_sequential_without_repeats() {
        for generator in [Generator::Tgat, Generator::Gat, Generator::Sum] {
            let model = small_model(generator);
            let mut warm = new_memory(&model);
            let history: Vec<TemporalEdge> =
                (0..40).map(|i| TemporalEdge::new(i % 10, 10 + i % 10, i as f64)).collect();
            replay(&model, &mut warm, &history, 7).unwrap();
            // Lane p touches nodes {p, 10 + p} only, so no window of 10 edges repeats a node.
            let test: Vec<TemporalEdge> =
                (0..30).map(|i| TemporalEdge::new(i % 10, 10 + i % 10, 100.0 + i as f64)).collect();
            let mut a = warm.clone();
            let mut b = warm.clone();
            let one = stream_inference(&model, &mut a, &test, 0, &InferenceConfig::default()).unwrap();
            let ten = stream_inference(
                &model,
                &mut b,
                &test,
                0,
                &InferenceConfig {
                    batch_size: 10,
                    ..InferenceConfig::default()
                },
            )
            .unwrap();
            for (x, y) in one.iter().zip(&ten) {
                assert!((x.sc - y.sc).abs() < 1e-10, "{generator}");
            }
        }
    }

    #[test]
    fn inference_is_deterministic_and_csv_round_trips() {
        let model = small_model(Generator::Tgat);
        let edges: Vec<TemporalEdge> = (0..20)
            .map(|i| TemporalEdge::new(i % 3, 3 + i % 2, i as f64).labeled(i % 5 == 0))
            .collect();
        let run = || {
            let mut m = new_memory(&model);
            stream_inference(&model, &mut m, &edges, 0, &InferenceConfig::default()).unwrap()
        };
        let recs = run();
        assert_eq!(recs, run());
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("scores.csv");
        save_scores(&recs, &p).unwrap();
        let back = load_scores(&p).unwrap();
        assert_eq!(back, recs);
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("edge_index,node,time,sc_c,sc_g,sc,label\n"));
    }

    #[test]
    fn destination_scoring_adds_unlabeled_rows() {
        let model = small_model(Generator::Tgat);
        let edges = [TemporalEdge::new(0, 1, 1.0).labeled(true)];
        let mut m = new_memory(&model);
        let cfg = InferenceConfig {
            score_destinations: true,
            ..InferenceConfig::default()
        };
        let recs = stream_inference(&model, &mut m, &edges, 0, &cfg).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!((recs[0].node, recs[0].label), (0, Some(true)));
        assert_eq!((recs[1].node, recs[1].label), (1, None));
    }

    #[test]
    fn type_exports() {
        let rec = |i: usize, sc: f64| ScoreRecord {
            edge_index: i,
            node: 0,
            time: i as f64,
            sc_c: 0.0,
            sc_g: 0.0,
            sc,
            label: None,
        };
        let recs = vec![rec(0, 0.1), rec(1, 0.9), rec(2, 0.3)];
        let rows = export_type_distributions(&recs, &[]);
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| r.tag == TypeTag::Normal));
        let rows = export_type_distributions(&recs, &[TypeTag::Normal, TypeTag::T3, TypeTag::Normal]);
        let means = mean_score_by_type(&rows);
        assert!((means[&TypeTag::Normal] - 0.2).abs() < 1e-12);
        assert_eq!(means[&TypeTag::T3], 0.9);
        let mut buf = Vec::new();
        write_type_scores(&rows, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 4);
        let mut buf = Vec::new();
        write_type_series(&rows, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("time,score,type\n0,0.1,NORMAL"));
        assert_eq!("T2".parse::<TypeTag>().unwrap(), TypeTag::T2);
    }
}
