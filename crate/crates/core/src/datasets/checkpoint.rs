//! Binary checkpoints: parameters, run configuration and optional memory.
//!
//! Layout: the 8-byte magic `SLADECKP`, a little-endian `u32` version, a
//! `u64` header length, a UTF-8 JSON header, then raw little-endian `f64`
//! parameter values in header order. When the header says so, a memory
//! snapshot follows. Adam moments and the node registry are not stored.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::memory::MemoryStore;
use crate::model::Slade;
use crate::tensor::{ParamStore, Shape, Tensor};

pub const MAGIC: &[u8; 8] = b"SLADECKP";
pub const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    /// `key = value` lines in the config-file format.
    config: String,
    params: Vec<ParamEntry>,
    memory: bool,
}

#[derive(Serialize, Deserialize)]
struct ParamEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub config: RunConfig,
    pub model: Slade,
    pub memory: Option<MemoryStore>,
}

pub fn encode_checkpoint(config: &RunConfig, model: &Slade, memory: Option<&MemoryStore>) -> Result<Vec<u8>> {
    if let Some(m) = memory {
        if m.has_staged() {
            return Err(Error::Contract("cannot checkpoint memory with staged messages".into()));
        }
    }
    let config = RunConfig {
        model: model.config().clone(),
        ..config.clone()
    };
    let header = Header {
        config: config.to_text(),
        params: model
            .params()
            .iter()
            .map(|(_, p)| ParamEntry {
                name: p.name.clone(),
                shape: p.shape().dims(),
            })
            .collect(),
        memory: memory.is_some(),
    };
    let header = serde_json::to_vec(&header)?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    for (_, p) in model.params().iter() {
        put_f64s(&mut out, p.value.data());
    }
    if let Some(m) = memory {
        put_memory(&mut out, m);
    }
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Format("not a checkpoint (bad magic)".into()));
    }
    let version = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version} (expected {VERSION})")));
    }
    let header_len = r.u64()? as usize;
    let header: Header = serde_json::from_slice(r.take(header_len)?)
        .map_err(|e| Error::Format(format!("bad header: {e}")))?;
    let config = RunConfig::parse_text(&header.config).map_err(|e| Error::Format(format!("bad config block: {e}")))?;

    let mut params = ParamStore::new();
    for entry in &header.params {
        let shape = Shape::from_dims(&entry.shape).map_err(|e| Error::Format(e.to_string()))?;
        let data = r.f64s(shape.len())?;
        params.register(entry.name.clone(), Tensor::new(shape, data)?)?;
    }
    let model = Slade::from_params(config.model.clone(), params)?;
    let memory = if header.memory { Some(r.memory()?) } else { None };
    if r.pos != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(Checkpoint { config, model, memory })
}

pub fn save_checkpoint(path: &Path, config: &RunConfig, model: &Slade, memory: Option<&MemoryStore>) -> Result<()> {
    let bytes = encode_checkpoint(config, model, memory)?;
    std::fs::write(path, bytes).map_err(|e| Error::file(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::file(path, e))?;
    decode_checkpoint(&bytes)
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f64s(out: &mut Vec<u8>, xs: &[f64]) {
    for x in xs {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

fn put_memory(out: &mut Vec<u8>, m: &MemoryStore) {
    let n = m.allocated();
    for v in [m.memory_dim, m.message_dim, m.capacity, n] {
        put_u64(out, v as u64);
    }
    put_f64s(out, &m.s);
    put_f64s(out, &m.s_prev);
    for t in &m.last_time {
        out.push(t.is_some() as u8);
        put_f64s(out, &[t.unwrap_or(0.0)]);
    }
    for b in &m.buffers {
        put_u64(out, b.len() as u64);
        for &(node, time) in b.iter() {
            put_u64(out, node as u64);
            put_f64s(out, &[time]);
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format(format!("truncated checkpoint at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Format("size overflows usize".into()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let len = n.checked_mul(8).ok_or_else(|| Error::Format("size overflow".into()))?;
        Ok(self
            .take(len)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }

    fn memory(&mut self) -> Result<MemoryStore> {
        let d = self.usize()?;
        let message_dim = self.usize()?;
        let capacity = self.usize()?;
        let n = self.usize()?;
        let cells = n.checked_mul(d).ok_or_else(|| Error::Format("size overflow".into()))?;
        let mut m = MemoryStore::new(d, message_dim, capacity);
        m.s = self.f64s(cells)?;
        m.s_prev = self.f64s(cells)?;
        m.last_time = Vec::with_capacity(n);
        for _ in 0..n {
            let flag = self.take(1)?[0];
            let t = self.f64s(1)?[0];
            m.last_time.push(match flag {
                0 => None,
                1 => Some(t),
                f => return Err(Error::Format(format!("bad timestamp flag {f}"))),
            });
        }
        m.buffers = vec![Default::default(); n];
        for node in 0..n {
            let len = self.usize()?;
            for _ in 0..len {
                let nb = self.usize()?;
                let t = self.f64s(1)?[0];
                m.record_neighbor(node, nb, t);
            }
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::small_config;
    use crate::model::{Generator, Updater};
    use crate::score::{new_memory, replay, stream_inference, InferenceConfig};
    use crate::stream::TemporalEdge;

    fn setup() -> (RunConfig, Slade, MemoryStore, Vec<TemporalEdge>) {
        let model = Slade::new(small_config(Updater::Gru, Generator::Tgat), 4).unwrap();
        let edges: Vec<TemporalEdge> = (0..40).map(|i| TemporalEdge::new(i % 7, (i * 3 + 1) % 7, i as f64)).collect();
        let mut memory = new_memory(&model);
        replay(&model, &mut memory, &edges[..30], 5).unwrap();
        let run = RunConfig {
            seed: 12,
            ..RunConfig::default()
        };
        (run, model, memory, edges)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let (run, model, memory, _) = setup();
        let bytes = encode_checkpoint(&run, &model, Some(&memory)).unwrap();
        assert_eq!(&bytes[..8], MAGIC);
        let ck = decode_checkpoint(&bytes).unwrap();
        assert_eq!(ck.config.seed, 12);
        assert_eq!(ck.config.model, *model.config());
        for ((_, a), (_, b)) in model.params().iter().zip(ck.model.params().iter()) {
            assert_eq!(a.name, b.name);
            let bits = |t: &Tensor| t.data().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&a.value), bits(&b.value));
        }
        assert_eq!(ck.memory.as_ref(), Some(&memory));
        assert_eq!(encode_checkpoint(&ck.config, &ck.model, ck.memory.as_ref()).unwrap(), bytes);
    }

    #[test]
    fn restored_memory_gives_identical_scores() {
        let (run, model, memory, edges) = setup();
        let ck = decode_checkpoint(&encode_checkpoint(&run, &model, Some(&memory)).unwrap()).unwrap();
        let cfg = InferenceConfig::default();
        let mut m1 = memory.clone();
        let a = stream_inference(&model, &mut m1, &edges[30..], 30, &cfg).unwrap();
        let mut m2 = ck.memory.unwrap();
        let b = stream_inference(&ck.model, &mut m2, &edges[30..], 30, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn corrupt_files_are_format_errors() {
        let (run, model, memory, _) = setup();
        let bytes = encode_checkpoint(&run, &model, Some(&memory)).unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_checkpoint(&bad), Err(Error::Format(_))));
        let mut bad = bytes.clone();
        bad[8] = 99;
        assert!(matches!(decode_checkpoint(&bad), Err(Error::Format(_))));
        for cut in [4, 12, 30, bytes.len() / 2, bytes.len() - 1] {
            assert!(matches!(decode_checkpoint(&bytes[..cut]), Err(Error::Format(_))), "cut {cut}");
        }
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(decode_checkpoint(&long), Err(Error::Format(_))));
    }

    #[test]
    fn no_memory_and_file_io() {
        let (run, model, _, _) = setup();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.ckpt");
        save_checkpoint(&p, &run, &model, None).unwrap();
        let ck = load_checkpoint(&p).unwrap();
        assert!(ck.memory.is_none());
        assert_eq!(ck.model.params().checksum(), model.params().checksum());
        assert!(matches!(load_checkpoint(&dir.path().join("missing")), Err(Error::File { .. })));
    }
}
