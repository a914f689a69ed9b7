//! Embedding and parameter serialization.
//!
//! Text embeddings: header `|V| d`, then `name v_1 ... v_d` per line
//! with 6 significant digits. Binary embeddings: two little-endian
//! 64-bit counts, the rows as little-endian 32-bit floats, then the
//! node names (u32 length + UTF-8 each). Checkpoints keep full f64
//! precision behind a versioned header so resumed training replays
//! the exact trajectory.

use std::collections::HashMap;
use std::io::{BufRead, Read, Write};

use crate::error::{Error, Result};
use crate::model::{EmbeddingTable, ModelParams, RelationTransform};

const TRANSFORM_MAGIC: &[u8; 8] = b"HINTFM01";
const CHECKPOINT_MAGIC: &[u8; 8] = b"HINCKP01";

/// Embeddings keyed by external node name.
#[derive(Debug, Clone)]
pub struct NamedEmbeddings {
    pub names: Vec<String>,
    index: HashMap<String, usize>,
    pub table: EmbeddingTable,
}

impl NamedEmbeddings {
    pub fn new(names: Vec<String>, table: EmbeddingTable) -> Self {
        assert_eq!(names.len(), table.node_count());
        let index = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        NamedEmbeddings {
            names,
            index,
            table,
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.table.dim()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn vector(&self, idx: usize) -> &[f64] {
        self.table.row(crate::graph::NodeId(idx as u32))
    }
}

pub fn write_embeddings_text<W: Write>(emb: &NamedEmbeddings, out: &mut W) -> Result<()> {
    writeln!(out, "{} {}", emb.len(), emb.dim())?;
    for (i, name) in emb.names.iter().enumerate() {
        write!(out, "{name}")?;
        for v in emb.vector(i) {
            write!(out, " {v:.5e}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn read_embeddings_text<R: BufRead>(reader: R, path: &str) -> Result<NamedEmbeddings> {
    let mut lines = reader.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::Parse {
        path: path.to_string(),
        line: 1,
        msg: "missing header".into(),
    })?;
    let header = header?;
    let parse_err = |line: usize, msg: &str| Error::Parse {
        path: path.to_string(),
        line,
        msg: msg.to_string(),
    };
    let mut parts = header.split_whitespace();
    let n: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| parse_err(1, "bad node count"))?;
    let dim: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| parse_err(1, "bad dimension"))?;
    let mut names = Vec::with_capacity(n);
    let mut data = Vec::with_capacity(n * dim);
    for (i, line) in lines {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let name = fields.next().ok_or_else(|| parse_err(i + 1, "empty row"))?;
        names.push(name.to_string());
        let mut count = 0;
        for f in fields {
            let v: f64 = f
                .parse()
                .map_err(|_| parse_err(i + 1, &format!("bad value `{f}`")))?;
            data.push(v);
            count += 1;
        }
        if count != dim {
            return Err(parse_err(i + 1, &format!("expected {dim} values, got {count}")));
        }
    }
    if names.len() != n {
        return Err(parse_err(1, &format!("header says {n} rows, found {}", names.len())));
    }
    Ok(NamedEmbeddings::new(names, EmbeddingTable::from_vec(dim, data)))
}

pub fn write_embeddings_binary<W: Write>(emb: &NamedEmbeddings, out: &mut W) -> Result<()> {
    out.write_all(&(emb.len() as u64).to_le_bytes())?;
    out.write_all(&(emb.dim() as u64).to_le_bytes())?;
    for v in emb.table.as_slice() {
        out.write_all(&(*v as f32).to_le_bytes())?;
    }
    for name in &emb.names {
        out.write_all(&(name.len() as u32).to_le_bytes())?;
        out.write_all(name.as_bytes())?;
    }
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

pub fn read_embeddings_binary<R: Read>(r: &mut R, path: &str) -> Result<NamedEmbeddings> {
    let n = read_u64(r)? as usize;
    let dim = read_u64(r)? as usize;
    let mut data = Vec::with_capacity(n * dim);
    let mut buf = [0u8; 4];
    for _ in 0..n * dim {
        r.read_exact(&mut buf)?;
        data.push(f32::from_le_bytes(buf) as f64);
    }
    let mut names = Vec::with_capacity(n);
    for _ in 0..n {
        let len = read_u32(r)? as usize;
        let mut bytes = vec![0u8; len];
        r.read_exact(&mut bytes)?;
        names.push(String::from_utf8(bytes).map_err(|_| Error::Parse {
            path: path.to_string(),
            line: 0,
            msg: "invalid UTF-8 node name".into(),
        })?);
    }
    Ok(NamedEmbeddings::new(names, EmbeddingTable::from_vec(dim.max(1), data)))
}

fn write_f64s<W: Write>(out: &mut W, values: &[f64]) -> Result<()> {
    for v in values {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_f64s<R: Read>(r: &mut R, count: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(count);
    let mut buf = [0u8; 8];
    for _ in 0..count {
        r.read_exact(&mut buf)?;
        out.push(f64::from_le_bytes(buf));
    }
    Ok(out)
}

/// Full-precision checkpoint of Φ: versioned magic, counts, f64 rows.
pub fn write_embeddings_checkpoint<W: Write>(table: &EmbeddingTable, out: &mut W) -> Result<()> {
    out.write_all(CHECKPOINT_MAGIC)?;
    out.write_all(&(table.node_count() as u64).to_le_bytes())?;
    out.write_all(&(table.dim() as u64).to_le_bytes())?;
    write_f64s(out, table.as_slice())
}

pub fn read_embeddings_checkpoint<R: Read>(r: &mut R, path: &str) -> Result<EmbeddingTable> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Parse {
            path: path.to_string(),
            line: 0,
            msg: "not an embedding checkpoint".into(),
        });
    }
    let n = read_u64(r)? as usize;
    let dim = read_u64(r)? as usize;
    let data = read_f64s(r, n * dim)?;
    Ok(EmbeddingTable::from_vec(dim, data))
}

/// Transform parameters with a versioned header.
pub fn write_transforms<W: Write>(params: &ModelParams, out: &mut W) -> Result<()> {
    out.write_all(TRANSFORM_MAGIC)?;
    out.write_all(&(params.transforms.len() as u64).to_le_bytes())?;
    out.write_all(&(params.dim as u64).to_le_bytes())?;
    out.write_all(&(params.hidden as u64).to_le_bytes())?;
    for t in &params.transforms {
        for arr in [&t.w1, &t.b1, &t.w2, &t.b2, &t.w3, &t.b3] {
            write_f64s(out, arr)?;
        }
    }
    Ok(())
}

pub fn read_transforms<R: Read>(r: &mut R, path: &str) -> Result<Vec<RelationTransform>> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != TRANSFORM_MAGIC {
        return Err(Error::Parse {
            path: path.to_string(),
            line: 0,
            msg: "not a transform checkpoint".into(),
        });
    }
    let count = read_u64(r)? as usize;
    let dim = read_u64(r)? as usize;
    let hidden = read_u64(r)? as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut t = RelationTransform::zeros(dim, hidden);
        t.w1 = read_f64s(r, hidden * dim)?;
        t.b1 = read_f64s(r, hidden)?;
        t.w2 = read_f64s(r, hidden * hidden)?;
        t.b2 = read_f64s(r, hidden)?;
        t.w3 = read_f64s(r, dim * hidden)?;
        t.b3 = read_f64s(r, dim)?;
        out.push(t);
    }
    Ok(out)
}
