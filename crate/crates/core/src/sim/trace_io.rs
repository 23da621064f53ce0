//! Attention-trace files.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic    8 bytes   "VLCTRACE"
//! version  u32       1
//! hlen     u32       byte length of the JSON header
//! header   hlen      UTF-8 JSON, see [`TraceHeader`]
//! body     f32[]     for each layer, for each head: n_layer x n_layer attention, row-major
//! cls      f32[]     visual-encoder attention (header.visual values) when header.has_cls
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::sequence::Spans;
use super::trace::{AttentionMatrix, AttentionTrace, LayerTrace};
use crate::error::{Error, Result};

pub const TRACE_MAGIC: &[u8; 8] = b"VLCTRACE";
pub const TRACE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub num_layers: usize,
    pub num_heads: usize,
    pub visual: usize,
    pub text: usize,
    /// Original token indices present at each layer.
    pub positions: Vec<Vec<usize>>,
    /// Visual tokens present at each layer.
    pub layer_visual: Vec<usize>,
    pub has_cls: bool,
}

pub fn write_trace(trace: &AttentionTrace, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_trace_to(trace, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_trace_to(trace: &AttentionTrace, w: &mut impl Write) -> Result<()> {
    let header = TraceHeader {
        num_layers: trace.num_layers(),
        num_heads: trace.num_heads(),
        visual: trace.spans.visual,
        text: trace.spans.text,
        positions: trace.layers.iter().map(|l| l.positions.clone()).collect(),
        layer_visual: trace.layers.iter().map(|l| l.spans.visual).collect(),
        has_cls: trace.cls_attention.is_some(),
    };
    let json = serde_json::to_vec(&header)?;
    w.write_all(TRACE_MAGIC)?;
    w.write_all(&TRACE_VERSION.to_le_bytes())?;
    w.write_all(&(json.len() as u32).to_le_bytes())?;
    w.write_all(&json)?;
    for layer in &trace.layers {
        for head in &layer.heads {
            write_f32s(w, head.as_slice())?;
        }
    }
    if let Some(cls) = &trace.cls_attention {
        write_f32s(w, cls)?;
    }
    Ok(())
}

pub fn read_trace(path: &Path) -> Result<AttentionTrace> {
    let mut r = BufReader::new(File::open(path)?);
    read_trace_from(&mut r).map_err(|e| match e {
        Error::Format { reason, .. } => Error::Format {
            path: path.to_path_buf(),
            reason,
        },
        other => other,
    })
}

fn malformed(reason: impl Into<String>) -> Error {
    Error::Format {
        path: Default::default(),
        reason: reason.into(),
    }
}

pub fn read_trace_from(r: &mut impl Read) -> Result<AttentionTrace> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|_| malformed("truncated magic"))?;
    if &magic != TRACE_MAGIC {
        return Err(malformed("bad magic"));
    }
    let version = read_u32(r)?;
    if version != TRACE_VERSION {
        return Err(malformed(format!("unsupported version {version}")));
    }
    let hlen = read_u32(r)? as usize;
    let mut json = vec![0u8; hlen];
    r.read_exact(&mut json).map_err(|_| malformed("truncated header"))?;
    let header: TraceHeader =
        serde_json::from_slice(&json).map_err(|e| malformed(format!("header: {e}")))?;
    let spans = Spans::new(header.visual, header.text);
    if header.positions.len() != header.num_layers || header.layer_visual.len() != header.num_layers {
        return Err(malformed("per-layer arrays do not match num_layers"));
    }
    let mut layers = Vec::with_capacity(header.num_layers);
    for (positions, &visual) in header.positions.iter().zip(&header.layer_visual) {
        let n = positions.len();
        if positions.iter().any(|&p| p >= spans.len()) || visual > n || n - visual != header.text {
            return Err(malformed("layer positions inconsistent with spans"));
        }
        let mut heads = Vec::with_capacity(header.num_heads);
        for _ in 0..header.num_heads {
            heads.push(AttentionMatrix::from_rows(n, read_f32s(r, n * n)?));
        }
        layers.push(LayerTrace {
            positions: positions.clone(),
            spans: Spans::new(visual, header.text),
            heads,
        });
    }
    let cls_attention = if header.has_cls {
        Some(read_f32s(r, header.visual)?)
    } else {
        None
    };
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(malformed("trailing bytes after body"));
    }
    Ok(AttentionTrace {
        spans,
        layers,
        cls_attention,
    })
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(|_| malformed("truncated integer"))?;
    Ok(u32::from_le_bytes(b))
}

fn write_f32s(w: &mut impl Write, xs: &[f32]) -> Result<()> {
    for x in xs {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

fn read_f32s(r: &mut impl Read, n: usize) -> Result<Vec<f32>> {
    let mut buf = vec![0u8; n * 4];
    r.read_exact(&mut buf).map_err(|_| malformed("truncated body"))?;
    Ok(buf
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}
