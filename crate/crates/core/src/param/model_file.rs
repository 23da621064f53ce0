//! Compressed-model file.
//!
//! Layout: magic `VLCPARAM`, u32 LE version, u32 LE header length, JSON
//! header, then one payload per tensor in header order. A pruned tensor
//! stores its keep-mask as an LSB-first bitset followed by the kept values
//! as f32 LE. A quantized tensor stores its codes packed LSB-first at
//! `bits` bits each, then scales, zeros and optional input scales as f32 LE.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::calibrate::parse_tensor_name;
use super::mask::SparsityMask;
use super::quant::{QuantSpec, QuantizedTensor};
use super::tensor::WeightTensor;
use crate::sim::{Model, ModelConfig};
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"VLCPARAM";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum CompressedTensor {
    Pruned { weights: WeightTensor, mask: SparsityMask },
    Quantized(QuantizedTensor),
}

impl CompressedTensor {
    pub fn name(&self) -> &str {
        match self {
            CompressedTensor::Pruned { weights, .. } => &weights.name,
            CompressedTensor::Quantized(q) => &q.name,
        }
    }

    /// Effective dense weights.
    pub fn weights(&self) -> WeightTensor {
        match self {
            CompressedTensor::Pruned { weights, mask } => mask.apply(weights),
            CompressedTensor::Quantized(q) => q.dequantize(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompressedModel {
    pub config: ModelConfig,
    pub method: String,
    pub tensors: Vec<CompressedTensor>,
}

impl CompressedModel {
    /// Copy of `model` with every compressed tensor substituted.
    pub fn apply_to(&self, model: &Model) -> Result<Model> {
        if model.config() != &self.config {
            return Err(Error::ShapeMismatch("compressed model was built for another config".into()));
        }
        let mut out = model.clone();
        for t in &self.tensors {
            let (layer, proj) = parse_tensor_name(t.name())
                .ok_or_else(|| Error::Config(format!("unknown tensor `{}`", t.name())))?;
            let w = t.weights();
            let lin = out
                .blocks_mut()
                .get_mut(layer)
                .and_then(|b| b.get_mut(proj))
                .ok_or_else(|| Error::Config(format!("no tensor `{}` in model", t.name())))?;
            if (lin.out_dim, lin.in_dim) != (w.rows, w.cols) {
                return Err(Error::ShapeMismatch(format!("tensor `{}`", t.name())));
            }
            lin.weight = w.data;
        }
        Ok(out)
    }

    /// Fraction of weights kept over pruned tensors, 1.0 when none are.
    pub fn density(&self) -> f64 {
        let (mut kept, mut total) = (0usize, 0usize);
        for t in &self.tensors {
            if let CompressedTensor::Pruned { mask, .. } = t {
                kept += mask.count();
                total += mask.keep.len();
            }
        }
        if total == 0 {
            1.0
        } else {
            kept as f64 / total as f64
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    method: String,
    tensors: Vec<TensorHeader>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum TensorHeader {
    Pruned {
        name: String,
        rows: usize,
        cols: usize,
        kept: usize,
    },
    Quantized {
        name: String,
        rows: usize,
        cols: usize,
        spec: QuantSpec,
        input_scales: bool,
    },
}

fn pack_bits(values: impl Iterator<Item = u32>, bits: u32, out: &mut Vec<u8>) {
    let (mut acc, mut filled) = (0u64, 0u32);
    for v in values {
        acc |= (v as u64) << filled;
        filled += bits;
        while filled >= 8 {
            out.push(acc as u8);
            acc >>= 8;
            filled -= 8;
        }
    }
    if filled > 0 {
        out.push(acc as u8);
    }
}

fn unpack_bits(bytes: &[u8], bits: u32, count: usize) -> Vec<u32> {
    let mask = (1u64 << bits) - 1;
    let (mut acc, mut filled, mut at) = (0u64, 0u32, 0usize);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        while filled < bits {
            acc |= (bytes[at] as u64) << filled;
            at += 1;
            filled += 8;
        }
        out.push((acc & mask) as u32);
        acc >>= bits;
        filled -= bits;
    }
    out
}

fn push_f32s(values: &[f32], out: &mut Vec<u8>) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn write_model_to(model: &CompressedModel, mut w: impl Write) -> Result<()> {
    let mut headers = Vec::new();
    let mut body = Vec::new();
    for t in &model.tensors {
        match t {
            CompressedTensor::Pruned { weights, mask } => {
                pack_bits(mask.keep.iter().map(|&k| k as u32), 1, &mut body);
                let kept: Vec<f32> = weights
                    .data
                    .iter()
                    .zip(&mask.keep)
                    .filter(|(_, &k)| k)
                    .map(|(&v, _)| v)
                    .collect();
                push_f32s(&kept, &mut body);
                headers.push(TensorHeader::Pruned {
                    name: weights.name.clone(),
                    rows: weights.rows,
                    cols: weights.cols,
                    kept: kept.len(),
                });
            }
            CompressedTensor::Quantized(q) => {
                pack_bits(q.codes.iter().map(|&c| c as u32), q.spec.bits, &mut body);
                push_f32s(&q.scales, &mut body);
                push_f32s(&q.zeros, &mut body);
                if let Some(t) = &q.input_scales {
                    push_f32s(t, &mut body);
                }
                headers.push(TensorHeader::Quantized {
                    name: q.name.clone(),
                    rows: q.rows,
                    cols: q.cols,
                    spec: q.spec,
                    input_scales: q.input_scales.is_some(),
                });
            }
        }
    }
    let header = serde_json::to_vec(&Header {
        config: model.config.clone(),
        method: model.method.clone(),
        tensors: headers,
    })?;
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(header.len() as u32).to_le_bytes())?;
    w.write_all(&header)?;
    w.write_all(&body)?;
    w.flush()?;
    Ok(())
}

pub fn write_model(model: &CompressedModel, path: &Path) -> Result<()> {
    write_model_to(model, BufWriter::new(File::create(path)?))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn bad(&self, reason: impl Into<String>) -> Error {
        Error::Format {
            path: self.path.to_path_buf(),
            reason: reason.into(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.at < n {
            return Err(self.bad("truncated"));
        }
        let s = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        Ok(self
            .take(n * 4)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect())
    }
}

pub fn read_model_from(mut r: impl Read, path: &Path) -> Result<CompressedModel> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut c = Cursor { bytes: &bytes, at: 0, path };
    if c.take(8)? != MAGIC {
        return Err(c.bad("bad magic"));
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(c.bad(format!("unsupported version {version}")));
    }
    let hlen = c.u32()? as usize;
    let header: Header = serde_json::from_slice(c.take(hlen)?).map_err(|e| c.bad(e.to_string()))?;
    let mut tensors = Vec::with_capacity(header.tensors.len());
    for t in header.tensors {
        match t {
            TensorHeader::Pruned { name, rows, cols, kept } => {
                let n = rows * cols;
                let keep: Vec<bool> = unpack_bits(c.take(n.div_ceil(8))?, 1, n)
                    .into_iter()
                    .map(|b| b == 1)
                    .collect();
                if keep.iter().filter(|&&k| k).count() != kept {
                    return Err(c.bad(format!("mask of `{name}` disagrees with header")));
                }
                let mut values = c.f32s(kept)?.into_iter();
                let data = keep
                    .iter()
                    .map(|&k| if k { values.next().expect("counted") } else { 0.0 })
                    .collect();
                tensors.push(CompressedTensor::Pruned {
                    weights: WeightTensor::new(name, rows, cols, data)?,
                    mask: SparsityMask { rows, cols, keep },
                });
            }
            TensorHeader::Quantized {
                name,
                rows,
                cols,
                spec,
                input_scales,
            } => {
                spec.validate()?;
                let n = rows * cols;
                let codes = unpack_bits(c.take((n * spec.bits as usize).div_ceil(8))?, spec.bits, n)
                    .into_iter()
                    .map(|v| v as u16)
                    .collect();
                let groups = rows * spec.groups_per_row(cols);
                let scales = c.f32s(groups)?;
                let zeros = c.f32s(groups)?;
                let input_scales = if input_scales { Some(c.f32s(cols)?) } else { None };
                tensors.push(CompressedTensor::Quantized(QuantizedTensor {
                    name,
                    rows,
                    cols,
                    spec,
                    codes,
                    scales,
                    zeros,
                    input_scales,
                }));
            }
        }
    }
    if c.at != bytes.len() {
        return Err(c.bad("trailing bytes"));
    }
    Ok(CompressedModel {
        config: header.config,
        method: header.method,
        tensors,
    })
}

pub fn read_model(path: &Path) -> Result<CompressedModel> {
    read_model_from(BufReader::new(File::open(path)?), path)
}
