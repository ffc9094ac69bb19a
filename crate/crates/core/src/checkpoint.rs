//! Binary checkpoint container for a network and, optionally, the mask,
//! scores and compensations computed for it.
//!
//! All integers and floats are little-endian; floats are stored as raw IEEE
//! 754 bits so a round trip is exact.
//!
//! ```text
//! magic    4 bytes  "ECPK"
//! version  u16      1
//! count    u32      number of records
//! record*  tag u8 | payload length u64 | payload
//!
//! tag 1  network       u32 layers, then per layer:
//!                      u32 rows, u32 cols, u8 activation (0 identity,
//!                      1 relu, 2 tanh, 3 prelu), f64 slope (0 unless prelu),
//!                      rows·cols f64 weights (row-major), rows f64 bias
//! tag 2  mask          u32 layers, then per layer u32 rows, u32 cols,
//!                      rows·cols u8 (1 keep, 0 pruned)
//! tag 3  scores        u32 layers, then per layer u32 rows, u32 cols,
//! tag 4  compensation  rows·cols f64
//! tag 5  optimizer     u64 step, then the first and the second moment, each
//!                      u32 layers and per layer u32 rows, u32 cols,
//!                      rows·cols f64 weights, rows f64 bias, f64 slope
//! ```
//!
//! Each tag appears at most once.

use std::path::Path;

use crate::matrix::Matrix;
use crate::network::{Activation, Layer, Network};
use crate::network::{LayerParams, ParamSet};
use crate::pruning::{CompensationSet, MaskLayer, MaskSet, ScoreSet};
use crate::training::OptimizerState;
use crate::{Error, Result};

pub const MAGIC: [u8; 4] = *b"ECPK";
pub const VERSION: u16 = 1;

const TAG_NETWORK: u8 = 1;
const TAG_MASK: u8 = 2;
const TAG_SCORES: u8 = 3;
const TAG_COMPENSATION: u8 = 4;
const TAG_OPTIMIZER: u8 = 5;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Checkpoint {
    pub network: Option<Network>,
    pub mask: Option<MaskSet>,
    pub scores: Option<ScoreSet>,
    pub compensation: Option<CompensationSet>,
    /// Adam state at the time the network was saved.
    pub optimizer: Option<OptimizerState>,
}

impl Checkpoint {
    pub fn from_network(net: Network) -> Self {
        Self {
            network: Some(net),
            ..Self::default()
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut records: Vec<(u8, Vec<u8>)> = Vec::new();
        if let Some(net) = &self.network {
            records.push((TAG_NETWORK, encode_network(net)));
        }
        if let Some(mask) = &self.mask {
            let mut p = Vec::new();
            put_u32(&mut p, mask.layers().len());
            for m in mask.layers() {
                let (r, c) = m.shape();
                put_u32(&mut p, r);
                put_u32(&mut p, c);
                p.extend(m.as_slice().iter().map(|&k| u8::from(k)));
            }
            records.push((TAG_MASK, p));
        }
        if let Some(s) = &self.scores {
            records.push((TAG_SCORES, encode_matrices(s.layers())));
        }
        if let Some(c) = &self.compensation {
            records.push((TAG_COMPENSATION, encode_matrices(c.layers())));
        }
        if let Some(o) = &self.optimizer {
            let mut p = Vec::new();
            p.extend_from_slice(&o.step.to_le_bytes());
            encode_params(&mut p, &o.first_moment);
            encode_params(&mut p, &o.second_moment);
            records.push((TAG_OPTIMIZER, p));
        }

        let mut out = Vec::new();
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        put_u32(&mut out, records.len());
        for (tag, payload) in records {
            out.push(tag);
            out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
            out.extend_from_slice(&payload);
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(ck_err(0, "bad magic"));
        }
        let version = u16::from_le_bytes(r.array()?);
        if version != VERSION {
            return Err(ck_err(4, format!("unsupported version {version}")));
        }
        let count = r.u32()?;
        let mut ck = Checkpoint::default();
        for _ in 0..count {
            let tag_pos = r.pos;
            let tag = r.u8()?;
            let len = r.u64()?;
            let len = usize::try_from(len).map_err(|_| ck_err(tag_pos + 1, "record too large"))?;
            let start = r.pos;
            let payload = r.take(len)?;
            let mut p = Reader {
                bytes: payload,
                pos: 0,
            };
            let dup = || ck_err(tag_pos, format!("duplicate record tag {tag}"));
            match tag {
                TAG_NETWORK => {
                    if ck.network.is_some() {
                        return Err(dup());
                    }
                    ck.network = Some(decode_network(&mut p).map_err(|e| shift(e, start))?);
                }
                TAG_MASK => {
                    if ck.mask.is_some() {
                        return Err(dup());
                    }
                    ck.mask = Some(decode_mask(&mut p).map_err(|e| shift(e, start))?);
                }
                TAG_SCORES => {
                    if ck.scores.is_some() {
                        return Err(dup());
                    }
                    ck.scores = Some(ScoreSet::new(decode_matrices(&mut p).map_err(|e| shift(e, start))?));
                }
                TAG_COMPENSATION => {
                    if ck.compensation.is_some() {
                        return Err(dup());
                    }
                    ck.compensation =
                        Some(CompensationSet::new(decode_matrices(&mut p).map_err(|e| shift(e, start))?));
                }
                TAG_OPTIMIZER => {
                    if ck.optimizer.is_some() {
                        return Err(dup());
                    }
                    ck.optimizer = Some(decode_optimizer(&mut p).map_err(|e| shift(e, start))?);
                }
                other => return Err(ck_err(tag_pos, format!("unknown record tag {other}"))),
            }
            if p.pos != payload.len() {
                return Err(ck_err(start + p.pos, "trailing bytes in record"));
            }
        }
        if r.pos != bytes.len() {
            return Err(ck_err(r.pos, "trailing bytes after last record"));
        }
        if let Some(net) = &ck.network {
            let at = |what: &str| ck_err(bytes.len(), format!("{what} shapes do not match the network"));
            if let Some(m) = &ck.mask {
                m.check_shapes(net).map_err(|_| at("mask"))?;
            }
            if let Some(s) = &ck.scores {
                s.check_shapes(net).map_err(|_| at("score"))?;
            }
            if let Some(c) = &ck.compensation {
                c.check_shapes(net).map_err(|_| at("compensation"))?;
            }
            if let Some(o) = &ck.optimizer {
                let fits = |p: &ParamSet| {
                    p.layers.len() == net.num_layers()
                        && p.layers
                            .iter()
                            .zip(net.layers())
                            .all(|(p, l)| p.weights.shape() == l.weights().shape())
                };
                if !(fits(&o.first_moment) && fits(&o.second_moment)) {
                    return Err(at("optimizer"));
                }
            }
        }
        Ok(ck)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.encode()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::decode(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}

fn ck_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Checkpoint {
        offset,
        message: message.into(),
    }
}

fn shift(e: Error, by: usize) -> Error {
    match e {
        Error::Checkpoint { offset, message } => Error::Checkpoint {
            offset: offset + by,
            message,
        },
        other => other,
    }
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

fn put_f64s(out: &mut Vec<u8>, values: &[f64]) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn encode_network(net: &Network) -> Vec<u8> {
    let mut p = Vec::new();
    put_u32(&mut p, net.num_layers());
    for layer in net.layers() {
        put_u32(&mut p, layer.out_dim());
        put_u32(&mut p, layer.in_dim());
        let (code, slope) = match layer.activation() {
            Activation::Identity => (0u8, 0.0),
            Activation::ReLU => (1, 0.0),
            Activation::Tanh => (2, 0.0),
            Activation::PReLU(s) => (3, s),
        };
        p.push(code);
        p.extend_from_slice(&slope.to_le_bytes());
        put_f64s(&mut p, layer.weights().as_slice());
        put_f64s(&mut p, layer.bias());
    }
    p
}

fn encode_matrices(layers: &[Matrix]) -> Vec<u8> {
    let mut p = Vec::new();
    put_u32(&mut p, layers.len());
    for m in layers {
        put_u32(&mut p, m.rows());
        put_u32(&mut p, m.cols());
        put_f64s(&mut p, m.as_slice());
    }
    p
}

fn encode_params(p: &mut Vec<u8>, params: &ParamSet) {
    put_u32(p, params.layers.len());
    for l in &params.layers {
        put_u32(p, l.weights.rows());
        put_u32(p, l.weights.cols());
        put_f64s(p, l.weights.as_slice());
        put_f64s(p, &l.bias);
        p.extend_from_slice(&l.slope.to_le_bytes());
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
            .ok_or_else(|| ck_err(self.pos, format!("truncated: need {n} bytes")))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        let s = self.take(N)?;
        let mut a = [0u8; N];
        a.copy_from_slice(s);
        Ok(a)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.array()?) as usize)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    /// Reads `n` floats after checking they fit, so corrupt counts cannot
    /// trigger huge allocations.
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = n
            .checked_mul(8)
            .ok_or_else(|| ck_err(self.pos, "element count overflow"))?;
        let raw = self.take(bytes)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect())
    }

    fn dims(&mut self) -> Result<(usize, usize, usize)> {
        let at = self.pos;
        let rows = self.u32()?;
        let cols = self.u32()?;
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| ck_err(at, "dimension overflow"))?;
        Ok((rows, cols, len))
    }
}

fn decode_network(r: &mut Reader<'_>) -> Result<Network> {
    let n = r.u32()?;
    let mut layers = Vec::new();
    for _ in 0..n {
        let at = r.pos;
        let (rows, cols, len) = r.dims()?;
        let code_at = r.pos;
        let code = r.u8()?;
        let slope = r.f64()?;
        let activation = match code {
            0 => Activation::Identity,
            1 => Activation::ReLU,
            2 => Activation::Tanh,
            3 => Activation::PReLU(slope),
            other => return Err(ck_err(code_at, format!("unknown activation code {other}"))),
        };
        let weights = Matrix::new(rows, cols, r.f64s(len)?).map_err(|e| ck_err(at, e.to_string()))?;
        let bias = r.f64s(rows)?;
        layers.push(Layer::new(weights, bias, activation).map_err(|e| ck_err(at, e.to_string()))?);
    }
    Network::new(layers).map_err(|e| ck_err(0, e.to_string()))
}

fn decode_mask(r: &mut Reader<'_>) -> Result<MaskSet> {
    let n = r.u32()?;
    let mut layers = Vec::new();
    for _ in 0..n {
        let (rows, cols, len) = r.dims()?;
        let at = r.pos;
        let raw = r.take(len)?;
        if let Some(p) = raw.iter().position(|&b| b > 1) {
            return Err(ck_err(at + p, "mask entries must be 0 or 1"));
        }
        layers.push(MaskLayer::new(rows, cols, raw.iter().map(|&b| b == 1).collect())?);
    }
    Ok(MaskSet::new(layers))
}

fn decode_params(r: &mut Reader<'_>) -> Result<ParamSet> {
    let n = r.u32()?;
    let mut layers = Vec::new();
    for _ in 0..n {
        let (rows, cols, len) = r.dims()?;
        let weights = Matrix::new(rows, cols, r.f64s(len)?)?;
        let bias = r.f64s(rows)?;
        let slope = r.f64()?;
        layers.push(LayerParams { weights, bias, slope });
    }
    Ok(ParamSet { layers })
}

fn decode_optimizer(r: &mut Reader<'_>) -> Result<OptimizerState> {
    let step = r.u64()?;
    let first_moment = decode_params(r)?;
    let second_moment = decode_params(r)?;
    if first_moment.layers.len() != second_moment.layers.len()
        || first_moment
            .layers
            .iter()
            .zip(&second_moment.layers)
            .any(|(a, b)| a.weights.shape() != b.weights.shape())
    {
        return Err(ck_err(r.pos, "optimizer moments differ in shape"));
    }
    Ok(OptimizerState {
        first_moment,
        second_moment,
        step,
    })
}

fn decode_matrices(r: &mut Reader<'_>) -> Result<Vec<Matrix>> {
    let n = r.u32()?;
    let mut layers = Vec::new();
    for _ in 0..n {
        let (rows, cols, len) = r.dims()?;
        layers.push(Matrix::new(rows, cols, r.f64s(len)?)?);
    }
    Ok(layers)
}
