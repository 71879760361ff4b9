//! Binary checkpoint container.
//!
//! Layout (all integers little-endian u32, all reals little-endian f64):
//!
//! ```text
//! "MMLE1"
//! fusion tag, k, C, dim_x, dim_y
//! n_hidden, hidden widths...
//! n_tensors
//! per tensor: rank, dims..., data...
//! ```
//!
//! Tensors appear in [`ModelState::params`] order followed by the
//! log label prior (length C).

use std::path::Path;

use super::{EncoderParams, FusionKind, LabelEmbedding, Linear, ModelState};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::likelihood::LabelDistribution;

const MAGIC: &[u8; 5] = b"MMLE1";

pub fn encode_checkpoint(model: &ModelState, dist: &LabelDistribution) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    let put = |out: &mut Vec<u8>, v: usize| out.extend_from_slice(&(v as u32).to_le_bytes());
    let spec = model.spec();
    put(&mut out, model.fusion.tag() as usize);
    put(&mut out, spec.k);
    put(&mut out, spec.num_classes);
    put(&mut out, spec.dim_x);
    put(&mut out, spec.dim_y);
    put(&mut out, spec.hidden_layers.len());
    for &w in &spec.hidden_layers {
        put(&mut out, w);
    }
    let prior = Tensor::from_parts(vec![dist.num_classes()], dist.log_probs().to_vec());
    let mut tensors = model.params();
    tensors.push(&prior);
    put(&mut out, tensors.len());
    for t in tensors {
        put(&mut out, t.rank());
        for &d in t.shape() {
            put(&mut out, d);
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes(b.try_into().unwrap()) as usize)
    }

    fn tensor(&mut self) -> Result<Tensor> {
        let rank = self.u32()?;
        if rank > 8 {
            return Err(Error::Checkpoint(format!("implausible tensor rank {rank}")));
        }
        let shape = (0..rank).map(|_| self.u32()).collect::<Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        let raw = self.take(
            n.checked_mul(8)
                .ok_or_else(|| Error::Checkpoint("tensor too large".into()))?,
        )?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Tensor::new(shape, data).map_err(|e| Error::Checkpoint(e.to_string()))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(ModelState, LabelDistribution)> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(Error::Checkpoint("missing MMLE1 magic".into()));
    }
    let tag = r.u32()?;
    let fusion = FusionKind::from_tag(tag as u32)
        .ok_or_else(|| Error::Checkpoint(format!("unknown fusion tag {tag}")))?;
    let k = r.u32()?;
    let num_classes = r.u32()?;
    let dim_x = r.u32()?;
    let dim_y = r.u32()?;
    let n_hidden = r.u32()?;
    let hidden = (0..n_hidden).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
    let n_tensors = r.u32()?;
    let n_layers = n_hidden + 1;
    if n_tensors != 4 * n_layers + 2 {
        return Err(Error::Checkpoint(format!(
            "expected {} tensors, found {n_tensors}",
            4 * n_layers + 2
        )));
    }
    let read_encoder = |r: &mut Reader| -> Result<EncoderParams> {
        let layers = (0..n_layers)
            .map(|_| {
                Ok(Linear {
                    weight: r.tensor()?,
                    bias: r.tensor()?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        EncoderParams::new(layers)
    };
    let f = read_encoder(&mut r)?;
    let g = read_encoder(&mut r)?;
    let h = LabelEmbedding { table: r.tensor()? };
    let prior = r.tensor()?;
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes",
            bytes.len() - r.pos
        )));
    }
    let model = ModelState::from_parts(f, g, h, fusion)?;
    let spec = model.spec();
    if spec.k != k
        || spec.num_classes != num_classes
        || spec.dim_x != dim_x
        || spec.dim_y != dim_y
        || spec.hidden_layers != hidden
    {
        return Err(Error::Checkpoint(
            "header dimensions disagree with stored tensors".into(),
        ));
    }
    let dist = LabelDistribution::from_log_probs(prior.into_data())?;
    if dist.num_classes() != num_classes {
        return Err(Error::Checkpoint("label prior has the wrong length".into()));
    }
    Ok((model, dist))
}

pub fn write_checkpoint(path: &Path, model: &ModelState, dist: &LabelDistribution) -> Result<()> {
    std::fs::write(path, encode_checkpoint(model, dist)).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<(ModelState, LabelDistribution)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}
