//! Modality encoders `f` and `g`, the label table `h`, and the fusion map.

mod checkpoint;

use std::fmt;
use std::str::FromStr;

use rand::Rng;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint};

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::rng::{self, Stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FusionKind {
    Addition,
    Concatenation,
    OuterProduct,
}

impl FusionKind {
    pub const ALL: [FusionKind; 3] = [
        FusionKind::Addition,
        FusionKind::Concatenation,
        FusionKind::OuterProduct,
    ];

    /// Length of the fused vector for feature width `k`.
    pub fn fused_dim(self, k: usize) -> usize {
        match self {
            FusionKind::Addition => k,
            FusionKind::Concatenation => 2 * k,
            FusionKind::OuterProduct => k * k,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FusionKind::Addition => "addition",
            FusionKind::Concatenation => "concatenation",
            FusionKind::OuterProduct => "outer_product",
        }
    }

    pub(crate) fn tag(self) -> u32 {
        match self {
            FusionKind::Addition => 0,
            FusionKind::Concatenation => 1,
            FusionKind::OuterProduct => 2,
        }
    }

    pub(crate) fn from_tag(tag: u32) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.tag() == tag)
    }

    /// True when `φ(f, g) = φ(f, 0) + φ(0, g)`.
    pub fn is_additive(self) -> bool {
        !matches!(self, FusionKind::OuterProduct)
    }
}

impl fmt::Display for FusionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for FusionKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "addition" | "add" => Ok(FusionKind::Addition),
            "concatenation" | "concat" => Ok(FusionKind::Concatenation),
            "outer_product" | "outer" | "outerproduct" => Ok(FusionKind::OuterProduct),
            other => Err(format!("unknown fusion kind '{other}'")),
        }
    }
}

/// Fuses two feature vectors.
pub fn fuse(kind: FusionKind, f: &[f64], g: &[f64]) -> Result<Vec<f64>> {
    if f.len() != g.len() {
        return Err(Error::Shape {
            op: "fuse",
            lhs: vec![f.len()],
            rhs: vec![g.len()],
        });
    }
    Ok(match kind {
        FusionKind::Addition => f.iter().zip(g).map(|(a, b)| a + b).collect(),
        FusionKind::Concatenation => f.iter().chain(g).copied().collect(),
        FusionKind::OuterProduct => f
            .iter()
            .flat_map(|a| g.iter().map(move |b| a * b))
            .collect(),
    })
}

/// One dense layer `x W + b`, with `W` stored as `in × out`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Linear {
    pub fn in_dim(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn out_dim(&self) -> usize {
        self.weight.shape()[1]
    }
}

/// Feedforward network with relu between layers and a linear output.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderParams {
    pub layers: Vec<Linear>,
}

impl EncoderParams {
    pub fn new(layers: Vec<Linear>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Contract(
                "an encoder needs at least one layer".into(),
            ));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.weight.rank() != 2 || l.bias.shape() != [l.out_dim()] {
                return Err(Error::Contract(format!(
                    "layer {i}: weight {:?} and bias {:?} do not form a dense layer",
                    l.weight.shape(),
                    l.bias.shape()
                )));
            }
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::Contract(format!(
                    "layer {i} outputs {} values but layer {} expects {}",
                    pair[0].out_dim(),
                    i + 1,
                    pair[1].in_dim()
                )));
            }
        }
        Ok(Self { layers })
    }

    fn init(input: usize, hidden: &[usize], output: usize, rng: &mut impl Rng) -> Self {
        let mut widths = vec![input];
        widths.extend_from_slice(hidden);
        widths.push(output);
        let layers = widths
            .windows(2)
            .map(|w| Linear {
                weight: glorot(w[0], w[1], rng),
                bias: Tensor::zeros(&[w[1]]),
            })
            .collect();
        Self { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim()
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1]
            .iter()
            .map(Linear::out_dim)
            .collect()
    }
}

fn glorot(fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Tensor {
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..fan_in * fan_out)
        .map(|_| rng.random_range(-a..=a))
        .collect();
    Tensor::from_parts(vec![fan_in, fan_out], data)
}

/// Row `c` is the label feature `h(c)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelEmbedding {
    pub table: Tensor,
}

impl LabelEmbedding {
    pub fn num_classes(&self) -> usize {
        self.table.shape()[0]
    }

    pub fn width(&self) -> usize {
        self.table.shape()[1]
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelSpec {
    pub dim_x: usize,
    pub dim_y: usize,
    pub hidden_layers: Vec<usize>,
    pub k: usize,
    pub num_classes: usize,
    pub fusion: FusionKind,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelState {
    pub f: EncoderParams,
    pub g: EncoderParams,
    pub h: LabelEmbedding,
    pub fusion: FusionKind,
    pub k: usize,
    pub num_classes: usize,
}

/// Model parameters registered on a tape.
#[derive(Clone, Debug)]
pub struct BoundModel {
    pub f: Vec<(Var, Var)>,
    pub g: Vec<(Var, Var)>,
    pub h: Var,
    pub fusion: FusionKind,
    pub k: usize,
}

/// Glorot-uniform weights, zero biases, drawn from the init stream of `seed`.
pub fn init_model(spec: &ModelSpec, seed: u64) -> Result<ModelState> {
    let dims = [spec.dim_x, spec.dim_y, spec.k, spec.num_classes];
    if dims.contains(&0) || spec.hidden_layers.contains(&0) {
        return Err(Error::Contract(format!(
            "model dimensions must be positive: {spec:?}"
        )));
    }
    let mut rng = rng::stream(seed, Stream::Init);
    let f = EncoderParams::init(spec.dim_x, &spec.hidden_layers, spec.k, &mut rng);
    let g = EncoderParams::init(spec.dim_y, &spec.hidden_layers, spec.k, &mut rng);
    let d_phi = spec.fusion.fused_dim(spec.k);
    let h = LabelEmbedding {
        table: glorot(spec.num_classes, d_phi, &mut rng),
    };
    ModelState::from_parts(f, g, h, spec.fusion)
}

impl ModelState {
    pub fn from_parts(
        f: EncoderParams,
        g: EncoderParams,
        h: LabelEmbedding,
        fusion: FusionKind,
    ) -> Result<Self> {
        let f = EncoderParams::new(f.layers)?;
        let g = EncoderParams::new(g.layers)?;
        let k = f.output_dim();
        if g.output_dim() != k {
            return Err(Error::Contract(format!(
                "encoders disagree on feature width: {k} vs {}",
                g.output_dim()
            )));
        }
        if h.table.rank() != 2 || h.width() != fusion.fused_dim(k) {
            return Err(Error::Contract(format!(
                "label table {:?} does not match fused width {} of {fusion}",
                h.table.shape(),
                fusion.fused_dim(k)
            )));
        }
        let num_classes = h.num_classes();
        Ok(Self {
            f,
            g,
            h,
            fusion,
            k,
            num_classes,
        })
    }

    pub fn spec(&self) -> ModelSpec {
        ModelSpec {
            dim_x: self.f.input_dim(),
            dim_y: self.g.input_dim(),
            hidden_layers: self.f.hidden_widths(),
            k: self.k,
            num_classes: self.num_classes,
            fusion: self.fusion,
        }
    }

    pub fn fused_dim(&self) -> usize {
        self.fusion.fused_dim(self.k)
    }

    /// Parameters in canonical order: f layers, g layers, then h.
    pub fn params(&self) -> Vec<&Tensor> {
        let mut out = Vec::new();
        for l in self.f.layers.iter().chain(&self.g.layers) {
            out.push(&l.weight);
            out.push(&l.bias);
        }
        out.push(&self.h.table);
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for l in self.f.layers.iter_mut().chain(self.g.layers.iter_mut()) {
            out.push(&mut l.weight);
            out.push(&mut l.bias);
        }
        out.push(&mut self.h.table);
        out
    }

    pub fn num_params(&self) -> usize {
        self.params().iter().map(|t| t.len()).sum()
    }

    /// Rebuilds a model of the same architecture from tensors in
    /// [`params`](Self::params) order.
    pub fn with_params(&self, params: Vec<Tensor>) -> Result<Self> {
        let mut out = self.clone();
        if params.len() != out.params().len() {
            return Err(Error::Contract("parameter count mismatch".into()));
        }
        for (dst, src) in out.params_mut().into_iter().zip(params) {
            if dst.shape() != src.shape() {
                return Err(Error::Shape {
                    op: "with_params",
                    lhs: dst.shape().to_vec(),
                    rhs: src.shape().to_vec(),
                });
            }
            *dst = src;
        }
        Ok(out)
    }

    pub fn bind(&self, tape: &mut Tape) -> BoundModel {
        let mut bind_layers = |layers: &[Linear]| -> Vec<(Var, Var)> {
            layers
                .iter()
                .map(|l| (tape.param(l.weight.clone()), tape.param(l.bias.clone())))
                .collect()
        };
        let f = bind_layers(&self.f.layers);
        let g = bind_layers(&self.g.layers);
        let h = tape.param(self.h.table.clone());
        BoundModel {
            f,
            g,
            h,
            fusion: self.fusion,
            k: self.k,
        }
    }

    /// Reuses variables already on a tape, given in [`params`](Self::params)
    /// order. Gradient checks use this to drive the model from perturbed
    /// copies of its parameters.
    pub fn bind_vars(&self, vars: &[Var]) -> Result<BoundModel> {
        if vars.len() != self.params().len() {
            return Err(Error::Contract(format!(
                "expected {} parameter variables, got {}",
                self.params().len(),
                vars.len()
            )));
        }
        let nf = self.f.layers.len();
        let pairs: Vec<(Var, Var)> = vars[..vars.len() - 1]
            .chunks(2)
            .map(|c| (c[0], c[1]))
            .collect();
        Ok(BoundModel {
            f: pairs[..nf].to_vec(),
            g: pairs[nf..].to_vec(),
            h: vars[vars.len() - 1],
            fusion: self.fusion,
            k: self.k,
        })
    }

    /// Same as [`bind`](Self::bind) but registers everything as constants.
    pub fn bind_frozen(&self, tape: &mut Tape) -> BoundModel {
        let mut bind_layers = |layers: &[Linear]| -> Vec<(Var, Var)> {
            layers
                .iter()
                .map(|l| {
                    (
                        tape.constant(l.weight.clone()),
                        tape.constant(l.bias.clone()),
                    )
                })
                .collect()
        };
        let f = bind_layers(&self.f.layers);
        let g = bind_layers(&self.g.layers);
        let h = tape.constant(self.h.table.clone());
        BoundModel {
            f,
            g,
            h,
            fusion: self.fusion,
            k: self.k,
        }
    }

    /// `f(x)` for a batch `x` of shape `batch × dim_x`.
    pub fn encode_x(&self, x: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let m = self.bind_frozen(&mut tape);
        let xv = tape.constant(x.clone());
        let out = m.encode_x(&mut tape, xv)?;
        Ok(tape.value(out).clone())
    }

    /// `g(y)` for a batch `y` of shape `batch × dim_y`.
    pub fn encode_y(&self, y: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let m = self.bind_frozen(&mut tape);
        let yv = tape.constant(y.clone());
        let out = m.encode_y(&mut tape, yv)?;
        Ok(tape.value(out).clone())
    }

    /// `logits[c] = fusedᵀ h(c)`.
    pub fn label_scores(&self, fused: &[f64]) -> Result<Vec<f64>> {
        if fused.len() != self.fused_dim() {
            return Err(Error::Shape {
                op: "label_scores",
                lhs: vec![fused.len()],
                rhs: self.h.table.shape().to_vec(),
            });
        }
        Ok(self
            .h
            .table
            .rows()
            .map(|row| row.iter().zip(fused).map(|(a, b)| a * b).sum())
            .collect())
    }
}

impl BoundModel {
    pub fn encode_x(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        encode(tape, &self.f, x)
    }

    pub fn encode_y(&self, tape: &mut Tape, y: Var) -> Result<Var> {
        encode(tape, &self.g, y)
    }

    /// Row-wise fusion of two `batch × k` feature matrices.
    pub fn fuse(&self, tape: &mut Tape, f: Var, g: Var) -> Result<Var> {
        match self.fusion {
            FusionKind::Addition => tape.add(f, g),
            FusionKind::Concatenation => tape.concat(f, g),
            FusionKind::OuterProduct => tape.outer(f, g),
        }
    }

    /// `batch × d_φ` fused features to `batch × C` logits.
    pub fn label_scores(&self, tape: &mut Tape, fused: Var) -> Result<Var> {
        let ht = tape.transpose(self.h)?;
        tape.matmul(fused, ht)
    }
}

fn encode(tape: &mut Tape, layers: &[(Var, Var)], input: Var) -> Result<Var> {
    let in_shape = tape.shape(input).to_vec();
    let first_in = tape.shape(layers[0].0)[0];
    if in_shape.len() != 2 || in_shape[1] != first_in {
        return Err(Error::Shape {
            op: "encode",
            lhs: in_shape,
            rhs: tape.shape(layers[0].0).to_vec(),
        });
    }
    let batch = in_shape[0];
    let ones = tape.constant(Tensor::filled(&[batch, 1], 1.0));
    let mut h = input;
    for (i, &(w, b)) in layers.iter().enumerate() {
        if i > 0 {
            h = tape.relu(h)?;
        }
        let out = tape.shape(w)[1];
        let xw = tape.matmul(h, w)?;
        let b_row = tape.reshape(b, vec![1, out])?;
        let bias = tape.matmul(ones, b_row)?;
        h = tape.add(xw, bias)?;
    }
    Ok(h)
}
