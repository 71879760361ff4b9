//! Reference arithmetic written directly from the model definition, kept
//! apart from the library's tape so the two can be compared.

#![allow(dead_code)]

use mmle::autodiff::Tensor;
use mmle::model::{init_model, EncoderParams, FusionKind, ModelSpec, ModelState};

pub fn encode(enc: &EncoderParams, input: &[f64]) -> Vec<f64> {
    let mut h = input.to_vec();
    let last = enc.layers.len() - 1;
    for (i, layer) in enc.layers.iter().enumerate() {
        let (rows, cols) = (layer.weight.shape()[0], layer.weight.shape()[1]);
        let w = layer.weight.data();
        let mut out = layer.bias.data().to_vec();
        for r in 0..rows {
            for c in 0..cols {
                out[c] += h[r] * w[r * cols + c];
            }
        }
        if i < last {
            out.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        h = out;
    }
    h
}

pub fn fuse(kind: FusionKind, f: &[f64], g: &[f64]) -> Vec<f64> {
    match kind {
        FusionKind::Addition => f.iter().zip(g).map(|(a, b)| a + b).collect(),
        FusionKind::Concatenation => [f, g].concat(),
        FusionKind::OuterProduct => {
            let mut v = Vec::with_capacity(f.len() * g.len());
            for a in f {
                for b in g {
                    v.push(a * b);
                }
            }
            v
        }
    }
}

pub fn logits(model: &ModelState, fused: &[f64]) -> Vec<f64> {
    let d = model.h.table.shape()[1];
    model
        .h
        .table
        .data()
        .chunks(d)
        .map(|row| row.iter().zip(fused).map(|(a, b)| a * b).sum())
        .collect()
}

pub fn normalize(v: &[f64]) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    v.iter().map(|p| p / s).collect()
}

/// `Q(z | x, y)` by direct exponentiation.
pub fn q_xy(model: &ModelState, r_z: &[f64], x: &[f64], y: &[f64]) -> Vec<f64> {
    let s = logits(
        model,
        &fuse(model.fusion, &encode(&model.f, x), &encode(&model.g, y)),
    );
    let m = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    normalize(
        &s.iter()
            .zip(r_z)
            .map(|(l, p)| p * (l - m).exp())
            .collect::<Vec<_>>(),
    )
}

/// The fully normalized joint `Q[i][j][c]` over raw alphabets, followed by
/// its two conditionals `Q(z | x_i, y_j)` and `Q(z | x_i)`.
pub struct JointOracle {
    pub table: Vec<Vec<Vec<f64>>>,
}

impl JointOracle {
    pub fn build(
        model: &ModelState,
        xs: &[Vec<f64>],
        ys: &[Vec<f64>],
        r_x: &[f64],
        r_y: &[f64],
        r_z: &[f64],
    ) -> Self {
        let fx: Vec<Vec<f64>> = xs.iter().map(|x| encode(&model.f, x)).collect();
        let gy: Vec<Vec<f64>> = ys.iter().map(|y| encode(&model.g, y)).collect();
        let mut scores = Vec::new();
        for f in &fx {
            for g in &gy {
                scores.extend(logits(model, &fuse(model.fusion, f, g)));
            }
        }
        let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let c = r_z.len();
        let mut table = vec![vec![vec![0.0; c]; ys.len()]; xs.len()];
        let mut total = 0.0;
        for i in 0..xs.len() {
            for j in 0..ys.len() {
                for z in 0..c {
                    let s = scores[(i * ys.len() + j) * c + z];
                    let w = r_x[i] * r_y[j] * r_z[z] * (s - m).exp();
                    table[i][j][z] = w;
                    total += w;
                }
            }
        }
        for plane in &mut table {
            for row in plane.iter_mut() {
                row.iter_mut().for_each(|v| *v /= total);
            }
        }
        Self { table }
    }

    pub fn z_given_xy(&self, i: usize, j: usize) -> Vec<f64> {
        normalize(&self.table[i][j])
    }

    pub fn z_given_x(&self, i: usize) -> Vec<f64> {
        let c = self.table[i][0].len();
        normalize(
            &(0..c)
                .map(|z| self.table[i].iter().map(|row| row[z]).sum())
                .collect::<Vec<_>>(),
        )
    }
}

/// A random model whose label table is scaled by `h_scale` so that the
/// logits are not all close to zero.
#[allow(clippy::too_many_arguments)]
pub fn random_model(
    dim_x: usize,
    dim_y: usize,
    hidden: &[usize],
    k: usize,
    c: usize,
    fusion: FusionKind,
    seed: u64,
    h_scale: f64,
) -> ModelState {
    let mut m = init_model(
        &ModelSpec {
            dim_x,
            dim_y,
            hidden_layers: hidden.to_vec(),
            k,
            num_classes: c,
            fusion,
        },
        seed,
    )
    .unwrap();
    m.h.table.data_mut().iter_mut().for_each(|v| *v *= h_scale);
    m
}

/// Deterministic pseudo-random vectors from a seed, independent of the
/// library's generators.
pub fn vectors(seed: u64, n: usize, dim: usize, scale: f64) -> Vec<Vec<f64>> {
    let mut s = seed
        .wrapping_mul(6364136223846793005)
        .wrapping_add(1442695040888963407);
    let mut next = || {
        s ^= s << 13;
        s ^= s >> 7;
        s ^= s << 17;
        ((s >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0) * scale
    };
    (0..n).map(|_| (0..dim).map(|_| next()).collect()).collect()
}

pub fn rows(v: &[Vec<f64>]) -> Tensor {
    Tensor::from_rows(v).unwrap()
}

pub fn max_abs(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q).abs())
        .fold(0.0, f64::max)
}

/// `Q(z | x)` with `y` summed over `pool` under weights `r_y`.
pub fn q_x(model: &ModelState, r_z: &[f64], x: &[f64], pool: &[Vec<f64>], r_y: &[f64]) -> Vec<f64> {
    let f = encode(&model.f, x);
    let scores: Vec<Vec<f64>> = pool
        .iter()
        .map(|y| logits(model, &fuse(model.fusion, &f, &encode(&model.g, y))))
        .collect();
    let m = scores
        .iter()
        .flatten()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    normalize(
        &(0..r_z.len())
            .map(|z| {
                r_z[z]
                    * scores
                        .iter()
                        .zip(r_y)
                        .map(|(s, w)| w * (s[z] - m).exp())
                        .sum::<f64>()
            })
            .collect::<Vec<_>>(),
    )
}

/// Negative log-likelihood of complete `(x, y, z)` and missing `(x, z)`
/// samples, the missing ones marginalized over `pool` with uniform weights.
pub fn nll(
    model: &ModelState,
    r_z: &[f64],
    complete: &[(Vec<f64>, Vec<f64>, usize)],
    missing: &[(Vec<f64>, usize)],
    pool: &[Vec<f64>],
) -> f64 {
    let w = vec![1.0 / pool.len() as f64; pool.len()];
    let c: f64 = complete
        .iter()
        .map(|(x, y, z)| -q_xy(model, r_z, x, y)[*z].ln())
        .sum();
    let m: f64 = missing
        .iter()
        .map(|(x, z)| -q_x(model, r_z, x, pool, &w)[*z].ln())
        .sum();
    c + m
}
