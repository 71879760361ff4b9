//! Generalized-softmax joint model and the two conditionals used for training.
//!
//! The joint over `(x, y, z)` is proportional to
//! `R_X(x) R_Y(y) R_Z(z) exp(φ(f(x), g(y))ᵀ h(z))`. Conditioning on `(x, y)`
//! gives the complete-sample likelihood; conditioning on `x` alone requires
//! marginalizing `y` over the observed candidate pool with weights `R_Y`.
//! Everything is computed in the log domain.

use crate::autodiff::{log_sum_exp, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::model::{fuse, BoundModel, ModelState};

/// Empirical label prior `R_Z`, stored as log-probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelDistribution {
    log_probs: Vec<f64>,
}

impl LabelDistribution {
    /// `R_Z(c) = counts[c] / Σ counts`. Every class must be observed.
    pub fn from_counts(counts: &[usize]) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::Contract(
                "label distribution needs at least one class".into(),
            ));
        }
        if let Some(c) = counts.iter().position(|&n| n == 0) {
            return Err(Error::MissingClass(c));
        }
        let total: usize = counts.iter().sum();
        let log_total = (total as f64).ln();
        Ok(Self {
            log_probs: counts
                .iter()
                .map(|&n| (n as f64).ln() - log_total)
                .collect(),
        })
    }

    pub fn from_probs(probs: &[f64]) -> Result<Self> {
        Self::from_log_probs(probs.iter().map(|p| p.ln()).collect())
    }

    pub fn from_log_probs(log_probs: Vec<f64>) -> Result<Self> {
        if log_probs.is_empty() || log_probs.iter().any(|v| !v.is_finite()) {
            return Err(Error::Contract(
                "label log-probabilities must be finite and non-empty".into(),
            ));
        }
        let mass: f64 = log_probs.iter().map(|v| v.exp()).sum();
        if (mass - 1.0).abs() > 1e-9 {
            return Err(Error::Contract(format!(
                "label distribution sums to {mass}, not 1"
            )));
        }
        Ok(Self { log_probs })
    }

    pub fn uniform(num_classes: usize) -> Self {
        Self {
            log_probs: vec![-(num_classes as f64).ln(); num_classes],
        }
    }

    pub fn log_probs(&self) -> &[f64] {
        &self.log_probs
    }

    pub fn probs(&self) -> Vec<f64> {
        self.log_probs.iter().map(|v| v.exp()).collect()
    }

    pub fn num_classes(&self) -> usize {
        self.log_probs.len()
    }
}

/// Observed `y` values over which the missing modality is marginalized,
/// with log weights `log R_Y`.
///
/// The raw observations are kept rather than their encodings so that `g` is
/// re-applied with the current parameters on every evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidatePool {
    observations: Tensor,
    log_weights: Vec<f64>,
}

impl CandidatePool {
    /// Every row weighted `1 / M`, duplicates counted with multiplicity.
    pub fn uniform(observations: Tensor) -> Result<Self> {
        if observations.rank() != 2 {
            return Err(Error::Contract(
                "candidate pool must be an M × dim_y matrix".into(),
            ));
        }
        let m = observations.shape()[0];
        Ok(Self {
            observations,
            log_weights: vec![-(m as f64).ln(); m],
        })
    }

    pub fn with_weights(observations: Tensor, weights: &[f64]) -> Result<Self> {
        if observations.rank() != 2 || observations.shape()[0] != weights.len() {
            return Err(Error::Contract(format!(
                "{} weights for a pool of shape {:?}",
                weights.len(),
                observations.shape()
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 || weights.iter().any(|&w| w <= 0.0) {
            return Err(Error::Contract(
                "pool weights must be positive and sum to 1".into(),
            ));
        }
        Ok(Self {
            observations,
            log_weights: weights.iter().map(|w| w.ln()).collect(),
        })
    }

    pub fn observations(&self) -> &Tensor {
        &self.observations
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn len(&self) -> usize {
        self.log_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_weights.is_empty()
    }

    /// The candidate features `g(y_m)` under `model`.
    pub fn encode(&self, model: &ModelState) -> Result<Tensor> {
        model.encode_y(&self.observations)
    }
}

/// Modality-complete samples `(x, y, z)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CompleteBatch {
    pub x: Tensor,
    pub y: Tensor,
    pub labels: Vec<usize>,
}

/// Modality-missing samples `(x, z)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MissingBatch {
    pub x: Tensor,
    pub labels: Vec<usize>,
}

impl CompleteBatch {
    pub fn new(x: Tensor, y: Tensor, labels: Vec<usize>) -> Result<Self> {
        check_rows("complete batch", &x, labels.len())?;
        check_rows("complete batch", &y, labels.len())?;
        Ok(Self { x, y, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

impl MissingBatch {
    pub fn new(x: Tensor, labels: Vec<usize>) -> Result<Self> {
        check_rows("missing batch", &x, labels.len())?;
        Ok(Self { x, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

fn check_rows(what: &str, t: &Tensor, n: usize) -> Result<()> {
    if t.rank() != 2 || t.shape()[0] != n {
        return Err(Error::DimensionMismatch(format!(
            "{what}: features {:?} for {n} labels",
            t.shape()
        )));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub complete_term: f64,
    pub missing_term: f64,
    pub n_complete: usize,
    pub n_missing: usize,
}

/// The loss terms as tape variables.
#[derive(Clone, Copy, Debug)]
pub struct LossTerms {
    pub total: Var,
    pub complete: Option<Var>,
    pub missing: Option<Var>,
    pub n_complete: usize,
    pub n_missing: usize,
}

impl LossTerms {
    pub(crate) fn combine(
        tape: &mut Tape,
        complete: Option<(Var, usize)>,
        missing: Option<(Var, usize)>,
    ) -> Result<Self> {
        let total = match (complete, missing) {
            (Some((c, _)), Some((m, _))) => tape.add(c, m)?,
            (Some((v, _)), None) | (None, Some((v, _))) => v,
            (None, None) => return Err(Error::EmptyBatch),
        };
        Ok(Self {
            total,
            complete: complete.map(|c| c.0),
            missing: missing.map(|m| m.0),
            n_complete: complete.map_or(0, |c| c.1),
            n_missing: missing.map_or(0, |m| m.1),
        })
    }

    pub fn breakdown(&self, tape: &Tape) -> LossBreakdown {
        let get = |v: Option<Var>| v.map_or(0.0, |v| tape.value(v).data()[0]);
        LossBreakdown {
            total: tape.value(self.total).data()[0],
            complete_term: get(self.complete),
            missing_term: get(self.missing),
            n_complete: self.n_complete,
            n_missing: self.n_missing,
        }
    }
}

/// `batch × C` constant holding `log R_Z` in every row.
fn prior_rows(tape: &mut Tape, dist: &LabelDistribution, batch: usize) -> Var {
    let data = dist.log_probs().repeat(batch);
    tape.constant(Tensor::from_parts(vec![batch, dist.num_classes()], data))
}

fn check_classes(tape: &Tape, m: &BoundModel, dist: &LabelDistribution) -> Result<()> {
    let c = tape.shape(m.h)[0];
    if c != dist.num_classes() {
        return Err(Error::DimensionMismatch(format!(
            "model has {c} classes but the label distribution has {}",
            dist.num_classes()
        )));
    }
    Ok(())
}

/// Subtracts the row-wise log-sum-exp so each row is a log-distribution.
pub fn log_normalize_rows(tape: &mut Tape, scores: Var) -> Result<Var> {
    let shape = tape.shape(scores).to_vec();
    let (b, c) = (shape[0], shape[1]);
    let lse = tape.log_sum_exp(scores)?;
    let col = tape.reshape(lse, vec![b, 1])?;
    let ones = tape.constant(Tensor::filled(&[1, c], 1.0));
    let spread = tape.matmul(col, ones)?;
    tape.sub(scores, spread)
}

/// Log `Q(z | x, y)` for a batch, as a `batch × C` variable.
pub fn log_q_xy_on_tape(
    tape: &mut Tape,
    m: &BoundModel,
    dist: &LabelDistribution,
    x: Var,
    y: Var,
) -> Result<Var> {
    check_classes(tape, m, dist)?;
    let f = m.encode_x(tape, x)?;
    let g = m.encode_y(tape, y)?;
    log_q_from_features(tape, m, dist, f, g)
}

/// Log `Q(z | x, y)` from already-encoded `batch × k` features.
pub fn log_q_from_features(
    tape: &mut Tape,
    m: &BoundModel,
    dist: &LabelDistribution,
    f: Var,
    g: Var,
) -> Result<Var> {
    let fused = m.fuse(tape, f, g)?;
    let logits = m.label_scores(tape, fused)?;
    let batch = tape.shape(logits)[0];
    let prior = prior_rows(tape, dist, batch);
    let scores = tape.add(logits, prior)?;
    log_normalize_rows(tape, scores)
}

/// Log `Q(z | x)` for a batch, marginalizing `y` over the candidate pool.
///
/// `pool_y` is the `M × dim_y` matrix of candidate observations; it is
/// encoded on this tape so gradients reach `g` through the candidates.
pub fn log_q_x_on_tape(
    tape: &mut Tape,
    m: &BoundModel,
    dist: &LabelDistribution,
    x: Var,
    pool_y: Var,
    pool_log_weights: &[f64],
) -> Result<Var> {
    check_classes(tape, m, dist)?;
    let pool_size = tape.shape(pool_y)[0];
    if pool_size != pool_log_weights.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} pool weights for {pool_size} candidates",
            pool_log_weights.len()
        )));
    }
    let f = m.encode_x(tape, x)?;
    let g = m.encode_y(tape, pool_y)?;
    let batch = tape.shape(f)[0];
    let c = tape.shape(m.h)[0];

    // score[b, c] = log Σ_m R_Y(m) exp(φ(f_b, g_m)ᵀ h_c)
    let marginal = if m.fusion.is_additive() {
        // φ(f, g)ᵀh = φ(f, 0)ᵀh + φ(0, g)ᵀh, so the sum over candidates
        // factors into a per-class offset shared by the whole batch.
        let zero_f = tape.constant(Tensor::zeros(&[pool_size, m.k]));
        let zero_g = tape.constant(Tensor::zeros(&[batch, m.k]));
        let fx = m.fuse(tape, f, zero_g)?;
        let from_x = m.label_scores(tape, fx)?;
        let gy = m.fuse(tape, zero_f, g)?;
        let from_y = m.label_scores(tape, gy)?;
        let per_class = tape.transpose(from_y)?;
        let weights = tape.constant(Tensor::from_parts(
            vec![c, pool_size],
            pool_log_weights.repeat(c),
        ));
        let weighted = tape.add(per_class, weights)?;
        let offset = tape.log_sum_exp(weighted)?;
        let offset_row = tape.reshape(offset, vec![1, c])?;
        let ones = tape.constant(Tensor::filled(&[batch, 1], 1.0));
        let spread = tape.matmul(ones, offset_row)?;
        tape.add(from_x, spread)?
    } else {
        // φ(f, g)ᵀh_c = fᵀ H_c g with H_c the k × k reshaping of row c.
        let k = m.k;
        let cube = tape.reshape(m.h, vec![c, k, k])?;
        let swapped = tape.permute(cube, vec![1, 0, 2])?;
        let h_cols = tape.reshape(swapped, vec![k, c * k])?;
        let fh = tape.matmul(f, h_cols)?;
        let fh = tape.reshape(fh, vec![batch * c, k])?;
        let gt = tape.transpose(g)?;
        let pair = tape.matmul(fh, gt)?;
        let weights = tape.constant(Tensor::from_parts(
            vec![batch * c, pool_size],
            pool_log_weights.repeat(batch * c),
        ));
        let weighted = tape.add(pair, weights)?;
        let marg = tape.log_sum_exp(weighted)?;
        tape.reshape(marg, vec![batch, c])?
    };
    let prior = prior_rows(tape, dist, batch);
    let scores = tape.add(marginal, prior)?;
    log_normalize_rows(tape, scores)
}

/// `Σ_b logp[b, labels[b]]` via a one-hot mask.
pub fn sum_true_class(tape: &mut Tape, logp: Var, labels: &[usize]) -> Result<Var> {
    let shape = tape.shape(logp).to_vec();
    let c = shape[1];
    if shape[0] != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {} rows",
            labels.len(),
            shape[0]
        )));
    }
    let mut mask = vec![0.0; shape[0] * c];
    for (b, &z) in labels.iter().enumerate() {
        if z >= c {
            return Err(Error::Contract(format!(
                "label {z} out of range for {c} classes"
            )));
        }
        mask[b * c + z] = 1.0;
    }
    let mask = tape.constant(Tensor::from_parts(shape, mask));
    let picked = tape.mul(logp, mask)?;
    tape.sum(picked)
}

/// Candidate pool registered on a tape as a constant.
pub struct BoundPool<'a> {
    pub observations: Var,
    pub log_weights: &'a [f64],
}

impl CandidatePool {
    pub fn bind<'a>(&'a self, tape: &mut Tape) -> BoundPool<'a> {
        BoundPool {
            observations: tape.constant(self.observations.clone()),
            log_weights: &self.log_weights,
        }
    }
}

/// Negative log-likelihood of both datasets on `tape`.
pub fn nll_on_tape(
    tape: &mut Tape,
    m: &BoundModel,
    dist: &LabelDistribution,
    pool: Option<&BoundPool<'_>>,
    complete: Option<&CompleteBatch>,
    missing: Option<&MissingBatch>,
) -> Result<LossTerms> {
    let complete = complete.filter(|b| !b.is_empty());
    let missing = missing.filter(|b| !b.is_empty());
    if complete.is_none() && missing.is_none() {
        return Err(Error::EmptyBatch);
    }
    let complete_term = match complete {
        Some(b) => {
            let x = tape.constant(b.x.clone());
            let y = tape.constant(b.y.clone());
            let lp = log_q_xy_on_tape(tape, m, dist, x, y)?;
            let s = sum_true_class(tape, lp, &b.labels)?;
            Some((tape.neg(s)?, b.len()))
        }
        None => None,
    };
    let missing_term = match missing {
        Some(b) => {
            let pool = pool.ok_or_else(|| {
                Error::Contract("missing samples need a non-empty candidate pool".into())
            })?;
            let x = tape.constant(b.x.clone());
            let lp = log_q_x_on_tape(tape, m, dist, x, pool.observations, pool.log_weights)?;
            let s = sum_true_class(tape, lp, &b.labels)?;
            Some((tape.neg(s)?, b.len()))
        }
        None => None,
    };
    LossTerms::combine(tape, complete_term, missing_term)
}

/// Evaluates the negative log-likelihood of both datasets.
pub fn nll_loss(
    model: &ModelState,
    dist: &LabelDistribution,
    pool: &CandidatePool,
    complete: Option<&CompleteBatch>,
    missing: Option<&MissingBatch>,
) -> Result<LossBreakdown> {
    let mut tape = Tape::new();
    let m = model.bind_frozen(&mut tape);
    let p = pool.bind(&mut tape);
    let terms = nll_on_tape(&mut tape, &m, dist, Some(&p), complete, missing)?;
    Ok(terms.breakdown(&tape))
}

fn single_row(v: &[f64]) -> Result<Tensor> {
    Tensor::from_rows(&[v])
}

/// Log `Q(z | x, y)` for each row of `x` and `y`.
pub fn log_q_z_given_xy_batch(
    model: &ModelState,
    dist: &LabelDistribution,
    x: &Tensor,
    y: &Tensor,
) -> Result<Tensor> {
    let mut tape = Tape::new();
    let m = model.bind_frozen(&mut tape);
    let xv = tape.constant(x.clone());
    let yv = tape.constant(y.clone());
    let out = log_q_xy_on_tape(&mut tape, &m, dist, xv, yv)?;
    Ok(tape.value(out).clone())
}

/// Log `Q(z | x, y)` for one sample; exponentiates to a distribution over
/// classes.
pub fn log_q_z_given_xy(
    model: &ModelState,
    dist: &LabelDistribution,
    x: &[f64],
    y: &[f64],
) -> Result<Vec<f64>> {
    Ok(log_q_z_given_xy_batch(model, dist, &single_row(x)?, &single_row(y)?)?.into_data())
}

pub fn log_q_z_given_x_batch(
    model: &ModelState,
    dist: &LabelDistribution,
    pool: &CandidatePool,
    x: &Tensor,
) -> Result<Tensor> {
    if pool.is_empty() {
        return Err(Error::Contract("candidate pool is empty".into()));
    }
    let mut tape = Tape::new();
    let m = model.bind_frozen(&mut tape);
    let p = pool.bind(&mut tape);
    let xv = tape.constant(x.clone());
    let out = log_q_x_on_tape(&mut tape, &m, dist, xv, p.observations, p.log_weights)?;
    Ok(tape.value(out).clone())
}

/// Log `Q(z | x)` for one sample, with `y` marginalized over `pool`.
pub fn log_q_z_given_x(
    model: &ModelState,
    dist: &LabelDistribution,
    pool: &CandidatePool,
    x: &[f64],
) -> Result<Vec<f64>> {
    Ok(log_q_z_given_x_batch(model, dist, pool, &single_row(x)?)?.into_data())
}

/// Explicitly normalized joint `Q[i][j][c]` over a finite alphabet of
/// encoded features.
#[derive(Clone, Debug)]
pub struct JointTable {
    probs: Vec<f64>,
    nx: usize,
    ny: usize,
    nc: usize,
}

impl JointTable {
    pub fn get(&self, i: usize, j: usize, c: usize) -> f64 {
        self.probs[(i * self.ny + j) * self.nc + c]
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.nx, self.ny, self.nc)
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// `Q(z | x_i, y_j)`.
    pub fn z_given_xy(&self, i: usize, j: usize) -> Vec<f64> {
        let row: Vec<f64> = (0..self.nc).map(|c| self.get(i, j, c)).collect();
        let s: f64 = row.iter().sum();
        row.into_iter().map(|p| p / s).collect()
    }

    /// `Q(z | x_i)` after summing out `y`.
    pub fn z_given_x(&self, i: usize) -> Vec<f64> {
        let row: Vec<f64> = (0..self.nc)
            .map(|c| (0..self.ny).map(|j| self.get(i, j, c)).sum())
            .collect();
        let s: f64 = row.iter().sum();
        row.into_iter().map(|p| p / s).collect()
    }
}

fn check_simplex(name: &str, p: &[f64], n: usize) -> Result<()> {
    if p.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{name} has {} entries for an alphabet of {n}",
            p.len()
        )));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > 1e-12 || p.iter().any(|&v| v < 0.0) {
        return Err(Error::Contract(format!(
            "{name} is not normalized (sum {s})"
        )));
    }
    Ok(())
}

/// Builds the full joint table by brute force, including `R_X` and the
/// global normalizer that the conditionals never need.
pub fn eval_joint_oracle(
    features_x: &[Vec<f64>],
    features_y: &[Vec<f64>],
    dist_x: &[f64],
    dist_y: &[f64],
    dist_z: &LabelDistribution,
    model: &ModelState,
) -> Result<JointTable> {
    let (nx, ny, nc) = (features_x.len(), features_y.len(), dist_z.num_classes());
    if nx == 0 || ny == 0 {
        return Err(Error::Contract("joint alphabets must be non-empty".into()));
    }
    if nc != model.num_classes {
        return Err(Error::DimensionMismatch(format!(
            "model has {} classes, label distribution {nc}",
            model.num_classes
        )));
    }
    check_simplex("R_X", dist_x, nx)?;
    check_simplex("R_Y", dist_y, ny)?;
    let mut log_w = Vec::with_capacity(nx * ny * nc);
    for (fx, px) in features_x.iter().zip(dist_x) {
        for (gy, py) in features_y.iter().zip(dist_y) {
            let scores = model.label_scores(&fuse(model.fusion, fx, gy)?)?;
            for (s, lz) in scores.iter().zip(dist_z.log_probs()) {
                log_w.push(px.ln() + py.ln() + lz + s);
            }
        }
    }
    let norm = log_sum_exp(&log_w);
    if !norm.is_finite() {
        return Err(Error::Numerical("joint normalizer is not finite".into()));
    }
    Ok(JointTable {
        probs: log_w.iter().map(|v| (v - norm).exp()).collect(),
        nx,
        ny,
        nc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_model, EncoderParams, FusionKind, LabelEmbedding, Linear, ModelSpec};

    fn identity_model(c: usize, table: Vec<f64>) -> ModelState {
        let enc = EncoderParams::new(vec![Linear {
            weight: Tensor::identity(2),
            bias: Tensor::zeros(&[2]),
        }])
        .unwrap();
        let h = LabelEmbedding {
            table: Tensor::matrix(c, 2, table).unwrap(),
        };
        ModelState::from_parts(enc.clone(), enc, h, FusionKind::Addition).unwrap()
    }

    fn probs(lp: &[f64]) -> Vec<f64> {
        lp.iter().map(|v| v.exp()).collect()
    }

    #[test]
    fn uniform_logits_uniform_prior() {
        let m = identity_model(3, vec![0.0; 6]);
        let lp =
            log_q_z_given_xy(&m, &LabelDistribution::uniform(3), &[1.0, 2.0], &[0.5, 0.5]).unwrap();
        for v in lp {
            assert!((v - (1.0f64 / 3.0).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn forced_two_thirds() {
        // f + g = [1, 0]; h rows give logits [ln 2, 0]
        let m = identity_model(2, vec![2f64.ln(), 0.0, 0.0, 0.0]);
        let p = probs(
            &log_q_z_given_xy(&m, &LabelDistribution::uniform(2), &[1.0, 0.0], &[0.0, 0.0])
                .unwrap(),
        );
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((p[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn prior_dominates_flat_logits() {
        let m = identity_model(2, vec![0.0; 4]);
        let dist = LabelDistribution::from_probs(&[0.9, 0.1]).unwrap();
        let p = probs(&log_q_z_given_xy(&m, &dist, &[3.0, -1.0], &[0.2, 0.0]).unwrap());
        assert!((p[0] - 0.9).abs() < 1e-12 && (p[1] - 0.1).abs() < 1e-12);
    }

    fn small_model(fusion: FusionKind, seed: u64) -> ModelState {
        init_model(
            &ModelSpec {
                dim_x: 3,
                dim_y: 2,
                hidden_layers: vec![4],
                k: 2,
                num_classes: 2,
                fusion,
            },
            seed,
        )
        .unwrap()
    }

    #[test]
    fn single_candidate_pool_reduces_to_complete_conditional() {
        for fusion in FusionKind::ALL {
            let m = small_model(fusion, 3);
            let dist = LabelDistribution::from_probs(&[0.3, 0.7]).unwrap();
            let y = [0.4, -1.1];
            let pool = CandidatePool::uniform(Tensor::from_rows(&[y]).unwrap()).unwrap();
            let x = [0.2, 1.5, -0.7];
            let a = log_q_z_given_x(&m, &dist, &pool, &x).unwrap();
            let b = log_q_z_given_xy(&m, &dist, &x, &y).unwrap();
            for (p, q) in a.iter().zip(&b) {
                assert!((p - q).abs() < 1e-12, "{fusion}: {a:?} vs {b:?}");
            }
        }
    }

    #[test]
    fn two_candidate_pool_matches_joint_table() {
        for fusion in FusionKind::ALL {
            let m = small_model(fusion, 8);
            let dist = LabelDistribution::uniform(2);
            let ys = [vec![0.9, -0.3], vec![-1.2, 0.6]];
            let x = [1.0, -0.5, 0.25];
            let pool = CandidatePool::uniform(Tensor::from_rows(&ys).unwrap()).unwrap();
            let got = probs(&log_q_z_given_x(&m, &dist, &pool, &x).unwrap());

            let fx = m.encode_x(&Tensor::from_rows(&[x]).unwrap()).unwrap();
            let gy = pool.encode(&m).unwrap();
            let table = eval_joint_oracle(
                &[fx.row(0).to_vec()],
                &gy.rows().map(<[f64]>::to_vec).collect::<Vec<_>>(),
                &[1.0],
                &[0.5, 0.5],
                &dist,
                &m,
            )
            .unwrap();
            let expect = table.z_given_x(0);
            for (p, q) in got.iter().zip(&expect) {
                assert!((p - q).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn indistinguishable_candidates() {
        let mut m = small_model(FusionKind::Addition, 4);
        for l in &mut m.g.layers {
            l.weight.data_mut().fill(0.0);
        }
        let dist = LabelDistribution::uniform(2);
        let pool = CandidatePool::uniform(
            Tensor::from_rows(&[vec![1.0, 2.0], vec![-3.0, 0.5], vec![0.0, 9.0]]).unwrap(),
        )
        .unwrap();
        let x = [0.3, 0.3, -2.0];
        let a = log_q_z_given_x(&m, &dist, &pool, &x).unwrap();
        let b = log_q_z_given_xy(&m, &dist, &x, &[7.0, 7.0]).unwrap();
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn joint_at_zero_coupling_is_product_of_marginals() {
        let mut m = small_model(FusionKind::Concatenation, 1);
        m.h.table.data_mut().fill(0.0);
        let dist_z = LabelDistribution::from_probs(&[0.25, 0.75]).unwrap();
        let fx = vec![vec![0.1, 0.2], vec![1.0, -1.0]];
        let gy = vec![vec![0.3, 0.3], vec![2.0, 0.0], vec![-0.5, 0.5]];
        let rx = [0.4, 0.6];
        let ry = [0.2, 0.3, 0.5];
        let t = eval_joint_oracle(&fx, &gy, &rx, &ry, &dist_z, &m).unwrap();
        assert!((t.total() - 1.0).abs() < 1e-12);
        let rz = dist_z.probs();
        for i in 0..2 {
            for j in 0..3 {
                for c in 0..2 {
                    assert!((t.get(i, j, c) - rx[i] * ry[j] * rz[c]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn joint_conditioning_matches_complete_conditional() {
        let m = small_model(FusionKind::OuterProduct, 2);
        let dist = LabelDistribution::from_probs(&[0.6, 0.4]).unwrap();
        let xs = [vec![0.5, 0.1, -0.2], vec![-1.0, 2.0, 0.3]];
        let ys = [vec![1.0, 1.0], vec![0.0, -0.4]];
        let fx = m.encode_x(&Tensor::from_rows(&xs).unwrap()).unwrap();
        let gy = m.encode_y(&Tensor::from_rows(&ys).unwrap()).unwrap();
        let t = eval_joint_oracle(
            &fx.rows().map(<[f64]>::to_vec).collect::<Vec<_>>(),
            &gy.rows().map(<[f64]>::to_vec).collect::<Vec<_>>(),
            &[0.5, 0.5],
            &[0.5, 0.5],
            &dist,
            &m,
        )
        .unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let got = probs(&log_q_z_given_xy(&m, &dist, &xs[i], &ys[j]).unwrap());
                for (p, q) in got.iter().zip(t.z_given_xy(i, j)) {
                    assert!((p - q).abs() < 1e-9);
                }
            }
        }
    }

    fn batches() -> (CompleteBatch, MissingBatch, CandidatePool) {
        let complete = CompleteBatch::new(
            Tensor::from_rows(&[vec![0.5, -0.2, 1.0], vec![-1.0, 0.3, 0.8]]).unwrap(),
            Tensor::from_rows(&[vec![0.1, 0.9], vec![-0.6, 0.2]]).unwrap(),
            vec![0, 1],
        )
        .unwrap();
        let missing = MissingBatch::new(
            Tensor::from_rows(&[vec![0.0, 1.1, -0.4], vec![2.0, -0.5, 0.1]]).unwrap(),
            vec![1, 0],
        )
        .unwrap();
        let pool = CandidatePool::uniform(complete.y.clone()).unwrap();
        (complete, missing, pool)
    }

    #[test]
    fn loss_equals_per_sample_sum() {
        for fusion in FusionKind::ALL {
            let m = small_model(fusion, 6);
            let dist = LabelDistribution::from_probs(&[0.45, 0.55]).unwrap();
            let (complete, missing, pool) = batches();
            let loss = nll_loss(&m, &dist, &pool, Some(&complete), Some(&missing)).unwrap();
            let mut expect_c = 0.0;
            for b in 0..2 {
                let lp = log_q_z_given_xy(&m, &dist, complete.x.row(b), complete.y.row(b)).unwrap();
                expect_c -= lp[complete.labels[b]];
            }
            let mut expect_m = 0.0;
            for b in 0..2 {
                let lp = log_q_z_given_x(&m, &dist, &pool, missing.x.row(b)).unwrap();
                expect_m -= lp[missing.labels[b]];
            }
            assert!((loss.complete_term - expect_c).abs() < 1e-12);
            assert!((loss.missing_term - expect_m).abs() < 1e-12);
            assert!((loss.total - (expect_c + expect_m)).abs() < 1e-12);
            assert_eq!(loss.total, loss.complete_term + loss.missing_term);
            assert_eq!((loss.n_complete, loss.n_missing), (2, 2));
        }
    }

    #[test]
    fn one_third_loss() {
        let m = identity_model(3, vec![0.0; 6]);
        let complete = CompleteBatch::new(
            Tensor::from_rows(&[vec![1.0, 1.0]]).unwrap(),
            Tensor::from_rows(&[vec![1.0, 1.0]]).unwrap(),
            vec![2],
        )
        .unwrap();
        let pool = CandidatePool::uniform(complete.y.clone()).unwrap();
        let loss = nll_loss(
            &m,
            &LabelDistribution::uniform(3),
            &pool,
            Some(&complete),
            None,
        )
        .unwrap();
        assert!((loss.total - 3f64.ln()).abs() < 1e-12);
        assert_eq!(loss.total, loss.complete_term);
        assert_eq!(loss.missing_term, 0.0);
    }

    #[test]
    fn empty_batches_rejected() {
        let m = small_model(FusionKind::Addition, 0);
        let (_, _, pool) = batches();
        let r = nll_loss(&m, &LabelDistribution::uniform(2), &pool, None, None);
        assert!(matches!(r, Err(Error::EmptyBatch)));
    }

    #[test]
    fn label_distribution_counts() {
        let d = LabelDistribution::from_counts(&[2, 1, 1]).unwrap();
        let p = d.probs();
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.25).abs() < 1e-15);
        assert!(matches!(
            LabelDistribution::from_counts(&[3, 1, 0]),
            Err(Error::MissingClass(2))
        ));
    }
}
