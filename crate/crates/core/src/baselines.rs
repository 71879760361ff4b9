//! Comparison objectives: discarding incomplete samples, and zero padding.

use std::fmt;
use std::str::FromStr;

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::likelihood::{
    log_q_from_features, nll_on_tape, sum_true_class, BoundPool, CandidatePool, CompleteBatch,
    LabelDistribution, LossBreakdown, LossTerms, MissingBatch,
};
use crate::model::{BoundModel, FusionKind, ModelState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MethodKind {
    /// Complete-sample term plus the marginalized missing-sample term.
    MleFull,
    /// Complete-sample term only; modality-missing samples are dropped.
    LowerBound,
    /// Missing samples scored with `g(y)` replaced by zeros.
    ZeroPadding,
}

impl MethodKind {
    pub const ALL: [MethodKind; 3] = [
        MethodKind::MleFull,
        MethodKind::LowerBound,
        MethodKind::ZeroPadding,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MethodKind::MleFull => "mle_full",
            MethodKind::LowerBound => "lower_bound",
            MethodKind::ZeroPadding => "zero_padding",
        }
    }

    pub fn uses_missing(self) -> bool {
        !matches!(self, MethodKind::LowerBound)
    }

    pub fn supports(self, fusion: FusionKind) -> Result<()> {
        if self == MethodKind::ZeroPadding && fusion == FusionKind::OuterProduct {
            return Err(Error::UnsupportedFusion(fusion));
        }
        Ok(())
    }
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for MethodKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mle_full" | "mle" | "full" => Ok(MethodKind::MleFull),
            "lower_bound" | "lb" => Ok(MethodKind::LowerBound),
            "zero_padding" | "zp" => Ok(MethodKind::ZeroPadding),
            other => Err(format!("unknown method '{other}'")),
        }
    }
}

pub fn lower_bound_on_tape(
    tape: &mut Tape,
    m: &BoundModel,
    dist: &LabelDistribution,
    complete: Option<&CompleteBatch>,
) -> Result<LossTerms> {
    if complete.is_none_or(CompleteBatch::is_empty) {
        return Err(Error::EmptyBatch);
    }
    nll_on_tape(tape, m, dist, None, complete, None)
}

pub fn zero_padding_on_tape(
    tape: &mut Tape,
    m: &BoundModel,
    dist: &LabelDistribution,
    complete: Option<&CompleteBatch>,
    missing: Option<&MissingBatch>,
) -> Result<LossTerms> {
    MethodKind::ZeroPadding.supports(m.fusion)?;
    let missing = missing.filter(|b| !b.is_empty());
    let Some(missing) = missing else {
        return nll_on_tape(tape, m, dist, None, complete, None);
    };
    let complete_term = match complete.filter(|b| !b.is_empty()) {
        Some(b) => {
            let terms = nll_on_tape(tape, m, dist, None, Some(b), None)?;
            Some((terms.total, b.len()))
        }
        None => None,
    };
    let lp = zero_padded_log_q(tape, m, dist, &missing.x)?;
    let s = sum_true_class(tape, lp, &missing.labels)?;
    let missing_term = Some((tape.neg(s)?, missing.len()));
    LossTerms::combine(tape, complete_term, missing_term)
}

fn zero_padded_log_q(
    tape: &mut Tape,
    m: &BoundModel,
    dist: &LabelDistribution,
    x: &Tensor,
) -> Result<Var> {
    let xv = tape.constant(x.clone());
    let f = m.encode_x(tape, xv)?;
    let zero = tape.constant(Tensor::zeros(&[x.shape()[0], m.k]));
    log_q_from_features(tape, m, dist, f, zero)
}

/// Log class probabilities the zero-padding model assigns to `x` alone.
pub fn zero_padding_log_q(
    model: &ModelState,
    dist: &LabelDistribution,
    x: &Tensor,
) -> Result<Tensor> {
    MethodKind::ZeroPadding.supports(model.fusion)?;
    let mut tape = Tape::new();
    let m = model.bind_frozen(&mut tape);
    let lp = zero_padded_log_q(&mut tape, &m, dist, x)?;
    Ok(tape.value(lp).clone())
}

pub fn lower_bound_loss(
    model: &ModelState,
    dist: &LabelDistribution,
    complete: Option<&CompleteBatch>,
) -> Result<LossBreakdown> {
    let mut tape = Tape::new();
    let m = model.bind_frozen(&mut tape);
    let terms = lower_bound_on_tape(&mut tape, &m, dist, complete)?;
    Ok(terms.breakdown(&tape))
}

pub fn zero_padding_loss(
    model: &ModelState,
    dist: &LabelDistribution,
    complete: Option<&CompleteBatch>,
    missing: Option<&MissingBatch>,
) -> Result<LossBreakdown> {
    let mut tape = Tape::new();
    let m = model.bind_frozen(&mut tape);
    let terms = zero_padding_on_tape(&mut tape, &m, dist, complete, missing)?;
    Ok(terms.breakdown(&tape))
}

/// Dispatches to the objective of `method`. `pool` is only consulted by
/// [`MethodKind::MleFull`].
pub fn method_loss_on_tape(
    tape: &mut Tape,
    method: MethodKind,
    m: &BoundModel,
    dist: &LabelDistribution,
    pool: Option<&BoundPool<'_>>,
    complete: Option<&CompleteBatch>,
    missing: Option<&MissingBatch>,
) -> Result<LossTerms> {
    match method {
        MethodKind::MleFull => nll_on_tape(tape, m, dist, pool, complete, missing),
        MethodKind::LowerBound => lower_bound_on_tape(tape, m, dist, complete),
        MethodKind::ZeroPadding => zero_padding_on_tape(tape, m, dist, complete, missing),
    }
}

pub fn method_loss(
    method: MethodKind,
    model: &ModelState,
    dist: &LabelDistribution,
    pool: &CandidatePool,
    complete: Option<&CompleteBatch>,
    missing: Option<&MissingBatch>,
) -> Result<LossBreakdown> {
    let mut tape = Tape::new();
    let m = model.bind_frozen(&mut tape);
    let p = pool.bind(&mut tape);
    let terms = method_loss_on_tape(&mut tape, method, &m, dist, Some(&p), complete, missing)?;
    Ok(terms.breakdown(&tape))
}
