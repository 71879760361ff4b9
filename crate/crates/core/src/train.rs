//! Optimization loop, inference rule and classification metrics.

use rand::seq::{index, SliceRandom};

use crate::autodiff::{Tape, Tensor};
use crate::baselines::{method_loss_on_tape, MethodKind};
use crate::data::{empirical_label_dist, Dataset, DatasetBundle};
use crate::error::{Error, Result};
use crate::likelihood::{log_q_xy_on_tape, CandidatePool, CompleteBatch, LabelDistribution};
use crate::model::{init_model, FusionKind, ModelSpec, ModelState};
use crate::rng::{self, Stream};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub method: MethodKind,
    pub fusion: FusionKind,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    /// Candidates drawn per epoch for the marginal over `y`; 0 uses all.
    pub candidate_pool_size: usize,
    pub missing_rate: f64,
    pub k: usize,
    pub hidden_layers: Vec<usize>,
    /// Stop after this many epochs without a validation improvement; 0 never stops.
    pub patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            method: MethodKind::MleFull,
            fusion: FusionKind::Addition,
            epochs: 120,
            batch_size: 512,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            candidate_pool_size: 0,
            missing_rate: 0.0,
            k: 32,
            hidden_layers: vec![64, 64],
            patience: 0,
        }
    }
}

impl TrainConfig {
    /// Every violated constraint, not just the first. Method and fusion
    /// compatibility is left to [`validate`](Self::validate).
    pub fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            p.push(format!(
                "learning_rate must be a finite non-negative number, got {}",
                self.learning_rate
            ));
        }
        if self.epochs == 0 {
            p.push("epochs must be at least 1".into());
        }
        if self.batch_size == 0 {
            p.push("batch_size must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            p.push("adam betas must lie in [0, 1)".into());
        }
        if !(self.adam_eps > 0.0 && self.adam_eps.is_finite()) {
            p.push("adam_eps must be positive".into());
        }
        if !(0.0..1.0).contains(&self.missing_rate) {
            p.push(format!(
                "missing_rate must lie in [0, 1), got {}",
                self.missing_rate
            ));
        }
        if self.k == 0 {
            p.push("k must be positive".into());
        }
        if self.hidden_layers.contains(&0) {
            p.push("hidden layer widths must be positive".into());
        }
        p
    }

    pub fn validate(&self) -> Result<()> {
        self.method.supports(self.fusion)?;
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(p))
        }
    }

    pub fn model_spec(&self, bundle: &DatasetBundle) -> ModelSpec {
        ModelSpec {
            dim_x: bundle.dim_x,
            dim_y: bundle.dim_y,
            hidden_layers: self.hidden_layers.clone(),
            k: self.k,
            num_classes: bundle.num_classes,
            fusion: self.fusion,
        }
    }
}

/// Adam with bias correction and no weight decay.
#[derive(Clone, Debug)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(params: &[&Tensor], lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            lr,
            beta1,
            beta2,
            eps,
            step: 0,
            m: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            v: params.iter().map(|p| vec![0.0; p.len()]).collect(),
        }
    }

    pub fn step(&mut self, params: Vec<&mut Tensor>, grads: &[Tensor]) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        for (i, (p, g)) in params.into_iter().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for (j, (w, &gj)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * gj;
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * gj * gj;
                let mhat = m[j] / c1;
                let vhat = v[j] / c2;
                *w -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Objective summed over the epoch and divided by the samples seen.
    pub train_loss: f64,
    pub val_accuracy: f64,
    /// Mean negative log `Q(z | x, y)` on the validation set.
    pub val_loss: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    pub stopped_early: bool,
}

impl History {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_accuracy,val_loss\n");
        for e in &self.epochs {
            s.push_str(&format!(
                "{},{:.6},{:.6},{:.6}\n",
                e.epoch, e.train_loss, e.val_accuracy, e.val_loss
            ));
        }
        s
    }
}

/// Trains a freshly initialized model; see [`train_model`].
pub fn train(
    config: &TrainConfig,
    bundle: &DatasetBundle,
    val: &Dataset,
) -> Result<(ModelState, History)> {
    config.validate()?;
    let model = init_model(&config.model_spec(bundle), config.seed)?;
    train_model(config, model, bundle, val)
}

/// Minibatch Adam on the objective of `config.method`.
///
/// Each epoch reshuffles the complete and missing sets independently and
/// splits them into the same number of batches, so every batch mixes the two
/// in proportion `n_c : n_m`. The per-batch objective is the summed negative
/// log-likelihood divided by the batch size. The returned state is the one
/// with the best validation accuracy, ties going to the lower validation
/// loss.
pub fn train_model(
    config: &TrainConfig,
    mut model: ModelState,
    bundle: &DatasetBundle,
    val: &Dataset,
) -> Result<(ModelState, History)> {
    config.validate()?;
    if val.is_empty() {
        return Err(Error::Contract("validation set is empty".into()));
    }
    let dist = empirical_label_dist(bundle)?;
    let mut shuffle_rng = rng::stream(config.seed, Stream::Shuffle);
    let mut pool_rng = rng::stream(config.seed, Stream::Pool);
    let mut adam = Adam::new(
        &model.params(),
        config.learning_rate,
        config.beta1,
        config.beta2,
        config.adam_eps,
    );

    let n_c = bundle.n_complete();
    let n_m = if config.method.uses_missing() {
        bundle.n_missing()
    } else {
        0
    };
    let n_batches = (n_c + n_m).div_ceil(config.batch_size);
    let val_batch = val.as_batch();

    let mut history = History {
        epochs: Vec::with_capacity(config.epochs),
        best_epoch: 0,
        best_val_accuracy: f64::NEG_INFINITY,
        stopped_early: false,
    };
    let mut best = model.clone();
    let mut best_val_loss = f64::INFINITY;
    let mut since_best = 0;

    for epoch in 1..=config.epochs {
        let mut complete_order: Vec<usize> = (0..n_c).collect();
        let mut missing_order: Vec<usize> = (0..n_m).collect();
        complete_order.shuffle(&mut shuffle_rng);
        missing_order.shuffle(&mut shuffle_rng);

        let pool = if config.method == MethodKind::MleFull && n_m > 0 {
            let m = config.candidate_pool_size;
            Some(if m == 0 || m >= n_c {
                bundle.full_pool()
            } else {
                let mut picked = index::sample(&mut pool_rng, n_c, m).into_vec();
                picked.sort_unstable();
                bundle.pool(&picked)
            })
        } else {
            None
        };

        let mut epoch_loss = 0.0;
        for b in 0..n_batches {
            let c_idx = &complete_order[b * n_c / n_batches..(b + 1) * n_c / n_batches];
            let m_idx = &missing_order[b * n_m / n_batches..(b + 1) * n_m / n_batches];
            if c_idx.is_empty() && m_idx.is_empty() {
                continue;
            }
            let (loss, grads) = batch_gradient(
                config.method,
                &model,
                &dist,
                pool.as_ref(),
                bundle,
                c_idx,
                m_idx,
            )
            .map_err(|e| abort(e, &model, epoch))?;
            epoch_loss += loss;
            if grads.iter().any(|g| !g.is_finite()) {
                return Err(abort(
                    Error::Numerical("non-finite gradient".into()),
                    &model,
                    epoch,
                ));
            }
            let mut next = model.clone();
            adam.step(next.params_mut(), &grads);
            if next.params().iter().any(|p| !p.is_finite()) {
                return Err(abort(
                    Error::Numerical("parameter update produced a non-finite value".into()),
                    &model,
                    epoch,
                ));
            }
            model = next;
        }

        let (val_accuracy, val_loss) = validation_scores(&model, &dist, &val_batch)?;
        history.epochs.push(EpochRecord {
            epoch,
            train_loss: epoch_loss / (n_c + n_m) as f64,
            val_accuracy,
            val_loss,
        });
        if val_accuracy > history.best_val_accuracy
            || (val_accuracy == history.best_val_accuracy && val_loss < best_val_loss)
        {
            history.best_val_accuracy = val_accuracy;
            best_val_loss = val_loss;
            history.best_epoch = epoch;
            best = model.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if config.patience > 0 && since_best >= config.patience {
                history.stopped_early = true;
                break;
            }
        }
    }
    Ok((best, history))
}

fn validation_scores(
    model: &ModelState,
    dist: &LabelDistribution,
    val: &CompleteBatch,
) -> Result<(f64, f64)> {
    let mut tape = Tape::new();
    let m = model.bind_frozen(&mut tape);
    let x = tape.constant(val.x.clone());
    let y = tape.constant(val.y.clone());
    let lp = log_q_xy_on_tape(&mut tape, &m, dist, x, y)?;
    let lp = tape.value(lp);
    let mut correct = 0;
    let mut nll = 0.0;
    for (row, &z) in lp.rows().zip(&val.labels) {
        correct += usize::from(argmax_low(row) == z);
        nll -= row[z];
    }
    let n = val.labels.len() as f64;
    Ok((correct as f64 / n, nll / n))
}

fn abort(e: Error, model: &ModelState, epoch: usize) -> Error {
    match e {
        Error::Numerical(msg) => Error::TrainingAborted {
            diagnostic: format!("epoch {epoch}: {msg}"),
            last_state: Box::new(model.clone()),
        },
        other => other,
    }
}

/// Batch objective (summed) and its gradient divided by the batch size.
fn batch_gradient(
    method: MethodKind,
    model: &ModelState,
    dist: &LabelDistribution,
    pool: Option<&CandidatePool>,
    bundle: &DatasetBundle,
    c_idx: &[usize],
    m_idx: &[usize],
) -> Result<(f64, Vec<Tensor>)> {
    let complete = (!c_idx.is_empty()).then(|| bundle.complete_batch(c_idx));
    let missing = (!m_idx.is_empty()).then(|| bundle.missing_batch(m_idx));
    let mut tape = Tape::new();
    let m = model.bind(&mut tape);
    let bound_pool = pool.map(|p| p.bind(&mut tape));
    let terms = method_loss_on_tape(
        &mut tape,
        method,
        &m,
        dist,
        bound_pool.as_ref(),
        complete.as_ref(),
        missing.as_ref(),
    )?;
    let n = (c_idx.len() + m_idx.len()) as f64;
    let objective = tape.scale(terms.total, 1.0 / n)?;
    let grads = tape.backward(objective)?;
    let total = tape.value(terms.total).data()[0];
    Ok((total, grads.params().map(|(_, g)| g).collect()))
}

fn argmax_low(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Most probable class under `Q(z | x, y)`, ties going to the lowest index.
pub fn predict(
    model: &ModelState,
    dist: &LabelDistribution,
    x: &[f64],
    y: &[f64],
) -> Result<usize> {
    let x = Tensor::from_rows(&[x])?;
    let y = Tensor::from_rows(&[y])?;
    Ok(predict_batch(model, dist, &x, &y)?[0])
}

pub fn predict_batch(
    model: &ModelState,
    dist: &LabelDistribution,
    x: &Tensor,
    y: &Tensor,
) -> Result<Vec<usize>> {
    let mut tape = Tape::new();
    let m = model.bind_frozen(&mut tape);
    let xv = tape.constant(x.clone());
    let yv = tape.constant(y.clone());
    let lp = log_q_xy_on_tape(&mut tape, &m, dist, xv, yv)?;
    Ok(tape.value(lp).rows().map(argmax_low).collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Metrics {
    pub accuracy: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    /// Recall per class; 0 for classes absent from the evaluation set.
    pub per_class_accuracy: Vec<f64>,
}

impl Metrics {
    pub fn from_predictions(truth: &[usize], predicted: &[usize], num_classes: usize) -> Self {
        let mut confusion = vec![vec![0; num_classes]; num_classes];
        for (&t, &p) in truth.iter().zip(predicted) {
            confusion[t][p] += 1;
        }
        let total = truth.len();
        let correct: usize = (0..num_classes).map(|c| confusion[c][c]).sum();
        let per_class_accuracy = confusion
            .iter()
            .enumerate()
            .map(|(c, row)| {
                let support: usize = row.iter().sum();
                if support == 0 {
                    0.0
                } else {
                    row[c] as f64 / support as f64
                }
            })
            .collect();
        Self {
            accuracy: if total == 0 {
                0.0
            } else {
                correct as f64 / total as f64
            },
            confusion,
            per_class_accuracy,
        }
    }

    pub fn total(&self) -> usize {
        self.confusion.iter().flatten().sum()
    }

    /// Single-line JSON object; floats with six decimals.
    pub fn to_json(&self) -> String {
        let rows: Vec<String> = self
            .confusion
            .iter()
            .map(|r| {
                format!(
                    "[{}]",
                    r.iter()
                        .map(usize::to_string)
                        .collect::<Vec<_>>()
                        .join(", ")
                )
            })
            .collect();
        let per_class: Vec<String> = self
            .per_class_accuracy
            .iter()
            .map(|a| format!("{a:.6}"))
            .collect();
        format!(
            "{{\"accuracy\": {:.6}, \"total\": {}, \"confusion\": [{}], \"per_class_accuracy\": [{}]}}",
            self.accuracy,
            self.total(),
            rows.join(", "),
            per_class.join(", ")
        )
    }
}

fn evaluate_batch(
    model: &ModelState,
    dist: &LabelDistribution,
    x: &Tensor,
    y: &Tensor,
    labels: &[usize],
) -> Result<Metrics> {
    let pred = predict_batch(model, dist, x, y)?;
    Ok(Metrics::from_predictions(labels, &pred, model.num_classes))
}

/// Accuracy and confusion matrix over a modality-complete set.
pub fn evaluate(model: &ModelState, dist: &LabelDistribution, test: &Dataset) -> Result<Metrics> {
    if test.is_empty() {
        return Err(Error::Contract("evaluation set is empty".into()));
    }
    let b = test.as_batch();
    evaluate_batch(model, dist, &b.x, &b.y, &b.labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{apply_missing_mask, split, synth_generate, SynthSpec};
    use crate::model::{EncoderParams, LabelEmbedding, Linear};

    fn identity_model(table: Vec<f64>, c: usize) -> ModelState {
        let enc = EncoderParams::new(vec![Linear {
            weight: Tensor::identity(2),
            bias: Tensor::zeros(&[2]),
        }])
        .unwrap();
        ModelState::from_parts(
            enc.clone(),
            enc,
            LabelEmbedding {
                table: Tensor::matrix(c, 2, table).unwrap(),
            },
            FusionKind::Addition,
        )
        .unwrap()
    }

    #[test]
    fn predict_picks_most_probable() {
        // logits ln 0.2, ln 0.5, ln 0.3 from fused = [1, 0]
        let m = identity_model(
            vec![0.2f64.ln(), 0.0, 0.5f64.ln(), 0.0, 0.3f64.ln(), 0.0],
            3,
        );
        let d = LabelDistribution::uniform(3);
        assert_eq!(predict(&m, &d, &[1.0, 0.0], &[0.0, 0.0]).unwrap(), 1);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let m = identity_model(vec![1.0, 0.0, 1.0, 0.0, 0.0, 0.0], 3);
        let d = LabelDistribution::uniform(3);
        assert_eq!(predict(&m, &d, &[1.0, 0.0], &[0.0, 0.0]).unwrap(), 0);
    }

    #[test]
    fn metrics_hand_case() {
        let m = Metrics::from_predictions(&[0, 1, 2, 2], &[0, 2, 2, 1], 3);
        assert_eq!(
            m.confusion,
            vec![vec![1, 0, 0], vec![0, 0, 1], vec![0, 1, 1]]
        );
        assert_eq!(m.accuracy, 0.5);
        assert_eq!(m.per_class_accuracy, vec![1.0, 0.0, 0.5]);
        assert_eq!(m.total(), 4);
    }

    #[test]
    fn metrics_extremes() {
        let truth = [0, 1, 2, 0, 1, 2];
        let perfect = Metrics::from_predictions(&truth, &truth, 3);
        assert_eq!(perfect.accuracy, 1.0);
        assert_eq!(
            perfect.confusion,
            vec![vec![2, 0, 0], vec![0, 2, 0], vec![0, 0, 2]]
        );
        let constant = Metrics::from_predictions(&truth, &[1; 6], 3);
        assert!((constant.accuracy - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut p = Tensor::vector(vec![1.0, -1.0]).unwrap();
        let mut adam = Adam::new(&[&p], 0.1, 0.9, 0.999, 1e-8);
        adam.step(vec![&mut p], &[Tensor::vector(vec![3.0, -0.5]).unwrap()]);
        assert!((p.data()[0] - 0.9).abs() < 1e-6);
        assert!((p.data()[1] + 0.9).abs() < 1e-6);
    }

    fn small_problem(rate: f64) -> (DatasetBundle, Dataset) {
        let spec = SynthSpec::simplex(3, 4, 4, 1.8, 1.0, 0.5, 20);
        let d = synth_generate(&spec, 1).unwrap();
        let (tr, va, _) = split(&d, (0.7, 0.15, 0.15), 1).unwrap();
        (apply_missing_mask(&tr, rate, 1).unwrap(), va)
    }

    fn small_config(method: MethodKind) -> TrainConfig {
        TrainConfig {
            method,
            epochs: 3,
            batch_size: 8,
            k: 3,
            hidden_layers: vec![5],
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_learning_rate_keeps_initial_params() {
        let (bundle, val) = small_problem(0.5);
        let config = TrainConfig {
            epochs: 1,
            learning_rate: 0.0,
            ..small_config(MethodKind::MleFull)
        };
        let (model, _) = train(&config, &bundle, &val).unwrap();
        let init = init_model(&config.model_spec(&bundle), config.seed).unwrap();
        assert_eq!(model, init);
    }

    #[test]
    fn training_is_deterministic() {
        let (bundle, val) = small_problem(0.5);
        for method in MethodKind::ALL {
            let config = small_config(method);
            let a = train(&config, &bundle, &val).unwrap();
            let b = train(&config, &bundle, &val).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn subsampled_pool_trains() {
        let (bundle, val) = small_problem(0.8);
        let config = TrainConfig {
            candidate_pool_size: 3,
            ..small_config(MethodKind::MleFull)
        };
        let (_, h) = train(&config, &bundle, &val).unwrap();
        assert_eq!(h.epochs.len(), 3);
    }

    #[test]
    fn invalid_configs_report_every_problem() {
        let config = TrainConfig {
            epochs: 0,
            batch_size: 0,
            learning_rate: -1.0,
            ..TrainConfig::default()
        };
        assert_eq!(config.problems().len(), 3);
        let zp_outer = TrainConfig {
            method: MethodKind::ZeroPadding,
            fusion: FusionKind::OuterProduct,
            ..TrainConfig::default()
        };
        assert!(matches!(
            zp_outer.validate(),
            Err(Error::UnsupportedFusion(_))
        ));
    }

    #[test]
    fn early_stopping_halts() {
        let (bundle, val) = small_problem(0.0);
        let config = TrainConfig {
            epochs: 50,
            patience: 1,
            learning_rate: 0.0,
            ..small_config(MethodKind::LowerBound)
        };
        let (_, h) = train(&config, &bundle, &val).unwrap();
        assert!(h.stopped_early);
        assert_eq!(h.epochs.len(), 2);
    }
}
