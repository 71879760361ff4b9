//! Self-verification suite behind `mmle verify`.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{grad_check, log_sum_exp, OpKind, Tape, Tensor, Var};
use crate::baselines::{method_loss, MethodKind};
use crate::error::{Error, Result};
use crate::likelihood::{
    eval_joint_oracle, log_q_z_given_x, log_q_z_given_xy, nll_on_tape, CandidatePool,
    CompleteBatch, LabelDistribution, MissingBatch,
};
use crate::model::{fuse, init_model, FusionKind, ModelSpec, ModelState};

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// Error message when the check could not run.
    pub detail: Option<String>,
}

impl CheckResult {
    fn from_outcome(name: impl Into<String>, tolerance: f64, outcome: Result<f64>) -> Self {
        match outcome {
            Ok(e) => Self {
                name: name.into(),
                max_error: e,
                tolerance,
                passed: e < tolerance,
                detail: None,
            },
            Err(err) => Self {
                name: name.into(),
                max_error: f64::INFINITY,
                tolerance,
                passed: false,
                detail: Some(err.to_string()),
            },
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct VerifyOptions {
    /// Scales the adjoint of this op kind to exercise the negative control.
    pub corrupt: Option<OpKind>,
    pub seed: u64,
}

pub const OP_TOLERANCE: f64 = 1e-6;
pub const LOSS_TOLERANCE: f64 = 1e-4;
pub const EPSILON: f64 = 1e-5;

pub fn run_all(options: VerifyOptions) -> Vec<CheckResult> {
    let mut out = op_gradient_checks(options.corrupt, options.seed);
    for fusion in FusionKind::ALL {
        out.push(CheckResult::from_outcome(
            format!("loss_gradient/{fusion}"),
            LOSS_TOLERANCE,
            loss_gradient_error(fusion, options.corrupt, options.seed),
        ));
    }
    out.push(CheckResult::from_outcome(
        "normalization",
        1e-12,
        normalization_error(300, options.seed),
    ));
    out.push(CheckResult::from_outcome(
        "joint_oracle",
        1e-9,
        joint_oracle_error(options.seed),
    ));
    out.push(CheckResult::from_outcome(
        "softmax_reduction",
        1e-12,
        softmax_reduction_error(100, options.seed),
    ));
    out.push(CheckResult::from_outcome(
        "degeneracy",
        1e-12,
        degeneracy_error(options.seed),
    ));
    out
}

/// One line per check plus a closing verdict.
pub fn render(results: &[CheckResult]) -> String {
    let mut s = String::new();
    for r in results {
        let _ = write!(
            s,
            "{:<28} max_error {:>10.3e}  tol {:.0e}  {}",
            r.name,
            r.max_error,
            r.tolerance,
            if r.passed { "PASS" } else { "FAIL" }
        );
        if let Some(d) = &r.detail {
            let _ = write!(s, "  ({d})");
        }
        s.push('\n');
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    let _ = writeln!(s, "{} checks, {} failed", results.len(), failed);
    s
}

fn uniform(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(
        shape.to_vec(),
        (0..n).map(|_| rng.random_range(lo..hi)).collect(),
    )
    .unwrap()
}

/// Magnitudes in `[0.1, 1)` with random sign, far from the relu kink.
fn off_kink(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let mut t = uniform(rng, shape, 0.1, 1.0);
    for v in t.data_mut() {
        if rng.random_bool(0.5) {
            *v = -*v;
        }
    }
    t
}

/// Contracts an op output with fixed pseudo-random weights so every output
/// entry contributes to the loss.
fn contract(tape: &mut Tape, out: Var) -> Result<Var> {
    let shape = tape.shape(out).to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let w = uniform(&mut rng, &shape, -1.0, 1.0);
    let w = tape.constant(w);
    let p = tape.mul(out, w)?;
    tape.sum(p)
}

type OpBuilder = Box<dyn Fn(&mut Tape, &[Var]) -> Result<Var>>;

fn op_cases(rng: &mut ChaCha8Rng) -> Vec<(&'static str, Vec<Tensor>, OpBuilder)> {
    let m = |rng: &mut ChaCha8Rng, s: &[usize]| uniform(rng, s, -1.0, 1.0);
    vec![
        (
            "matmul",
            vec![m(rng, &[3, 4]), m(rng, &[4, 2])],
            Box::new(|t, v| t.matmul(v[0], v[1])),
        ),
        (
            "add",
            vec![m(rng, &[3, 4]), m(rng, &[3, 4])],
            Box::new(|t, v| t.add(v[0], v[1])),
        ),
        (
            "sub",
            vec![m(rng, &[3, 4]), m(rng, &[3, 4])],
            Box::new(|t, v| t.sub(v[0], v[1])),
        ),
        (
            "mul",
            vec![m(rng, &[3, 4]), m(rng, &[3, 4])],
            Box::new(|t, v| t.mul(v[0], v[1])),
        ),
        (
            "scale",
            vec![m(rng, &[3, 4])],
            Box::new(|t, v| t.scale(v[0], -1.7)),
        ),
        (
            "relu",
            vec![off_kink(rng, &[3, 4])],
            Box::new(|t, v| t.relu(v[0])),
        ),
        (
            "concat",
            vec![m(rng, &[3, 2]), m(rng, &[3, 3])],
            Box::new(|t, v| t.concat(v[0], v[1])),
        ),
        (
            "outer/vector",
            vec![m(rng, &[2]), m(rng, &[3])],
            Box::new(|t, v| t.outer(v[0], v[1])),
        ),
        (
            "outer/rows",
            vec![m(rng, &[3, 2]), m(rng, &[3, 3])],
            Box::new(|t, v| t.outer(v[0], v[1])),
        ),
        (
            "log_sum_exp",
            vec![m(rng, &[3, 4])],
            Box::new(|t, v| t.log_sum_exp(v[0])),
        ),
        (
            "gather_rows",
            vec![m(rng, &[4, 3])],
            Box::new(|t, v| t.gather_rows(v[0], vec![2, 0, 2])),
        ),
        ("sum", vec![m(rng, &[3, 4])], Box::new(|t, v| t.sum(v[0]))),
        ("mean", vec![m(rng, &[3, 4])], Box::new(|t, v| t.mean(v[0]))),
        ("neg", vec![m(rng, &[3, 4])], Box::new(|t, v| t.neg(v[0]))),
        (
            "log",
            vec![uniform(rng, &[3, 4], 0.5, 2.0)],
            Box::new(|t, v| t.log(v[0])),
        ),
        ("exp", vec![m(rng, &[3, 4])], Box::new(|t, v| t.exp(v[0]))),
        (
            "reshape",
            vec![m(rng, &[3, 4])],
            Box::new(|t, v| t.reshape(v[0], vec![2, 6])),
        ),
        (
            "permute",
            vec![m(rng, &[2, 3, 4])],
            Box::new(|t, v| t.permute(v[0], vec![2, 0, 1])),
        ),
        (
            "transpose",
            vec![m(rng, &[3, 4])],
            Box::new(|t, v| t.transpose(v[0])),
        ),
    ]
}

/// Finite-difference check of every differentiable op.
pub fn op_gradient_checks(corrupt: Option<OpKind>, seed: u64) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    op_cases(&mut rng)
        .into_iter()
        .map(|(name, params, build)| {
            let outcome = grad_check(
                |tape, vars| {
                    if let Some(kind) = corrupt {
                        tape.corrupt_adjoint(kind);
                    }
                    let out = build(tape, vars)?;
                    contract(tape, out)
                },
                &params,
                EPSILON,
            );
            CheckResult::from_outcome(format!("op/{name}"), OP_TOLERANCE, outcome)
        })
        .collect()
}

fn random_model(rng: &mut ChaCha8Rng, spec: &ModelSpec) -> Result<ModelState> {
    let model = init_model(spec, rng.random())?;
    let params = model
        .params()
        .iter()
        .map(|p| uniform(rng, p.shape(), -1.0, 1.0))
        .collect();
    model.with_params(params)
}

fn random_dist(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.iter().map(|v| v / s).collect()
}

/// Max relative gradient error of the full objective (complete and missing
/// terms, three candidates) over every parameter.
pub fn loss_gradient_error(fusion: FusionKind, corrupt: Option<OpKind>, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x10);
    let spec = ModelSpec {
        dim_x: 3,
        dim_y: 2,
        hidden_layers: vec![4],
        k: 2,
        num_classes: 3,
        fusion,
    };
    let model = random_model(&mut rng, &spec)?;
    let dist = LabelDistribution::from_probs(&random_dist(&mut rng, 3))?;
    let complete = CompleteBatch::new(
        uniform(&mut rng, &[4, 3], -1.0, 1.0),
        uniform(&mut rng, &[4, 2], -1.0, 1.0),
        vec![0, 1, 2, 1],
    )?;
    let missing = MissingBatch::new(uniform(&mut rng, &[3, 3], -1.0, 1.0), vec![2, 0, 0])?;
    let pool = CandidatePool::uniform(uniform(&mut rng, &[3, 2], -1.0, 1.0))?;
    let params: Vec<Tensor> = model.params().into_iter().cloned().collect();
    grad_check(
        |tape, vars| {
            if let Some(kind) = corrupt {
                tape.corrupt_adjoint(kind);
            }
            let m = model.bind_vars(vars)?;
            let p = pool.bind(tape);
            let terms = nll_on_tape(tape, &m, &dist, Some(&p), Some(&complete), Some(&missing))?;
            Ok(terms.total)
        },
        &params,
        EPSILON,
    )
}

fn small_spec(rng: &mut ChaCha8Rng, fusion: FusionKind) -> ModelSpec {
    ModelSpec {
        dim_x: rng.random_range(1..5),
        dim_y: rng.random_range(1..5),
        hidden_layers: if rng.random_bool(0.5) {
            vec![rng.random_range(1..6)]
        } else {
            vec![]
        },
        k: rng.random_range(1..4),
        num_classes: rng.random_range(2..6),
        fusion,
    }
}

fn prob_sum_error(log_p: &[f64]) -> f64 {
    (log_p.iter().map(|v| v.exp()).sum::<f64>() - 1.0).abs()
}

/// Max deviation from 1 of the summed conditionals over random draws.
pub fn normalization_error(draws: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x20);
    let mut worst = 0.0f64;
    for i in 0..draws {
        let fusion = FusionKind::ALL[i % 3];
        let spec = small_spec(&mut rng, fusion);
        let model = random_model(&mut rng, &spec)?;
        let dist = LabelDistribution::from_probs(&random_dist(&mut rng, spec.num_classes))?;
        let x = uniform(&mut rng, &[spec.dim_x], -2.0, 2.0);
        let y = uniform(&mut rng, &[spec.dim_y], -2.0, 2.0);
        let pool_size = rng.random_range(1..6);
        let pool = CandidatePool::uniform(uniform(&mut rng, &[pool_size, spec.dim_y], -2.0, 2.0))?;
        worst = worst.max(prob_sum_error(&log_q_z_given_xy(
            &model,
            &dist,
            x.data(),
            y.data(),
        )?));
        worst = worst.max(prob_sum_error(&log_q_z_given_x(
            &model,
            &dist,
            &pool,
            x.data(),
        )?));
    }
    Ok(worst)
}

/// Max probability deviation between the likelihood module and an explicitly
/// normalized joint table, over `|X|, |Y| ≤ 5`, `C ≤ 4`, `k ≤ 3` and every fusion.
pub fn joint_oracle_error(seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x30);
    let mut worst = 0.0f64;
    for fusion in FusionKind::ALL {
        for k in 1..=3 {
            for c in 2..=4 {
                for nx in 1..=5 {
                    for ny in 1..=5 {
                        let spec = ModelSpec {
                            dim_x: 2,
                            dim_y: 3,
                            hidden_layers: vec![3],
                            k,
                            num_classes: c,
                            fusion,
                        };
                        worst = worst.max(joint_case(&mut rng, &spec, nx, ny)?);
                    }
                }
            }
        }
    }
    Ok(worst)
}

fn joint_case(rng: &mut ChaCha8Rng, spec: &ModelSpec, nx: usize, ny: usize) -> Result<f64> {
    let model = random_model(rng, spec)?;
    let xs = uniform(rng, &[nx, spec.dim_x], -1.5, 1.5);
    let ys = uniform(rng, &[ny, spec.dim_y], -1.5, 1.5);
    let rx = random_dist(rng, nx);
    let ry = random_dist(rng, ny);
    let dist = LabelDistribution::from_probs(&random_dist(rng, spec.num_classes))?;
    let fx: Vec<Vec<f64>> = model.encode_x(&xs)?.rows().map(<[f64]>::to_vec).collect();
    let gy: Vec<Vec<f64>> = model.encode_y(&ys)?.rows().map(<[f64]>::to_vec).collect();
    let table = eval_joint_oracle(&fx, &gy, &rx, &ry, &dist, &model)?;
    let pool = CandidatePool::with_weights(ys.clone(), &ry)?;
    let mut worst = 0.0f64;
    for i in 0..nx {
        for j in 0..ny {
            let got = log_q_z_given_xy(&model, &dist, xs.row(i), ys.row(j))?;
            for (g, e) in got.iter().zip(table.z_given_xy(i, j)) {
                worst = worst.max((g.exp() - e).abs());
            }
        }
        let got = log_q_z_given_x(&model, &dist, &pool, xs.row(i))?;
        for (g, e) in got.iter().zip(table.z_given_x(i)) {
            worst = worst.max((g.exp() - e).abs());
        }
    }
    Ok(worst)
}

/// With `y` fixed, `Q(z | x, y)` must be a plain softmax of the class scores
/// plus the log prior.
pub fn softmax_reduction_error(draws: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x40);
    let mut worst = 0.0f64;
    for i in 0..draws {
        let spec = small_spec(&mut rng, FusionKind::ALL[i % 3]);
        let model = random_model(&mut rng, &spec)?;
        let dist = LabelDistribution::from_probs(&random_dist(&mut rng, spec.num_classes))?;
        let x = uniform(&mut rng, &[1, spec.dim_x], -2.0, 2.0);
        let y = uniform(&mut rng, &[1, spec.dim_y], -2.0, 2.0);
        let f = model.encode_x(&x)?;
        let g = model.encode_y(&y)?;
        let logits = model.label_scores(&fuse(spec.fusion, f.data(), g.data())?)?;
        let shifted: Vec<f64> = logits
            .iter()
            .zip(dist.log_probs())
            .map(|(a, b)| a + b)
            .collect();
        let norm = log_sum_exp(&shifted);
        let got = log_q_z_given_xy(&model, &dist, x.data(), y.data())?;
        for (g, s) in got.iter().zip(&shifted) {
            worst = worst.max((g - (s - norm)).abs());
        }
    }
    Ok(worst)
}

/// A one-candidate pool reproduces the complete conditional, and without
/// missing samples every method scores the same loss.
pub fn degeneracy_error(seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x50);
    let mut worst = 0.0f64;
    for fusion in FusionKind::ALL {
        for _ in 0..10 {
            let spec = small_spec(&mut rng, fusion);
            let model = random_model(&mut rng, &spec)?;
            let dist = LabelDistribution::from_probs(&random_dist(&mut rng, spec.num_classes))?;
            let x = uniform(&mut rng, &[spec.dim_x], -2.0, 2.0);
            let y = uniform(&mut rng, &[1, spec.dim_y], -2.0, 2.0);
            let pool = CandidatePool::uniform(y.clone())?;
            let a = log_q_z_given_x(&model, &dist, &pool, x.data())?;
            let b = log_q_z_given_xy(&model, &dist, x.data(), y.data())?;
            for (p, q) in a.iter().zip(&b) {
                worst = worst.max((p - q).abs());
            }

            let n = 5;
            let labels = (0..n)
                .map(|_| rng.random_range(0..spec.num_classes))
                .collect();
            let batch = CompleteBatch::new(
                uniform(&mut rng, &[n, spec.dim_x], -2.0, 2.0),
                uniform(&mut rng, &[n, spec.dim_y], -2.0, 2.0),
                labels,
            )?;
            let pool = CandidatePool::uniform(batch.y.clone())?;
            let reference = method_loss(
                MethodKind::MleFull,
                &model,
                &dist,
                &pool,
                Some(&batch),
                None,
            )?
            .total;
            for method in [MethodKind::LowerBound, MethodKind::ZeroPadding] {
                match method_loss(method, &model, &dist, &pool, Some(&batch), None) {
                    Ok(l) => worst = worst.max((l.total - reference).abs()),
                    Err(Error::UnsupportedFusion(_)) => {}
                    Err(e) => return Err(e),
                }
            }
        }
    }
    Ok(worst)
}
