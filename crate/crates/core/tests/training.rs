mod common;

use mmle::baselines::MethodKind;
use mmle::data::{apply_missing_mask, empirical_label_dist, split, synth_generate, SynthSpec};
use mmle::likelihood::LabelDistribution;
use mmle::model::FusionKind;
use mmle::sweep::{run_sweep, CellOutcome, DataSource, SweepConfig};
use mmle::train::{evaluate, predict, train, TrainConfig};

#[test]
fn fully_supervised_default_problem_reaches_095() {
    let data = synth_generate(&SynthSpec::default(), 0).unwrap();
    let (train_set, val, _) = split(&data, (0.7, 0.15, 0.15), 0).unwrap();
    let bundle = apply_missing_mask(&train_set, 0.0, 0).unwrap();
    let config = TrainConfig {
        epochs: 200,
        ..TrainConfig::default()
    };
    let (_, history) = train(&config, &bundle, &val).unwrap();
    assert!(
        history.best_val_accuracy >= 0.95,
        "{}",
        history.best_val_accuracy
    );
}

#[test]
fn predict_follows_rescaled_logits() {
    let data = synth_generate(&SynthSpec::simplex(3, 4, 4, 1.0, 1.0, 1.0, 20), 2).unwrap();
    let r_z = [0.5, 0.2, 0.3];
    let dist = LabelDistribution::from_probs(&r_z).unwrap();
    for fusion in FusionKind::ALL {
        let mut model = common::random_model(4, 4, &[8], 3, 3, fusion, 4, 3.0);
        model.h.table.data_mut().iter_mut().for_each(|v| *v *= 2.0);
        for s in &data.samples {
            let y = s.y.as_ref().unwrap();
            let fused = common::fuse(
                fusion,
                &common::encode(&model.f, &s.x),
                &common::encode(&model.g, y),
            );
            let scores: Vec<f64> = common::logits(&model, &fused)
                .iter()
                .zip(&r_z)
                .map(|(l, p)| l + p.ln())
                .collect();
            let mut best = 0;
            for c in 1..scores.len() {
                if scores[c] > scores[best] {
                    best = c;
                }
            }
            assert_eq!(predict(&model, &dist, &s.x, y).unwrap(), best);
        }
    }
}

fn small_sweep(threads: usize) -> SweepConfig {
    SweepConfig {
        base: TrainConfig {
            epochs: 15,
            hidden_layers: vec![16],
            k: 8,
            ..TrainConfig::default()
        },
        data: DataSource::Synthetic(SynthSpec {
            samples_per_class: 40,
            ..SynthSpec::default()
        }),
        rates: vec![0.5, 0.9],
        num_seeds: 2,
        fusions: vec![FusionKind::Addition, FusionKind::OuterProduct],
        threads,
        ..SweepConfig::default()
    }
}

#[test]
fn single_cell_sweep_matches_direct_run() {
    let spec = SynthSpec {
        samples_per_class: 60,
        ..SynthSpec::default()
    };
    let base = TrainConfig {
        epochs: 25,
        seed: 7,
        ..TrainConfig::default()
    };
    let report = run_sweep(&SweepConfig {
        base: base.clone(),
        data: DataSource::Synthetic(spec.clone()),
        rates: vec![0.8],
        methods: vec![MethodKind::MleFull],
        fusions: vec![FusionKind::Concatenation],
        num_seeds: 1,
        threads: 1,
        ..SweepConfig::default()
    })
    .unwrap();
    assert_eq!(report.cells.len(), 1);

    let data = synth_generate(&spec, 7).unwrap();
    let (train_set, val, test) = split(&data, (0.7, 0.15, 0.15), 7).unwrap();
    let bundle = apply_missing_mask(&train_set, 0.8, 7).unwrap();
    let config = TrainConfig {
        fusion: FusionKind::Concatenation,
        missing_rate: 0.8,
        ..base
    };
    let (model, history) = train(&config, &bundle, &val).unwrap();
    let metrics = evaluate(&model, &empirical_label_dist(&bundle).unwrap(), &test).unwrap();

    let cell = &report.cells[0];
    assert_eq!(cell.fingerprint, bundle.fingerprint());
    match &cell.outcome {
        CellOutcome::Ok {
            metrics: m,
            best_epoch,
            best_val_accuracy,
        } => {
            assert_eq!(m, &metrics);
            assert_eq!(*best_epoch, history.best_epoch);
            assert_eq!(*best_val_accuracy, history.best_val_accuracy);
        }
        other => panic!("cell failed: {other:?}"),
    }
    let g = report
        .group(MethodKind::MleFull, FusionKind::Concatenation, 0.8)
        .unwrap();
    assert_eq!((g.runs, g.mean), (1, metrics.accuracy));
}

#[test]
fn sweep_reports_do_not_depend_on_threads_or_reruns() {
    let a = run_sweep(&small_sweep(1)).unwrap();
    let b = run_sweep(&small_sweep(1)).unwrap();
    let c = run_sweep(&small_sweep(4)).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    assert_eq!(a.to_json(), c.to_json());
    assert_eq!(a.to_csv(), c.to_csv());

    // 2 fusions × 2 rates × 2 seeds × 3 methods, zero padding failing on the
    // outer product.
    assert_eq!(a.cells.len(), 24);
    assert_eq!(a.failures().count(), 4);
    assert!(a
        .failures()
        .all(|c| c.method == MethodKind::ZeroPadding && c.fusion == FusionKind::OuterProduct));
    for rate in [0.5, 0.9] {
        for seed in [0, 1] {
            let prints: Vec<&str> = a
                .cells
                .iter()
                .filter(|c| c.rate == rate && c.seed == seed)
                .map(|c| c.fingerprint.as_str())
                .collect();
            assert!(prints.windows(2).all(|w| w[0] == w[1]));
        }
    }
}
