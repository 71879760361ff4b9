mod common;

use std::collections::BTreeMap;

use mmle::data::{apply_missing_mask, split, synth_generate, Dataset, Sample, SynthSpec};
use proptest::prelude::*;

fn toy(counts: &[usize], seed: u64) -> Dataset {
    let mut samples = Vec::new();
    for (z, &n) in counts.iter().enumerate() {
        for v in common::vectors(seed ^ z as u64, n, 2, 1.0) {
            samples.push(Sample {
                id: format!("t{}", samples.len()),
                x: v.clone(),
                y: Some(vec![v[0] * 2.0]),
                z,
            });
        }
    }
    Dataset::new(samples, counts.len()).unwrap()
}

fn xz_multiset<'a>(
    samples: impl Iterator<Item = &'a Sample>,
) -> BTreeMap<(Vec<u64>, usize), usize> {
    let mut m = BTreeMap::new();
    for s in samples {
        *m.entry((s.x.iter().map(|v| v.to_bits()).collect(), s.z))
            .or_insert(0) += 1;
    }
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn masking_preserves_x_z_pairs(counts in prop::collection::vec(1usize..30, 2..5), rate in 0.0f64..0.9, seed in any::<u64>()) {
        let data = toy(&counts, seed);
        let n = data.len();
        prop_assume!(((rate * n as f64) + 0.5).floor() < n as f64);
        let bundle = apply_missing_mask(&data, rate, seed).unwrap();
        prop_assert_eq!(bundle.n_missing(), ((rate * n as f64) + 0.5).floor() as usize);
        prop_assert_eq!(
            xz_multiset(bundle.complete.iter().chain(&bundle.missing)),
            xz_multiset(data.samples.iter())
        );
        prop_assert!(bundle.missing.iter().all(|s| s.y.is_none()));
        prop_assert_eq!(apply_missing_mask(&data, rate, seed).unwrap(), bundle);
    }

    #[test]
    fn split_is_stratified(counts in prop::collection::vec(1usize..60, 2..5), seed in any::<u64>()) {
        let data = toy(&counts, seed);
        let (train, val, test) = split(&data, (0.7, 0.15, 0.15), seed).unwrap();
        prop_assert_eq!(train.len() + val.len() + test.len(), data.len());
        for (c, &n) in counts.iter().enumerate() {
            let val_n = val.class_counts()[c];
            let test_n = test.class_counts()[c];
            prop_assert!((val_n as f64 - 0.15 * n as f64).abs() <= 1.0);
            prop_assert!((test_n as f64 - 0.15 * n as f64).abs() <= 1.0);
            prop_assert!((train.class_counts()[c] as f64 - 0.7 * n as f64).abs() <= 2.0);
        }
        let again = split(&data, (0.7, 0.15, 0.15), seed).unwrap();
        prop_assert_eq!(again, (train, val, test));
    }
}

#[test]
fn default_problem_leaves_bayes_headroom() {
    // Nearest stacked class mean is the Bayes rule for isotropic Gaussians
    // with equal priors and a shared σ.
    let spec = SynthSpec {
        samples_per_class: 3000,
        ..SynthSpec::default()
    };
    let data = synth_generate(&spec, 17).unwrap();
    let correct = data
        .samples
        .iter()
        .filter(|s| {
            let y = s.y.as_ref().unwrap();
            let d = |c: usize| -> f64 {
                let dx: f64 =
                    s.x.iter()
                        .zip(&spec.means_x[c])
                        .map(|(a, m)| (a - m).powi(2))
                        .sum();
                let dy: f64 = y
                    .iter()
                    .zip(&spec.means_y[c])
                    .map(|(a, m)| (a - m).powi(2))
                    .sum();
                dx + dy
            };
            (0..spec.num_classes)
                .min_by(|&a, &b| d(a).total_cmp(&d(b)))
                .unwrap()
                == s.z
        })
        .count();
    let acc = correct as f64 / data.len() as f64;
    assert!(acc >= 0.95, "Bayes accuracy {acc}");
    assert_eq!(
        data.samples
            .iter()
            .filter(|s| spec.bayes_predict(&s.x, s.y.as_ref().unwrap()) == s.z)
            .count(),
        correct
    );
}

#[test]
fn default_split_and_mask_sizes() {
    let data = synth_generate(&SynthSpec::default(), 0).unwrap();
    let (train, val, test) = split(&data, (0.7, 0.15, 0.15), 0).unwrap();
    assert_eq!((train.len(), val.len(), test.len()), (420, 90, 90));
    for (rate, missing) in [(0.5, 210), (0.8, 336), (0.9, 378), (0.95, 399)] {
        let b = apply_missing_mask(&train, rate, 0).unwrap();
        assert_eq!((b.n_missing(), b.n_complete()), (missing, 420 - missing));
    }
}
