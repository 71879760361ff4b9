//! Trains the full method and both baselines on one shared bundle and
//! compares test accuracy. Zero padding is skipped for the outer-product
//! fusion, which it does not support.
//!
//! `cargo run --release --example baseline_comparison [rate] [seed]`

use mmle::baselines::MethodKind;
use mmle::data::{apply_missing_mask, empirical_label_dist, split, synth_generate, SynthSpec};
use mmle::model::FusionKind;
use mmle::train::{evaluate, train, TrainConfig};
use mmle::Result;

fn main() -> Result<()> {
    let mut args = std::env::args().skip(1);
    let rate: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0.9);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);

    let data = synth_generate(&SynthSpec::default(), seed)?;
    let (train_set, val, test) = split(&data, (0.7, 0.15, 0.15), seed)?;
    let bundle = apply_missing_mask(&train_set, rate, seed)?;
    let dist = empirical_label_dist(&bundle)?;
    println!(
        "rate {rate}: {} complete, {} missing, bundle {}",
        bundle.n_complete(),
        bundle.n_missing(),
        &bundle.fingerprint()[..16]
    );

    for fusion in FusionKind::ALL {
        for method in MethodKind::ALL {
            let config = TrainConfig {
                method,
                fusion,
                missing_rate: rate,
                seed,
                ..TrainConfig::default()
            };
            match train(&config, &bundle, &val) {
                Ok((model, history)) => {
                    let m = evaluate(&model, &dist, &test)?;
                    println!(
                        "{fusion:<14} {method:<12} test {:.4}  (best epoch {})",
                        m.accuracy, history.best_epoch
                    );
                }
                Err(e) => println!("{fusion:<14} {method:<12} {}: {e}", e.kind()),
            }
        }
    }
    Ok(())
}
