//! Trains the full maximum-likelihood model on synthetic data where 80% of
//! the training samples lost modality Y, then saves, reloads and scores the
//! checkpoint on the modality-complete test split.
//!
//! `cargo run --release --example missing_modality_training [rate] [fusion]`

use mmle::data::{apply_missing_mask, empirical_label_dist, split, synth_generate, SynthSpec};
use mmle::model::{read_checkpoint, write_checkpoint, FusionKind};
use mmle::train::{evaluate, train, TrainConfig};
use mmle::Result;

fn main() -> Result<()> {
    let mut args = std::env::args().skip(1);
    let rate: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0.8);
    let fusion: FusionKind = args
        .next()
        .and_then(|s| s.parse().ok())
        .unwrap_or(FusionKind::Addition);

    let seed = 3;
    let data = synth_generate(&SynthSpec::default(), seed)?;
    let (train_set, val, test) = split(&data, (0.7, 0.15, 0.15), seed)?;
    let bundle = apply_missing_mask(&train_set, rate, seed)?;
    println!(
        "{} complete + {} missing training samples, {} val, {} test",
        bundle.n_complete(),
        bundle.n_missing(),
        val.len(),
        test.len()
    );

    let config = TrainConfig {
        fusion,
        missing_rate: rate,
        seed,
        ..TrainConfig::default()
    };
    let (model, history) = train(&config, &bundle, &val)?;
    for r in history.epochs.iter().step_by(20) {
        println!(
            "epoch {:>3}  train nll {:.4}  val acc {:.4}  val nll {:.4}",
            r.epoch, r.train_loss, r.val_accuracy, r.val_loss
        );
    }
    println!(
        "best epoch {} (val accuracy {:.4})",
        history.best_epoch, history.best_val_accuracy
    );

    let dist = empirical_label_dist(&bundle)?;
    let path = std::env::temp_dir().join("mmle_example_model.ckpt");
    write_checkpoint(&path, &model, &dist)?;
    let (restored, restored_dist) = read_checkpoint(&path)?;
    assert_eq!(restored, model);

    let metrics = evaluate(&restored, &restored_dist, &test)?;
    println!("test accuracy {:.4}", metrics.accuracy);
    println!("confusion (rows = truth): {:?}", metrics.confusion);
    Ok(())
}
