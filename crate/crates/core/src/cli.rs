//! Command-line front end. The binary only forwards `argv` to [`main_entry`].

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::autodiff::OpKind;
use crate::config::RunConfig;
use crate::data::{
    apply_missing_mask, empirical_label_dist, load_feature_csv, split, write_feature_csv, Dataset,
};
use crate::error::{Error, Result};
use crate::model::{read_checkpoint, write_checkpoint};
use crate::sweep::{run_sweep, SweepReport};
use crate::train::{evaluate, train, History, Metrics};
use crate::verify::{render, run_all, CheckResult, VerifyOptions};

#[derive(Debug, Parser)]
#[command(
    name = "mmle",
    version,
    about = "Multimodal classification with a missing modality"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic feature CSV triplet.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model and write its checkpoint and history.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a checkpoint on a modality-complete CSV triplet.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        y: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// Metrics file; defaults to `eval_metrics.json` beside the checkpoint.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the missing-rate sweep and write its report.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the built-in gradient and likelihood checks.
    Verify {
        /// Scale the adjoint of one op kind (negative control).
        #[arg(long, hide = true)]
        corrupt_adjoint: Option<OpKind>,
    },
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn prepare_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_triplet(dataset: &Dataset, dir: &Path, prefix: &str) -> Result<()> {
    write_feature_csv(
        dataset,
        &dir.join(format!("{prefix}x.csv")),
        &dir.join(format!("{prefix}y.csv")),
        &dir.join(format!("{prefix}labels.csv")),
    )
}

pub fn cmd_synth(config: &Path, out: &Path) -> Result<Dataset> {
    let cfg = RunConfig::load(config)?;
    prepare_out(out)?;
    let dataset = crate::data::synth_generate(&cfg.synth, cfg.train.seed)?;
    write_triplet(&dataset, out, "")?;
    write(&out.join("config.txt"), cfg.to_config_string())?;
    let s = &cfg.synth;
    println!(
        "classes {}  dim_x {}  dim_y {}  sigma {}  samples/class {}  seed {}",
        s.num_classes, s.dim_x, s.dim_y, s.sigma, s.samples_per_class, cfg.train.seed
    );
    for c in 0..s.num_classes {
        println!(
            "class {c}: mean_x {:?}  mean_y {:?}",
            s.means_x[c], s.means_y[c]
        );
    }
    println!("wrote {} samples to {}", dataset.len(), out.display());
    Ok(dataset)
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub history: History,
    pub val: Metrics,
    pub test: Metrics,
}

/// Splits, masks, trains and writes `model.ckpt`, `history.csv`,
/// `metrics.json`, `config.txt` and the validation and test CSV triplets.
pub fn cmd_train(config: &Path, out: &Path) -> Result<TrainOutcome> {
    let cfg = RunConfig::load(config)?;
    cfg.train.validate()?;
    prepare_out(out)?;
    let seed = cfg.train.seed;
    let dataset = cfg.dataset(seed)?;
    let (train_set, val, test) = split(&dataset, cfg.split, seed)?;
    let bundle = apply_missing_mask(&train_set, cfg.train.missing_rate, seed)?;
    let (model, history) = train(&cfg.train, &bundle, &val)?;
    let dist = empirical_label_dist(&bundle)?;
    let val_metrics = evaluate(&model, &dist, &val)?;
    let test_metrics = if test.is_empty() {
        Metrics::from_predictions(&[], &[], model.num_classes)
    } else {
        evaluate(&model, &dist, &test)?
    };

    write_checkpoint(&out.join("model.ckpt"), &model, &dist)?;
    write(&out.join("history.csv"), history.to_csv())?;
    write(&out.join("config.txt"), cfg.to_config_string())?;
    write(
        &out.join("metrics.json"),
        format!(
            "{{\"val\": {}, \"test\": {}}}\n",
            val_metrics.to_json(),
            test_metrics.to_json()
        ),
    )?;
    write_triplet(&val, out, "val_")?;
    if !test.is_empty() {
        write_triplet(&test, out, "test_")?;
    }
    println!(
        "{} on {}: {} complete, {} missing; best epoch {} of {}",
        cfg.train.method,
        cfg.train.fusion,
        bundle.n_complete(),
        bundle.n_missing(),
        history.best_epoch,
        history.epochs.len()
    );
    println!(
        "val accuracy {:.6}  test accuracy {:.6}",
        val_metrics.accuracy, test_metrics.accuracy
    );
    Ok(TrainOutcome {
        history,
        val: val_metrics,
        test: test_metrics,
    })
}

pub fn cmd_eval(
    checkpoint: &Path,
    x: &Path,
    y: &Path,
    labels: &Path,
    out: Option<&Path>,
) -> Result<Metrics> {
    let (model, dist) = read_checkpoint(checkpoint)?;
    let data = load_feature_csv(x, y, labels, Some(model.num_classes))?;
    if data.dim_x != model.f.input_dim() || data.dim_y != model.g.input_dim() {
        return Err(Error::DimensionMismatch(format!(
            "checkpoint expects {}/{} features, data has {}/{}",
            model.f.input_dim(),
            model.g.input_dim(),
            data.dim_x,
            data.dim_y
        )));
    }
    let metrics = evaluate(&model, &dist, &data)?;
    let json = metrics.to_json();
    let target = match out {
        Some(p) => p.to_path_buf(),
        None => checkpoint
            .parent()
            .unwrap_or(Path::new("."))
            .join("eval_metrics.json"),
    };
    write(&target, format!("{json}\n"))?;
    println!("{json}");
    Ok(metrics)
}

/// Writes `sweep_report.json`, `sweep_report.csv` and `config.txt`.
pub fn cmd_sweep(config: &Path, out: &Path) -> Result<SweepReport> {
    let cfg = RunConfig::load(config)?;
    prepare_out(out)?;
    let report = run_sweep(&cfg.sweep_config()?)?;
    write(&out.join("sweep_report.json"), report.to_json())?;
    write(&out.join("sweep_report.csv"), report.to_csv())?;
    write(&out.join("config.txt"), cfg.to_config_string())?;
    print!("{}", report.summary_table());
    for c in report.failures() {
        if let crate::sweep::CellOutcome::Failed { kind, message } = &c.outcome {
            println!(
                "failed: {} {} rate {} seed {}: {kind}: {message}",
                c.method, c.fusion, c.rate, c.seed
            );
        }
    }
    Ok(report)
}

pub fn cmd_verify(corrupt: Option<OpKind>) -> Vec<CheckResult> {
    let results = run_all(VerifyOptions { corrupt, seed: 0 });
    print!("{}", render(&results));
    results
}

/// One machine-parsable line: `error: <Kind>: <message>`.
pub fn error_line(e: &Error) -> String {
    format!("error: {}: {}", e.kind(), e).replace('\n', " ")
}

/// Parses `args` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn main_entry<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Synth { config, out } => cmd_synth(&config, &out).map(|_| 0),
        Command::Train { config, out } => cmd_train(&config, &out).map(|_| 0),
        Command::Eval {
            checkpoint,
            x,
            y,
            labels,
            out,
        } => cmd_eval(&checkpoint, &x, &y, &labels, out.as_deref()).map(|_| 0),
        Command::Sweep { config, out } => cmd_sweep(&config, &out).map(|_| 0),
        Command::Verify { corrupt_adjoint } => {
            let failed = cmd_verify(corrupt_adjoint).iter().any(|r| !r.passed);
            Ok(i32::from(failed))
        }
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", error_line(&e));
            1
        }
    }
}
