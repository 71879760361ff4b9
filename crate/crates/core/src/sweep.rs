//! Missing-rate sweep over methods, fusions and seeds.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::baselines::MethodKind;
use crate::data::{
    apply_missing_mask, empirical_label_dist, split, synth_generate, Dataset, SynthSpec,
};
use crate::error::{Error, Result};
use crate::model::FusionKind;
use crate::train::{evaluate, train, Metrics, TrainConfig};

#[derive(Clone, Debug, PartialEq)]
pub enum DataSource {
    /// A fresh draw per seed.
    Synthetic(SynthSpec),
    /// One fixed dataset, re-split per seed.
    Fixed(Dataset),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    /// Method, fusion, rate and seed are overridden per cell.
    pub base: TrainConfig,
    pub data: DataSource,
    pub rates: Vec<f64>,
    pub methods: Vec<MethodKind>,
    pub fusions: Vec<FusionKind>,
    pub num_seeds: usize,
    pub split: (f64, f64, f64),
    /// Worker threads; 0 lets rayon decide.
    pub threads: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            base: TrainConfig::default(),
            data: DataSource::Synthetic(SynthSpec::default()),
            rates: vec![0.5, 0.8, 0.9, 0.95],
            methods: MethodKind::ALL.to_vec(),
            fusions: vec![FusionKind::Addition],
            num_seeds: 5,
            split: (0.7, 0.15, 0.15),
            threads: 0,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        let mut p = Vec::new();
        if let Some(r) = self.rates.iter().find(|r| !(0.0..1.0).contains(*r)) {
            p.push(format!("rates must lie in [0, 1), got {r}"));
        }
        if self.rates.is_empty() || self.methods.is_empty() || self.fusions.is_empty() {
            p.push("rates, methods and fusions must be non-empty".into());
        }
        if self.num_seeds == 0 {
            p.push("num_seeds must be at least 1".into());
        }
        p.extend(self.base.problems());
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(p))
        }
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.num_seeds as u64)
            .map(|i| self.base.seed + i)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum CellOutcome {
    Ok {
        metrics: Metrics,
        best_epoch: usize,
        best_val_accuracy: f64,
    },
    Failed {
        kind: &'static str,
        message: String,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepCell {
    pub method: MethodKind,
    pub fusion: FusionKind,
    pub rate: f64,
    pub seed: u64,
    /// Hash of the training bundle; equal across methods for one seed and rate.
    pub fingerprint: String,
    pub outcome: CellOutcome,
}

impl SweepCell {
    pub fn accuracy(&self) -> Option<f64> {
        match &self.outcome {
            CellOutcome::Ok { metrics, .. } => Some(metrics.accuracy),
            CellOutcome::Failed { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroupSummary {
    pub method: MethodKind,
    pub fusion: FusionKind,
    pub rate: f64,
    pub mean: f64,
    /// Sample standard deviation; 0 with fewer than two runs.
    pub stddev: f64,
    pub runs: usize,
    pub failures: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepReport {
    /// Ordered by fusion, rate, seed, method.
    pub cells: Vec<SweepCell>,
    /// Ordered by fusion, method, rate.
    pub groups: Vec<GroupSummary>,
}

struct Job {
    fusion: FusionKind,
    rate: f64,
    seed: u64,
    method: MethodKind,
}

pub fn run_sweep(config: &SweepConfig) -> Result<SweepReport> {
    config.validate()?;
    let seeds = config.seeds();
    let splits = seeds
        .iter()
        .map(|&s| {
            let dataset = match &config.data {
                DataSource::Synthetic(spec) => synth_generate(spec, s)?,
                DataSource::Fixed(d) => d.clone(),
            };
            split(&dataset, config.split, s)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut jobs = Vec::new();
    for &fusion in &config.fusions {
        for &rate in &config.rates {
            for &seed in &seeds {
                for &method in &config.methods {
                    jobs.push(Job {
                        fusion,
                        rate,
                        seed,
                        method,
                    });
                }
            }
        }
    }

    let run = |job: &Job| -> SweepCell {
        let (train_set, val, test) = &splits[(job.seed - config.base.seed) as usize];
        let cfg = TrainConfig {
            method: job.method,
            fusion: job.fusion,
            missing_rate: job.rate,
            seed: job.seed,
            ..config.base.clone()
        };
        let mut fingerprint = String::new();
        let outcome = apply_missing_mask(train_set, job.rate, job.seed)
            .and_then(|bundle| {
                fingerprint = bundle.fingerprint();
                let (model, history) = train(&cfg, &bundle, val)?;
                let metrics = evaluate(&model, &empirical_label_dist(&bundle)?, test)?;
                Ok(CellOutcome::Ok {
                    metrics,
                    best_epoch: history.best_epoch,
                    best_val_accuracy: history.best_val_accuracy,
                })
            })
            .unwrap_or_else(|e| CellOutcome::Failed {
                kind: e.kind(),
                message: e.to_string(),
            });
        SweepCell {
            method: job.method,
            fusion: job.fusion,
            rate: job.rate,
            seed: job.seed,
            fingerprint,
            outcome,
        }
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| Error::Contract(format!("thread pool: {e}")))?;
    let cells: Vec<SweepCell> = pool.install(|| jobs.par_iter().map(run).collect());

    let mut groups = Vec::new();
    for &fusion in &config.fusions {
        for &method in &config.methods {
            for &rate in &config.rates {
                let members: Vec<&SweepCell> = cells
                    .iter()
                    .filter(|c| c.fusion == fusion && c.method == method && c.rate == rate)
                    .collect();
                let acc: Vec<f64> = members.iter().filter_map(|c| c.accuracy()).collect();
                let (mean, stddev) = mean_std(&acc);
                groups.push(GroupSummary {
                    method,
                    fusion,
                    rate,
                    mean,
                    stddev,
                    runs: acc.len(),
                    failures: members.len() - acc.len(),
                });
            }
        }
    }
    Ok(SweepReport { cells, groups })
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn json_str(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn json_num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6}")
    } else {
        "null".into()
    }
}

impl SweepReport {
    pub fn group(
        &self,
        method: MethodKind,
        fusion: FusionKind,
        rate: f64,
    ) -> Option<&GroupSummary> {
        self.groups
            .iter()
            .find(|g| g.method == method && g.fusion == fusion && g.rate == rate)
    }

    pub fn failures(&self) -> impl Iterator<Item = &SweepCell> {
        self.cells.iter().filter(|c| c.accuracy().is_none())
    }

    pub fn to_json(&self) -> String {
        let mut s = String::from("{\n  \"cells\": [");
        for (i, c) in self.cells.iter().enumerate() {
            s.push_str(if i == 0 { "\n" } else { ",\n" });
            let _ = write!(
                s,
                "    {{\"method\": {}, \"fusion\": {}, \"rate\": {}, \"seed\": {}, \"fingerprint\": {}, ",
                json_str(c.method.name()),
                json_str(c.fusion.name()),
                json_num(c.rate),
                c.seed,
                json_str(&c.fingerprint)
            );
            match &c.outcome {
                CellOutcome::Ok {
                    metrics,
                    best_epoch,
                    best_val_accuracy,
                } => {
                    let confusion: Vec<String> = metrics
                        .confusion
                        .iter()
                        .flatten()
                        .map(|v| v.to_string())
                        .collect();
                    let _ = write!(
                        s,
                        "\"status\": \"ok\", \"accuracy\": {}, \"confusion\": [{}], \"best_epoch\": {}, \"best_val_accuracy\": {}}}",
                        json_num(metrics.accuracy),
                        confusion.join(", "),
                        best_epoch,
                        json_num(*best_val_accuracy)
                    );
                }
                CellOutcome::Failed { kind, message } => {
                    let _ = write!(
                        s,
                        "\"status\": \"failed\", \"error\": {}, \"message\": {}}}",
                        json_str(kind),
                        json_str(message)
                    );
                }
            }
        }
        s.push_str("\n  ],\n  \"summary\": [");
        for (i, g) in self.groups.iter().enumerate() {
            s.push_str(if i == 0 { "\n" } else { ",\n" });
            let _ = write!(
                s,
                "    {{\"method\": {}, \"fusion\": {}, \"rate\": {}, \"mean_accuracy\": {}, \"stddev\": {}, \"runs\": {}, \"failures\": {}}}",
                json_str(g.method.name()),
                json_str(g.fusion.name()),
                json_num(g.rate),
                json_num(g.mean),
                json_num(g.stddev),
                g.runs,
                g.failures
            );
        }
        s.push_str("\n  ]\n}\n");
        s
    }

    /// One row per cell; failed cells have an empty accuracy field.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("method,fusion,rate,seed,accuracy\n");
        for c in &self.cells {
            let acc = c.accuracy().map(|a| format!("{a:.6}")).unwrap_or_default();
            let _ = writeln!(
                s,
                "{},{},{:.6},{},{}",
                c.method, c.fusion, c.rate, c.seed, acc
            );
        }
        s
    }

    /// Plain-text table of group means, one line per group.
    pub fn summary_table(&self) -> String {
        let mut s = String::new();
        for g in &self.groups {
            let _ = writeln!(
                s,
                "{:<13} {:<14} rate {:.2}  acc {:.4} ± {:.4}  ({} runs, {} failed)",
                g.method.name(),
                g.fusion.name(),
                g.rate,
                g.mean,
                g.stddev,
                g.runs,
                g.failures
            );
        }
        s
    }
}
