//! Plain-text run configuration.
//!
//! One `key = value` per line; `#` starts a comment; lists are
//! comma-separated; mean vectors are comma-separated rows joined by `;`.
//! Every key is optional. Defaults:
//!
//! | key | default |
//! |-----|---------|
//! | `method` | `mle_full` (`lower_bound`, `zero_padding`) |
//! | `fusion` | `addition` (`concatenation`, `outer_product`) |
//! | `epochs` | `120` |
//! | `batch_size` | `512` |
//! | `learning_rate` | `0.001` |
//! | `beta1`, `beta2`, `adam_eps` | `0.9`, `0.999`, `1e-8` |
//! | `seed` | `0` |
//! | `candidate_pool_size` | `0` (every complete sample) |
//! | `missing_rate` | `0` |
//! | `k` | `32` |
//! | `hidden_layers` | `64,64` (empty for none) |
//! | `patience` | `0` (never stop early) |
//! | `num_classes`, `dim_x`, `dim_y` | `3`, `8`, `8` |
//! | `separation_x`, `separation_y` | `1.8`, `1.0` |
//! | `sigma` | `0.5` |
//! | `samples_per_class` | `200` |
//! | `means_x`, `means_y` | simplex means from the separations |
//! | `data_x`, `data_y`, `data_labels` | unset (synthetic data) |
//! | `split` | `0.7,0.15,0.15` |
//! | `rates` | `0.5,0.8,0.9,0.95` |
//! | `methods` | `mle_full,lower_bound,zero_padding` |
//! | `fusions` | `addition` |
//! | `num_seeds` | `5` |
//! | `threads` | `0` (all cores) |
//!
//! Relative data paths resolve against the config file's directory.

use std::collections::BTreeMap;
use std::fmt::{Display, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::baselines::MethodKind;
use crate::data::{load_feature_csv, synth_generate, Dataset, SynthSpec};
use crate::error::{Error, Result};
use crate::model::FusionKind;
use crate::sweep::{DataSource, SweepConfig};
use crate::train::TrainConfig;

#[derive(Clone, Debug, PartialEq)]
pub struct DataPaths {
    pub x: PathBuf,
    pub y: PathBuf,
    pub labels: PathBuf,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub synth: SynthSpec,
    /// Feature CSVs that replace the synthetic generator when present.
    pub data: Option<DataPaths>,
    pub split: (f64, f64, f64),
    pub rates: Vec<f64>,
    pub methods: Vec<MethodKind>,
    pub fusions: Vec<FusionKind>,
    pub num_seeds: usize,
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let sweep = SweepConfig::default();
        Self {
            train: TrainConfig::default(),
            synth: SynthSpec::default(),
            data: None,
            split: sweep.split,
            rates: sweep.rates,
            methods: sweep.methods,
            fusions: sweep.fusions,
            num_seeds: sweep.num_seeds,
            threads: sweep.threads,
        }
    }
}

const KEYS: &[&str] = &[
    "method",
    "fusion",
    "epochs",
    "batch_size",
    "learning_rate",
    "beta1",
    "beta2",
    "adam_eps",
    "seed",
    "candidate_pool_size",
    "missing_rate",
    "k",
    "hidden_layers",
    "patience",
    "num_classes",
    "dim_x",
    "dim_y",
    "separation_x",
    "separation_y",
    "sigma",
    "samples_per_class",
    "means_x",
    "means_y",
    "data_x",
    "data_y",
    "data_labels",
    "split",
    "rates",
    "methods",
    "fusions",
    "num_seeds",
    "threads",
];

struct Entries {
    map: BTreeMap<String, (usize, String)>,
    errors: Vec<(usize, String)>,
}

impl Entries {
    fn take<T: FromStr>(&mut self, key: &str, into: &mut T)
    where
        T::Err: Display,
    {
        if let Some((line, raw)) = self.map.remove(key) {
            match raw.parse::<T>() {
                Ok(v) => *into = v,
                Err(e) => self.errors.push((line, format!("{key}: {e}"))),
            }
        }
    }

    fn take_list<T: FromStr>(&mut self, key: &str, into: &mut Vec<T>)
    where
        T::Err: Display,
    {
        if let Some((line, raw)) = self.map.remove(key) {
            match parse_list(&raw) {
                Ok(v) => *into = v,
                Err(e) => self.errors.push((line, format!("{key}: {e}"))),
            }
        }
    }

    fn take_raw(&mut self, key: &str) -> Option<(usize, String)> {
        self.map.remove(key)
    }
}

fn parse_list<T: FromStr>(raw: &str) -> std::result::Result<Vec<T>, String>
where
    T::Err: Display,
{
    if raw.trim().is_empty() {
        return Ok(Vec::new());
    }
    raw.split(',')
        .map(|s| {
            s.trim()
                .parse::<T>()
                .map_err(|e| format!("'{}': {e}", s.trim()))
        })
        .collect()
}

fn parse_rows(raw: &str) -> std::result::Result<Vec<Vec<f64>>, String> {
    raw.split(';').map(parse_list).collect()
}

fn join<T: Display>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn join_rows(rows: &[Vec<f64>]) -> String {
    rows.iter().map(|r| join(r)).collect::<Vec<_>>().join(";")
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path.parent())
    }

    /// Parses config text; `base_dir` anchors relative data paths.
    /// All problems are reported together.
    pub fn parse(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let mut entries = Entries {
            map: BTreeMap::new(),
            errors: Vec::new(),
        };
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                entries
                    .errors
                    .push((line, format!("expected 'key = value', got '{content}'")));
                continue;
            };
            let key = key.trim().to_string();
            if !KEYS.contains(&key.as_str()) {
                entries.errors.push((line, format!("unknown key '{key}'")));
                continue;
            }
            if let Some((first, _)) = entries.map.get(&key) {
                entries.errors.push((
                    line,
                    format!("duplicate key '{key}' (first set on line {first})"),
                ));
                continue;
            }
            entries.map.insert(key, (line, value.trim().to_string()));
        }

        let mut cfg = RunConfig::default();
        let t = &mut cfg.train;
        entries.take("method", &mut t.method);
        entries.take("fusion", &mut t.fusion);
        entries.take("epochs", &mut t.epochs);
        entries.take("batch_size", &mut t.batch_size);
        entries.take("learning_rate", &mut t.learning_rate);
        entries.take("beta1", &mut t.beta1);
        entries.take("beta2", &mut t.beta2);
        entries.take("adam_eps", &mut t.adam_eps);
        entries.take("seed", &mut t.seed);
        entries.take("candidate_pool_size", &mut t.candidate_pool_size);
        entries.take("missing_rate", &mut t.missing_rate);
        entries.take("k", &mut t.k);
        entries.take_list("hidden_layers", &mut t.hidden_layers);
        entries.take("patience", &mut t.patience);

        let defaults = SynthSpec::default();
        let (mut c, mut dx, mut dy) = (defaults.num_classes, defaults.dim_x, defaults.dim_y);
        let (mut sep_x, mut sep_y) = (1.8, 1.0);
        entries.take("num_classes", &mut c);
        entries.take("dim_x", &mut dx);
        entries.take("dim_y", &mut dy);
        entries.take("separation_x", &mut sep_x);
        entries.take("separation_y", &mut sep_y);
        let mut synth = SynthSpec::simplex(
            c,
            dx,
            dy,
            sep_x,
            sep_y,
            defaults.sigma,
            defaults.samples_per_class,
        );
        entries.take("sigma", &mut synth.sigma);
        entries.take("samples_per_class", &mut synth.samples_per_class);
        for (key, target) in [
            ("means_x", &mut synth.means_x),
            ("means_y", &mut synth.means_y),
        ] {
            if let Some((line, raw)) = entries.take_raw(key) {
                match parse_rows(&raw) {
                    Ok(rows) => *target = rows,
                    Err(e) => entries.errors.push((line, format!("{key}: {e}"))),
                }
            }
        }
        cfg.synth = synth;

        let paths: Vec<_> = ["data_x", "data_y", "data_labels"]
            .iter()
            .map(|k| entries.take_raw(k))
            .collect();
        let resolve = |p: &str| -> PathBuf {
            let p = PathBuf::from(p);
            match base_dir {
                Some(dir) if p.is_relative() => dir.join(p),
                _ => p,
            }
        };
        match paths.as_slice() {
            [None, None, None] => {}
            [Some(x), Some(y), Some(l)] => {
                cfg.data = Some(DataPaths {
                    x: resolve(&x.1),
                    y: resolve(&y.1),
                    labels: resolve(&l.1),
                })
            }
            _ => {
                let line = paths.iter().flatten().map(|p| p.0).min().unwrap_or(0);
                entries.errors.push((
                    line,
                    "data_x, data_y and data_labels must be set together".into(),
                ));
            }
        }

        if let Some((line, raw)) = entries.take_raw("split") {
            match parse_list::<f64>(&raw) {
                Ok(v) if v.len() == 3 => cfg.split = (v[0], v[1], v[2]),
                Ok(v) => entries.errors.push((
                    line,
                    format!("split: expected 3 fractions, got {}", v.len()),
                )),
                Err(e) => entries.errors.push((line, format!("split: {e}"))),
            }
        }
        entries.take_list("rates", &mut cfg.rates);
        entries.take_list("methods", &mut cfg.methods);
        entries.take_list("fusions", &mut cfg.fusions);
        entries.take("num_seeds", &mut cfg.num_seeds);
        entries.take("threads", &mut cfg.threads);

        entries.errors.sort();
        let mut problems: Vec<String> = entries
            .errors
            .into_iter()
            .map(|(line, msg)| format!("line {line}: {msg}"))
            .collect();
        problems.extend(cfg.problems());
        if problems.is_empty() {
            Ok(cfg)
        } else {
            Err(Error::Config(problems))
        }
    }

    fn problems(&self) -> Vec<String> {
        let mut p = self.train.problems();
        if self.data.is_none() {
            if let Err(Error::Config(q)) = self.synth.validate() {
                p.extend(q);
            }
        }
        let (a, b, c) = self.split;
        if [a, b, c].iter().any(|f| !(0.0..=1.0).contains(f)) || (a + b + c - 1.0).abs() > 1e-9 {
            p.push(format!(
                "split fractions must be in [0, 1] and sum to 1, got {a},{b},{c}"
            ));
        }
        if let Err(Error::Config(q)) = self
            .sweep_config_with(DataSource::Synthetic(self.synth.clone()))
            .validate()
        {
            for msg in q {
                if !p.contains(&msg) {
                    p.push(msg);
                }
            }
        }
        p
    }

    /// The effective configuration as config text. Parsing it back yields
    /// an equal `RunConfig`.
    pub fn to_config_string(&self) -> String {
        let t = &self.train;
        let s = &self.synth;
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("method", t.method.to_string());
        kv("fusion", t.fusion.to_string());
        kv("epochs", t.epochs.to_string());
        kv("batch_size", t.batch_size.to_string());
        kv("learning_rate", t.learning_rate.to_string());
        kv("beta1", t.beta1.to_string());
        kv("beta2", t.beta2.to_string());
        kv("adam_eps", t.adam_eps.to_string());
        kv("seed", t.seed.to_string());
        kv("candidate_pool_size", t.candidate_pool_size.to_string());
        kv("missing_rate", t.missing_rate.to_string());
        kv("k", t.k.to_string());
        kv("hidden_layers", join(&t.hidden_layers));
        kv("patience", t.patience.to_string());
        kv("num_classes", s.num_classes.to_string());
        kv("dim_x", s.dim_x.to_string());
        kv("dim_y", s.dim_y.to_string());
        kv("sigma", s.sigma.to_string());
        kv("samples_per_class", s.samples_per_class.to_string());
        kv("means_x", join_rows(&s.means_x));
        kv("means_y", join_rows(&s.means_y));
        if let Some(d) = &self.data {
            kv("data_x", d.x.display().to_string());
            kv("data_y", d.y.display().to_string());
            kv("data_labels", d.labels.display().to_string());
        }
        kv(
            "split",
            format!("{},{},{}", self.split.0, self.split.1, self.split.2),
        );
        kv("rates", join(&self.rates));
        kv("methods", join(&self.methods));
        kv("fusions", join(&self.fusions));
        kv("num_seeds", self.num_seeds.to_string());
        kv("threads", self.threads.to_string());
        out
    }

    /// The full dataset this config describes: the CSV triplet if set,
    /// otherwise a synthetic draw from `seed`.
    pub fn dataset(&self, seed: u64) -> Result<Dataset> {
        match &self.data {
            Some(d) => load_feature_csv(&d.x, &d.y, &d.labels, None),
            None => synth_generate(&self.synth, seed),
        }
    }

    fn sweep_config_with(&self, data: DataSource) -> SweepConfig {
        SweepConfig {
            base: self.train.clone(),
            data,
            rates: self.rates.clone(),
            methods: self.methods.clone(),
            fusions: self.fusions.clone(),
            num_seeds: self.num_seeds,
            split: self.split,
            threads: self.threads,
        }
    }

    pub fn sweep_config(&self) -> Result<SweepConfig> {
        let data = match &self.data {
            Some(d) => DataSource::Fixed(load_feature_csv(&d.x, &d.y, &d.labels, None)?),
            None => DataSource::Synthetic(self.synth.clone()),
        };
        Ok(self.sweep_config_with(data))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(RunConfig::parse("", None).unwrap(), RunConfig::default());
        assert_eq!(
            RunConfig::parse("# nothing\n\n", None).unwrap(),
            RunConfig::default()
        );
    }

    #[test]
    fn parses_values_and_lists() {
        let cfg = RunConfig::parse(
            "method = lb\nfusion = outer_product # trailing comment\nhidden_layers = 16, 8\n\
             rates = 0.1,0.2\nmethods = mle_full,zero_padding\nsplit = 0.6,0.2,0.2\n\
             means_x = 1,0;0,1\nmeans_y = 0,0;2,2\nnum_classes = 2\ndim_x = 2\ndim_y = 2\n",
            None,
        )
        .unwrap();
        assert_eq!(cfg.train.method, MethodKind::LowerBound);
        assert_eq!(cfg.train.fusion, FusionKind::OuterProduct);
        assert_eq!(cfg.train.hidden_layers, vec![16, 8]);
        assert_eq!(cfg.rates, vec![0.1, 0.2]);
        assert_eq!(
            cfg.methods,
            vec![MethodKind::MleFull, MethodKind::ZeroPadding]
        );
        assert_eq!(cfg.split, (0.6, 0.2, 0.2));
        assert_eq!(cfg.synth.means_y, vec![vec![0.0, 0.0], vec![2.0, 2.0]]);
    }

    #[test]
    fn empty_hidden_layers_means_linear() {
        let cfg = RunConfig::parse("hidden_layers =\n", None).unwrap();
        assert!(cfg.train.hidden_layers.is_empty());
    }

    #[test]
    fn reports_every_offending_key() {
        let err = RunConfig::parse(
            "epochs = many\nbogus = 1\nlearning_rate = 0.1\nwidth = 3\nk = -1\n",
            None,
        )
        .unwrap_err();
        let Error::Config(p) = err else { panic!() };
        assert_eq!(p.len(), 4, "{p:?}");
        assert!(p[0].starts_with("line 1: epochs"));
        assert!(p[1].contains("'bogus'"));
        assert!(p[2].contains("'width'"));
        assert!(p[3].starts_with("line 5: k"));
    }

    #[test]
    fn semantic_problems_are_listed() {
        let err = RunConfig::parse("epochs = 0\nsigma = 0\nrates = 1.5\n", None).unwrap_err();
        let Error::Config(p) = err else { panic!() };
        assert_eq!(p.len(), 3, "{p:?}");
    }

    #[test]
    fn duplicates_and_partial_paths_rejected() {
        let err = RunConfig::parse("seed = 1\nseed = 2\ndata_x = a.csv\n", None).unwrap_err();
        let Error::Config(p) = err else { panic!() };
        assert_eq!(p.len(), 2, "{p:?}");
    }

    #[test]
    fn echo_round_trips() {
        let cfg = RunConfig::parse(
            "learning_rate = 0.0003\nseparation_x = 1.234567890123\nmissing_rate = 0.9\nhidden_layers = 5\n\
             data_x = x.csv\ndata_y = y.csv\ndata_labels = l.csv\nfusions = addition,concatenation\n",
            Some(Path::new("/tmp/run")),
        )
        .unwrap();
        assert_eq!(
            cfg.data.as_ref().unwrap().x,
            PathBuf::from("/tmp/run/x.csv")
        );
        let echo = cfg.to_config_string();
        let again = RunConfig::parse(&echo, None).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.to_config_string(), echo);
    }

    #[test]
    fn zero_padding_outer_is_not_a_parse_error() {
        let cfg =
            RunConfig::parse("method = zero_padding\nfusion = outer_product\n", None).unwrap();
        assert!(matches!(
            cfg.train.validate(),
            Err(Error::UnsupportedFusion(_))
        ));
    }
}
