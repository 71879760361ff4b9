//! Samples, feature-file I/O, splitting, masking and synthetic data.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::likelihood::{CandidatePool, CompleteBatch, LabelDistribution, MissingBatch};
use crate::rng::{self, Stream};

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub id: String,
    pub x: Vec<f64>,
    /// `None` when modality Y was not observed.
    pub y: Option<Vec<f64>>,
    pub z: usize,
}

/// A modality-complete sample set.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub num_classes: usize,
    pub dim_x: usize,
    pub dim_y: usize,
}

/// Training data split into the modality-complete set (`y` present) and the
/// modality-missing set (`y` absent).
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetBundle {
    pub complete: Vec<Sample>,
    pub missing: Vec<Sample>,
    pub num_classes: usize,
    pub dim_x: usize,
    pub dim_y: usize,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>, num_classes: usize) -> Result<Self> {
        let Some(first) = samples.first() else {
            return Err(Error::Contract("dataset is empty".into()));
        };
        let dim_x = first.x.len();
        let dim_y = first.y.as_ref().map_or(0, Vec::len);
        for s in &samples {
            validate_sample(s, num_classes, dim_x, dim_y)?;
            if s.y.is_none() {
                return Err(Error::Contract(format!(
                    "sample {} lacks modality Y in a complete dataset",
                    s.id
                )));
            }
        }
        Ok(Self {
            samples,
            num_classes,
            dim_x,
            dim_y,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for s in &self.samples {
            counts[s.z] += 1;
        }
        counts
    }

    pub fn x_matrix(&self) -> Tensor {
        rows_tensor(self.samples.iter().map(|s| s.x.as_slice()), self.dim_x)
    }

    pub fn y_matrix(&self) -> Tensor {
        rows_tensor(
            self.samples.iter().map(|s| s.y.as_deref().unwrap()),
            self.dim_y,
        )
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.z).collect()
    }

    pub fn as_batch(&self) -> CompleteBatch {
        CompleteBatch {
            x: self.x_matrix(),
            y: self.y_matrix(),
            labels: self.labels(),
        }
    }
}

fn validate_sample(s: &Sample, num_classes: usize, dim_x: usize, dim_y: usize) -> Result<()> {
    if s.z >= num_classes {
        return Err(Error::Contract(format!(
            "sample {} has label {} but there are {num_classes} classes",
            s.id, s.z
        )));
    }
    if s.x.len() != dim_x || s.y.as_ref().is_some_and(|y| y.len() != dim_y) {
        return Err(Error::DimensionMismatch(format!(
            "sample {} has non-uniform feature width",
            s.id
        )));
    }
    if s.x
        .iter()
        .chain(s.y.iter().flatten())
        .any(|v| !v.is_finite())
    {
        return Err(Error::Contract(format!(
            "sample {} has a non-finite feature",
            s.id
        )));
    }
    Ok(())
}

fn rows_tensor<'a>(rows: impl Iterator<Item = &'a [f64]>, width: usize) -> Tensor {
    let mut data = Vec::new();
    let mut n = 0;
    for r in rows {
        data.extend_from_slice(r);
        n += 1;
    }
    Tensor::from_parts(vec![n, width], data)
}

impl DatasetBundle {
    pub fn new(
        complete: Vec<Sample>,
        missing: Vec<Sample>,
        num_classes: usize,
        dim_x: usize,
        dim_y: usize,
    ) -> Result<Self> {
        if complete.is_empty() {
            return Err(Error::Contract(
                "a bundle needs at least one modality-complete sample".into(),
            ));
        }
        for s in &complete {
            validate_sample(s, num_classes, dim_x, dim_y)?;
            if s.y.is_none() {
                return Err(Error::Contract(format!("complete sample {} lacks y", s.id)));
            }
        }
        for s in &missing {
            validate_sample(s, num_classes, dim_x, dim_y)?;
            if s.y.is_some() {
                return Err(Error::Contract(format!(
                    "missing sample {} still has y",
                    s.id
                )));
            }
        }
        Ok(Self {
            complete,
            missing,
            num_classes,
            dim_x,
            dim_y,
        })
    }

    pub fn n_complete(&self) -> usize {
        self.complete.len()
    }

    pub fn n_missing(&self) -> usize {
        self.missing.len()
    }

    pub fn complete_batch(&self, idx: &[usize]) -> CompleteBatch {
        let pick = || idx.iter().map(|&i| &self.complete[i]);
        CompleteBatch {
            x: rows_tensor(pick().map(|s| s.x.as_slice()), self.dim_x),
            y: rows_tensor(pick().map(|s| s.y.as_deref().unwrap()), self.dim_y),
            labels: pick().map(|s| s.z).collect(),
        }
    }

    pub fn missing_batch(&self, idx: &[usize]) -> MissingBatch {
        let pick = || idx.iter().map(|&i| &self.missing[i]);
        MissingBatch {
            x: rows_tensor(pick().map(|s| s.x.as_slice()), self.dim_x),
            labels: pick().map(|s| s.z).collect(),
        }
    }

    /// Every complete-set `y`, uniformly weighted.
    pub fn full_pool(&self) -> CandidatePool {
        let all: Vec<usize> = (0..self.n_complete()).collect();
        self.pool(&all)
    }

    pub fn pool(&self, idx: &[usize]) -> CandidatePool {
        let y = rows_tensor(
            idx.iter().map(|&i| self.complete[i].y.as_deref().unwrap()),
            self.dim_y,
        );
        CandidatePool::uniform(y).expect("pool rows form a matrix")
    }

    /// SHA-256 over the bundle contents; equal bundles hash equal.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.num_classes as u64).to_le_bytes());
        for (tag, set) in [(b'c', &self.complete), (b'm', &self.missing)] {
            h.update([tag]);
            for s in set {
                h.update(s.id.as_bytes());
                h.update((s.z as u64).to_le_bytes());
                for v in s.x.iter().chain(s.y.iter().flatten()) {
                    h.update(v.to_le_bytes());
                }
            }
        }
        h.finalize().iter().fold(String::new(), |mut acc, b| {
            let _ = write!(acc, "{b:02x}");
            acc
        })
    }
}

/// `R_Z(c) = count(c) / (n_c + n_m)` over both sets.
pub fn empirical_label_dist(bundle: &DatasetBundle) -> Result<LabelDistribution> {
    let mut counts = vec![0; bundle.num_classes];
    for s in bundle.complete.iter().chain(&bundle.missing) {
        counts[s.z] += 1;
    }
    LabelDistribution::from_counts(&counts)
}

/// Stratified split: each class is shuffled and cut so that validation and
/// test receive `floor(n_class · fraction)` samples and train takes the rest.
pub fn split(
    dataset: &Dataset,
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<(Dataset, Dataset, Dataset)> {
    let (ft, fv, fs) = fractions;
    if [ft, fv, fs].iter().any(|f| !(0.0..=1.0).contains(f)) || (ft + fv + fs - 1.0).abs() > 1e-9 {
        return Err(Error::Contract(format!(
            "split fractions {fractions:?} must be in [0, 1] and sum to 1"
        )));
    }
    if dataset.is_empty() {
        return Err(Error::Contract("cannot split an empty dataset".into()));
    }
    let mut rng = rng::stream(seed, Stream::Split);
    let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for c in 0..dataset.num_classes {
        let mut members: Vec<&Sample> = dataset.samples.iter().filter(|s| s.z == c).collect();
        members.shuffle(&mut rng);
        let n = members.len() as f64;
        let n_val = (n * fv + 1e-9).floor() as usize;
        let n_test = (n * fs + 1e-9).floor() as usize;
        let n_train = members.len() - n_val - n_test;
        train.extend(members[..n_train].iter().map(|s| (*s).clone()));
        val.extend(
            members[n_train..n_train + n_val]
                .iter()
                .map(|s| (*s).clone()),
        );
        test.extend(members[n_train + n_val..].iter().map(|s| (*s).clone()));
    }
    let make = |samples: Vec<Sample>| Dataset {
        samples,
        num_classes: dataset.num_classes,
        dim_x: dataset.dim_x,
        dim_y: dataset.dim_y,
    };
    Ok((make(train), make(val), make(test)))
}

/// Removes `y` from `round(rate · n)` uniformly chosen samples (ties round up).
pub fn apply_missing_mask(train: &Dataset, rate: f64, seed: u64) -> Result<DatasetBundle> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Contract(format!(
            "missing rate {rate} is outside [0, 1)"
        )));
    }
    let n = train.len();
    let n_missing = (rate * n as f64 + 0.5).floor() as usize;
    if n_missing >= n {
        return Err(Error::Contract(format!(
            "masking {n_missing} of {n} samples leaves no modality-complete sample"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, Stream::Mask));
    let mut is_missing = vec![false; n];
    for &i in &order[..n_missing] {
        is_missing[i] = true;
    }
    let (mut complete, mut missing) = (Vec::new(), Vec::new());
    for (s, &m) in train.samples.iter().zip(&is_missing) {
        if m {
            missing.push(Sample {
                y: None,
                ..s.clone()
            });
        } else {
            complete.push(s.clone());
        }
    }
    DatasetBundle::new(
        complete,
        missing,
        train.num_classes,
        train.dim_x,
        train.dim_y,
    )
}

/// Class-conditional isotropic Gaussians for both modalities.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub num_classes: usize,
    pub dim_x: usize,
    pub dim_y: usize,
    pub means_x: Vec<Vec<f64>>,
    pub means_y: Vec<Vec<f64>>,
    pub sigma: f64,
    pub samples_per_class: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self::simplex(3, 8, 8, 1.8, 1.0, 0.5, 200)
    }
}

impl SynthSpec {
    /// Class means on a scaled simplex: every pair of X means is
    /// `separation_x` apart, every pair of Y means `separation_y`. Modality Y
    /// uses a different set of coordinates than X when there is room.
    pub fn simplex(
        num_classes: usize,
        dim_x: usize,
        dim_y: usize,
        separation_x: f64,
        separation_y: f64,
        sigma: f64,
        samples_per_class: usize,
    ) -> Self {
        let means = |dim: usize, offset: usize, separation: f64| -> Vec<Vec<f64>> {
            let scale = separation / std::f64::consts::SQRT_2;
            (0..num_classes)
                .map(|c| {
                    let mut m = vec![0.0; dim];
                    if dim > 0 {
                        m[(c + offset) % dim] += scale;
                    }
                    m
                })
                .collect()
        };
        let offset_y = if dim_y >= 2 * num_classes {
            num_classes
        } else {
            0
        };
        Self {
            num_classes,
            dim_x,
            dim_y,
            means_x: means(dim_x, 0, separation_x),
            means_y: means(dim_y, offset_y, separation_y),
            sigma,
            samples_per_class,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.num_classes < 2 {
            problems.push("num_classes must be at least 2".to_string());
        }
        if self.dim_x == 0 || self.dim_y == 0 {
            problems.push("feature dimensions must be positive".to_string());
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            problems.push(format!("sigma must be positive, got {}", self.sigma));
        }
        if self.samples_per_class == 0 {
            problems.push("samples_per_class must be positive".to_string());
        }
        for (name, means, dim) in [
            ("x", &self.means_x, self.dim_x),
            ("y", &self.means_y, self.dim_y),
        ] {
            if means.len() != self.num_classes || means.iter().any(|m| m.len() != dim) {
                problems.push(format!(
                    "means_{name} must be {} vectors of length {dim}",
                    self.num_classes
                ));
                continue;
            }
        }
        if problems.is_empty() {
            for a in 0..self.num_classes {
                for b in a + 1..self.num_classes {
                    if self.means_x[a] == self.means_x[b] && self.means_y[a] == self.means_y[b] {
                        problems.push(format!("classes {a} and {b} share the same means"));
                    }
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }

    /// Bayes-optimal label under equal priors: the class whose stacked mean
    /// `(μ_x, μ_y)` is closest to `(x, y)`.
    pub fn bayes_predict(&self, x: &[f64], y: &[f64]) -> usize {
        let sq =
            |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>();
        (0..self.num_classes)
            .map(|c| (c, sq(x, &self.means_x[c]) + sq(y, &self.means_y[c])))
            .fold(
                (0, f64::INFINITY),
                |best, cur| if cur.1 < best.1 { cur } else { best },
            )
            .0
    }
}

/// Draws `samples_per_class` samples per class from the Gaussians in `spec`.
pub fn synth_generate(spec: &SynthSpec, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = rng::stream(seed, Stream::Synth);
    let noise = Normal::new(0.0, spec.sigma).map_err(|e| Error::Contract(e.to_string()))?;
    let mut samples = Vec::with_capacity(spec.num_classes * spec.samples_per_class);
    for c in 0..spec.num_classes {
        for _ in 0..spec.samples_per_class {
            let x = spec.means_x[c]
                .iter()
                .map(|m| m + noise.sample(&mut rng))
                .collect();
            let y = spec.means_y[c]
                .iter()
                .map(|m| m + noise.sample(&mut rng))
                .collect();
            samples.push(Sample {
                id: format!("s{:06}", samples.len()),
                x,
                y: Some(y),
                z: c,
            });
        }
    }
    Dataset::new(samples, spec.num_classes)
}

struct Table {
    header: Vec<String>,
    rows: Vec<(usize, Vec<String>)>,
}

fn read_table(path: &Path) -> Result<Table> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.split('\n').enumerate();
    let header = match lines.next() {
        Some((_, h)) if !h.trim().is_empty() => h
            .split(',')
            .map(|s| s.trim().to_string())
            .collect::<Vec<_>>(),
        _ => {
            return Err(Error::Parse {
                path: path.into(),
                row: 1,
                msg: "missing header".into(),
            })
        }
    };
    if header.first().map(String::as_str) != Some("id") || header.len() < 2 {
        return Err(Error::Parse {
            path: path.into(),
            row: 1,
            msg: "header must start with 'id' and name at least one column".into(),
        });
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
        if fields.len() != header.len() {
            return Err(Error::Parse {
                path: path.into(),
                row: i + 1,
                msg: format!("{} fields, header has {}", fields.len(), header.len()),
            });
        }
        rows.push((i + 1, fields));
    }
    Ok(Table { header, rows })
}

fn parse_features(path: &Path, table: &Table) -> Result<Vec<(String, Vec<f64>)>> {
    table
        .rows
        .iter()
        .map(|(line, fields)| {
            let values = fields[1..]
                .iter()
                .map(|f| {
                    f.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| Error::Parse {
                            path: path.into(),
                            row: *line,
                            msg: format!("'{f}' is not a finite decimal number"),
                        })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((fields[0].clone(), values))
        })
        .collect()
}

/// Reads an X-feature, Y-feature and label CSV triplet into a complete dataset.
///
/// Row numbers in errors are 1-based file lines (the header is line 1).
/// When `num_classes` is `None` it is inferred as `max label + 1`.
pub fn load_feature_csv(
    path_x: &Path,
    path_y: &Path,
    path_labels: &Path,
    num_classes: Option<usize>,
) -> Result<Dataset> {
    let tx = read_table(path_x)?;
    let ty = read_table(path_y)?;
    let tl = read_table(path_labels)?;
    if tl.header.len() != 2 {
        return Err(Error::Parse {
            path: path_labels.into(),
            row: 1,
            msg: "labels header must be 'id,label'".into(),
        });
    }
    let xs = parse_features(path_x, &tx)?;
    let ys = parse_features(path_y, &ty)?;
    let mut labels = Vec::with_capacity(tl.rows.len());
    for (line, fields) in &tl.rows {
        let v: i64 = fields[1].parse().map_err(|_| Error::Parse {
            path: path_labels.into(),
            row: *line,
            msg: format!("'{}' is not an integer label", fields[1]),
        })?;
        labels.push((*line, fields[0].clone(), v));
    }
    if xs.len() != ys.len() || xs.len() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "row counts differ: {} x rows, {} y rows, {} labels",
            xs.len(),
            ys.len(),
            labels.len()
        )));
    }
    if xs.is_empty() {
        return Err(Error::Contract("feature files contain no rows".into()));
    }
    let max_label = labels.iter().map(|l| l.2).max().unwrap_or(0);
    let c = num_classes.unwrap_or((max_label.max(0) + 1) as usize);
    let mut samples = Vec::with_capacity(xs.len());
    for (((id_x, x), (id_y, y)), (line, id_l, z)) in xs.into_iter().zip(ys).zip(labels) {
        if id_x != id_y || id_x != id_l {
            return Err(Error::Parse {
                path: path_labels.into(),
                row: line,
                msg: format!("ids disagree across files: '{id_x}', '{id_y}', '{id_l}'"),
            });
        }
        if z < 0 || z as usize >= c {
            return Err(Error::UnknownLabel {
                path: path_labels.into(),
                row: line,
                label: z,
                num_classes: c,
            });
        }
        samples.push(Sample {
            id: id_x,
            x,
            y: Some(y),
            z: z as usize,
        });
    }
    let dim_x = tx.header.len() - 1;
    let dim_y = ty.header.len() - 1;
    let ds = Dataset::new(samples, c)?;
    debug_assert_eq!((ds.dim_x, ds.dim_y), (dim_x, dim_y));
    Ok(ds)
}

/// Writes the CSV triplet read by [`load_feature_csv`].
pub fn write_feature_csv(
    dataset: &Dataset,
    path_x: &Path,
    path_y: &Path,
    path_labels: &Path,
) -> Result<()> {
    let header = |prefix: &str, d: usize| {
        let mut h = String::from("id");
        for j in 0..d {
            let _ = write!(h, ",{prefix}{j}");
        }
        h.push('\n');
        h
    };
    let mut fx = header("x", dataset.dim_x);
    let mut fy = header("y", dataset.dim_y);
    let mut fl = String::from("id,label\n");
    for s in &dataset.samples {
        fx.push_str(&s.id);
        for v in &s.x {
            let _ = write!(fx, ",{v}");
        }
        fx.push('\n');
        fy.push_str(&s.id);
        for v in s.y.iter().flatten() {
            let _ = write!(fy, ",{v}");
        }
        fy.push('\n');
        let _ = writeln!(fl, "{},{}", s.id, s.z);
    }
    for (path, body) in [(path_x, fx), (path_y, fy), (path_labels, fl)] {
        fs::write(path, body).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n_per_class: usize, c: usize) -> Dataset {
        let samples = (0..c)
            .flat_map(|z| {
                (0..n_per_class).map(move |i| Sample {
                    id: format!("c{z}_{i}"),
                    x: vec![z as f64, i as f64],
                    y: Some(vec![i as f64]),
                    z,
                })
            })
            .collect();
        Dataset::new(samples, c).unwrap()
    }

    #[test]
    fn split_sizes() {
        let (tr, va, te) = split(&toy(100, 3), (0.7, 0.15, 0.15), 1).unwrap();
        assert_eq!(tr.class_counts(), vec![70; 3]);
        assert_eq!(va.class_counts(), vec![15; 3]);
        assert_eq!(te.class_counts(), vec![15; 3]);

        let (tr, va, te) = split(&toy(10, 1), (0.7, 0.15, 0.15), 1).unwrap();
        assert_eq!((tr.len(), va.len(), te.len()), (8, 1, 1));
    }

    #[test]
    fn split_is_deterministic() {
        let d = toy(30, 2);
        assert_eq!(
            split(&d, (0.7, 0.15, 0.15), 9).unwrap(),
            split(&d, (0.7, 0.15, 0.15), 9).unwrap()
        );
        assert_ne!(
            split(&d, (0.7, 0.15, 0.15), 9).unwrap().0,
            split(&d, (0.7, 0.15, 0.15), 10).unwrap().0
        );
    }

    #[test]
    fn mask_counts() {
        let d = toy(50, 2);
        let b = apply_missing_mask(&d, 0.8, 3).unwrap();
        assert_eq!((b.n_missing(), b.n_complete()), (80, 20));
        let b = apply_missing_mask(&d, 0.95, 3).unwrap();
        assert_eq!((b.n_missing(), b.n_complete()), (95, 5));
        let b = apply_missing_mask(&d, 0.0, 3).unwrap();
        assert_eq!((b.n_missing(), b.n_complete()), (0, 100));
    }

    #[test]
    fn mask_rounds_half_up() {
        // 0.5 * 5 = 2.5 -> 3
        let b = apply_missing_mask(&toy(5, 1), 0.5, 0).unwrap();
        assert_eq!(b.n_missing(), 3);
    }

    #[test]
    fn mask_cannot_empty_complete_set() {
        let d = toy(1, 2);
        assert!(matches!(
            apply_missing_mask(&d, 0.9, 0),
            Err(Error::Contract(_))
        ));
        assert!(apply_missing_mask(&d, 1.0, 0).is_err());
    }

    #[test]
    fn synth_counts_and_degenerate_sigma() {
        let mut spec = SynthSpec::simplex(3, 4, 5, 1.0, 1.0, 1e-9, 50);
        let d = synth_generate(&spec, 0).unwrap();
        assert_eq!(d.len(), 150);
        assert_eq!(d.class_counts(), vec![50; 3]);
        for s in &d.samples {
            for (v, m) in s.x.iter().zip(&spec.means_x[s.z]) {
                assert!((v - m).abs() < 1e-6);
            }
        }
        spec.sigma = 0.0;
        assert!(synth_generate(&spec, 0).is_err());
    }

    #[test]
    fn default_means_are_separated() {
        let spec = SynthSpec::default();
        spec.validate().unwrap();
        let dist = |u: &[f64], v: &[f64]| {
            u.iter()
                .zip(v)
                .map(|(p, q)| (p - q) * (p - q))
                .sum::<f64>()
                .sqrt()
        };
        for a in 0..3 {
            for b in a + 1..3 {
                assert!((dist(&spec.means_x[a], &spec.means_x[b]) - 1.8).abs() < 1e-12);
                assert!((dist(&spec.means_y[a], &spec.means_y[b]) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn label_distribution_from_bundle() {
        let b = apply_missing_mask(&toy(4, 3), 0.5, 1).unwrap();
        let d = empirical_label_dist(&b).unwrap();
        for p in d.probs() {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }
        let b = DatasetBundle::new(toy(2, 3).samples[..4].to_vec(), vec![], 3, 2, 1).unwrap();
        assert!(matches!(
            empirical_label_dist(&b),
            Err(Error::MissingClass(2))
        ));
    }
}
