//! Labeled datasets: CSV ingestion, the IRIS loader, and a Gaussian-blob
//! generator used as a stand-in for datasets that are not redistributable.

use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DataError {
    #[error("row {row}: {detail}")]
    Row { row: usize, detail: String },
    #[error("dataset is empty")]
    Empty,
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error("invalid synthetic spec: {0}")]
    Spec(String),
    #[error("i/o error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Vec<Vec<f64>>,
    labels: Vec<usize>,
    num_classes: usize,
}

impl LabeledDataset {
    pub fn new(
        features: Vec<Vec<f64>>,
        labels: Vec<usize>,
        num_classes: usize,
    ) -> Result<Self, DataError> {
        if features.len() != labels.len() {
            return Err(DataError::Invalid(format!(
                "{} feature rows but {} labels",
                features.len(),
                labels.len()
            )));
        }
        if num_classes == 0 {
            return Err(DataError::Invalid("class count must be positive".into()));
        }
        let dim = features.first().map_or(0, Vec::len);
        for (i, (x, &y)) in features.iter().zip(&labels).enumerate() {
            if x.len() != dim {
                return Err(DataError::Row {
                    row: i,
                    detail: format!("{} features, expected {dim}", x.len()),
                });
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(DataError::Row {
                    row: i,
                    detail: "non-finite feature".into(),
                });
            }
            if y >= num_classes {
                return Err(DataError::Row {
                    row: i,
                    detail: format!("label {y} outside [0, {num_classes})"),
                });
            }
        }
        Ok(LabeledDataset {
            features,
            labels,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], usize)> {
        self.features.iter().map(Vec::as_slice).zip(self.labels.iter().copied())
    }

    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
        }
    }

    /// Seeded shuffle, then the first `holdout` examples become the second
    /// returned set.
    pub fn split(&self, holdout: usize, seed: u64) -> (LabeledDataset, LabeledDataset) {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let holdout = holdout.min(idx.len());
        let (test, train) = idx.split_at(holdout);
        (self.subset(train), self.subset(test))
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), DataError> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| DataError::Io(e.to_string()))?;
        let mut header: Vec<String> = (0..self.input_dim()).map(|i| format!("f{i}")).collect();
        header.push("label".into());
        w.write_record(&header).map_err(|e| DataError::Io(e.to_string()))?;
        for (x, y) in self.iter() {
            let mut row: Vec<String> = x.iter().map(f64::to_string).collect();
            row.push(y.to_string());
            w.write_record(&row).map_err(|e| DataError::Io(e.to_string()))?;
        }
        w.flush().map_err(|e| DataError::Io(e.to_string()))
    }
}

/// Whether the first CSV row is a header.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Header {
    /// A header is assumed when the first field of the first row is not numeric.
    #[default]
    Auto,
    Present,
    Absent,
}

fn iris_label(s: &str) -> Option<usize> {
    let s = s.trim().to_ascii_lowercase();
    let s = s.strip_prefix("iris-").unwrap_or(&s);
    match s {
        "setosa" => Some(0),
        "versicolor" => Some(1),
        "virginica" => Some(2),
        _ => None,
    }
}

struct CsvShape {
    features: Option<usize>,
    classes: Option<usize>,
    named_labels: fn(&str) -> Option<usize>,
}

fn read_dataset<R: Read>(src: R, header: Header, shape: CsvShape) -> Result<LabeledDataset, DataError> {
    let mut rd = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(src);
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| DataError::Row {
            row,
            detail: e.to_string(),
        })?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if i == 0 {
            let skip = match header {
                Header::Present => true,
                Header::Absent => false,
                Header::Auto => rec.get(0).is_some_and(|f| f.parse::<f64>().is_err()),
            };
            if skip {
                continue;
            }
        }
        let n = rec.len();
        if n < 2 {
            return Err(DataError::Row {
                row,
                detail: "need at least one feature and a label".into(),
            });
        }
        if let Some(k) = shape.features {
            if n - 1 != k {
                return Err(DataError::Row {
                    row,
                    detail: format!("{} features, expected {k}", n - 1),
                });
            }
        }
        let x = rec
            .iter()
            .take(n - 1)
            .map(|f| {
                f.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| DataError::Row {
                    row,
                    detail: format!("bad feature {f:?}"),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let raw = &rec[n - 1];
        let y = raw
            .parse::<usize>()
            .ok()
            .or_else(|| (shape.named_labels)(raw))
            .ok_or_else(|| DataError::Row {
                row,
                detail: format!("unknown label {raw:?}"),
            })?;
        if let Some(c) = shape.classes {
            if y >= c {
                return Err(DataError::Row {
                    row,
                    detail: format!("label {y} outside [0, {c})"),
                });
            }
        }
        features.push(x);
        labels.push(y);
    }
    if labels.is_empty() {
        return Err(DataError::Empty);
    }
    let classes = shape
        .classes
        .unwrap_or_else(|| labels.iter().max().map_or(0, |m| m + 1));
    LabeledDataset::new(features, labels, classes)
}

/// Features in every column but the last, integer class label in the last.
pub fn read_csv<R: Read>(src: R, header: Header) -> Result<LabeledDataset, DataError> {
    read_dataset(
        src,
        header,
        CsvShape {
            features: None,
            classes: None,
            named_labels: |_| None,
        },
    )
}

pub fn load_csv(path: impl AsRef<Path>, header: Header) -> Result<LabeledDataset, DataError> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| DataError::Io(format!("{}: {e}", path.display())))?;
    read_csv(f, header)
}

/// IRIS: four numeric features and a label that is either `0..=2` or a
/// species name (`setosa`, `Iris-versicolor`, ...).
pub fn read_iris<R: Read>(src: R) -> Result<LabeledDataset, DataError> {
    read_dataset(
        src,
        Header::Auto,
        CsvShape {
            features: Some(4),
            classes: Some(3),
            named_labels: iris_label,
        },
    )
}

pub fn load_iris(path: impl AsRef<Path>) -> Result<LabeledDataset, DataError> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| DataError::Io(format!("{}: {e}", path.display())))?;
    read_iris(f)
}

/// Gaussian blobs with guaranteed separation.
///
/// Each sample is its class centroid plus isotropic noise of scale `sigma`,
/// truncated to radius `sigma·(√features + 2)`. Centroids are spaced at
/// least `2·radius + margin·sigma` apart, so the nearest-centroid rule
/// classifies every sample correctly. `collapse` puts all centroids at the
/// origin instead (a dataset no classifier can beat chance on).
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub features: usize,
    pub per_class: usize,
    pub margin: f64,
    pub sigma: f64,
    pub collapse: bool,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            classes: 4,
            features: 10,
            per_class: 125,
            margin: 6.0,
            sigma: 1.0,
            collapse: false,
        }
    }
}

impl SyntheticSpec {
    pub fn radius(&self) -> f64 {
        self.sigma * ((self.features as f64).sqrt() + 2.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Synthetic {
    pub data: LabeledDataset,
    pub centroids: Vec<Vec<f64>>,
}

pub fn make_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<Synthetic, DataError> {
    if spec.classes < 2 {
        return Err(DataError::Spec("need at least 2 classes".into()));
    }
    if spec.features == 0 || spec.per_class == 0 {
        return Err(DataError::Spec("features and per_class must be positive".into()));
    }
    if !(spec.sigma > 0.0 && spec.sigma.is_finite() && spec.margin >= 0.0 && spec.margin.is_finite()) {
        return Err(DataError::Spec("sigma must be positive and margin nonnegative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let radius = spec.radius();
    let min_dist = 2.0 * radius + spec.margin * spec.sigma;

    let centroids: Vec<Vec<f64>> = if spec.collapse {
        vec![vec![0.0; spec.features]; spec.classes]
    } else {
        let mut half_width = min_dist;
        let mut cs: Vec<Vec<f64>> = Vec::new();
        let mut failures = 0;
        while cs.len() < spec.classes {
            let c: Vec<f64> = (0..spec.features)
                .map(|_| rng.random_range(-half_width..=half_width))
                .collect();
            if cs.iter().all(|o| dist(o, &c) >= min_dist) {
                cs.push(c);
            } else {
                failures += 1;
                if failures % 100 == 0 {
                    half_width *= 1.25;
                }
            }
        }
        cs
    };

    let normal = Normal::new(0.0, spec.sigma).expect("sigma validated");
    let mut features = Vec::with_capacity(spec.classes * spec.per_class);
    let mut labels = Vec::with_capacity(features.capacity());
    for (k, c) in centroids.iter().enumerate() {
        let mut made = 0;
        while made < spec.per_class {
            let noise: Vec<f64> = (0..spec.features).map(|_| normal.sample(&mut rng)).collect();
            if norm(&noise) > radius {
                continue;
            }
            features.push(c.iter().zip(&noise).map(|(a, b)| a + b).collect());
            labels.push(k);
            made += 1;
        }
    }
    let data = LabeledDataset::new(features, labels, spec.classes)?;
    Ok(Synthetic { data, centroids })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
