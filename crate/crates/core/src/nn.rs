//! Binary-weight ReLU networks: the compiler's source language.
//!
//! Weights are restricted to `{-1, +1}`, biases are arbitrary reals. The
//! exact layer-by-layer [`BinaryNetwork::forward`] is the oracle every CRN
//! simulation is checked against.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Metadata key holding the per-feature means of the z-score scaling.
pub const META_SCALE_MEAN: &str = "scaling.mean";
/// Metadata key holding the per-feature standard deviations.
pub const META_SCALE_STD: &str = "scaling.std";

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("input has length {got}, network expects {expected}")]
    InputShape { expected: usize, got: usize },
    #[error("cannot take argmax of an empty vector")]
    EmptyOutput,
    #[error("network has no layers")]
    NoLayers,
    #[error("input_dim must be positive")]
    ZeroInputDim,
    #[error("layer {layer}: weight[{row}][{col}] = {value} is not -1 or +1")]
    NonBinaryWeight {
        layer: usize,
        row: usize,
        col: usize,
        value: i64,
    },
    #[error("layer {layer}: {detail}")]
    LayerShape { layer: usize, detail: String },
    #[error("layer {layer}: bias[{index}] is not finite")]
    NonFiniteBias { layer: usize, index: usize },
    #[error("bad scaling metadata: {0}")]
    Scaling(String),
    #[error("malformed network file: {0}")]
    Json(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Linear,
}

impl Activation {
    #[inline]
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Linear => v,
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Relu => "relu",
            Activation::Linear => "linear",
        })
    }
}

/// One fully-connected layer. `weights` is row-major with `fan_in` rows of
/// `fan_out` entries, each exactly `-1` or `+1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryLayer {
    weights: Vec<Vec<i8>>,
    bias: Vec<f64>,
    activation: Activation,
}

impl BinaryLayer {
    pub fn new(
        weights: Vec<Vec<i8>>,
        bias: Vec<f64>,
        activation: Activation,
    ) -> Result<Self, NetworkError> {
        let layer = BinaryLayer {
            weights,
            bias,
            activation,
        };
        layer.validate(0)?;
        Ok(layer)
    }

    fn validate(&self, index: usize) -> Result<(), NetworkError> {
        let shape_err = |detail: String| NetworkError::LayerShape {
            layer: index,
            detail,
        };
        if self.weights.is_empty() {
            return Err(shape_err("weight matrix has no rows".into()));
        }
        let fan_out = self.weights[0].len();
        if fan_out == 0 {
            return Err(shape_err("weight matrix has no columns".into()));
        }
        for (row, w) in self.weights.iter().enumerate() {
            if w.len() != fan_out {
                return Err(shape_err(format!(
                    "row {row} has {} entries, expected {fan_out}",
                    w.len()
                )));
            }
            for (col, &v) in w.iter().enumerate() {
                if v != 1 && v != -1 {
                    return Err(NetworkError::NonBinaryWeight {
                        layer: index,
                        row,
                        col,
                        value: v as i64,
                    });
                }
            }
        }
        if self.bias.len() != fan_out {
            return Err(shape_err(format!(
                "bias has length {}, expected fan_out {fan_out}",
                self.bias.len()
            )));
        }
        if let Some(i) = self.bias.iter().position(|b| !b.is_finite()) {
            return Err(NetworkError::NonFiniteBias { layer: index, index: i });
        }
        Ok(())
    }

    pub fn fan_in(&self) -> usize {
        self.weights.len()
    }

    pub fn fan_out(&self) -> usize {
        self.bias.len()
    }

    pub fn weights(&self) -> &[Vec<i8>] {
        &self.weights
    }

    pub fn weight(&self, row: usize, col: usize) -> i8 {
        self.weights[row][col]
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    /// `activation(hᵀW + bᵀ)`.
    pub fn apply(&self, h: &[f64]) -> Vec<f64> {
        let mut out = self.bias.clone();
        for (hi, row) in h.iter().zip(&self.weights) {
            for (o, &w) in out.iter_mut().zip(row) {
                *o += f64::from(w) * hi;
            }
        }
        for o in &mut out {
            *o = self.activation.apply(*o);
        }
        out
    }
}

/// Per-feature z-score standardization, carried in network metadata so
/// that the network and its CRN see identically preprocessed inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureScaling {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureScaling {
    /// Population statistics over `rows`. Constant features get `std = 1`.
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let dim = rows.first().map_or(0, Vec::len);
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; dim];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut std = vec![0.0; dim];
        for r in rows {
            for ((s, v), m) in std.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        for s in &mut std {
            *s = (*s / n).sqrt();
            if *s == 0.0 || !s.is_finite() {
                *s = 1.0;
            }
        }
        FeatureScaling { mean, std }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn write_metadata(&self, meta: &mut BTreeMap<String, String>) {
        meta.insert(META_SCALE_MEAN.into(), join_floats(&self.mean));
        meta.insert(META_SCALE_STD.into(), join_floats(&self.std));
    }

    pub fn from_metadata(
        meta: &BTreeMap<String, String>,
    ) -> Result<Option<Self>, NetworkError> {
        let (Some(mean), Some(std)) = (meta.get(META_SCALE_MEAN), meta.get(META_SCALE_STD))
        else {
            return Ok(None);
        };
        let mean = split_floats(mean)?;
        let std = split_floats(std)?;
        if mean.len() != std.len() {
            return Err(NetworkError::Scaling("mean and std lengths differ".into()));
        }
        if std.iter().any(|s| *s <= 0.0 || !s.is_finite()) {
            return Err(NetworkError::Scaling("std entries must be positive".into()));
        }
        Ok(Some(FeatureScaling { mean, std }))
    }
}

// `Display` for f64 is the shortest string that parses back to the same bits.
fn join_floats(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

fn split_floats(s: &str) -> Result<Vec<f64>, NetworkError> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| NetworkError::Scaling(format!("{t:?}: {e}")))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinaryNetwork {
    input_dim: usize,
    layers: Vec<BinaryLayer>,
    metadata: BTreeMap<String, String>,
}

impl BinaryNetwork {
    pub fn new(input_dim: usize, layers: Vec<BinaryLayer>) -> Result<Self, NetworkError> {
        Self::with_metadata(input_dim, layers, BTreeMap::new())
    }

    pub fn with_metadata(
        input_dim: usize,
        layers: Vec<BinaryLayer>,
        metadata: BTreeMap<String, String>,
    ) -> Result<Self, NetworkError> {
        let net = BinaryNetwork {
            input_dim,
            layers,
            metadata,
        };
        net.validate()?;
        Ok(net)
    }

    fn validate(&self) -> Result<(), NetworkError> {
        if self.input_dim == 0 {
            return Err(NetworkError::ZeroInputDim);
        }
        if self.layers.is_empty() {
            return Err(NetworkError::NoLayers);
        }
        let mut width = self.input_dim;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.validate(i)?;
            if layer.fan_in() != width {
                return Err(NetworkError::LayerShape {
                    layer: i,
                    detail: format!("fan_in {} does not match previous width {width}", layer.fan_in()),
                });
            }
            width = layer.fan_out();
        }
        FeatureScaling::from_metadata(&self.metadata)?
            .filter(|s| s.mean.len() != self.input_dim)
            .map_or(Ok(()), |_| {
                Err(NetworkError::Scaling("length differs from input_dim".into()))
            })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, BinaryLayer::fan_out)
    }

    pub fn layers(&self) -> &[BinaryLayer] {
        &self.layers
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    pub fn metadata_mut(&mut self) -> &mut BTreeMap<String, String> {
        &mut self.metadata
    }

    /// Layer widths including the input layer, e.g. `[4, 8, 3]`.
    pub fn shape(&self) -> Vec<usize> {
        std::iter::once(self.input_dim)
            .chain(self.layers.iter().map(BinaryLayer::fan_out))
            .collect()
    }

    pub fn scaling(&self) -> Option<FeatureScaling> {
        // validated at construction
        FeatureScaling::from_metadata(&self.metadata).ok().flatten()
    }

    /// Applies the stored feature scaling, if any, to a raw example.
    pub fn prepare_input(&self, raw: &[f64]) -> Vec<f64> {
        match self.scaling() {
            Some(s) => s.apply(raw),
            None => raw.to_vec(),
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, NetworkError> {
        if x.len() != self.input_dim {
            return Err(NetworkError::InputShape {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        let mut h = x.to_vec();
        for layer in &self.layers {
            h = layer.apply(&h);
        }
        Ok(h)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, NetworkError> {
        let raw: RawNetwork =
            serde_json::from_str(text).map_err(|e| NetworkError::Json(e.to_string()))?;
        let mut layers = Vec::with_capacity(raw.layers.len());
        for (li, l) in raw.layers.into_iter().enumerate() {
            let mut weights = Vec::with_capacity(l.weights.len());
            for (row, w) in l.weights.into_iter().enumerate() {
                let mut out = Vec::with_capacity(w.len());
                for (col, v) in w.into_iter().enumerate() {
                    if v != 1 && v != -1 {
                        return Err(NetworkError::NonBinaryWeight {
                            layer: li,
                            row,
                            col,
                            value: v,
                        });
                    }
                    out.push(v as i8);
                }
                weights.push(out);
            }
            layers.push(BinaryLayer {
                weights,
                bias: l.bias,
                activation: l.activation,
            });
        }
        Self::with_metadata(raw.input_dim, layers, raw.metadata)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), NetworkError> {
        let path = path.as_ref();
        fs::write(path, self.to_json() + "\n").map_err(|source| NetworkError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, NetworkError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| NetworkError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNetwork {
    input_dim: usize,
    layers: Vec<RawLayer>,
    #[serde(default)]
    metadata: BTreeMap<String, String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLayer {
    weights: Vec<Vec<i64>>,
    bias: Vec<f64>,
    activation: Activation,
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax_class(y: &[f64]) -> Result<usize, NetworkError> {
    let (first, rest) = y.split_first().ok_or(NetworkError::EmptyOutput)?;
    let mut best = (0, *first);
    for (i, &v) in rest.iter().enumerate() {
        if v > best.1 {
            best = (i + 1, v);
        }
    }
    Ok(best.0)
}
