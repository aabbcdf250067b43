//! BinaryConnect training.
//!
//! Real-valued shadow weights are kept in `[-1, 1]`; every forward and
//! backward pass uses their sign. Gradients computed through the binary
//! weights are applied to the shadow weights unchanged (straight-through),
//! with Adam and an exponentially decaying learning rate. The loss is the
//! squared hinge `Σₖ max(0, 1 − tₖ·yₖ)²` against ±1 one-hot targets.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::data::LabeledDataset;
use crate::nn::{argmax_class, Activation, BinaryLayer, BinaryNetwork, FeatureScaling, NetworkError};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("dataset has {data} features but {expected} were expected")]
    Dimension { data: usize, expected: usize },
    #[error("loss became {loss} at epoch {epoch}; try a smaller learning rate")]
    NonFiniteLoss { epoch: usize, loss: f64 },
    #[error(transparent)]
    Network(#[from] NetworkError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Multiplicative learning-rate decay applied once per epoch.
    pub lr_decay: f64,
    /// Probability of keeping a hidden unit during training.
    pub dropout_keep: f64,
    pub seed: u64,
    pub validation_fraction: f64,
    /// Fit z-score scaling on the training split and store it in the network.
    pub standardize: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden: vec![8],
            epochs: 1000,
            batch_size: 16,
            learning_rate: 0.01,
            lr_decay: 0.9995,
            dropout_keep: 1.0,
            seed: 0,
            validation_fraction: 0.0,
            standardize: true,
        }
    }
}

impl TrainConfig {
    fn check(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if self.hidden.contains(&0) {
            return bad("hidden layer sizes must be positive");
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch size must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return bad("learning-rate decay must lie in (0, 1]");
        }
        if !(self.dropout_keep > 0.0 && self.dropout_keep <= 1.0) {
            return bad("dropout keep probability must lie in (0, 1]");
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad("validation fraction must lie in [0, 1)");
        }
        Ok(())
    }
}

/// Sign rule: `w ≥ 0 → +1`, `w < 0 → −1`.
pub fn binarize(w: &[Vec<f64>]) -> Vec<Vec<i8>> {
    w.iter()
        .map(|row| row.iter().map(|&v| if v >= 0.0 { 1 } else { -1 }).collect())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
struct ShadowLayer {
    fan_in: usize,
    fan_out: usize,
    /// Row-major `fan_in × fan_out`.
    weights: Vec<f64>,
    bias: Vec<f64>,
    activation: Activation,
}

impl ShadowLayer {
    fn binary_weights(&self) -> Vec<f64> {
        self.weights
            .iter()
            .map(|&w| if w >= 0.0 { 1.0 } else { -1.0 })
            .collect()
    }
}

/// The real-valued parameters BinaryConnect updates.
#[derive(Debug, Clone, PartialEq)]
pub struct RealShadowNetwork {
    input_dim: usize,
    layers: Vec<ShadowLayer>,
}

impl RealShadowNetwork {
    fn init(input_dim: usize, hidden: &[usize], outputs: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut fan_in = input_dim;
        let widths: Vec<usize> = hidden.iter().copied().chain([outputs]).collect();
        let n = widths.len();
        let layers = widths
            .into_iter()
            .enumerate()
            .map(|(k, fan_out)| {
                let layer = ShadowLayer {
                    fan_in,
                    fan_out,
                    weights: (0..fan_in * fan_out).map(|_| rng.random_range(-1.0..1.0)).collect(),
                    bias: vec![0.0; fan_out],
                    activation: if k + 1 == n { Activation::Linear } else { Activation::Relu },
                };
                fan_in = fan_out;
                layer
            })
            .collect();
        RealShadowNetwork { input_dim, layers }
    }

    pub fn weights_in_range(&self) -> bool {
        self.layers
            .iter()
            .flat_map(|l| &l.weights)
            .all(|w| (-1.0..=1.0).contains(w))
    }

    pub fn to_binary(&self) -> BinaryNetwork {
        let layers = self
            .layers
            .iter()
            .map(|l| {
                let rows: Vec<Vec<f64>> = l.weights.chunks(l.fan_out).map(<[f64]>::to_vec).collect();
                BinaryLayer::new(binarize(&rows), l.bias.clone(), l.activation)
                    .expect("shadow shapes are consistent")
            })
            .collect();
        BinaryNetwork::new(self.input_dim, layers).expect("shadow shapes are consistent")
    }
}

/// Gradients for one layer, same layout as [`ShadowLayer`].
#[derive(Debug, Clone)]
struct LayerGrad {
    weights: Vec<f64>,
    bias: Vec<f64>,
}

/// Forward/backward pass through the binarized weights. Returns the summed
/// loss over the batch and the summed gradients.
fn loss_and_grads(
    net: &RealShadowNetwork,
    binary: &[Vec<f64>],
    batch: &[(&[f64], usize)],
    mut dropout: Option<(&mut ChaCha8Rng, f64)>,
) -> (f64, Vec<LayerGrad>) {
    let mut grads: Vec<LayerGrad> = net
        .layers
        .iter()
        .map(|l| LayerGrad {
            weights: vec![0.0; l.weights.len()],
            bias: vec![0.0; l.fan_out],
        })
        .collect();
    let mut total = 0.0;
    let n_layers = net.layers.len();

    for &(x, label) in batch {
        // acts[0] = input, acts[k+1] = output of layer k; pre/mask per layer
        let mut acts: Vec<Vec<f64>> = vec![x.to_vec()];
        let mut pres: Vec<Vec<f64>> = Vec::with_capacity(n_layers);
        let mut masks: Vec<Vec<f64>> = Vec::with_capacity(n_layers);
        for (k, layer) in net.layers.iter().enumerate() {
            let h = &acts[k];
            let w = &binary[k];
            let mut z = layer.bias.clone();
            for (i, hi) in h.iter().enumerate() {
                if *hi == 0.0 {
                    continue;
                }
                let row = &w[i * layer.fan_out..(i + 1) * layer.fan_out];
                for (zj, wij) in z.iter_mut().zip(row) {
                    *zj += hi * wij;
                }
            }
            let mask: Vec<f64> = match (&mut dropout, layer.activation) {
                (Some((rng, keep)), Activation::Relu) if *keep < 1.0 => (0..layer.fan_out)
                    .map(|_| if rng.random_bool(*keep) { 1.0 / *keep } else { 0.0 })
                    .collect(),
                _ => vec![1.0; layer.fan_out],
            };
            let a: Vec<f64> = z
                .iter()
                .zip(&mask)
                .map(|(&v, m)| layer.activation.apply(v) * m)
                .collect();
            pres.push(z);
            masks.push(mask);
            acts.push(a);
        }

        let y = &acts[n_layers];
        let mut delta: Vec<f64> = y
            .iter()
            .enumerate()
            .map(|(k, &yk)| {
                let t = if k == label { 1.0 } else { -1.0 };
                let slack = (1.0 - t * yk).max(0.0);
                total += slack * slack;
                -2.0 * t * slack
            })
            .collect();

        for k in (0..n_layers).rev() {
            let layer = &net.layers[k];
            let h = &acts[k];
            let g = &mut grads[k];
            for (gb, d) in g.bias.iter_mut().zip(&delta) {
                *gb += d;
            }
            for (i, hi) in h.iter().enumerate() {
                if *hi == 0.0 {
                    continue;
                }
                let row = &mut g.weights[i * layer.fan_out..(i + 1) * layer.fan_out];
                for (gw, d) in row.iter_mut().zip(&delta) {
                    *gw += hi * d;
                }
            }
            if k == 0 {
                break;
            }
            let w = &binary[k];
            let below = &net.layers[k - 1];
            delta = (0..layer.fan_in)
                .map(|i| {
                    let row = &w[i * layer.fan_out..(i + 1) * layer.fan_out];
                    let back: f64 = row.iter().zip(&delta).map(|(a, b)| a * b).sum();
                    let active = match below.activation {
                        Activation::Relu => {
                            if pres[k - 1][i] > 0.0 {
                                1.0
                            } else {
                                0.0
                            }
                        }
                        Activation::Linear => 1.0,
                    };
                    back * active * masks[k - 1][i]
                })
                .collect();
        }
    }
    (total, grads)
}

struct Adam {
    m: Vec<LayerGrad>,
    v: Vec<LayerGrad>,
    t: i32,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl Adam {
    fn new(net: &RealShadowNetwork) -> Self {
        let zeros = || {
            net.layers
                .iter()
                .map(|l| LayerGrad {
                    weights: vec![0.0; l.weights.len()],
                    bias: vec![0.0; l.fan_out],
                })
                .collect::<Vec<_>>()
        };
        Adam {
            m: zeros(),
            v: zeros(),
            t: 0,
        }
    }

    fn step(&mut self, net: &mut RealShadowNetwork, grads: &[LayerGrad], scale: f64, lr: f64) {
        self.t += 1;
        let c1 = 1.0 - BETA1.powi(self.t);
        let c2 = 1.0 - BETA2.powi(self.t);
        let update = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
            for i in 0..p.len() {
                let gi = g[i] * scale;
                m[i] = BETA1 * m[i] + (1.0 - BETA1) * gi;
                v[i] = BETA2 * v[i] + (1.0 - BETA2) * gi * gi;
                p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + ADAM_EPS);
            }
        };
        for (k, layer) in net.layers.iter_mut().enumerate() {
            update(&mut layer.weights, &grads[k].weights, &mut self.m[k].weights, &mut self.v[k].weights);
            update(&mut layer.bias, &grads[k].bias, &mut self.m[k].bias, &mut self.v[k].bias);
            for w in &mut layer.weights {
                *w = w.clamp(-1.0, 1.0);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean per-example training loss (with dropout active).
    pub loss: f64,
    pub train_acc: f64,
    pub val_acc: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub network: BinaryNetwork,
    pub log: Vec<EpochLog>,
    pub best_epoch: usize,
    /// Validation accuracy of the returned network, or training accuracy
    /// when there is no validation split.
    pub best_accuracy: f64,
    pub warnings: Vec<String>,
}

impl TrainReport {
    pub fn log_csv(&self) -> String {
        let mut s = String::from("epoch,loss,train_acc,val_acc\n");
        for e in &self.log {
            let val = e.val_acc.map(|v| v.to_string()).unwrap_or_default();
            s.push_str(&format!("{},{},{},{}\n", e.epoch, e.loss, e.train_acc, val));
        }
        s
    }
}

/// Fraction of examples whose predicted class matches the label. Raw
/// features are passed through the network's stored scaling first.
pub fn evaluate(net: &BinaryNetwork, data: &LabeledDataset) -> Result<f64, NetworkError> {
    if data.is_empty() {
        return Ok(0.0);
    }
    if data.input_dim() != net.input_dim() {
        return Err(NetworkError::InputShape {
            expected: net.input_dim(),
            got: data.input_dim(),
        });
    }
    let hits = data
        .features()
        .par_iter()
        .zip(data.labels().par_iter())
        .map(|(x, &y)| {
            let out = net.forward(&net.prepare_input(x))?;
            Ok(usize::from(argmax_class(&out)? == y))
        })
        .collect::<Result<Vec<usize>, NetworkError>>()?
        .into_iter()
        .sum::<usize>();
    Ok(hits as f64 / data.len() as f64)
}

pub fn train(data: &LabeledDataset, cfg: &TrainConfig) -> Result<TrainReport, TrainError> {
    cfg.check()?;
    if data.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let mut warnings = Vec::new();
    let present = {
        let mut seen = vec![false; data.num_classes()];
        data.labels().iter().for_each(|&y| seen[y] = true);
        seen.iter().filter(|&&b| b).count()
    };
    if present < 2 {
        let msg = "dataset contains a single class".to_string();
        log::warn!("{msg}");
        warnings.push(msg);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let holdout = (data.len() as f64 * cfg.validation_fraction).round() as usize;
    let (train_set, val_set) = if holdout > 0 && holdout < data.len() {
        data.split(holdout, cfg.seed ^ 0x5eed)
    } else {
        (data.clone(), data.subset(&[]))
    };

    let scaling = cfg.standardize.then(|| FeatureScaling::fit(train_set.features()));
    let scaled: Vec<Vec<f64>> = match &scaling {
        Some(s) => train_set.features().iter().map(|x| s.apply(x)).collect(),
        None => train_set.features().to_vec(),
    };
    let finish = |shadow: &RealShadowNetwork| -> BinaryNetwork {
        let mut net = shadow.to_binary();
        if let Some(s) = &scaling {
            s.write_metadata(net.metadata_mut());
        }
        net.metadata_mut().insert("seed".into(), cfg.seed.to_string());
        net
    };

    let mut shadow = RealShadowNetwork::init(data.input_dim(), &cfg.hidden, data.num_classes(), &mut rng);
    let mut adam = Adam::new(&shadow);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(usize, f64, BinaryNetwork)> = None;
    let mut lr = cfg.learning_rate;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<(&[f64], usize)> = chunk
                .iter()
                .map(|&i| (scaled[i].as_slice(), train_set.labels()[i]))
                .collect();
            let binary: Vec<Vec<f64>> = shadow.layers.iter().map(ShadowLayer::binary_weights).collect();
            let (loss, grads) =
                loss_and_grads(&shadow, &binary, &batch, Some((&mut rng, cfg.dropout_keep)));
            if !loss.is_finite() {
                return Err(TrainError::NonFiniteLoss { epoch, loss });
            }
            epoch_loss += loss;
            adam.step(&mut shadow, &grads, 1.0 / batch.len() as f64, lr);
            debug_assert!(shadow.weights_in_range());
        }
        let loss = epoch_loss / train_set.len() as f64;
        lr *= cfg.lr_decay;

        let net = finish(&shadow);
        let train_acc = evaluate(&net, &train_set)?;
        let val_acc = (!val_set.is_empty()).then(|| evaluate(&net, &val_set)).transpose()?;
        let score = val_acc.unwrap_or(train_acc);
        if best.as_ref().is_none_or(|(_, s, _)| score > *s) {
            best = Some((epoch, score, net));
        }
        log.push(EpochLog {
            epoch,
            loss,
            train_acc,
            val_acc,
        });
    }

    let (best_epoch, best_accuracy, mut network) = best.expect("at least one epoch");
    network
        .metadata_mut()
        .insert("best_epoch".into(), best_epoch.to_string());
    Ok(TrainReport {
        network,
        log,
        best_epoch,
        best_accuracy,
        warnings,
    })
}
