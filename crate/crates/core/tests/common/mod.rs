#![allow(dead_code)]

use nncrn_core::{Activation, BinaryLayer, BinaryNetwork};
use rand::Rng;

/// Random ±1 network with ReLU hidden layers, a linear output layer and
/// biases drawn from `[-bias, bias]`.
pub fn random_network<R: Rng>(shape: &[usize], bias: f64, rng: &mut R) -> BinaryNetwork {
    let n = shape.len() - 1;
    let layers = (0..n)
        .map(|l| {
            let w = (0..shape[l])
                .map(|_| (0..shape[l + 1]).map(|_| if rng.random_bool(0.5) { 1 } else { -1 }).collect())
                .collect();
            let b = (0..shape[l + 1]).map(|_| rng.random_range(-bias..=bias)).collect();
            let act = if l + 1 == n { Activation::Linear } else { Activation::Relu };
            BinaryLayer::new(w, b, act).unwrap()
        })
        .collect();
    BinaryNetwork::new(shape[0], layers).unwrap()
}

/// Shape with 1..=max_layers weight layers and 1..=max_units units each.
pub fn random_shape<R: Rng>(max_layers: usize, max_units: usize, rng: &mut R) -> Vec<usize> {
    let layers = rng.random_range(1..=max_layers);
    (0..=layers).map(|_| rng.random_range(1..=max_units)).collect()
}

pub fn relu_units(net: &BinaryNetwork) -> usize {
    net.layers()
        .iter()
        .filter(|l| l.activation() == Activation::Relu)
        .map(|l| l.fan_out())
        .sum()
}
