//! Lowering of a binary-weight network to a dual-rail CRN.
//!
//! Layer `l` of the network (1 = input) becomes:
//! * one reaction per weight-matrix row `i`, consuming the positive rail of
//!   unit `i` of layer `l-1` and producing, per column `j`, the positive or
//!   negative rail of unit `j` according to the weight's sign, followed by
//!   its sign-mirrored twin;
//! * bias terms as initial concentrations of the produced species;
//! * for ReLU layers, the gadget `I⁺ → M + H⁺`, `M + I⁻ → H⁻` per unit.
//!
//! Linear layers produce `H` species directly; ReLU layers produce `I`
//! species that feed the gadget. All rate constants are 1.

use thiserror::Error;

use crate::crn::{Crn, CrnError, DualRailPair, Multiset, Reaction, Sign, Species};
use crate::nn::{Activation, BinaryNetwork};

#[derive(Debug, Error, PartialEq)]
pub enum CompileError {
    #[error("layer {layer} has activation {found}, expected {expected}")]
    Activation {
        layer: usize,
        found: Activation,
        expected: Activation,
    },
    #[error(transparent)]
    Crn(#[from] CrnError),
}

/// Species produced by the weighted sum of unit `unit` in layer `layer`.
fn sum_species(act: Activation, layer: usize, unit: usize, sign: Sign) -> Species {
    match act {
        Activation::Linear => Species::hidden(layer, unit, sign),
        Activation::Relu => Species::intermediate(layer, unit, sign),
    }
}

/// Hidden layers must be ReLU and the output layer Linear.
pub fn check_shape(net: &BinaryNetwork) -> Result<(), CompileError> {
    let n = net.layers().len();
    for (k, layer) in net.layers().iter().enumerate() {
        let expected = if k + 1 == n {
            Activation::Linear
        } else {
            Activation::Relu
        };
        if layer.activation() != expected {
            return Err(CompileError::Activation {
                layer: k,
                found: layer.activation(),
                expected,
            });
        }
    }
    Ok(())
}

pub fn compile(net: &BinaryNetwork) -> Result<Crn, CompileError> {
    check_shape(net)?;
    let mut crn = Crn::new();
    crn.inputs = (1..=net.input_dim())
        .map(|i| DualRailPair::of(Species::input(i, Sign::Plus)).expect("signed"))
        .collect();

    for (k, layer) in net.layers().iter().enumerate() {
        let l = k + 2;
        let act = layer.activation();
        for i in 1..=layer.fan_in() {
            let reactant = if l == 2 {
                Species::input(i, Sign::Plus)
            } else {
                Species::hidden(l - 1, i, Sign::Plus)
            };
            let products: Multiset = layer.weights()[i - 1]
                .iter()
                .enumerate()
                .map(|(j, &w)| {
                    let sign = if w == 1 { Sign::Plus } else { Sign::Minus };
                    sum_species(act, l, j + 1, sign)
                })
                .collect();
            let rxn = Reaction::new([reactant].into_iter().collect(), products, 1.0);
            let mirrored = rxn.reverse_signs();
            crn.reactions.push(rxn);
            crn.reactions.push(mirrored);
        }
        for (j, &b) in layer.bias().iter().enumerate() {
            let j = j + 1;
            if b > 0.0 {
                crn.set_conc(sum_species(act, l, j, Sign::Plus), b);
            } else {
                crn.set_conc(sum_species(act, l, j, Sign::Minus), -b);
            }
            if act == Activation::Relu {
                crn.reactions.push(Reaction::new(
                    [Species::intermediate(l, j, Sign::Plus)].into_iter().collect(),
                    [Species::mem(l, j), Species::hidden(l, j, Sign::Plus)]
                        .into_iter()
                        .collect(),
                    1.0,
                ));
                crn.reactions.push(Reaction::new(
                    [Species::mem(l, j), Species::intermediate(l, j, Sign::Minus)]
                        .into_iter()
                        .collect(),
                    [Species::hidden(l, j, Sign::Minus)].into_iter().collect(),
                    1.0,
                ));
            }
        }
    }

    let out_layer = net.layers().len() + 1;
    crn.outputs = (1..=net.output_dim())
        .map(|j| DualRailPair::of(Species::hidden(out_layer, j, Sign::Plus)).expect("signed"))
        .collect();
    crn.validate()?;
    Ok(crn)
}

/// Reaction count of the unreduced CRN for a network of the given widths
/// (input first), assuming ReLU hidden layers and a Linear output layer.
pub fn reaction_count_unoptimized(shape: &[usize]) -> usize {
    let weighted: usize = shape.windows(2).map(|w| 2 * w[0]).sum();
    let relu_units: usize = relu_units(shape);
    weighted + 2 * relu_units
}

/// Reaction count after reduction: two per input plus one per ReLU unit.
pub fn reaction_count_reduced(shape: &[usize]) -> usize {
    2 * shape.first().copied().unwrap_or(0) + relu_units(shape)
}

fn relu_units(shape: &[usize]) -> usize {
    match shape.len() {
        0..=2 => 0,
        n => shape[1..n - 1].iter().sum(),
    }
}
