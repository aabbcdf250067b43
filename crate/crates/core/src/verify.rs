//! Side-by-side comparison of a network's forward pass and a CRN's
//! equilibrium readout.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::crn::Crn;
use crate::data::LabeledDataset;
use crate::nn::{argmax_class, BinaryNetwork, NetworkError};
use crate::sim::{readout, simulate, SimConfig, StopReason};

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("network expects {net} inputs but the CRN has {crn}")]
    InputMismatch { net: usize, crn: usize },
    #[error("network has {net} outputs but the CRN has {crn}")]
    OutputMismatch { net: usize, crn: usize },
    #[error("dataset has {data} features but the network expects {net}")]
    DataMismatch { data: usize, net: usize },
    #[error(transparent)]
    Network(#[from] NetworkError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExampleReport {
    pub index: usize,
    pub label: usize,
    pub nn_output: Vec<f64>,
    pub crn_output: Vec<f64>,
    pub nn_class: usize,
    pub crn_class: Option<usize>,
    pub agree: bool,
    /// Largest absolute difference over outputs; infinite when the
    /// simulation failed.
    #[serde(serialize_with = "finite_or_null")]
    pub max_err: f64,
    pub stop_time: Option<f64>,
    pub steady: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigEcho {
    pub examples: usize,
    pub network_shape: Vec<usize>,
    pub crn_reactions: usize,
    pub sim: SimConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub examples: Vec<ExampleReport>,
    pub agreement_rate: f64,
    #[serde(serialize_with = "finite_or_null")]
    pub max_err: f64,
    pub failures: usize,
    pub config_echo: ConfigEcho,
    /// Wall-clock time; left out of the JSON so reports are reproducible.
    #[serde(skip)]
    pub runtime_secs: f64,
}

fn finite_or_null<S: serde::Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

impl VerificationReport {
    pub fn agreements(&self) -> usize {
        self.examples.iter().filter(|e| e.agree).count()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Runs every example through both the network and the CRN. The CRN is fed
/// the same preprocessed input as the network. Simulation failures are
/// recorded on the example rather than aborting the run.
pub fn verify(
    net: &BinaryNetwork,
    crn: &Crn,
    data: &LabeledDataset,
    cfg: &SimConfig,
) -> Result<VerificationReport, VerifyError> {
    if net.input_dim() != crn.inputs.len() {
        return Err(VerifyError::InputMismatch {
            net: net.input_dim(),
            crn: crn.inputs.len(),
        });
    }
    if net.output_dim() != crn.outputs.len() {
        return Err(VerifyError::OutputMismatch {
            net: net.output_dim(),
            crn: crn.outputs.len(),
        });
    }
    if !data.is_empty() && data.input_dim() != net.input_dim() {
        return Err(VerifyError::DataMismatch {
            data: data.input_dim(),
            net: net.input_dim(),
        });
    }
    let started = Instant::now();
    let examples = data
        .features()
        .par_iter()
        .zip(data.labels().par_iter())
        .enumerate()
        .map(|(index, (raw, &label))| check_one(net, crn, cfg, index, raw, label))
        .collect::<Result<Vec<_>, _>>()?;

    let agree = examples.iter().filter(|e| e.agree).count();
    let max_err = examples.iter().map(|e| e.max_err).fold(0.0, f64::max);
    Ok(VerificationReport {
        agreement_rate: if examples.is_empty() { 1.0 } else { agree as f64 / examples.len() as f64 },
        max_err,
        failures: examples.iter().filter(|e| e.error.is_some()).count(),
        config_echo: ConfigEcho {
            examples: examples.len(),
            network_shape: net.shape(),
            crn_reactions: crn.reactions.len(),
            sim: *cfg,
        },
        examples,
        runtime_secs: started.elapsed().as_secs_f64(),
    })
}

fn check_one(
    net: &BinaryNetwork,
    crn: &Crn,
    cfg: &SimConfig,
    index: usize,
    raw: &[f64],
    label: usize,
) -> Result<ExampleReport, VerifyError> {
    let x = net.prepare_input(raw);
    let nn_output = net.forward(&x)?;
    let nn_class = argmax_class(&nn_output)?;
    let mut rep = ExampleReport {
        index,
        label,
        nn_output,
        crn_output: Vec::new(),
        nn_class,
        crn_class: None,
        agree: false,
        max_err: f64::INFINITY,
        stop_time: None,
        steady: false,
        error: None,
    };
    match simulate(crn, &x, cfg).and_then(|t| readout(&t, crn).map(|r| (t, r))) {
        Ok((traj, r)) => {
            rep.max_err = rep
                .nn_output
                .iter()
                .zip(&r.values)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            rep.agree = r.class == nn_class;
            rep.crn_class = Some(r.class);
            rep.crn_output = r.values;
            rep.stop_time = Some(traj.stop_time);
            rep.steady = traj.stop_reason == StopReason::SteadyState;
        }
        Err(e) => rep.error = Some(e.to_string()),
    }
    Ok(rep)
}
