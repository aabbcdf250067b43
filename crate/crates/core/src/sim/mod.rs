//! Deterministic mass-action simulation of CRNs.

pub mod integrator;
mod odes;

use std::collections::BTreeMap;
use std::io::Write;
use std::ops::ControlFlow;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::crn::{Crn, DualRailPair, DualRailValue, Species};
use crate::nn::argmax_class;
use integrator::{integrate, IntegrateError, StepControl};

pub use odes::{derive_odes, MassActionSystem};

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("input has {got} values, CRN has {expected} input pairs")]
    InputLength { expected: usize, got: usize },
    #[error("input value {0} is not finite")]
    NonFiniteInput(f64),
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("step limit of {steps} reached at t = {t} (system may be stiff)")]
    StepLimit { t: f64, steps: usize },
    #[error("step size underflow at t = {t} (h = {h})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("CRN has no output pairs")]
    NoOutputs,
    #[error("rate range [{0}, {1}] must satisfy 0 < lo <= hi")]
    RateRange(f64, f64),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<IntegrateError> for SimError {
    fn from(e: IntegrateError) -> Self {
        match e {
            IntegrateError::StepLimit { t, steps } => SimError::StepLimit { t, steps },
            IntegrateError::StepUnderflow { t, h } => SimError::StepUnderflow { t, h },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimConfig {
    pub t_end: f64,
    pub atol: f64,
    pub rtol: f64,
    pub max_steps: usize,
    /// Early-stop threshold on `max |dc/dt|` over output species; 0 disables.
    pub steady_state: f64,
    /// How long the steady-state condition must hold before stopping.
    pub steady_window: f64,
    /// Number of evenly spaced samples over `[0, t_end]`, at least 2.
    pub samples: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            t_end: 50.0,
            atol: 1e-9,
            rtol: 1e-6,
            max_steps: 500_000,
            steady_state: 1e-8,
            steady_window: 1.0,
            samples: 501,
        }
    }
}

impl SimConfig {
    pub fn with_t_end(mut self, t_end: f64) -> Self {
        self.t_end = t_end;
        self
    }

    fn check(&self) -> Result<(), SimError> {
        let ok = self.t_end > 0.0
            && self.t_end.is_finite()
            && self.atol > 0.0
            && self.rtol > 0.0
            && self.steady_state >= 0.0
            && self.steady_window >= 0.0
            && self.samples >= 2
            && self.max_steps > 0;
        if ok {
            Ok(())
        } else {
            Err(SimError::Config(format!("{self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    EndTime,
    SteadyState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub species: Vec<Species>,
    pub times: Vec<f64>,
    /// `states[k][i]` is the concentration of `species[i]` at `times[k]`.
    pub states: Vec<Vec<f64>>,
    pub stop_reason: StopReason,
    pub stop_time: f64,
    pub steps: usize,
}

impl Trajectory {
    pub fn final_state(&self) -> BTreeMap<Species, f64> {
        match self.states.last() {
            Some(y) => self.species.iter().cloned().zip(y.iter().copied()).collect(),
            None => BTreeMap::new(),
        }
    }

    pub fn column(&self, s: &Species) -> Option<Vec<f64>> {
        let i = self.species.iter().position(|x| x == s)?;
        Some(self.states.iter().map(|y| y[i]).collect())
    }

    pub fn min_concentration(&self) -> f64 {
        self.states
            .iter()
            .flatten()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Decoded dual-rail value of `pair` at every sample.
    pub fn decoded(&self, pair: &DualRailPair) -> Vec<f64> {
        let col = |s| self.column(s).unwrap_or_else(|| vec![0.0; self.times.len()]);
        let (p, m) = (col(&pair.plus), col(&pair.minus));
        p.iter().zip(&m).map(|(a, b)| a - b).collect()
    }
}

/// Initial concentrations with the input encoded on the CRN's input pairs;
/// the encoding overrides any stored input-species concentration.
pub fn initial_state(crn: &Crn, input: &[f64]) -> Result<BTreeMap<Species, f64>, SimError> {
    if input.len() != crn.inputs.len() {
        return Err(SimError::InputLength {
            expected: crn.inputs.len(),
            got: input.len(),
        });
    }
    let mut state = crn.init.clone();
    for (pair, &x) in crn.inputs.iter().zip(input) {
        if !x.is_finite() {
            return Err(SimError::NonFiniteInput(x));
        }
        let d = DualRailValue::encode(x);
        state.insert(pair.plus.clone(), d.plus());
        state.insert(pair.minus.clone(), d.minus());
    }
    Ok(state)
}

pub fn simulate(crn: &Crn, input: &[f64], cfg: &SimConfig) -> Result<Trajectory, SimError> {
    cfg.check()?;
    let init = initial_state(crn, input)?;
    let sys = derive_odes(crn);
    let mut y = sys.state_from(&init);
    let n = y.len();

    let watch: Vec<usize> = crn
        .outputs
        .iter()
        .flat_map(|p| [&p.plus, &p.minus])
        .filter_map(|s| sys.index_of(s))
        .collect();

    let sample_at = |k: usize| cfg.t_end * k as f64 / (cfg.samples - 1) as f64;
    let mut times = vec![0.0];
    let mut states = vec![y.clone()];
    let mut next = 1usize;
    let mut quiet_since: Option<f64> = None;
    let mut stop_reason = StopReason::EndTime;

    let ctl = StepControl {
        atol: cfg.atol,
        rtol: cfg.rtol,
        max_steps: cfg.max_steps,
        clamp_undershoot: true,
    };
    let stats = integrate(&sys, 0.0, &mut y, cfg.t_end, &ctl, |step| {
        while next < cfg.samples {
            let ts = if next == cfg.samples - 1 { cfg.t_end } else { sample_at(next) };
            if ts > step.t1 {
                break;
            }
            let mut buf = vec![0.0; n];
            if ts == step.t1 {
                buf.copy_from_slice(step.y1);
            } else {
                step.interpolate(ts, &mut buf);
            }
            times.push(ts);
            states.push(buf);
            next += 1;
        }
        if cfg.steady_state > 0.0 && !watch.is_empty() {
            let rate = watch.iter().map(|&i| step.f1[i].abs()).fold(0.0, f64::max);
            if rate < cfg.steady_state {
                let since = *quiet_since.get_or_insert(step.t1);
                if step.t1 - since >= cfg.steady_window {
                    stop_reason = StopReason::SteadyState;
                    return ControlFlow::Break(());
                }
            } else {
                quiet_since = None;
            }
        }
        ControlFlow::Continue(())
    })?;

    if stop_reason == StopReason::SteadyState && times.last() != Some(&stats.t) {
        times.push(stats.t);
        states.push(y.clone());
    }
    Ok(Trajectory {
        species: sys.species().to_vec(),
        times,
        states,
        stop_reason,
        stop_time: stats.t,
        steps: stats.accepted,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Readout {
    pub values: Vec<f64>,
    pub class: usize,
}

/// Decoded outputs at the final sample and the winning class (ties go to
/// the lowest index).
pub fn readout(traj: &Trajectory, crn: &Crn) -> Result<Readout, SimError> {
    let state = traj.final_state();
    let values: Vec<f64> = crn
        .outputs
        .iter()
        .map(|p| crate::crn::decode_output(&state, p))
        .collect();
    let class = argmax_class(&values).map_err(|_| SimError::NoOutputs)?;
    Ok(Readout { values, class })
}

/// Replaces every rate constant by an independent log-uniform draw from
/// `[lo, hi]`.
pub fn randomize_rates(crn: &Crn, seed: u64, lo: f64, hi: f64) -> Result<Crn, SimError> {
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
        return Err(SimError::RateRange(lo, hi));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (a, b) = (lo.ln(), hi.ln());
    let mut out = crn.clone();
    for r in &mut out.reactions {
        r.rate = if lo == hi {
            lo
        } else {
            rng.random_range(a..=b).exp().clamp(lo, hi)
        };
    }
    Ok(out)
}

pub fn min_rate(crn: &Crn) -> f64 {
    crn.reactions.iter().map(|r| r.rate).fold(f64::INFINITY, f64::min)
}

/// Writes `t`, one column per species, then one decoded `y<j>` column per
/// entry of `outputs` (0-based). Values use 17 significant digits.
pub fn write_trajectory_csv<W: Write>(
    traj: &Trajectory,
    outputs: &[DualRailPair],
    out: W,
) -> Result<(), SimError> {
    let io = |e: csv::Error| SimError::Io(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend(traj.species.iter().map(Species::to_string));
    header.extend((0..outputs.len()).map(|j| format!("y{j}")));
    w.write_record(&header).map_err(io)?;
    let decoded: Vec<Vec<f64>> = outputs.iter().map(|p| traj.decoded(p)).collect();
    for (k, (t, y)) in traj.times.iter().zip(&traj.states).enumerate() {
        let mut row = vec![format!("{t:.16e}")];
        row.extend(y.iter().map(|v| format!("{v:.16e}")));
        row.extend(decoded.iter().map(|d| format!("{:.16e}", d[k])));
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| SimError::Io(e.to_string()))
}

pub fn export_trajectory(
    traj: &Trajectory,
    outputs: &[DualRailPair],
    path: impl AsRef<std::path::Path>,
) -> Result<(), SimError> {
    let path = path.as_ref();
    let file = std::fs::File::create(path)
        .map_err(|e| SimError::Io(format!("{}: {e}", path.display())))?;
    write_trajectory_csv(traj, outputs, std::io::BufWriter::new(file))
}
