//! Compile binary-weight ReLU networks into rate-independent chemical
//! reaction networks, simplify them, and check them by simulation.
//!
//! The pipeline is [`train`] → [`compile`] → [`reduce`] → [`simulate`] →
//! [`verify`]. Each stage also works on its own: networks and CRNs have
//! plain-text file formats and can be loaded from disk.

pub mod compile;
pub mod crn;
pub mod data;
pub mod nn;
pub mod reduce;
pub mod sim;
pub mod train;
pub mod verify;

pub use compile::{compile, reaction_count_reduced, reaction_count_unoptimized, CompileError};
pub use crn::{
    decode_output, encode_input, Crn, CrnError, CrnStats, DualRailPair, DualRailValue, Multiset,
    Reaction, Sign, Species,
};
pub use data::{
    load_csv, load_iris, make_synthetic, read_csv, read_iris, DataError, Header, LabeledDataset,
    Synthetic, SyntheticSpec,
};
pub use nn::{argmax_class, Activation, BinaryLayer, BinaryNetwork, FeatureScaling, NetworkError};
pub use reduce::{add_cancellation, reduce, Cancellation, ReduceError};
pub use sim::{
    derive_odes, export_trajectory, min_rate, randomize_rates, readout, simulate,
    write_trajectory_csv, MassActionSystem, Readout, SimConfig, SimError, StopReason, Trajectory,
};
pub use train::{binarize, evaluate, train, EpochLog, TrainConfig, TrainError, TrainReport};
pub use verify::{verify, ExampleReport, VerificationReport, VerifyError};
