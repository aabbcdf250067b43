//! Fixtures shared by the benchmarks.

use nncrn_core::{load_iris, make_synthetic, train, BinaryNetwork, LabeledDataset, SyntheticSpec, TrainConfig};

pub fn iris() -> LabeledDataset {
    load_iris(concat!(env!("CARGO_MANIFEST_DIR"), "/../core/data/iris.csv")).expect("bundled iris data")
}

pub fn synthetic() -> LabeledDataset {
    let spec = SyntheticSpec { classes: 4, features: 10, per_class: 25, ..SyntheticSpec::default() };
    make_synthetic(&spec, 0).expect("valid spec").data
}

/// A network trained briefly on `data`; enough to exercise the pipeline.
pub fn network(data: &LabeledDataset, hidden: usize) -> BinaryNetwork {
    let cfg = TrainConfig { hidden: vec![hidden], epochs: 50, ..TrainConfig::default() };
    train(data, &cfg).expect("training succeeds").network
}
