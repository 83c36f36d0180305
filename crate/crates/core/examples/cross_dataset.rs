//! Transfers whitening kernels between two datasets and prints the accuracy
//! change against same-dataset kernels.
//!
//! With `CIFAR10_DIR` and `STL10_DIR` set the real datasets are used;
//! otherwise two synthetic datasets with different seeds stand in.
//!
//! `cargo run --release --example cross_dataset`

use whitespike::config::{DatasetKind, ExperimentConfig};
use whitespike::datasets::dataset_dir_from_env;
use whitespike::pipeline::cross_dataset;

fn small(mut cfg: ExperimentConfig) -> ExperimentConfig {
    cfg.whitening.patch_count = 20_000;
    cfg.layer.filter_count = 16;
    cfg.training.epochs = 3;
    cfg.training.patches_per_epoch = Some(2000);
    cfg.classify.run_count = 2;
    cfg
}

fn main() -> whitespike::Result<()> {
    let cifar = dataset_dir_from_env("CIFAR10_DIR", "data/cifar-10-batches-bin");
    let stl = dataset_dir_from_env("STL10_DIR", "data/stl10_binary");
    let (a, b) = match (cifar, stl) {
        (Some(c), Some(s)) => {
            let mut a = ExperimentConfig::default();
            a.dataset.path = c;
            a.dataset.train_limit = Some(2000);
            a.dataset.test_limit = Some(1000);
            let mut b = a.clone();
            b.dataset.kind = DatasetKind::Stl10;
            b.dataset.path = s;
            (small(a), small(b))
        }
        _ => {
            let mut a = ExperimentConfig::default();
            a.dataset.kind = DatasetKind::Synthetic;
            let mut b = a.clone();
            b.seed = 99;
            b.dataset.synthetic_classes = 3;
            (small(a), small(b))
        }
    };
    let report = cross_dataset(&a, &b)?;
    print!("{}", report.table());
    Ok(())
}
