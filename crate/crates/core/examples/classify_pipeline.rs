//! Compares the four pre-processing choices end to end: code, train the
//! layer, pool features, fit the linear SVM and report accuracy.
//!
//! `cargo run --release --example classify_pipeline`

use whitespike::config::{DatasetKind, ExperimentConfig, Preproc};
use whitespike::pipeline::run_experiment;

fn main() -> whitespike::Result<()> {
    let mut base = ExperimentConfig::default();
    base.dataset.kind = DatasetKind::Synthetic;
    base.dataset.synthetic_size = 16;
    base.whitening.patch_w = 5;
    base.whitening.patch_h = 5;
    base.whitening.patch_count = 10_000;
    base.layer.filter_count = 16;
    base.training.epochs = 5;
    base.training.patches_per_epoch = Some(1000);
    base.classify.run_count = 2;

    for preproc in [Preproc::StandardZca, Preproc::Kernels, Preproc::DogGray, Preproc::DogColor] {
        let mut cfg = base.clone();
        cfg.whitening.preproc = preproc;
        let report = run_experiment(&cfg)?;
        println!("{}", report.summary());
    }
    Ok(())
}
