//! Trains a convolutional STDP layer on whitened images, writes the epoch
//! log as CSV and the learned filters as a PNG grid.
//!
//! Uses CIFAR-10 from `CIFAR10_DIR` when present, synthetic images otherwise.
//!
//! `cargo run --release --example train_layer [out_dir]`

use std::path::PathBuf;

use whitespike::config::{DatasetKind, ExperimentConfig};
use whitespike::datasets::{dataset_dir_from_env, export_image_grid};
use whitespike::pipeline::{filter_tiles, load_dataset, train_layer, Preprocessor};
use whitespike::snn::EpochStats;

fn main() -> whitespike::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| ".".into()));
    let mut cfg = ExperimentConfig::default();
    match dataset_dir_from_env("CIFAR10_DIR", "data/cifar-10-batches-bin") {
        Some(dir) => {
            cfg.dataset.path = dir;
            cfg.dataset.train_limit = Some(5000);
            cfg.whitening.patch_count = 200_000;
            cfg.training.epochs = 10;
        }
        None => {
            cfg.dataset.kind = DatasetKind::Synthetic;
            cfg.whitening.patch_count = 20_000;
            cfg.layer.filter_count = 16;
            cfg.training.epochs = 10;
            cfg.training.patches_per_epoch = Some(2000);
        }
    }
    let (train, _) = load_dataset(&cfg.dataset, cfg.seed)?;
    let pre = Preprocessor::fit(&cfg.whitening, &train, cfg.seed)?;
    let coded = pre.code_all(train.images())?;
    let (layer, log) = train_layer(&cfg, &coded, 0)?;

    println!("{}", EpochStats::CSV_HEADER);
    for e in &log {
        println!("{}", e.csv_line());
    }
    let png = out.join("filters.png");
    export_image_grid(&filter_tiles(&layer), &png)?;
    layer.save(out.join("layer.bin"))?;
    println!("wrote {} and layer.bin", png.display());
    Ok(())
}
