//! Fits ZCA whitening kernels on image patches, prints the spectrum head
//! and writes the kernels and a whitened image as PNG grids.
//!
//! Uses CIFAR-10 from `CIFAR10_DIR` when present, synthetic images otherwise.
//!
//! `cargo run --release --example whitening_kernels [out_dir]`

use std::path::PathBuf;

use whitespike::datasets::{dataset_dir_from_env, export_image_grid, load_cifar10_subset, sample_patches};
use whitespike::numerics::{covariance, sym_eigen};
use whitespike::synthetic;
use whitespike::whitening::{apply_kernels, fit_kernels};

fn main() -> whitespike::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| ".".into()));
    let train = match dataset_dir_from_env("CIFAR10_DIR", "data/cifar-10-batches-bin") {
        Some(dir) => load_cifar10_subset(dir, 2000, 1)?.0,
        None => synthetic::natural_images(400, 32, 32, 1),
    };
    let patches = sample_patches(&train, 9, 9, 2, 100_000, 3)?;
    println!("{} patches of dim {}", patches.patches.rows(), patches.patches.cols());

    let (_, cov) = covariance(&patches.patches)?;
    let eig = sym_eigen(&cov)?;
    let head: Vec<String> = eig.eigenvalues.iter().take(10).map(|v| format!("{v:.3e}")).collect();
    println!("top eigenvalues: {}", head.join(" "));

    let kernels = fit_kernels(&patches, 1e-2, 1.0)?;
    export_image_grid(&kernels.kernels(), out.join("whitening_kernels.png"))?;
    let whitened = apply_kernels(&kernels, &train.images()[0])?;
    export_image_grid(&[train.images()[0].clone(), whitened], out.join("whitened_sample.png"))?;
    println!("wrote whitening_kernels.png and whitened_sample.png to {}", out.display());
    Ok(())
}
