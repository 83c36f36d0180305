//! Reads CIFAR-10 binary batches (or writes a small synthetic set in that
//! format first), samples patches and prints their statistics.
//!
//! `cargo run --release --example load_cifar [cifar_dir]`

use std::path::PathBuf;

use whitespike::datasets::{load_cifar10_subset, sample_patches, write_cifar10_dir, LabeledImageSet};
use whitespike::synthetic;

fn main() -> whitespike::Result<()> {
    let dir = match std::env::args().nth(1) {
        Some(d) => PathBuf::from(d),
        None => {
            let dir = std::env::temp_dir().join("whitespike_fake_cifar");
            let set = synthetic::labeled_images(60, 10, 32, 32, 2);
            let train = LabeledImageSet::new(set.images()[..50].to_vec(), set.labels()[..50].to_vec(), 10)?;
            let test = LabeledImageSet::new(set.images()[50..].to_vec(), set.labels()[50..].to_vec(), 10)?;
            write_cifar10_dir(&dir, &train, &test)?;
            println!("wrote synthetic batches to {}", dir.display());
            dir
        }
    };
    let (train, test) = load_cifar10_subset(&dir, 1000, 100)?;
    println!("{} train / {} test images, dims {:?}", train.len(), test.len(), train.image_dims());
    let mut counts = vec![0usize; train.class_count()];
    for &l in train.labels() {
        counts[l] += 1;
    }
    println!("train class counts: {counts:?}");

    let patches = sample_patches(&train, 9, 9, 2, 50_000, 0)?;
    let m = &patches.patches;
    let mean = m.data().iter().sum::<f64>() / m.data().len() as f64;
    let (lo, hi) = m.data().iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
    println!("{} patches x {} values, mean {mean:.4}, range [{lo:.3}, {hi:.3}]", m.rows(), m.cols());
    Ok(())
}
