//! Difference-of-Gaussians pre-processing in grayscale and color mode.
//!
//! `cargo run --release --example dog_filtering [out_dir]`

use std::path::PathBuf;

use whitespike::datasets::export_image_grid;
use whitespike::synthetic;
use whitespike::whitening::{dog_encode, DogConfig, DogMode};
use whitespike::Tensor3;

/// Collapses on/off channel pairs back to one signed channel each.
fn signed(t: &Tensor3) -> Tensor3 {
    let c = t.channels() / 2;
    let data = t
        .data()
        .chunks_exact(2 * c)
        .flat_map(|px| (0..c).map(move |k| px[k] - px[c + k]))
        .collect();
    Tensor3::from_vec(t.height(), t.width(), c, data).expect("same pixel count")
}

fn main() -> whitespike::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| ".".into()));
    let set = synthetic::natural_images(1, 32, 32, 5);
    let image = &set.images()[0];

    let gray = DogConfig { mode: DogMode::Grayscale, ..DogConfig::default() };
    let color = DogConfig::default();
    println!("kernel ({}x{}):", color.kernel_size, color.kernel_size);
    for row in color.kernel().chunks(color.kernel_size) {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:+.4}")).collect();
        println!("  {}", cells.join(" "));
    }

    let g = dog_encode(image, &gray)?;
    let c = dog_encode(image, &color)?;
    println!("on/off coded grayscale {:?}, color {:?}", g.dims(), c.dims());
    export_image_grid(std::slice::from_ref(image), out.join("dog_input.png"))?;
    export_image_grid(&[signed(&g)], out.join("dog_gray.png"))?;
    export_image_grid(&[signed(&c)], out.join("dog_color.png"))?;
    println!("wrote dog_input.png, dog_gray.png and dog_color.png to {}", out.display());
    Ok(())
}
