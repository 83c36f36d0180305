//! Procedural image sets for tests, examples and smoke runs when the real
//! datasets are not on disk.
//!
//! [`natural_images`] follows the dead-leaves model: opaque colored discs with
//! power-law radii occluding each other, which reproduces the strong local
//! pixel correlations of natural photographs. [`labeled_images`] overlays a
//! class-specific oriented, tinted grating on such a background.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::datasets::LabeledImageSet;
use crate::numerics::Tensor3;

fn quantized(v: f32) -> f32 {
    (v.clamp(0.0, 1.0) * 255.0).round() / 255.0
}

fn dead_leaves(rng: &mut ChaCha8Rng, h: usize, w: usize) -> Tensor3 {
    let mut img = Tensor3::zeros(h, w, 3);
    let mut covered = vec![false; h * w];
    let mut remaining = h * w;
    let (r_min, r_max) = (1.0f32, (h.max(w) as f32) * 0.6);
    let mut guard = 0;
    // paint front to back; a pixel keeps the first disc that covers it
    while remaining > 0 && guard < 4000 {
        guard += 1;
        // radius density ∝ r^-3 via inverse CDF
        let u: f32 = rng.random();
        let inv = 1.0 / (r_min * r_min) - u * (1.0 / (r_min * r_min) - 1.0 / (r_max * r_max));
        let r = inv.powf(-0.5);
        let cy: f32 = rng.random_range(-r..h as f32 + r);
        let cx: f32 = rng.random_range(-r..w as f32 + r);
        let base: f32 = rng.random_range(0.1..0.9);
        let tint = [
            base + rng.random_range(-0.15..0.15),
            base + rng.random_range(-0.15..0.15),
            base + rng.random_range(-0.15..0.15),
        ];
        let y0 = (cy - r).floor().max(0.0) as usize;
        let y1 = ((cy + r).ceil().max(0.0) as usize).min(h);
        let x0 = (cx - r).floor().max(0.0) as usize;
        let x1 = ((cx + r).ceil().max(0.0) as usize).min(w);
        for y in y0..y1 {
            for x in x0..x1 {
                let (dy, dx) = (y as f32 + 0.5 - cy, x as f32 + 0.5 - cx);
                if dy * dy + dx * dx <= r * r && !covered[y * w + x] {
                    covered[y * w + x] = true;
                    remaining -= 1;
                    for (c, t) in tint.iter().enumerate() {
                        img.set(y, x, c, *t);
                    }
                }
            }
        }
    }
    for (y, x) in (0..h).flat_map(|y| (0..w).map(move |x| (y, x))) {
        if !covered[y * w + x] {
            for c in 0..3 {
                img.set(y, x, c, 0.5);
            }
        }
    }
    img
}

/// Unlabeled-style natural image stand-ins (all labelled class 0).
pub fn natural_images(count: usize, height: usize, width: usize, seed: u64) -> LabeledImageSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let images = (0..count)
        .map(|_| {
            let mut img = dead_leaves(&mut rng, height, width);
            for v in img.data_mut() {
                *v = quantized(*v + rng.random_range(-0.02..0.02));
            }
            img
        })
        .collect();
    LabeledImageSet::new(images, vec![0; count], 1).expect("consistent synthetic set")
}

/// Class-conditional images: class `k` of `classes` carries a grating at angle
/// `k·π/classes` with a class-specific color tint over a dead-leaves
/// background. Labels cycle through the classes.
pub fn labeled_images(count: usize, classes: usize, height: usize, width: usize, seed: u64) -> LabeledImageSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes = classes.max(1);
    let mut images = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for n in 0..count {
        let k = n % classes;
        let mut img = dead_leaves(&mut rng, height, width);
        let angle = std::f32::consts::PI * k as f32 / classes as f32 + rng.random_range(-0.15..0.15);
        let freq = rng.random_range(0.35..0.6);
        let phase: f32 = rng.random_range(0.0..std::f32::consts::TAU);
        let hue = std::f32::consts::TAU * k as f32 / classes as f32;
        let tint = [hue.cos(), (hue + 2.1).cos(), (hue + 4.2).cos()];
        let (s, c) = angle.sin_cos();
        for y in 0..height {
            for x in 0..width {
                let g = ((x as f32 * c + y as f32 * s) * freq + phase).sin();
                for (ch, t) in tint.iter().enumerate() {
                    let bg = img.get(y, x, ch);
                    let v = 0.5 * bg + 0.25 + 0.2 * g + 0.08 * t + rng.random_range(-0.03..0.03);
                    img.set(y, x, ch, quantized(v));
                }
            }
        }
        images.push(img);
        labels.push(k);
    }
    LabeledImageSet::new(images, labels, classes).expect("consistent synthetic set")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn images_are_in_unit_range_and_deterministic() {
        let a = labeled_images(6, 3, 16, 16, 4);
        let b = labeled_images(6, 3, 16, 16, 4);
        assert_eq!(a.labels(), &[0, 1, 2, 0, 1, 2]);
        for (x, y) in a.images().iter().zip(b.images()) {
            assert_eq!(x, y);
            assert!(x.data().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn neighbouring_pixels_are_correlated() {
        let set = natural_images(20, 32, 32, 1);
        let (mut sxy, mut sxx, mut syy, mut sx, mut sy, mut n) = (0.0f64, 0.0, 0.0, 0.0, 0.0, 0.0);
        for img in set.images() {
            for y in 0..32 {
                for x in 0..31 {
                    let a = f64::from(img.get(y, x, 0));
                    let b = f64::from(img.get(y, x + 1, 0));
                    sxy += a * b;
                    sxx += a * a;
                    syy += b * b;
                    sx += a;
                    sy += b;
                    n += 1.0;
                }
            }
        }
        let cov = sxy / n - sx * sy / n / n;
        let rho = cov / ((sxx / n - (sx / n).powi(2)) * (syy / n - (sy / n).powi(2))).sqrt();
        assert!(rho > 0.6, "rho = {rho}");
    }
}
