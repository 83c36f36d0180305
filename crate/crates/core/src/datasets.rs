//! CIFAR-10 / STL-10 binary loaders, patch sampling and image-grid export.
//!
//! CIFAR-10 binary batches: each record is one label byte followed by 3072
//! pixel bytes, planar R then G then B, each plane row-major 32x32.
//! <https://www.cs.toronto.edu/~kriz/cifar.html>
//!
//! STL-10 binary files (`train_X.bin`, `train_y.bin`, `test_X.bin`,
//! `test_y.bin`): images are stored as 3 planes of 96x96 bytes, each plane
//! column-major; labels are bytes in 1..=10.
//! <https://cs.stanford.edu/~acoates/stl10/>

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Tensor3};

pub const CIFAR10_SIDE: usize = 32;
pub const CIFAR10_TRAIN_FILES: [&str; 5] = [
    "data_batch_1.bin",
    "data_batch_2.bin",
    "data_batch_3.bin",
    "data_batch_4.bin",
    "data_batch_5.bin",
];
pub const CIFAR10_TEST_FILE: &str = "test_batch.bin";

pub const STL10_SIDE: usize = 96;
const STL10_TRAIN: (&str, &str) = ("train_X.bin", "train_y.bin");
const STL10_TEST: (&str, &str) = ("test_X.bin", "test_y.bin");

/// A set of equally sized images with class labels.
#[derive(Debug, Clone)]
pub struct LabeledImageSet {
    images: Vec<Tensor3>,
    labels: Vec<usize>,
    class_count: usize,
}

impl LabeledImageSet {
    pub fn new(images: Vec<Tensor3>, labels: Vec<usize>, class_count: usize) -> Result<Self> {
        if images.len() != labels.len() {
            return Err(Error::Data(format!(
                "{} images but {} labels",
                images.len(),
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= class_count) {
            return Err(Error::Data(format!(
                "label {bad} out of range for {class_count} classes"
            )));
        }
        if let Some(first) = images.first() {
            if images.iter().any(|i| i.dims() != first.dims()) {
                return Err(Error::Data("images differ in size".into()));
            }
        }
        Ok(LabeledImageSet {
            images,
            labels,
            class_count,
        })
    }

    pub fn images(&self) -> &[Tensor3] {
        &self.images
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// `(height, width, channels)` of the images, if any.
    pub fn image_dims(&self) -> Option<(usize, usize, usize)> {
        self.images.first().map(Tensor3::dims)
    }

    /// The first `n` images (or all of them).
    pub fn head(&self, n: usize) -> LabeledImageSet {
        let n = n.min(self.len());
        LabeledImageSet {
            images: self.images[..n].to_vec(),
            labels: self.labels[..n].to_vec(),
            class_count: self.class_count,
        }
    }
}

fn read_exact_file(path: &Path, expected: Option<usize>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    File::open(path)
        .and_then(|f| BufReader::new(f).read_to_end(&mut buf))
        .map_err(|e| Error::io(path, e))?;
    if let Some(len) = expected {
        if buf.len() < len {
            return Err(Error::format(
                path,
                format!("expected {len} bytes, found {}", buf.len()),
            ));
        }
    }
    Ok(buf)
}

fn decode_cifar_file(path: &Path, limit: usize) -> Result<(Vec<Tensor3>, Vec<usize>)> {
    const RECORD: usize = 1 + 3 * CIFAR10_SIDE * CIFAR10_SIDE;
    let bytes = read_exact_file(path, None)?;
    if bytes.is_empty() || bytes.len() % RECORD != 0 {
        return Err(Error::format(
            path,
            format!("length {} is not a multiple of {RECORD}", bytes.len()),
        ));
    }
    let count = (bytes.len() / RECORD).min(limit);
    let plane = CIFAR10_SIDE * CIFAR10_SIDE;
    let mut images = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for rec in bytes.chunks_exact(RECORD).take(count) {
        let label = rec[0] as usize;
        if label >= 10 {
            return Err(Error::format(path, format!("label byte {label} out of range")));
        }
        labels.push(label);
        let pixels = &rec[1..];
        let mut data = Vec::with_capacity(3 * plane);
        for i in 0..plane {
            for c in 0..3 {
                data.push(f32::from(pixels[c * plane + i]) / 255.0);
            }
        }
        images.push(Tensor3::from_vec(CIFAR10_SIDE, CIFAR10_SIDE, 3, data)?);
    }
    Ok((images, labels))
}

/// Loads the CIFAR-10 binary distribution (50,000 train / 10,000 test).
pub fn load_cifar10(dir: impl AsRef<Path>) -> Result<(LabeledImageSet, LabeledImageSet)> {
    load_cifar10_subset(dir, usize::MAX, usize::MAX)
}

/// Like [`load_cifar10`] but stops after the first `train_limit` training and
/// `test_limit` test records, in file order.
pub fn load_cifar10_subset(
    dir: impl AsRef<Path>,
    train_limit: usize,
    test_limit: usize,
) -> Result<(LabeledImageSet, LabeledImageSet)> {
    let dir = dir.as_ref();
    let mut images = Vec::new();
    let mut labels = Vec::new();
    for name in CIFAR10_TRAIN_FILES {
        let remaining = train_limit.saturating_sub(images.len());
        if remaining == 0 {
            break;
        }
        let (i, l) = decode_cifar_file(&dir.join(name), remaining)?;
        images.extend(i);
        labels.extend(l);
    }
    let train = LabeledImageSet::new(images, labels, 10)?;
    let (ti, tl) = if test_limit == 0 {
        (vec![], vec![])
    } else {
        decode_cifar_file(&dir.join(CIFAR10_TEST_FILE), test_limit)?
    };
    let test = LabeledImageSet::new(ti, tl, 10)?;
    Ok((train, test))
}

fn decode_stl_split(
    dir: &Path,
    (x_name, y_name): (&str, &str),
    limit: usize,
) -> Result<LabeledImageSet> {
    let side = STL10_SIDE;
    let per_image = 3 * side * side;
    let y_path = dir.join(y_name);
    let label_bytes = read_exact_file(&y_path, None)?;
    if label_bytes.is_empty() {
        return Err(Error::format(&y_path, "empty label file"));
    }
    let count = label_bytes.len().min(limit);
    let x_path = dir.join(x_name);
    let pixels = read_exact_file(&x_path, Some(count * per_image))?;
    let plane = side * side;
    let mut images = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for (n, &lab) in label_bytes.iter().take(count).enumerate() {
        if !(1..=10).contains(&lab) {
            return Err(Error::format(&y_path, format!("label byte {lab} out of range")));
        }
        labels.push(usize::from(lab - 1));
        let raw = &pixels[n * per_image..(n + 1) * per_image];
        let mut t = Tensor3::zeros(side, side, 3);
        for c in 0..3 {
            for col in 0..side {
                for row in 0..side {
                    t.set(row, col, c, f32::from(raw[c * plane + col * side + row]) / 255.0);
                }
            }
        }
        images.push(t);
    }
    LabeledImageSet::new(images, labels, 10)
}

/// Loads the labelled STL-10 binary files (5,000 train / 8,000 test), keeping
/// the native 96x96 resolution.
pub fn load_stl10(dir: impl AsRef<Path>) -> Result<(LabeledImageSet, LabeledImageSet)> {
    load_stl10_subset(dir, usize::MAX, usize::MAX)
}

pub fn load_stl10_subset(
    dir: impl AsRef<Path>,
    train_limit: usize,
    test_limit: usize,
) -> Result<(LabeledImageSet, LabeledImageSet)> {
    let dir = dir.as_ref();
    let train = decode_stl_split(dir, STL10_TRAIN, train_limit)?;
    let test = if test_limit == 0 {
        LabeledImageSet::new(vec![], vec![], 10)?
    } else {
        decode_stl_split(dir, STL10_TEST, test_limit)?
    };
    Ok((train, test))
}

fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    File::create(path)
        .and_then(|mut f| f.write_all(bytes))
        .map_err(|e| Error::io(path, e))
}

/// Writes a set in CIFAR-10 binary record format (3-channel 32x32 images).
pub fn write_cifar10_file(path: impl AsRef<Path>, set: &LabeledImageSet) -> Result<()> {
    let plane = CIFAR10_SIDE * CIFAR10_SIDE;
    let mut bytes = Vec::with_capacity(set.len() * (1 + 3 * plane));
    for (img, &label) in set.images().iter().zip(set.labels()) {
        if img.dims() != (CIFAR10_SIDE, CIFAR10_SIDE, 3) {
            return Err(Error::Shape("CIFAR-10 records must be 32x32x3".into()));
        }
        bytes.push(label as u8);
        for c in 0..3 {
            for i in 0..plane {
                bytes.push(quantize(img.data()[i * 3 + c]));
            }
        }
    }
    write_bytes(path.as_ref(), &bytes)
}

/// Writes train/test sets as a CIFAR-10 style directory. Training images are
/// spread over the five batch files in order.
pub fn write_cifar10_dir(dir: impl AsRef<Path>, train: &LabeledImageSet, test: &LabeledImageSet) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let per_file = train.len().div_ceil(5).max(1);
    for (k, name) in CIFAR10_TRAIN_FILES.iter().enumerate() {
        let lo = (k * per_file).min(train.len());
        let hi = ((k + 1) * per_file).min(train.len());
        let part = LabeledImageSet {
            images: train.images[lo..hi].to_vec(),
            labels: train.labels[lo..hi].to_vec(),
            class_count: train.class_count,
        };
        write_cifar10_file(dir.join(name), &part)?;
    }
    write_cifar10_file(dir.join(CIFAR10_TEST_FILE), test)
}

/// Writes train/test sets in the STL-10 binary layout (3-channel 96x96).
pub fn write_stl10_dir(dir: impl AsRef<Path>, train: &LabeledImageSet, test: &LabeledImageSet) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (set, (x_name, y_name)) in [(train, STL10_TRAIN), (test, STL10_TEST)] {
        let side = STL10_SIDE;
        let mut x = Vec::with_capacity(set.len() * 3 * side * side);
        for img in set.images() {
            if img.dims() != (side, side, 3) {
                return Err(Error::Shape("STL-10 images must be 96x96x3".into()));
            }
            for c in 0..3 {
                for col in 0..side {
                    for row in 0..side {
                        x.push(quantize(img.get(row, col, c)));
                    }
                }
            }
        }
        let y: Vec<u8> = set.labels().iter().map(|&l| l as u8 + 1).collect();
        write_bytes(&dir.join(x_name), &x)?;
        write_bytes(&dir.join(y_name), &y)?;
    }
    Ok(())
}

/// Flattened patches, one per row, in the shared `hwc` patch layout.
#[derive(Debug, Clone)]
pub struct PatchSet {
    pub patches: Matrix,
    pub patch_w: usize,
    pub patch_h: usize,
    pub channels: usize,
    /// `(image index, top, left)` of each row's source window.
    pub origins: Vec<(usize, usize, usize)>,
}

impl PatchSet {
    pub fn len(&self) -> usize {
        self.patches.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.patch_w * self.patch_h * self.channels
    }
}

/// Dense grid sampling of `p_h x p_w` windows with the given stride over every
/// image in order. When the grid holds more than `max_count` windows, a seeded
/// uniform subsample without replacement is kept (in grid order).
pub fn sample_patches(
    set: &LabeledImageSet,
    p_w: usize,
    p_h: usize,
    stride: usize,
    max_count: usize,
    seed: u64,
) -> Result<PatchSet> {
    let (h, w, c) = set
        .image_dims()
        .ok_or_else(|| Error::InsufficientData("no images to sample patches from".into()))?;
    if p_w == 0 || p_h == 0 || p_w > w || p_h > h {
        return Err(Error::Shape(format!(
            "{p_h}x{p_w} patch does not fit {h}x{w} images"
        )));
    }
    if stride == 0 {
        return Err(Error::Shape("stride must be positive".into()));
    }
    let rows_per_image = (h - p_h) / stride + 1;
    let cols_per_image = (w - p_w) / stride + 1;
    let per_image = rows_per_image * cols_per_image;
    let total = per_image * set.len();

    let selected: Vec<usize> = if total > max_count {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = rand::seq::index::sample(&mut rng, total, max_count).into_vec();
        idx.sort_unstable();
        idx
    } else {
        (0..total).collect()
    };

    let dim = p_w * p_h * c;
    let mut data = Vec::with_capacity(selected.len() * dim);
    let mut origins = Vec::with_capacity(selected.len());
    let mut window = Vec::with_capacity(dim);
    for g in selected {
        let img = g / per_image;
        let within = g % per_image;
        let top = (within / cols_per_image) * stride;
        let left = (within % cols_per_image) * stride;
        set.images[img].window_into(top, left, p_h, p_w, &mut window);
        data.extend(window.iter().map(|&v| f64::from(v)));
        origins.push((img, top, left));
    }
    Ok(PatchSet {
        patches: Matrix::from_vec(origins.len(), dim, data)?,
        patch_w: p_w,
        patch_h: p_h,
        channels: c,
        origins,
    })
}

/// Renders tensors as a PNG grid: `ceil(sqrt(n))` columns, 1-pixel black
/// separators, each tile min-max scaled to `[0, 255]` on its own. A constant
/// tile renders mid-gray.
pub fn export_image_grid(tensors: &[Tensor3], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let img = render_image_grid(tensors)?;
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| match e {
            image::ImageError::IoError(io) => Error::io(path, io),
            other => Error::io(path, std::io::Error::other(other.to_string())),
        })
}

/// Builds the grid image without writing it.
pub fn render_image_grid(tensors: &[Tensor3]) -> Result<image::RgbImage> {
    let first = tensors
        .first()
        .ok_or_else(|| Error::InsufficientData("no tensors to render".into()))?;
    let (th, tw, tc) = first.dims();
    if tc != 1 && tc != 3 {
        return Err(Error::Shape(format!("tiles need 1 or 3 channels, got {tc}")));
    }
    if tensors.iter().any(|t| t.dims() != first.dims()) {
        return Err(Error::Shape("tiles differ in size".into()));
    }
    let n = tensors.len();
    let cols = (n as f64).sqrt().ceil() as usize;
    let rows = n.div_ceil(cols);
    let width = cols * tw + cols - 1;
    let height = rows * th + rows - 1;
    let mut out = image::RgbImage::new(width as u32, height as u32);
    for (k, t) in tensors.iter().enumerate() {
        let ox = (k % cols) * (tw + 1);
        let oy = (k / cols) * (th + 1);
        let bytes = scale_to_bytes(t);
        for y in 0..th {
            for x in 0..tw {
                let px = if tc == 1 {
                    let v = bytes[y * tw + x];
                    [v, v, v]
                } else {
                    let o = (y * tw + x) * 3;
                    [bytes[o], bytes[o + 1], bytes[o + 2]]
                };
                out.put_pixel((ox + x) as u32, (oy + y) as u32, image::Rgb(px));
            }
        }
    }
    Ok(out)
}

/// Min-max scaling of one tile to bytes.
pub fn scale_to_bytes(t: &Tensor3) -> Vec<u8> {
    let (lo, hi) = t.min_max();
    if hi <= lo {
        return vec![128; t.data().len()];
    }
    let range = f64::from(hi) - f64::from(lo);
    t.data()
        .iter()
        .map(|&v| ((f64::from(v) - f64::from(lo)) / range * 255.0).round() as u8)
        .collect()
}

/// Default locations searched for datasets (env var, then `data/<name>`).
pub fn dataset_dir_from_env(var: &str, fallback: &str) -> Option<PathBuf> {
    std::env::var_os(var)
        .map(PathBuf::from)
        .or_else(|| Some(PathBuf::from(fallback)))
        .filter(|p| p.is_dir())
}
