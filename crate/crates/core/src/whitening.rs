//! ZCA whitening, its convolution-kernel approximation, and the
//! difference-of-Gaussians on/off baseline.

use std::path::Path;

use log::warn;

use crate::container::{read_file, Decoder, Encoder};
use crate::datasets::PatchSet;
use crate::error::{Error, Result};
use crate::numerics::{correlate2d, covariance, sym_eigen, Matrix, Tensor3};

const TRANSFORM_MAGIC: &[u8; 4] = b"WSZT";
const KERNELS_MAGIC: &[u8; 4] = b"WSKN";

/// Number of leading eigenpairs kept for a ratio `r` over `d` dimensions:
/// `ceil(r·d)`, never less than one.
pub fn retained_count(ratio: f64, dim: usize) -> usize {
    ((ratio * dim as f64).ceil() as usize).clamp(1, dim.max(1))
}

pub fn check_params(epsilon: f64, ratio: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Contract(format!("whitening coefficient must be > 0, got {epsilon}")));
    }
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::Contract(format!("eigen ratio must be in (0, 1], got {ratio}")));
    }
    Ok(())
}

/// A fitted ZCA transform `W = V_k diag(1/sqrt(λ+ε)) V_kᵀ` plus the data mean.
#[derive(Debug, Clone, PartialEq)]
pub struct WhiteningTransform {
    pub mean: Vec<f64>,
    pub eigvecs: Matrix,
    pub eigvals: Vec<f64>,
    pub epsilon: f64,
    pub ratio: f64,
    pub w: Matrix,
}

impl WhiteningTransform {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn retained(&self) -> usize {
        retained_count(self.ratio, self.dim())
    }

    pub fn apply(&self, sample: &[f64]) -> Result<Vec<f64>> {
        apply_zca(self, sample)
    }

    /// Whitens a whole image flattened in `hwc` order; the transform must have
    /// been fitted on images of the same dimensions.
    pub fn apply_image(&self, image: &Tensor3) -> Result<Tensor3> {
        let (h, w, c) = image.dims();
        let out = self.apply(&image.to_f64())?;
        Tensor3::from_vec(h, w, c, out.into_iter().map(|v| v as f32).collect())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let d = self.dim();
        let mut e = Encoder::new(TRANSFORM_MAGIC);
        e.usize(d);
        e.f64(self.epsilon);
        e.f64(self.ratio);
        e.f64s(&self.mean);
        e.f64s(&self.eigvals);
        e.f64s(self.eigvecs.data());
        e.f64s(self.w.data());
        e.into_bytes()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = read_file(path)?;
        Self::from_bytes(&bytes, path)
    }

    fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut dec = Decoder::new(bytes, TRANSFORM_MAGIC, path)?;
        let d = dec.usize()?;
        let epsilon = dec.f64()?;
        let ratio = dec.f64()?;
        let mean = dec.f64s()?;
        let eigvals = dec.f64s()?;
        let eigvecs = dec.f64s()?;
        let w = dec.f64s()?;
        dec.finish()?;
        if mean.len() != d || eigvals.len() != d || eigvecs.len() != d * d || w.len() != d * d {
            return Err(Error::format(path, "inconsistent transform dimensions"));
        }
        check_params(epsilon, ratio).map_err(|e| Error::format(path, e.to_string()))?;
        Ok(WhiteningTransform {
            mean,
            eigvecs: Matrix::from_vec(d, d, eigvecs)?,
            eigvals,
            epsilon,
            ratio,
            w: Matrix::from_vec(d, d, w)?,
        })
    }
}

/// Fits ZCA whitening on the rows of `samples`.
pub fn fit_zca(samples: &Matrix, epsilon: f64, ratio: f64) -> Result<WhiteningTransform> {
    check_params(epsilon, ratio)?;
    let (n, d) = (samples.rows(), samples.cols());
    if n < d {
        warn!("fitting a {d}-dimensional whitening on only {n} samples");
    }
    let (mean, cov) = covariance(samples)?;
    let eig = sym_eigen(&cov)?;
    let k = retained_count(ratio, d);

    let mut w = Matrix::zeros(d, d);
    let mut v_col = vec![0.0; d];
    for col in 0..k {
        let scale = 1.0 / (eig.eigenvalues[col].max(0.0) + epsilon).sqrt();
        for (r, v) in v_col.iter_mut().enumerate() {
            *v = eig.eigenvectors.get(r, col);
        }
        for i in 0..d {
            let a = v_col[i] * scale;
            if a == 0.0 {
                continue;
            }
            let row = &mut w.row_mut(i)[i..];
            for (acc, b) in row.iter_mut().zip(&v_col[i..]) {
                *acc += a * b;
            }
        }
    }
    for i in 0..d {
        for j in i + 1..d {
            let v = w.get(i, j);
            w.set(j, i, v);
        }
    }
    Ok(WhiteningTransform {
        mean,
        eigvecs: eig.eigenvectors,
        eigvals: eig.eigenvalues,
        epsilon,
        ratio,
        w,
    })
}

/// `W·(sample − mean)`.
pub fn apply_zca(t: &WhiteningTransform, sample: &[f64]) -> Result<Vec<f64>> {
    if sample.len() != t.dim() {
        return Err(Error::Shape(format!(
            "sample has {} values, transform expects {}",
            sample.len(),
            t.dim()
        )));
    }
    let centered: Vec<f64> = sample.iter().zip(&t.mean).map(|(x, m)| x - m).collect();
    t.w.matvec(&centered)
}

/// Per-channel whitening kernels: `K_c` is the row of a patch ZCA matrix that
/// produces the center pixel of channel `c`, reshaped to the patch layout.
#[derive(Debug, Clone, PartialEq)]
pub struct WhiteningKernels {
    /// Exact kernel rows in `hwc` patch layout, one per output channel.
    pub rows: Vec<Vec<f64>>,
    pub patch_w: usize,
    pub patch_h: usize,
    pub channels: usize,
    pub epsilon: f64,
    pub ratio: f64,
    /// Mean of the fitting patches, `hwc` patch layout.
    pub mean: Vec<f64>,
}

impl WhiteningKernels {
    /// Flattened index of the center pixel `(⌊p_h/2⌋, ⌊p_w/2⌋)` in channel `c`.
    pub fn center_index(&self, c: usize) -> usize {
        ((self.patch_h / 2) * self.patch_w + self.patch_w / 2) * self.channels + c
    }

    pub fn kernel(&self, c: usize) -> Tensor3 {
        let data = self.rows[c].iter().map(|&v| v as f32).collect();
        Tensor3::from_vec(self.patch_h, self.patch_w, self.channels, data)
            .expect("kernel rows match patch dims")
    }

    pub fn kernels(&self) -> Vec<Tensor3> {
        (0..self.channels).map(|c| self.kernel(c)).collect()
    }

    /// Per-channel scalar means used to center whole images.
    pub fn channel_means(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.channels];
        for (i, m) in self.mean.iter().enumerate() {
            sums[i % self.channels] += m;
        }
        let positions = (self.patch_w * self.patch_h) as f64;
        sums.into_iter().map(|s| s / positions).collect()
    }

    /// Response of kernel `c` correlated over `image` at pixel `(y, x)`, in
    /// f64, with each tap centered by the fit mean of its kernel position.
    /// Taps outside the image read zero.
    pub fn response_at(&self, image: &Tensor3, y: usize, x: usize, c: usize) -> Result<f64> {
        let (h, w, ch) = image.dims();
        if ch != self.channels {
            return Err(Error::Shape(format!(
                "image has {ch} channels, kernels expect {}",
                self.channels
            )));
        }
        let (ry, rx) = ((self.patch_h / 2) as isize, (self.patch_w / 2) as isize);
        let kernel = &self.rows[c];
        let mut acc = 0.0;
        for dy in 0..self.patch_h {
            let sy = y as isize + dy as isize - ry;
            if sy < 0 || sy >= h as isize {
                continue;
            }
            for dx in 0..self.patch_w {
                let sx = x as isize + dx as isize - rx;
                if sx < 0 || sx >= w as isize {
                    continue;
                }
                for k in 0..ch {
                    let tap = (dy * self.patch_w + dx) * ch + k;
                    let v = f64::from(image.get(sy as usize, sx as usize, k)) - self.mean[tap];
                    acc += kernel[tap] * v;
                }
            }
        }
        Ok(acc)
    }

    /// Kernel response for a whole patch, centered with the exact fit mean.
    /// Equals the center output of full patch whitening.
    pub fn center_response(&self, patch: &[f64], c: usize) -> Result<f64> {
        if patch.len() != self.mean.len() {
            return Err(Error::Shape(format!(
                "patch has {} values, kernels expect {}",
                patch.len(),
                self.mean.len()
            )));
        }
        Ok(self.rows[c]
            .iter()
            .zip(patch)
            .zip(&self.mean)
            .map(|((k, p), m)| k * (p - m))
            .sum())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut e = Encoder::new(KERNELS_MAGIC);
        e.usize(self.patch_w);
        e.usize(self.patch_h);
        e.usize(self.channels);
        e.f64(self.epsilon);
        e.f64(self.ratio);
        e.f64s(&self.mean);
        for r in &self.rows {
            e.f64s(r);
        }
        e.into_bytes()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = read_file(path)?;
        Self::from_bytes(&bytes, path)
    }

    fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut dec = Decoder::new(bytes, KERNELS_MAGIC, path)?;
        let patch_w = dec.usize()?;
        let patch_h = dec.usize()?;
        let channels = dec.usize()?;
        let epsilon = dec.f64()?;
        let ratio = dec.f64()?;
        let mean = dec.f64s()?;
        let d = patch_w * patch_h * channels;
        if mean.len() != d || d == 0 {
            return Err(Error::format(path, "inconsistent kernel dimensions"));
        }
        let rows = (0..channels)
            .map(|_| dec.f64s())
            .collect::<Result<Vec<_>>>()?;
        dec.finish()?;
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::format(path, "inconsistent kernel dimensions"));
        }
        Ok(WhiteningKernels {
            rows,
            patch_w,
            patch_h,
            channels,
            epsilon,
            ratio,
            mean,
        })
    }
}

/// Fits patch ZCA and extracts one cross-channel kernel per channel.
pub fn fit_kernels(patches: &PatchSet, epsilon: f64, ratio: f64) -> Result<WhiteningKernels> {
    let t = fit_zca(&patches.patches, epsilon, ratio)?;
    Ok(kernels_from_transform(&t, patches.patch_w, patches.patch_h, patches.channels))
}

/// Extracts kernels from an already fitted patch transform.
pub fn kernels_from_transform(
    t: &WhiteningTransform,
    patch_w: usize,
    patch_h: usize,
    channels: usize,
) -> WhiteningKernels {
    let mut k = WhiteningKernels {
        rows: Vec::with_capacity(channels),
        patch_w,
        patch_h,
        channels,
        epsilon: t.epsilon,
        ratio: t.ratio,
        mean: t.mean.clone(),
    };
    for c in 0..channels {
        // P_c selects a single row of W
        let row = t.w.row(k.center_index(c)).to_vec();
        k.rows.push(row);
    }
    k
}

/// Whitens an image by correlating each output channel's kernel over the
/// image centered with per-channel scalar means; zero padding keeps the
/// output the same size as the input.
pub fn apply_kernels(k: &WhiteningKernels, image: &Tensor3) -> Result<Tensor3> {
    let (h, w, c) = image.dims();
    if c != k.channels {
        return Err(Error::Shape(format!(
            "image has {c} channels, kernels expect {}",
            k.channels
        )));
    }
    let means = k.channel_means();
    let mut centered = image.clone();
    for (i, v) in centered.data_mut().iter_mut().enumerate() {
        *v = (f64::from(*v) - means[i % c]) as f32;
    }
    let pad = k.patch_w.max(k.patch_h) / 2;
    let planes = (0..c)
        .map(|ch| {
            let out = correlate2d(&centered, &k.kernel(ch), 1, pad)?;
            // non-square kernels: crop to input size
            Ok(out.window(0, 0, h.min(out.height()), w.min(out.width())))
        })
        .collect::<Result<Vec<_>>>()?;
    Tensor3::stack_channels(&planes)
}

/// Whether DoG filtering runs on a grayscale reduction or on every channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DogMode {
    Grayscale,
    Color,
}

/// Difference-of-Gaussians parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DogConfig {
    pub sigma_center: f64,
    pub sigma_surround: f64,
    pub kernel_size: usize,
    pub mode: DogMode,
}

impl Default for DogConfig {
    fn default() -> Self {
        DogConfig {
            sigma_center: 1.0,
            sigma_surround: 2.0,
            kernel_size: 7,
            mode: DogMode::Color,
        }
    }
}

impl DogConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_center > 0.0) || !(self.sigma_surround > self.sigma_center) {
            return Err(Error::Config(format!(
                "DoG needs 0 < sigma_center < sigma_surround, got {} / {}",
                self.sigma_center, self.sigma_surround
            )));
        }
        if self.kernel_size.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "DoG kernel size must be odd, got {}",
                self.kernel_size
            )));
        }
        Ok(())
    }

    /// Center minus surround, each Gaussian normalised to unit sum.
    pub fn kernel(&self) -> Vec<f64> {
        let n = self.kernel_size;
        let half = (n / 2) as f64;
        let gauss = |sigma: f64| {
            let mut g: Vec<f64> = (0..n * n)
                .map(|i| {
                    let (y, x) = ((i / n) as f64 - half, (i % n) as f64 - half);
                    (-(x * x + y * y) / (2.0 * sigma * sigma)).exp()
                })
                .collect();
            let s: f64 = g.iter().sum();
            g.iter_mut().for_each(|v| *v /= s);
            g
        };
        let c = gauss(self.sigma_center);
        let s = gauss(self.sigma_surround);
        c.iter().zip(&s).map(|(a, b)| a - b).collect()
    }
}

fn dog_filter_plane(plane: &[f64], h: usize, w: usize, kernel: &[f64], n: usize) -> Vec<f64> {
    let half = (n / 2) as isize;
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for ky in 0..n {
                // replicated borders keep flat regions at zero response
                let sy = (y as isize + ky as isize - half).clamp(0, h as isize - 1) as usize;
                for kx in 0..n {
                    let sx = (x as isize + kx as isize - half).clamp(0, w as isize - 1) as usize;
                    acc += kernel[ky * n + kx] * plane[sy * w + sx];
                }
            }
            out[y * w + x] = acc;
        }
    }
    out
}

fn min_max_unit(values: &mut [f64]) {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if hi - lo <= 1e-12 {
        values.iter_mut().for_each(|v| *v = 0.0);
    } else {
        values.iter_mut().for_each(|v| *v = (*v - lo) / (hi - lo));
    }
}

/// On-center/off-center coding. Output channels are all "on" planes followed
/// by all "off" planes, each min-max scaled to `[0, 1]`.
pub fn dog_encode(image: &Tensor3, cfg: &DogConfig) -> Result<Tensor3> {
    cfg.validate()?;
    let (h, w, c) = image.dims();
    let planes: Vec<Vec<f64>> = match cfg.mode {
        DogMode::Grayscale => {
            let gray = (0..h * w)
                .map(|i| (0..c).map(|ch| f64::from(image.data()[i * c + ch])).sum::<f64>() / c as f64)
                .collect();
            vec![gray]
        }
        DogMode::Color => (0..c)
            .map(|ch| (0..h * w).map(|i| f64::from(image.data()[i * c + ch])).collect())
            .collect(),
    };
    let kernel = cfg.kernel();
    let responses: Vec<Vec<f64>> = planes
        .iter()
        .map(|p| dog_filter_plane(p, h, w, &kernel, cfg.kernel_size))
        .collect();
    let k = responses.len();
    let mut out = Tensor3::zeros(h, w, 2 * k);
    for (i, r) in responses.iter().enumerate() {
        // exact-zero flat regions stay zero after rounding noise removal
        let scale = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let clean = |v: f64| if v.abs() <= 1e-12 * scale.max(1.0) { 0.0 } else { v };
        let mut on: Vec<f64> = r.iter().map(|&v| clean(v).max(0.0)).collect();
        let mut off: Vec<f64> = r.iter().map(|&v| (-clean(v)).max(0.0)).collect();
        min_max_unit(&mut on);
        min_max_unit(&mut off);
        for p in 0..h * w {
            out.data_mut()[p * 2 * k + i] = on[p] as f32;
            out.data_mut()[p * 2 * k + k + i] = off[p] as f32;
        }
    }
    Ok(out)
}

/// A persisted whitening fit of either kind.
#[derive(Debug, Clone)]
pub enum WhiteningFile {
    Transform(WhiteningTransform),
    Kernels(WhiteningKernels),
}

impl WhiteningFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = read_file(path)?;
        match bytes.get(..4) {
            Some(m) if m == TRANSFORM_MAGIC => {
                WhiteningTransform::from_bytes(&bytes, path).map(WhiteningFile::Transform)
            }
            Some(m) if m == KERNELS_MAGIC => {
                WhiteningKernels::from_bytes(&bytes, path).map(WhiteningFile::Kernels)
            }
            _ => Err(Error::format(path, "not a whitening transform or kernel file")),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        match self {
            WhiteningFile::Transform(t) => t.save(path),
            WhiteningFile::Kernels(k) => k.save(path),
        }
    }
}
