//! Feature aggregation and linear classification.
//!
//! Feature maps are pooled over a 2×2 grid of quadrants and classified with
//! one-vs-rest linear SVMs trained by stochastic sub-gradient descent on the
//! hinge loss (Pegasos schedule, step `1 / (λ t)`).

use std::cmp::Ordering;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::container::{read_file, Decoder, Encoder};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Tensor3};

const FEATURE_MAGIC: &[u8; 4] = b"WSFT";

/// Pooling regions per map.
pub const POOL_REGIONS: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub label: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PoolMode {
    #[default]
    Sum,
    Max,
}

impl std::str::FromStr for PoolMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum" => Ok(PoolMode::Sum),
            "max" => Ok(PoolMode::Max),
            _ => Err(Error::Config(format!("unknown pooling mode {s:?} (sum | max)"))),
        }
    }
}

impl std::fmt::Display for PoolMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PoolMode::Sum => "sum",
            PoolMode::Max => "max",
        })
    }
}

/// Row and column ranges of the four quadrants in order top-left, top-right,
/// bottom-left, bottom-right. Odd sizes give the extra row/column to the
/// bottom/right quadrants.
fn quadrants(h: usize, w: usize) -> [(std::ops::Range<usize>, std::ops::Range<usize>); 4] {
    let (hy, hx) = (h / 2, w / 2);
    [
        (0..hy, 0..hx),
        (0..hy, hx..w),
        (hy..h, 0..hx),
        (hy..h, hx..w),
    ]
}

/// Pools an `H′×W′×N` map into `4·N` values, region-major then filter.
pub fn pool(map: &Tensor3, mode: PoolMode) -> Result<Vec<f64>> {
    let (h, w, n) = map.dims();
    if h < 2 || w < 2 {
        return Err(Error::Shape(format!("{h}x{w} map is too small for 2x2 pooling")));
    }
    let init = match mode {
        PoolMode::Sum => 0.0,
        PoolMode::Max => f64::NEG_INFINITY,
    };
    let mut out = vec![init; POOL_REGIONS * n];
    for (r, (rows, cols)) in quadrants(h, w).into_iter().enumerate() {
        let acc = &mut out[r * n..(r + 1) * n];
        for y in rows {
            for x in cols.clone() {
                let base = map.offset(y, x, 0);
                for (a, &v) in acc.iter_mut().zip(&map.data()[base..base + n]) {
                    match mode {
                        PoolMode::Sum => *a += f64::from(v),
                        PoolMode::Max => *a = a.max(f64::from(v)),
                    }
                }
            }
        }
    }
    Ok(out)
}

pub fn sum_pool(map: &Tensor3) -> Result<Vec<f64>> {
    pool(map, PoolMode::Sum)
}

pub fn max_pool(map: &Tensor3) -> Result<Vec<f64>> {
    pool(map, PoolMode::Max)
}

/// Per-dimension standardization.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Scaler {
    /// Zero-variance dimensions get std 1.
    pub fn fit(rows: &[&[f64]]) -> Scaler {
        let d = rows.first().map_or(0, |r| r.len());
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(*r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(*r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 0.0 && sd.is_finite() {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Scaler { mean, std }
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

/// SGD settings. `reg` is the regularization strength λ of the objective
/// `λ/2 ‖w‖² + mean hinge loss`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmConfig {
    pub reg: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Project onto the ball of radius `1/√λ` after each step.
    pub project: bool,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            reg: 0.1,
            epochs: 10,
            seed: 0,
            project: true,
        }
    }
}

/// Candidate λ values for validation-based selection.
pub const DEFAULT_REG_GRID: [f64; 3] = [0.01, 0.1, 1.0];

/// Fraction of each class held out for λ selection.
pub const VALIDATION_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSvm {
    pub class_count: usize,
    /// `class_count × d`, in standardized feature space.
    pub weights: Matrix,
    pub biases: Vec<f64>,
    pub scaler: Scaler,
}

impl LinearSvm {
    pub fn dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn scores(&self, values: &[f64]) -> Result<Vec<f64>> {
        if values.len() != self.dim() {
            return Err(Error::Shape(format!(
                "feature has {} values, model expects {}",
                values.len(),
                self.dim()
            )));
        }
        let x = self.scaler.transform(values);
        Ok((0..self.class_count)
            .map(|k| crate::numerics::dot(self.weights.row(k), &x) + self.biases[k])
            .collect())
    }
}

fn labeled(features: &[FeatureVector], class_count: usize) -> Result<Vec<(&[f64], usize)>> {
    if class_count < 2 {
        return Err(Error::Data(format!(
            "classification needs at least 2 classes, got {class_count}"
        )));
    }
    let d = features
        .first()
        .ok_or_else(|| Error::InsufficientData("no training features".into()))?
        .values
        .len();
    let mut seen = vec![false; class_count];
    let mut out = Vec::with_capacity(features.len());
    for (i, f) in features.iter().enumerate() {
        if f.values.len() != d {
            return Err(Error::Shape(format!(
                "feature {i} has {} values, expected {d}",
                f.values.len()
            )));
        }
        let label = f
            .label
            .ok_or_else(|| Error::Data(format!("training feature {i} has no label")))?;
        if label >= class_count {
            return Err(Error::Data(format!("label {label} >= class count {class_count}")));
        }
        seen[label] = true;
        out.push((f.values.as_slice(), label));
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::Data(format!("class {missing} has no training sample")));
    }
    Ok(out)
}

fn canonical_cmp(a: &(&[f64], usize), b: &(&[f64], usize)) -> Ordering {
    a.1.cmp(&b.1).then_with(|| {
        a.0.iter()
            .zip(b.0)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    })
}

/// One-vs-rest training. Samples are put in a canonical order before the
/// seeded shuffles, so the model does not depend on the input order.
pub fn svm_train(features: &[FeatureVector], class_count: usize, cfg: &SvmConfig) -> Result<LinearSvm> {
    if !(cfg.reg > 0.0) || cfg.epochs == 0 {
        return Err(Error::Config("SVM needs reg > 0 and epochs >= 1".into()));
    }
    let mut samples = labeled(features, class_count)?;
    samples.sort_by(canonical_cmp);
    let raw: Vec<&[f64]> = samples.iter().map(|s| s.0).collect();
    let scaler = Scaler::fit(&raw);
    // bias folded in as a constant trailing feature
    let xs: Vec<Vec<f64>> = raw
        .iter()
        .map(|r| {
            let mut x = scaler.transform(r);
            x.push(1.0);
            x
        })
        .collect();
    let d = raw[0].len();
    let mut weights = Matrix::zeros(class_count, d);
    let mut biases = vec![0.0; class_count];
    let lambda = cfg.reg;
    let radius = 1.0 / lambda.sqrt();
    let mut order: Vec<usize> = (0..xs.len()).collect();
    for k in 0..class_count {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let mut w = vec![0.0; d + 1];
        let mut t = 0usize;
        for _ in 0..cfg.epochs {
            order.sort_unstable();
            order.shuffle(&mut rng);
            for &i in &order {
                t += 1;
                let eta = 1.0 / (lambda * t as f64);
                let y = if samples[i].1 == k { 1.0 } else { -1.0 };
                let margin = y * crate::numerics::dot(&w, &xs[i]);
                let shrink = 1.0 - eta * lambda;
                w.iter_mut().for_each(|v| *v *= shrink);
                if margin < 1.0 {
                    for (v, x) in w.iter_mut().zip(&xs[i]) {
                        *v += eta * y * x;
                    }
                }
                if cfg.project {
                    let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if norm > radius {
                        let s = radius / norm;
                        w.iter_mut().for_each(|v| *v *= s);
                    }
                }
            }
        }
        biases[k] = w[d];
        weights.row_mut(k).copy_from_slice(&w[..d]);
    }
    if weights.data().iter().chain(&biases).any(|v| !v.is_finite()) {
        return Err(Error::Convergence { sweeps: cfg.epochs });
    }
    Ok(LinearSvm {
        class_count,
        weights,
        biases,
        scaler,
    })
}

/// Result of λ selection.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub model: LinearSvm,
    pub reg: f64,
    /// `(λ, validation accuracy)` per candidate; empty when no split was possible.
    pub validation: Vec<(f64, f64)>,
}

/// Picks λ from `grid` on a stratified held-out split, then refits on all
/// samples. Ties keep the earlier candidate. Falls back to `cfg.reg` when no
/// class has enough samples to hold any out.
pub fn svm_train_select(
    features: &[FeatureVector],
    class_count: usize,
    cfg: &SvmConfig,
    grid: &[f64],
) -> Result<Selection> {
    let samples = labeled(features, class_count)?;
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); class_count];
    let mut idx: Vec<usize> = (0..samples.len()).collect();
    idx.sort_by(|&a, &b| canonical_cmp(&samples[a], &samples[b]));
    for i in idx {
        by_class[samples[i].1].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x5EED));
    let mut fit = Vec::new();
    let mut val = Vec::new();
    for members in &mut by_class {
        members.shuffle(&mut rng);
        let hold = (members.len() as f64 * VALIDATION_FRACTION).floor() as usize;
        let hold = hold.min(members.len() - 1);
        for (j, &i) in members.iter().enumerate() {
            if j < hold {
                val.push(features[i].clone());
            } else {
                fit.push(features[i].clone());
            }
        }
    }
    let mut validation = Vec::new();
    let mut reg = cfg.reg;
    if !val.is_empty() && !grid.is_empty() {
        let mut best = f64::NEG_INFINITY;
        for &candidate in grid {
            let model = svm_train(&fit, class_count, &SvmConfig { reg: candidate, ..*cfg })?;
            let acc = evaluate(&model, &val)?;
            validation.push((candidate, acc));
            if acc > best {
                best = acc;
                reg = candidate;
            }
        }
    }
    let model = svm_train(features, class_count, &SvmConfig { reg, ..*cfg })?;
    Ok(Selection {
        model,
        reg,
        validation,
    })
}

/// Arg-max class; ties go to the lowest index.
pub fn svm_predict(model: &LinearSvm, values: &[f64]) -> Result<usize> {
    let scores = model.scores(values)?;
    let mut best = 0;
    for (k, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = k;
        }
    }
    Ok(best)
}

/// Fraction of correctly predicted labeled features.
pub fn evaluate(model: &LinearSvm, features: &[FeatureVector]) -> Result<f64> {
    if features.is_empty() {
        return Err(Error::InsufficientData("cannot evaluate on an empty set".into()));
    }
    let mut correct = 0usize;
    for (i, f) in features.iter().enumerate() {
        let label = f
            .label
            .ok_or_else(|| Error::Data(format!("test feature {i} has no label")))?;
        if svm_predict(model, &f.values)? == label {
            correct += 1;
        }
    }
    Ok(correct as f64 / features.len() as f64)
}

/// Mean and sample standard deviation (`n − 1` divisor; 0 for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

/// Labeled features of one split plus the class count of their dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub vectors: Vec<FeatureVector>,
    pub class_count: usize,
}

impl FeatureSet {
    pub fn dim(&self) -> usize {
        self.vectors.first().map_or(0, |v| v.values.len())
    }

    /// Layout after the container header: class count, vector count, dim,
    /// labels as i64 (−1 = none), then all values row by row.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let d = self.dim();
        if let Some(bad) = self.vectors.iter().find(|v| v.values.len() != d) {
            return Err(Error::Shape(format!(
                "ragged features: {} vs {d} values",
                bad.values.len()
            )));
        }
        let mut e = Encoder::new(FEATURE_MAGIC);
        e.usize(self.class_count);
        e.usize(self.vectors.len());
        e.usize(d);
        for v in &self.vectors {
            e.i64(v.label.map_or(-1, |l| l as i64));
        }
        let flat: Vec<f64> = self.vectors.iter().flat_map(|v| v.values.iter().copied()).collect();
        e.f64s(&flat);
        Ok(e.into_bytes())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = read_file(path)?;
        let mut d = Decoder::new(&bytes, FEATURE_MAGIC, path)?;
        let class_count = d.usize()?;
        let n = d.usize()?;
        let dim = d.usize()?;
        let mut labels = Vec::with_capacity(n.min(1 << 20));
        for _ in 0..n {
            let l = d.i64()?;
            labels.push(match l {
                -1 => None,
                l if l >= 0 && (l as usize) < class_count.max(1) => Some(l as usize),
                l => return Err(Error::format(path, format!("invalid label {l}"))),
            });
        }
        let flat = d.f64s()?;
        d.finish()?;
        if flat.len() != n * dim {
            return Err(Error::format(path, "value count does not match header"));
        }
        let vectors = labels
            .into_iter()
            .enumerate()
            .map(|(i, label)| FeatureVector {
                values: flat[i * dim..(i + 1) * dim].to_vec(),
                label,
            })
            .collect();
        Ok(FeatureSet { vectors, class_count })
    }
}
