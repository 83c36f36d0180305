//! End-to-end experiment plumbing: dataset loading, pre-processing fits,
//! SNN training, feature extraction and SVM evaluation.

use std::fmt::Write as _;
use std::path::Path;

use log::info;
use rayon::prelude::*;

use crate::classify::{
    evaluate, mean_std, pool, svm_train_select, FeatureSet, FeatureVector, PoolMode, SvmConfig,
};
use crate::coding::split_channels;
use crate::config::{DatasetConfig, DatasetKind, ExperimentConfig, Preproc, WhiteningConfig};
use crate::datasets::{load_cifar10_subset, load_stl10_subset, sample_patches, LabeledImageSet};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Tensor3};
use crate::snn::{train, EpochStats, SnnLayer};
use crate::synthetic;
use crate::whitening::{
    apply_kernels, dog_encode, fit_kernels, fit_zca, DogConfig, WhiteningFile, WhiteningKernels,
    WhiteningTransform,
};

/// Default sizes of generated splits when no limit is configured.
pub const SYNTHETIC_TRAIN: usize = 200;
pub const SYNTHETIC_TEST: usize = 100;

/// Loads the configured train/test splits.
pub fn load_dataset(cfg: &DatasetConfig, seed: u64) -> Result<(LabeledImageSet, LabeledImageSet)> {
    let tl = cfg.train_limit.unwrap_or(usize::MAX);
    let vl = cfg.test_limit.unwrap_or(usize::MAX);
    let (train, test) = match cfg.kind {
        DatasetKind::Cifar10 => load_cifar10_subset(&cfg.path, tl, vl)?,
        DatasetKind::Stl10 => load_stl10_subset(&cfg.path, tl, vl)?,
        DatasetKind::Synthetic => {
            let s = cfg.synthetic_size;
            let k = cfg.synthetic_classes;
            (
                synthetic::labeled_images(cfg.train_limit.unwrap_or(SYNTHETIC_TRAIN), k, s, s, seed),
                synthetic::labeled_images(
                    cfg.test_limit.unwrap_or(SYNTHETIC_TEST),
                    k,
                    s,
                    s,
                    seed.wrapping_add(0x7E57),
                ),
            )
        }
    };
    info!(
        "{}: {} train / {} test images",
        cfg.kind,
        train.len(),
        test.len()
    );
    Ok((train, test))
}

/// A fitted (or parameter-only) pre-processing stage.
#[derive(Debug, Clone)]
pub enum Preprocessor {
    Standard(WhiteningTransform),
    Kernels(WhiteningKernels),
    Dog(DogConfig),
}

impl Preprocessor {
    /// Fits the configured pre-processor on training images. DoG needs no fit.
    pub fn fit(cfg: &WhiteningConfig, train: &LabeledImageSet, seed: u64) -> Result<Self> {
        if let Some(dog) = cfg.dog() {
            dog.validate()?;
            return Ok(Preprocessor::Dog(dog));
        }
        if train.is_empty() {
            return Err(Error::InsufficientData("no training images to fit whitening on".into()));
        }
        match cfg.preproc {
            Preproc::StandardZca => {
                let d = train.images()[0].data().len();
                let mut data = Vec::with_capacity(train.len() * d);
                for img in train.images() {
                    data.extend(img.data().iter().map(|&v| f64::from(v)));
                }
                let samples = Matrix::from_vec(train.len(), d, data)?;
                info!("fitting {d}-dimensional image ZCA on {} images", train.len());
                Ok(Preprocessor::Standard(fit_zca(&samples, cfg.epsilon, cfg.ratio)?))
            }
            Preproc::Kernels => {
                let patches = sample_patches(
                    train,
                    cfg.patch_w,
                    cfg.patch_h,
                    cfg.patch_stride,
                    cfg.patch_count,
                    seed,
                )?;
                info!(
                    "fitting {}x{} whitening kernels on {} patches",
                    cfg.patch_h,
                    cfg.patch_w,
                    patches.len()
                );
                Ok(Preprocessor::Kernels(fit_kernels(&patches, cfg.epsilon, cfg.ratio)?))
            }
            Preproc::DogGray | Preproc::DogColor => unreachable!("handled above"),
        }
    }

    /// Pre-processor from a persisted fit, or DoG from the config when no
    /// file is given.
    pub fn from_source(cfg: &WhiteningConfig, file: Option<&Path>) -> Result<Self> {
        match (cfg.dog(), file) {
            (Some(dog), _) => Ok(Preprocessor::Dog(dog)),
            (None, Some(path)) => Ok(match WhiteningFile::load(path)? {
                WhiteningFile::Transform(t) => Preprocessor::Standard(t),
                WhiteningFile::Kernels(k) => Preprocessor::Kernels(k),
            }),
            (None, None) => Err(Error::Config(format!(
                "pre-processing {} needs a fitted whitening file",
                cfg.preproc
            ))),
        }
    }

    pub fn to_file(&self) -> Option<WhiteningFile> {
        match self {
            Preprocessor::Standard(t) => Some(WhiteningFile::Transform(t.clone())),
            Preprocessor::Kernels(k) => Some(WhiteningFile::Kernels(k.clone())),
            Preprocessor::Dog(_) => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Preprocessor::Standard(_) => "standard-zca",
            Preprocessor::Kernels(_) => "kernels",
            Preprocessor::Dog(d) => match d.mode {
                crate::whitening::DogMode::Grayscale => "dog-gray",
                crate::whitening::DogMode::Color => "dog-color",
            },
        }
    }

    /// Image to non-negative coded channels in `[0, 1]`: whitened images are
    /// split into positive and negative halves, DoG already yields on/off
    /// channels.
    pub fn code(&self, image: &Tensor3) -> Result<Tensor3> {
        match self {
            Preprocessor::Standard(t) => Ok(split_channels(&t.apply_image(image)?)),
            Preprocessor::Kernels(k) => Ok(split_channels(&apply_kernels(k, image)?)),
            Preprocessor::Dog(d) => dog_encode(image, d),
        }
    }

    /// Codes every image; parallel, order preserving.
    pub fn code_all(&self, images: &[Tensor3]) -> Result<Vec<Tensor3>> {
        images.par_iter().map(|img| self.code(img)).collect()
    }
}

/// Fresh layer for `channels` coded input channels, seeded.
pub fn new_layer(cfg: &ExperimentConfig, channels: usize, seed: u64) -> Result<SnnLayer> {
    SnnLayer::new(
        cfg.layer.filter_count,
        cfg.receptive(channels),
        cfg.neuron,
        cfg.stdp,
        cfg.homeostasis,
        cfg.coding,
        seed,
    )
}

/// Trains run `run`'s layer on already coded training images.
pub fn train_layer(cfg: &ExperimentConfig, coded: &[Tensor3], run: usize) -> Result<(SnnLayer, Vec<EpochStats>)> {
    let channels = coded
        .first()
        .ok_or_else(|| Error::InsufficientData("no training images".into()))?
        .channels();
    let mut layer = new_layer(cfg, channels, cfg.run_seed(run))?;
    let log = train(&mut layer, coded, &cfg.train_config(run))?;
    Ok((layer, log))
}

/// Pooled SNN features of coded images; parallel, order preserving.
pub fn extract_coded(
    layer: &SnnLayer,
    coded: &[Tensor3],
    labels: Option<&[usize]>,
    pooling: PoolMode,
) -> Result<Vec<FeatureVector>> {
    coded
        .par_iter()
        .enumerate()
        .map(|(i, img)| {
            let map = layer.infer_conv(img)?;
            Ok(FeatureVector {
                values: pool(&map, pooling)?,
                label: labels.map(|l| l[i]),
            })
        })
        .collect()
}

/// Pre-processes, codes and extracts features for a labeled set.
pub fn extract_features(
    layer: &SnnLayer,
    pre: &Preprocessor,
    set: &LabeledImageSet,
    pooling: PoolMode,
) -> Result<FeatureSet> {
    let coded = pre.code_all(set.images())?;
    Ok(FeatureSet {
        vectors: extract_coded(layer, &coded, Some(set.labels()), pooling)?,
        class_count: set.class_count(),
    })
}

/// SVM fit on train features (λ chosen on a validation split) and test
/// accuracy.
pub fn classify_features(
    cfg: &ExperimentConfig,
    train: &FeatureSet,
    test: &FeatureSet,
    run: usize,
) -> Result<(f64, f64)> {
    let svm = SvmConfig {
        reg: cfg.classify.reg_grid[0],
        epochs: cfg.classify.svm_epochs,
        seed: cfg.run_seed(run),
        project: true,
    };
    let sel = svm_train_select(&train.vectors, train.class_count, &svm, &cfg.classify.reg_grid)?;
    Ok((evaluate(&sel.model, &test.vectors)?, sel.reg))
}

/// One training + evaluation run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub run: usize,
    pub seed: u64,
    pub layer: SnnLayer,
    pub log: Vec<EpochStats>,
    pub accuracy: f64,
    pub reg: f64,
}

/// Accuracies of `run_count` runs sharing one pre-processor.
#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub preproc: String,
    pub runs: Vec<RunResult>,
}

impl ExperimentReport {
    pub fn accuracies(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.accuracy).collect()
    }

    /// Mean and sample std of the accuracy, in percent.
    pub fn mean_std_percent(&self) -> (f64, f64) {
        let (m, s) = mean_std(&self.accuracies());
        (100.0 * m, 100.0 * s)
    }

    pub const CSV_HEADER: &'static str = "preproc,run,seed,accuracy,reg";

    pub fn csv_lines(&self) -> Vec<String> {
        self.runs
            .iter()
            .map(|r| format!("{},{},{},{:.6},{}", self.preproc, r.run, r.seed, r.accuracy, r.reg))
            .collect()
    }

    /// Human-readable one-liner, e.g. `kernels: 57.07 ± 0.44 % over 3 runs`.
    pub fn summary(&self) -> String {
        let (m, s) = self.mean_std_percent();
        format!("{}: {m:.2} ± {s:.2} % over {} runs", self.preproc, self.runs.len())
    }

    /// `key = value` summary for scripts.
    pub fn summary_text(&self) -> String {
        let (m, s) = self.mean_std_percent();
        let mut out = String::new();
        let _ = writeln!(out, "preproc = {}", self.preproc);
        let _ = writeln!(out, "runs = {}", self.runs.len());
        let _ = writeln!(out, "mean_accuracy_percent = {m}");
        let _ = writeln!(out, "std_accuracy_percent = {s}");
        let accs: Vec<String> = self.accuracies().iter().map(f64::to_string).collect();
        let _ = writeln!(out, "accuracies = {}", accs.join(","));
        out
    }
}

/// Trains and evaluates `run_count` runs with a given pre-processor.
pub fn run_with_preprocessor(
    cfg: &ExperimentConfig,
    pre: &Preprocessor,
    train_set: &LabeledImageSet,
    test_set: &LabeledImageSet,
) -> Result<ExperimentReport> {
    let coded_train = pre.code_all(train_set.images())?;
    let coded_test = pre.code_all(test_set.images())?;
    let mut runs = Vec::with_capacity(cfg.classify.run_count);
    for run in 0..cfg.classify.run_count {
        let (layer, log) = train_layer(cfg, &coded_train, run)?;
        let pooling = cfg.classify.pooling;
        let train_f = FeatureSet {
            vectors: extract_coded(&layer, &coded_train, Some(train_set.labels()), pooling)?,
            class_count: train_set.class_count(),
        };
        let test_f = FeatureSet {
            vectors: extract_coded(&layer, &coded_test, Some(test_set.labels()), pooling)?,
            class_count: test_set.class_count(),
        };
        let (accuracy, reg) = classify_features(cfg, &train_f, &test_f, run)?;
        info!("{} run {run}: accuracy {:.4} (reg {reg})", pre.name(), accuracy);
        runs.push(RunResult {
            run,
            seed: cfg.run_seed(run),
            layer,
            log,
            accuracy,
            reg,
        });
    }
    Ok(ExperimentReport {
        preproc: pre.name().to_string(),
        runs,
    })
}

/// Loads data, fits the pre-processor on the training split and runs.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let (train_set, test_set) = load_dataset(&cfg.dataset, cfg.seed)?;
    let pre = Preprocessor::fit(&cfg.whitening, &train_set, cfg.seed)?;
    run_with_preprocessor(cfg, &pre, &train_set, &test_set)
}

/// Kernels fitted on one dataset evaluated on both.
#[derive(Debug, Clone)]
pub struct CrossDatasetReport {
    pub name_a: String,
    pub name_b: String,
    /// Classified on A with kernels from A, then from B.
    pub a_same: ExperimentReport,
    pub a_cross: ExperimentReport,
    /// Classified on B with kernels from B, then from A.
    pub b_same: ExperimentReport,
    pub b_cross: ExperimentReport,
}

impl CrossDatasetReport {
    /// `(Δ on A, Δ on B)` in percentage points, cross minus same.
    pub fn deltas(&self) -> (f64, f64) {
        let da = self.a_cross.mean_std_percent().0 - self.a_same.mean_std_percent().0;
        let db = self.b_cross.mean_std_percent().0 - self.b_same.mean_std_percent().0;
        (da, db)
    }

    pub fn table(&self) -> String {
        let cell = |r: &ExperimentReport| {
            let (m, s) = r.mean_std_percent();
            format!("{m:.2}±{s:.2}")
        };
        let (da, db) = self.deltas();
        let mut out = String::new();
        let _ = writeln!(
            out,
            "classified on | kernels {a} | kernels {b} | delta",
            a = self.name_a,
            b = self.name_b
        );
        let _ = writeln!(
            out,
            "{} | {} | {} | {da:+.2}",
            self.name_a,
            cell(&self.a_same),
            cell(&self.a_cross)
        );
        let _ = writeln!(
            out,
            "{} | {} | {} | {db:+.2}",
            self.name_b,
            cell(&self.b_cross),
            cell(&self.b_same)
        );
        out
    }
}

/// Fits kernels on each dataset and evaluates every (kernels, data) pair.
/// Each dataset's own config drives its SNN and classifier.
pub fn cross_dataset(cfg_a: &ExperimentConfig, cfg_b: &ExperimentConfig) -> Result<CrossDatasetReport> {
    for c in [cfg_a, cfg_b] {
        if c.whitening.preproc != Preproc::Kernels {
            return Err(Error::Config(
                "cross-dataset runs need whitening.preproc = kernels".into(),
            ));
        }
    }
    let (train_a, test_a) = load_dataset(&cfg_a.dataset, cfg_a.seed)?;
    let (train_b, test_b) = load_dataset(&cfg_b.dataset, cfg_b.seed)?;
    let pre_a = Preprocessor::fit(&cfg_a.whitening, &train_a, cfg_a.seed)?;
    let pre_b = Preprocessor::fit(&cfg_b.whitening, &train_b, cfg_b.seed)?;
    let (mut name_a, mut name_b) = (cfg_a.dataset.kind.to_string(), cfg_b.dataset.kind.to_string());
    if name_a == name_b {
        name_a.push_str("-a");
        name_b.push_str("-b");
    }
    Ok(CrossDatasetReport {
        name_a,
        name_b,
        a_same: run_with_preprocessor(cfg_a, &pre_a, &train_a, &test_a)?,
        a_cross: run_with_preprocessor(cfg_a, &pre_b, &train_a, &test_a)?,
        b_same: run_with_preprocessor(cfg_b, &pre_b, &train_b, &test_b)?,
        b_cross: run_with_preprocessor(cfg_b, &pre_a, &train_b, &test_b)?,
    })
}

/// Signed filters of a layer, ready for [`crate::datasets::export_image_grid`].
/// Two-channel (grayscale on/off) layers are rendered as single-channel tiles.
pub fn filter_tiles(layer: &SnnLayer) -> Vec<Tensor3> {
    (0..layer.filter_count()).map(|n| layer.signed_filter(n)).collect()
}
