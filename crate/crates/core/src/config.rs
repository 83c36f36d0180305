//! Experiment configuration: flat `section.key = value` text.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown or repeated
//! keys are errors. Keys not present keep their defaults, which reproduce the
//! reference parameter table (T = 1, v_th(0) ~ N(10, 0.1), t_expected = 0.97,
//! η_th(0) = 1, α = 0.95, E = 100, w ∈ [0, 1], η_w(0) = 0.1, β = 1,
//! 5×5 filters, stride 1, padding 0).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::classify::{PoolMode, DEFAULT_REG_GRID};
use crate::coding::EncoderConfig;
use crate::error::{Error, Result};
use crate::snn::{HomeostasisConfig, NeuronConfig, Receptive, StdpConfig, TrainConfig};
use crate::whitening::{check_params, DogConfig, DogMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    Cifar10,
    Stl10,
    /// Generated labeled images, for smoke runs without downloads.
    Synthetic,
}

impl FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cifar10" => Ok(DatasetKind::Cifar10),
            "stl10" => Ok(DatasetKind::Stl10),
            "synthetic" => Ok(DatasetKind::Synthetic),
            _ => Err(Error::Config(format!(
                "unknown dataset kind {s:?} (cifar10 | stl10 | synthetic)"
            ))),
        }
    }
}

impl std::fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DatasetKind::Cifar10 => "cifar10",
            DatasetKind::Stl10 => "stl10",
            DatasetKind::Synthetic => "synthetic",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preproc {
    StandardZca,
    Kernels,
    DogGray,
    DogColor,
}

impl FromStr for Preproc {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard-zca" => Ok(Preproc::StandardZca),
            "kernels" => Ok(Preproc::Kernels),
            "dog-gray" => Ok(Preproc::DogGray),
            "dog-color" => Ok(Preproc::DogColor),
            _ => Err(Error::Config(format!(
                "unknown preproc {s:?} (standard-zca | kernels | dog-gray | dog-color)"
            ))),
        }
    }
}

impl std::fmt::Display for Preproc {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Preproc::StandardZca => "standard-zca",
            Preproc::Kernels => "kernels",
            Preproc::DogGray => "dog-gray",
            Preproc::DogColor => "dog-color",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetConfig {
    pub kind: DatasetKind,
    pub path: PathBuf,
    /// `None` loads the whole split.
    pub train_limit: Option<usize>,
    pub test_limit: Option<usize>,
    pub synthetic_classes: usize,
    pub synthetic_size: usize,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            kind: DatasetKind::Cifar10,
            path: PathBuf::from("data/cifar-10-batches-bin"),
            train_limit: None,
            test_limit: None,
            synthetic_classes: 4,
            synthetic_size: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WhiteningConfig {
    pub preproc: Preproc,
    pub epsilon: f64,
    pub ratio: f64,
    pub patch_w: usize,
    pub patch_h: usize,
    pub patch_count: usize,
    pub patch_stride: usize,
    pub dog_sigma_center: f64,
    pub dog_sigma_surround: f64,
    pub dog_kernel_size: usize,
}

impl Default for WhiteningConfig {
    fn default() -> Self {
        let dog = DogConfig::default();
        WhiteningConfig {
            preproc: Preproc::Kernels,
            epsilon: 1e-2,
            ratio: 1.0,
            patch_w: 9,
            patch_h: 9,
            patch_count: 1_000_000,
            patch_stride: 2,
            dog_sigma_center: dog.sigma_center,
            dog_sigma_surround: dog.sigma_surround,
            dog_kernel_size: dog.kernel_size,
        }
    }
}

impl WhiteningConfig {
    /// DoG settings; `None` for the whitening pre-processors.
    pub fn dog(&self) -> Option<DogConfig> {
        let mode = match self.preproc {
            Preproc::DogGray => DogMode::Grayscale,
            Preproc::DogColor => DogMode::Color,
            _ => return None,
        };
        Some(DogConfig {
            sigma_center: self.dog_sigma_center,
            sigma_surround: self.dog_sigma_surround,
            kernel_size: self.dog_kernel_size,
            mode,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerConfig {
    pub filter_count: usize,
    pub filter_w: usize,
    pub filter_h: usize,
    pub stride: usize,
    pub padding: usize,
}

impl Default for LayerConfig {
    fn default() -> Self {
        LayerConfig {
            filter_count: 64,
            filter_w: 5,
            filter_h: 5,
            stride: 1,
            padding: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifyConfig {
    pub pooling: PoolMode,
    pub svm_epochs: usize,
    pub reg_grid: Vec<f64>,
    pub run_count: usize,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            pooling: PoolMode::Sum,
            svm_epochs: 10,
            reg_grid: DEFAULT_REG_GRID.to_vec(),
            run_count: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub whitening: WhiteningConfig,
    pub coding: EncoderConfig,
    pub neuron: NeuronConfig,
    pub homeostasis: HomeostasisConfig,
    pub stdp: StdpConfig,
    /// `training.seed` is unused; runs derive their seed from `experiment.seed`.
    pub training: TrainConfig,
    pub layer: LayerConfig,
    pub classify: ClassifyConfig,
    pub seed: u64,
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_limit(key: &str, value: &str) -> Result<Option<usize>> {
    match value {
        "all" => Ok(None),
        v => parse(key, v).map(Some),
    }
}

fn show_limit(v: Option<usize>, none: &str) -> String {
    v.map_or_else(|| none.to_string(), |n| n.to_string())
}

impl ExperimentConfig {
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("line {}: duplicate key {key}", lineno + 1)));
            }
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    /// Sets one key from its text value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let d = &mut self.dataset;
        let w = &mut self.whitening;
        match key {
            "dataset.kind" => d.kind = parse(key, value)?,
            "dataset.path" => d.path = PathBuf::from(value),
            "dataset.train_limit" => d.train_limit = parse_limit(key, value)?,
            "dataset.test_limit" => d.test_limit = parse_limit(key, value)?,
            "dataset.synthetic_classes" => d.synthetic_classes = parse(key, value)?,
            "dataset.synthetic_size" => d.synthetic_size = parse(key, value)?,
            "whitening.preproc" => w.preproc = parse(key, value)?,
            "whitening.epsilon" => w.epsilon = parse(key, value)?,
            "whitening.ratio" => w.ratio = parse(key, value)?,
            "whitening.patch_width" => w.patch_w = parse(key, value)?,
            "whitening.patch_height" => w.patch_h = parse(key, value)?,
            "whitening.patch_count" => w.patch_count = parse(key, value)?,
            "whitening.patch_stride" => w.patch_stride = parse(key, value)?,
            "whitening.dog_sigma_center" => w.dog_sigma_center = parse(key, value)?,
            "whitening.dog_sigma_surround" => w.dog_sigma_surround = parse(key, value)?,
            "whitening.dog_kernel_size" => w.dog_kernel_size = parse(key, value)?,
            "coding.exposition" => self.coding.exposition = parse(key, value)?,
            "neuron.capacitance" => self.neuron.capacitance = parse(key, value)?,
            "neuron.v_rest" => self.neuron.v_rest = parse(key, value)?,
            "neuron.threshold_mean" => self.neuron.threshold_init_mean = parse(key, value)?,
            "neuron.threshold_std" => self.neuron.threshold_init_std = parse(key, value)?,
            "homeostasis.t_expected" => self.homeostasis.t_expected = parse(key, value)?,
            "homeostasis.lr" => self.homeostasis.lr_init = parse(key, value)?,
            "stdp.lr" => self.stdp.lr_init = parse(key, value)?,
            "stdp.beta" => self.stdp.beta = parse(key, value)?,
            "stdp.w_min" => self.stdp.w_min = parse(key, value)?,
            "stdp.w_max" => self.stdp.w_max = parse(key, value)?,
            "stdp.ltp_window" => self.stdp.ltp_window = parse(key, value)?,
            "training.epochs" => self.training.epochs = parse(key, value)?,
            "training.annealing" => self.training.annealing = parse(key, value)?,
            "training.patches_per_epoch" => {
                self.training.patches_per_epoch = match value {
                    "auto" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "layer.filter_count" => self.layer.filter_count = parse(key, value)?,
            "layer.filter_width" => self.layer.filter_w = parse(key, value)?,
            "layer.filter_height" => self.layer.filter_h = parse(key, value)?,
            "layer.stride" => self.layer.stride = parse(key, value)?,
            "layer.padding" => self.layer.padding = parse(key, value)?,
            "classify.pooling" => self.classify.pooling = value.parse()?,
            "classify.svm_epochs" => self.classify.svm_epochs = parse(key, value)?,
            "classify.reg_grid" => {
                self.classify.reg_grid = value
                    .split(',')
                    .map(|v| parse(key, v.trim()))
                    .collect::<Result<_>>()?
            }
            "classify.run_count" => self.classify.run_count = parse(key, value)?,
            "experiment.seed" => self.seed = parse(key, value)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Every key with its current value, in file order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let d = &self.dataset;
        let w = &self.whitening;
        let grid: Vec<String> = self.classify.reg_grid.iter().map(f64::to_string).collect();
        vec![
            ("dataset.kind", d.kind.to_string()),
            ("dataset.path", d.path.display().to_string()),
            ("dataset.train_limit", show_limit(d.train_limit, "all")),
            ("dataset.test_limit", show_limit(d.test_limit, "all")),
            ("dataset.synthetic_classes", d.synthetic_classes.to_string()),
            ("dataset.synthetic_size", d.synthetic_size.to_string()),
            ("whitening.preproc", w.preproc.to_string()),
            ("whitening.epsilon", w.epsilon.to_string()),
            ("whitening.ratio", w.ratio.to_string()),
            ("whitening.patch_width", w.patch_w.to_string()),
            ("whitening.patch_height", w.patch_h.to_string()),
            ("whitening.patch_count", w.patch_count.to_string()),
            ("whitening.patch_stride", w.patch_stride.to_string()),
            ("whitening.dog_sigma_center", w.dog_sigma_center.to_string()),
            ("whitening.dog_sigma_surround", w.dog_sigma_surround.to_string()),
            ("whitening.dog_kernel_size", w.dog_kernel_size.to_string()),
            ("coding.exposition", self.coding.exposition.to_string()),
            ("neuron.capacitance", self.neuron.capacitance.to_string()),
            ("neuron.v_rest", self.neuron.v_rest.to_string()),
            ("neuron.threshold_mean", self.neuron.threshold_init_mean.to_string()),
            ("neuron.threshold_std", self.neuron.threshold_init_std.to_string()),
            ("homeostasis.t_expected", self.homeostasis.t_expected.to_string()),
            ("homeostasis.lr", self.homeostasis.lr_init.to_string()),
            ("stdp.lr", self.stdp.lr_init.to_string()),
            ("stdp.beta", self.stdp.beta.to_string()),
            ("stdp.w_min", self.stdp.w_min.to_string()),
            ("stdp.w_max", self.stdp.w_max.to_string()),
            ("stdp.ltp_window", self.stdp.ltp_window.to_string()),
            ("training.epochs", self.training.epochs.to_string()),
            ("training.annealing", self.training.annealing.to_string()),
            (
                "training.patches_per_epoch",
                show_limit(self.training.patches_per_epoch, "auto"),
            ),
            ("layer.filter_count", self.layer.filter_count.to_string()),
            ("layer.filter_width", self.layer.filter_w.to_string()),
            ("layer.filter_height", self.layer.filter_h.to_string()),
            ("layer.stride", self.layer.stride.to_string()),
            ("layer.padding", self.layer.padding.to_string()),
            ("classify.pooling", self.classify.pooling.to_string()),
            ("classify.svm_epochs", self.classify.svm_epochs.to_string()),
            ("classify.reg_grid", grid.join(",")),
            ("classify.run_count", self.classify.run_count.to_string()),
            ("experiment.seed", self.seed.to_string()),
        ]
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut section = "";
        for (key, value) in self.entries() {
            let s = key.split('.').next().unwrap_or("");
            if s != section {
                if !section.is_empty() {
                    out.push('\n');
                }
                section = s;
            }
            let _ = writeln!(out, "{key} = {value}");
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.dataset;
        if d.kind == DatasetKind::Synthetic && (d.synthetic_classes < 2 || d.synthetic_size == 0) {
            return Err(Error::Config(
                "synthetic data needs >= 2 classes and a non-zero size".into(),
            ));
        }
        let w = &self.whitening;
        check_params(w.epsilon, w.ratio).map_err(|e| Error::Config(e.to_string()))?;
        if w.patch_w == 0 || w.patch_h == 0 || w.patch_stride == 0 || w.patch_count == 0 {
            return Err(Error::Config(
                "whitening patch size, stride and count must be >= 1".into(),
            ));
        }
        if w.preproc == Preproc::Kernels && (w.patch_w.is_multiple_of(2) || w.patch_h.is_multiple_of(2)) {
            return Err(Error::Config("whitening kernels need odd patch sizes".into()));
        }
        if let Some(dog) = w.dog() {
            dog.validate()?;
        }
        self.coding.validate()?;
        self.neuron.validate()?;
        self.homeostasis.validate(self.coding.exposition)?;
        self.stdp.validate()?;
        self.training.validate()?;
        let l = &self.layer;
        if l.filter_count == 0 || l.filter_w == 0 || l.filter_h == 0 || l.stride == 0 {
            return Err(Error::Config(
                "layer filter count, size and stride must be >= 1".into(),
            ));
        }
        let c = &self.classify;
        if c.svm_epochs == 0 || c.run_count == 0 {
            return Err(Error::Config("svm_epochs and run_count must be >= 1".into()));
        }
        if c.reg_grid.is_empty() || c.reg_grid.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::Config("reg_grid needs positive values".into()));
        }
        Ok(())
    }

    /// Receptive field of the layer for `channels` coded input channels.
    pub fn receptive(&self, channels: usize) -> Receptive {
        Receptive {
            patch_w: self.layer.filter_w,
            patch_h: self.layer.filter_h,
            channels,
            stride: self.layer.stride,
            padding: self.layer.padding,
        }
    }

    /// Seed of run `run` (layer init, patch order and SVM).
    pub fn run_seed(&self, run: usize) -> u64 {
        self.seed.wrapping_add(run as u64)
    }

    pub fn train_config(&self, run: usize) -> TrainConfig {
        TrainConfig {
            seed: self.run_seed(run),
            ..self.training
        }
    }
}
