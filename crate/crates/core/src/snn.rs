//! Event-driven single-layer convolutional spiking network.
//!
//! Neurons are non-leaky integrate-and-fire units: every input spike adds
//! `w / C_m` to the membrane potential and a neuron fires (once per
//! presentation) when the potential reaches its threshold. Training presents
//! receptive-field-sized patches one at a time; only the first neuron to fire
//! learns (winner-take-all), with multiplicative STDP on its weights and
//! threshold homeostasis on every neuron. Inference slides the trained
//! filters over an image and decodes each neuron's fire time to a value.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::coding::{decode_latency, encode_events_into, EncoderConfig, SpikeEvent, SpikeList};
use crate::container::{read_file, Decoder, Encoder};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Tensor3};

const LAYER_MAGIC: &[u8; 4] = b"WSSL";

/// Thresholds never drop below this fraction of the initial mean.
pub const THRESHOLD_FLOOR_FRACTION: f64 = 0.001;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeuronConfig {
    pub capacitance: f64,
    pub v_rest: f64,
    pub threshold_init_mean: f64,
    pub threshold_init_std: f64,
}

impl Default for NeuronConfig {
    fn default() -> Self {
        NeuronConfig {
            capacitance: 1.0,
            v_rest: 0.0,
            threshold_init_mean: 10.0,
            threshold_init_std: 0.1,
        }
    }
}

impl NeuronConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.capacitance > 0.0) {
            return Err(Error::Config("capacitance must be > 0".into()));
        }
        if !(self.threshold_init_mean > self.v_rest) {
            return Err(Error::Config(
                "initial threshold mean must exceed the resting potential".into(),
            ));
        }
        if !(self.threshold_init_std >= 0.0) {
            return Err(Error::Config("initial threshold std must be >= 0".into()));
        }
        Ok(())
    }

    pub fn threshold_floor(&self) -> f64 {
        THRESHOLD_FLOOR_FRACTION * self.threshold_init_mean
    }
}

/// Multiplicative STDP parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StdpConfig {
    pub lr_init: f64,
    pub beta: f64,
    pub w_min: f64,
    pub w_max: f64,
    pub ltp_window: f64,
}

impl Default for StdpConfig {
    fn default() -> Self {
        StdpConfig {
            lr_init: 0.1,
            beta: 1.0,
            w_min: 0.0,
            w_max: 1.0,
            ltp_window: 1.0,
        }
    }
}

impl StdpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.w_min < self.w_max) {
            return Err(Error::Config("STDP needs w_min < w_max".into()));
        }
        if !(self.lr_init > 0.0) || !(self.ltp_window > 0.0) || !self.beta.is_finite() {
            return Err(Error::Config(
                "STDP learning rate and LTP window must be > 0".into(),
            ));
        }
        Ok(())
    }
}

/// Threshold adaptation parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomeostasisConfig {
    pub lr_init: f64,
    pub t_expected: f64,
}

impl Default for HomeostasisConfig {
    fn default() -> Self {
        HomeostasisConfig {
            lr_init: 1.0,
            t_expected: 0.97,
        }
    }
}

impl HomeostasisConfig {
    pub fn validate(&self, exposition: f64) -> Result<()> {
        if !(self.t_expected > 0.0 && self.t_expected < exposition) {
            return Err(Error::Config(format!(
                "t_expected must lie in (0, {exposition}), got {}",
                self.t_expected
            )));
        }
        if !(self.lr_init >= 0.0) {
            return Err(Error::Config("threshold learning rate must be >= 0".into()));
        }
        Ok(())
    }
}

/// Training schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub annealing: f64,
    /// Patches presented per epoch; `None` means one per training image.
    pub patches_per_epoch: Option<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            annealing: 0.95,
            patches_per_epoch: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if !(self.annealing > 0.0 && self.annealing <= 1.0) {
            return Err(Error::Config("annealing must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Convolution geometry of the layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Receptive {
    pub patch_w: usize,
    pub patch_h: usize,
    pub channels: usize,
    pub stride: usize,
    pub padding: usize,
}

impl Receptive {
    pub fn units(&self) -> usize {
        self.patch_w * self.patch_h * self.channels
    }
}

/// Current learning rates of a training run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningRates {
    pub weights: f64,
    pub thresholds: f64,
}

/// Outcome of one competition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Winner {
    pub neuron: usize,
    pub time: f64,
}

/// Weights, thresholds and the configuration they were trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct SnnLayer {
    receptive: Receptive,
    weights: Matrix,
    /// Unit-major copy of `weights` (`units x filters`) for the event loop.
    by_unit: Vec<f64>,
    thresholds: Vec<f64>,
    pub neuron: NeuronConfig,
    pub stdp: StdpConfig,
    pub homeostasis: HomeostasisConfig,
    pub encoder: EncoderConfig,
}

/// Multiplicative STDP update of one weight; the result is clamped to
/// `[w_min, w_max]`.
pub fn stdp_update(cfg: &StdpConfig, lr: f64, w: f64, t_pre: Option<f64>, t_post: f64) -> f64 {
    let span = cfg.w_max - cfg.w_min;
    let potentiate = matches!(t_pre, Some(t) if t <= t_post && t_post - t <= cfg.ltp_window);
    let dw = if potentiate {
        lr * (-cfg.beta * (w - cfg.w_min) / span).exp()
    } else {
        -lr * (-cfg.beta * (cfg.w_max - w) / span).exp()
    };
    (w + dw).clamp(cfg.w_min, cfg.w_max)
}

impl SnnLayer {
    /// New layer with weights drawn from `U(w_min, w_max)` and thresholds from
    /// `N(mean, std)`, seeded.
    pub fn new(
        filter_count: usize,
        receptive: Receptive,
        neuron: NeuronConfig,
        stdp: StdpConfig,
        homeostasis: HomeostasisConfig,
        encoder: EncoderConfig,
        seed: u64,
    ) -> Result<Self> {
        if filter_count == 0 || receptive.units() == 0 || receptive.stride == 0 {
            return Err(Error::Config(
                "layer needs at least one filter, a non-empty receptive field and stride >= 1".into(),
            ));
        }
        neuron.validate()?;
        stdp.validate()?;
        encoder.validate()?;
        homeostasis.validate(encoder.exposition)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let units = receptive.units();
        let weights: Vec<f64> = (0..filter_count * units)
            .map(|_| rng.random_range(stdp.w_min..=stdp.w_max))
            .collect();
        let normal = Normal::new(neuron.threshold_init_mean, neuron.threshold_init_std)
            .map_err(|e| Error::Config(e.to_string()))?;
        let floor = neuron.threshold_floor();
        let thresholds = (0..filter_count)
            .map(|_| normal.sample(&mut rng).max(floor))
            .collect();
        Self::from_parts(
            receptive,
            Matrix::from_vec(filter_count, units, weights)?,
            thresholds,
            neuron,
            stdp,
            homeostasis,
            encoder,
        )
    }

    pub fn from_parts(
        receptive: Receptive,
        weights: Matrix,
        thresholds: Vec<f64>,
        neuron: NeuronConfig,
        stdp: StdpConfig,
        homeostasis: HomeostasisConfig,
        encoder: EncoderConfig,
    ) -> Result<Self> {
        if weights.cols() != receptive.units() || weights.rows() != thresholds.len() {
            return Err(Error::Shape(format!(
                "{}x{} weights for {} thresholds and {} inputs",
                weights.rows(),
                weights.cols(),
                thresholds.len(),
                receptive.units()
            )));
        }
        let mut layer = SnnLayer {
            receptive,
            by_unit: Vec::new(),
            weights,
            thresholds,
            neuron,
            stdp,
            homeostasis,
            encoder,
        };
        layer.rebuild_unit_major();
        Ok(layer)
    }

    fn rebuild_unit_major(&mut self) {
        let (n, u) = (self.weights.rows(), self.weights.cols());
        self.by_unit = vec![0.0; n * u];
        for f in 0..n {
            for (unit, &w) in self.weights.row(f).iter().enumerate() {
                self.by_unit[unit * n + f] = w;
            }
        }
    }

    pub fn filter_count(&self) -> usize {
        self.thresholds.len()
    }

    pub fn receptive(&self) -> Receptive {
        self.receptive
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn set_weight(&mut self, neuron: usize, unit: usize, w: f64) {
        self.weights.set(neuron, unit, w);
        let n = self.filter_count();
        self.by_unit[unit * n + neuron] = w;
    }

    pub fn set_threshold(&mut self, neuron: usize, th: f64) {
        self.thresholds[neuron] = th;
    }

    fn check_input(&self, units: usize) -> Result<()> {
        if units != self.receptive.units() {
            return Err(Error::Shape(format!(
                "input has {units} units, layer expects {}",
                self.receptive.units()
            )));
        }
        Ok(())
    }

    /// Runs sorted events through the layer. `fire` receives per-neuron fire
    /// times. With `stop_at_first`, simulation ends after the first time step
    /// in which any neuron fires.
    fn run_events(&self, events: &[SpikeEvent], stop_at_first: bool, potential: &mut Vec<f64>, fire: &mut Vec<Option<f64>>) {
        let n = self.filter_count();
        potential.clear();
        potential.resize(n, self.neuron.v_rest);
        fire.clear();
        fire.resize(n, None);
        let inv_c = 1.0 / self.neuron.capacitance;
        let mut remaining = n;
        let mut i = 0;
        while i < events.len() && remaining > 0 {
            let t = events[i].time;
            // integrate every spike sharing this timestamp before testing thresholds
            while i < events.len() && events[i].time == t {
                let row = &self.by_unit[events[i].unit * n..(events[i].unit + 1) * n];
                for (v, w) in potential.iter_mut().zip(row) {
                    *v += w * inv_c;
                }
                i += 1;
            }
            let mut fired_now = false;
            for f in 0..n {
                if fire[f].is_none() && potential[f] >= self.thresholds[f] {
                    fire[f] = Some(t);
                    remaining -= 1;
                    fired_now = true;
                }
            }
            if fired_now && stop_at_first {
                break;
            }
        }
    }

    /// Per-neuron fire time for one presentation (at most one spike each).
    pub fn simulate(&self, input: &SpikeList) -> Result<Vec<Option<f64>>> {
        self.check_input(input.unit_count())?;
        let mut potential = Vec::new();
        let mut fire = Vec::new();
        self.run_events(&input.events(), false, &mut potential, &mut fire);
        Ok(fire)
    }

    /// Earliest-firing neuron, lowest index on ties.
    pub fn first_spike(&self, input: &SpikeList) -> Result<Option<Winner>> {
        self.check_input(input.unit_count())?;
        let mut potential = Vec::new();
        let mut fire = Vec::new();
        self.run_events(&input.events(), true, &mut potential, &mut fire);
        Ok(earliest(&fire))
    }

    /// One winner-take-all competition with learning.
    ///
    /// The winner's weights follow [`stdp_update`] for every input unit and
    /// its threshold rises by `lr_th`; every other neuron's threshold drops by
    /// `lr_th / N`; then all thresholds move by `-lr_th (t_win - t_expected)`.
    /// Without a winner only the `lr_th / N` decrease is applied.
    pub fn wta_train_step(&mut self, input: &SpikeList, rates: LearningRates) -> Result<Option<Winner>> {
        let winner = self.first_spike(input)?;
        let n = self.filter_count();
        let lr_th = rates.thresholds;
        let loser_step = lr_th / n as f64;
        match winner {
            Some(Winner { neuron, time }) => {
                for unit in 0..self.receptive.units() {
                    let w = self.weights.get(neuron, unit);
                    let new_w = stdp_update(&self.stdp, rates.weights, w, input.time(unit), time);
                    self.set_weight(neuron, unit, new_w);
                }
                let target = lr_th * (time - self.homeostasis.t_expected);
                for (f, th) in self.thresholds.iter_mut().enumerate() {
                    if f == neuron {
                        *th += lr_th;
                    } else {
                        *th -= loser_step;
                    }
                    *th -= target;
                }
            }
            None => {
                for th in &mut self.thresholds {
                    *th -= loser_step;
                }
            }
        }
        let floor = self.neuron.threshold_floor();
        for th in &mut self.thresholds {
            *th = th.max(floor);
        }
        Ok(winner)
    }

    /// Output size of [`SnnLayer::infer_conv`] for an `h x w` input.
    pub fn output_dims(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let r = self.receptive;
        let (ph, pw) = (h + 2 * r.padding, w + 2 * r.padding);
        if r.patch_h > ph || r.patch_w > pw {
            return Err(Error::Shape(format!(
                "{h}x{w} input is smaller than the {}x{} receptive field",
                r.patch_h, r.patch_w
            )));
        }
        Ok(((ph - r.patch_h) / r.stride + 1, (pw - r.patch_w) / r.stride + 1))
    }

    /// Dense convolutional inference on a coded input (values in `[0, 1]`):
    /// each window is latency coded, simulated without learning and every
    /// neuron's fire time decoded.
    pub fn infer_conv(&self, image: &Tensor3) -> Result<Tensor3> {
        let r = self.receptive;
        let (h, w, c) = image.dims();
        if c != r.channels {
            return Err(Error::Shape(format!(
                "input has {c} channels, layer expects {}",
                r.channels
            )));
        }
        let (out_h, out_w) = self.output_dims(h, w)?;
        let n = self.filter_count();
        let source = if r.padding > 0 {
            pad_zero(image, r.padding)
        } else {
            image.clone()
        };
        let mut out = Tensor3::zeros(out_h, out_w, n);
        let mut window = Vec::with_capacity(r.units());
        let mut events = Vec::with_capacity(r.units());
        let mut potential = Vec::with_capacity(n);
        let mut fire = Vec::with_capacity(n);
        let t_exp = self.homeostasis.t_expected;
        for oy in 0..out_h {
            for ox in 0..out_w {
                source.window_into(oy * r.stride, ox * r.stride, r.patch_h, r.patch_w, &mut window);
                encode_events_into(&window, &self.encoder, &mut events)?;
                self.run_events(&events, false, &mut potential, &mut fire);
                let base = out.offset(oy, ox, 0);
                for (f, t) in fire.iter().enumerate() {
                    out.data_mut()[base + f] = decode_latency(*t, t_exp, &self.encoder) as f32;
                }
            }
        }
        Ok(out)
    }

    /// Filter `n` as a `p_h x p_w x C_in` tensor.
    pub fn filter(&self, n: usize) -> Tensor3 {
        let r = self.receptive;
        let data = self.weights.row(n).iter().map(|&v| v as f32).collect();
        Tensor3::from_vec(r.patch_h, r.patch_w, r.channels, data).expect("weights match receptive field")
    }

    /// Filter `n` with its positive- and negative-input halves recombined as
    /// `w_pos - w_neg`; layers with an odd channel count are returned as is.
    pub fn signed_filter(&self, n: usize) -> Tensor3 {
        let raw = self.filter(n);
        let (h, w, c) = raw.dims();
        if c % 2 != 0 {
            return raw;
        }
        let half = c / 2;
        let mut out = Tensor3::zeros(h, w, half);
        for y in 0..h {
            for x in 0..w {
                for ch in 0..half {
                    out.set(y, x, ch, raw.get(y, x, ch) - raw.get(y, x, ch + half));
                }
            }
        }
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let r = self.receptive;
        let mut e = Encoder::new(LAYER_MAGIC);
        e.usize(self.filter_count());
        for v in [r.patch_w, r.patch_h, r.channels, r.stride, r.padding] {
            e.usize(v);
        }
        let n = self.neuron;
        let s = self.stdp;
        let h = self.homeostasis;
        for v in [
            n.capacitance,
            n.v_rest,
            n.threshold_init_mean,
            n.threshold_init_std,
            s.lr_init,
            s.beta,
            s.w_min,
            s.w_max,
            s.ltp_window,
            h.lr_init,
            h.t_expected,
            self.encoder.exposition,
        ] {
            e.f64(v);
        }
        e.f64s(self.weights.data());
        e.f64s(&self.thresholds);
        e.into_bytes()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = read_file(path)?;
        let mut d = Decoder::new(&bytes, LAYER_MAGIC, path)?;
        let filters = d.usize()?;
        let receptive = Receptive {
            patch_w: d.usize()?,
            patch_h: d.usize()?,
            channels: d.usize()?,
            stride: d.usize()?,
            padding: d.usize()?,
        };
        let neuron = NeuronConfig {
            capacitance: d.f64()?,
            v_rest: d.f64()?,
            threshold_init_mean: d.f64()?,
            threshold_init_std: d.f64()?,
        };
        let stdp = StdpConfig {
            lr_init: d.f64()?,
            beta: d.f64()?,
            w_min: d.f64()?,
            w_max: d.f64()?,
            ltp_window: d.f64()?,
        };
        let homeostasis = HomeostasisConfig {
            lr_init: d.f64()?,
            t_expected: d.f64()?,
        };
        let encoder = EncoderConfig {
            exposition: d.f64()?,
        };
        let weights = d.f64s()?;
        let thresholds = d.f64s()?;
        d.finish()?;
        let units = receptive.units();
        if weights.len() != filters * units || thresholds.len() != filters {
            return Err(Error::format(path, "inconsistent layer dimensions"));
        }
        Self::from_parts(
            receptive,
            Matrix::from_vec(filters, units, weights)?,
            thresholds,
            neuron,
            stdp,
            homeostasis,
            encoder,
        )
        .map_err(|e| Error::format(path, e.to_string()))
    }
}

fn earliest(fire: &[Option<f64>]) -> Option<Winner> {
    let mut best: Option<Winner> = None;
    for (neuron, t) in fire.iter().enumerate() {
        if let Some(time) = *t {
            if best.is_none_or(|b| time < b.time) {
                best = Some(Winner { neuron, time });
            }
        }
    }
    best
}

fn pad_zero(image: &Tensor3, pad: usize) -> Tensor3 {
    let (h, w, c) = image.dims();
    let mut out = Tensor3::zeros(h + 2 * pad, w + 2 * pad, c);
    for y in 0..h {
        let src = image.offset(y, 0, 0);
        let dst = out.offset(y + pad, pad, 0);
        out.data_mut()[dst..dst + w * c].copy_from_slice(&image.data()[src..src + w * c]);
    }
    out
}

/// Per-epoch training summary.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub lr_weights: f64,
    pub lr_thresholds: f64,
    pub presentations: usize,
    pub winners: usize,
    /// Mean fire time of the winners; `None` when nothing fired.
    pub mean_winner_time: Option<f64>,
    pub win_counts: Vec<usize>,
    pub mean_threshold: f64,
    pub min_threshold: f64,
    pub max_threshold: f64,
}

impl EpochStats {
    pub const CSV_HEADER: &'static str =
        "epoch,lr_w,lr_th,presentations,winners,mean_winner_time,threshold_mean,threshold_min,threshold_max,active_neurons";

    pub fn csv_line(&self) -> String {
        let mwt = self
            .mean_winner_time
            .map_or_else(|| "nan".to_string(), |t| format!("{t:.6}"));
        format!(
            "{},{:.6e},{:.6e},{},{},{},{:.6},{:.6},{:.6},{}",
            self.epoch,
            self.lr_weights,
            self.lr_thresholds,
            self.presentations,
            self.winners,
            mwt,
            self.mean_threshold,
            self.min_threshold,
            self.max_threshold,
            self.win_counts.iter().filter(|&&c| c > 0).count()
        )
    }
}

/// Trains `layer` on random receptive-field patches of already coded inputs
/// (values in `[0, 1]`, channel count matching the layer). Strictly
/// sequential; bit-reproducible for a fixed seed.
pub fn train(layer: &mut SnnLayer, inputs: &[Tensor3], cfg: &TrainConfig) -> Result<Vec<EpochStats>> {
    cfg.validate()?;
    let r = layer.receptive;
    if let Some(bad) = inputs.iter().find(|t| t.channels() != r.channels) {
        return Err(Error::Shape(format!(
            "training input has {} channels, layer expects {}",
            bad.channels(),
            r.channels
        )));
    }
    if let Some(bad) = inputs.iter().find(|t| t.height() < r.patch_h || t.width() < r.patch_w) {
        return Err(Error::Shape(format!(
            "training input {}x{} is smaller than the receptive field",
            bad.height(),
            bad.width()
        )));
    }
    let per_epoch = cfg.patches_per_epoch.unwrap_or(inputs.len());
    if per_epoch > 0 && inputs.is_empty() {
        return Err(Error::InsufficientData("no training inputs".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rates = LearningRates {
        weights: layer.stdp.lr_init,
        thresholds: layer.homeostasis.lr_init,
    };
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut window = Vec::with_capacity(r.units());
    for epoch in 0..cfg.epochs {
        let mut win_counts = vec![0usize; layer.filter_count()];
        let mut winners = 0;
        let mut time_sum = 0.0;
        for _ in 0..per_epoch {
            let img = &inputs[rng.random_range(0..inputs.len())];
            let y = rng.random_range(0..=img.height() - r.patch_h);
            let x = rng.random_range(0..=img.width() - r.patch_w);
            img.window_into(y, x, r.patch_h, r.patch_w, &mut window);
            let spikes = crate::coding::encode_latency_slice(&window, &layer.encoder)?;
            if let Some(w) = layer.wta_train_step(&spikes, rates)? {
                win_counts[w.neuron] += 1;
                winners += 1;
                time_sum += w.time;
            }
        }
        let th = layer.thresholds();
        log.push(EpochStats {
            epoch,
            lr_weights: rates.weights,
            lr_thresholds: rates.thresholds,
            presentations: per_epoch,
            winners,
            mean_winner_time: (winners > 0).then(|| time_sum / winners as f64),
            win_counts,
            mean_threshold: th.iter().sum::<f64>() / th.len() as f64,
            min_threshold: th.iter().copied().fold(f64::INFINITY, f64::min),
            max_threshold: th.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        });
        rates.weights *= cfg.annealing;
        rates.thresholds *= cfg.annealing;
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layer_with(weights: Vec<Vec<f64>>, thresholds: Vec<f64>) -> SnnLayer {
        let units = weights[0].len();
        SnnLayer::from_parts(
            Receptive {
                patch_w: units,
                patch_h: 1,
                channels: 1,
                stride: 1,
                padding: 0,
            },
            Matrix::from_rows(&weights).unwrap(),
            thresholds,
            NeuronConfig::default(),
            StdpConfig::default(),
            HomeostasisConfig::default(),
            EncoderConfig::default(),
        )
        .unwrap()
    }

    fn spikes(times: &[Option<f64>]) -> SpikeList {
        SpikeList::from_times(times.to_vec(), &EncoderConfig::default()).unwrap()
    }

    #[test]
    fn zero_weights_never_fire() {
        let layer = layer_with(vec![vec![0.0; 4]; 3], vec![1.0; 3]);
        let s = spikes(&[Some(0.1), Some(0.2), Some(0.3), Some(0.4)]);
        assert_eq!(layer.simulate(&s).unwrap(), vec![None; 3]);
    }

    #[test]
    fn hand_event_trace() {
        let layer = layer_with(vec![vec![1.0; 3]], vec![2.0]);
        let s = spikes(&[Some(0.1), Some(0.2), Some(0.3)]);
        assert_eq!(layer.simulate(&s).unwrap(), vec![Some(0.2)]);
    }

    #[test]
    fn immediate_crossing_fires_at_first_spike() {
        let layer = layer_with(vec![vec![1.0, 1.0]], vec![0.5]);
        let s = spikes(&[Some(0.4), Some(0.1)]);
        assert_eq!(layer.simulate(&s).unwrap(), vec![Some(0.1)]);
    }

    #[test]
    fn simultaneous_spikes_integrate_together() {
        // neuron 1 crosses after unit 0, neuron 0 only after unit 1; same timestamp
        let layer = layer_with(vec![vec![0.2, 1.0], vec![1.0, 0.0]], vec![1.0, 1.0]);
        let s = spikes(&[Some(0.5), Some(0.5)]);
        assert_eq!(layer.simulate(&s).unwrap(), vec![Some(0.5), Some(0.5)]);
        assert_eq!(layer.first_spike(&s).unwrap(), Some(Winner { neuron: 0, time: 0.5 }));
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let layer = layer_with(vec![vec![1.0; 3]], vec![2.0]);
        assert!(matches!(layer.simulate(&SpikeList::silent(4)), Err(Error::Shape(_))));
    }

    #[test]
    fn stdp_hand_values() {
        let cfg = StdpConfig::default();
        assert!((stdp_update(&cfg, 0.1, 0.0, Some(0.1), 0.5) - 0.1).abs() < 1e-15);
        // Δw = 0.1·e⁻¹ ≈ 0.0368, clamped at w_max
        assert_eq!(stdp_update(&cfg, 0.1, 1.0, Some(0.1), 0.5), 1.0);
        assert!((stdp_update(&cfg, 0.1, 1.0, None, 0.5) - 0.9).abs() < 1e-15);
        // pre after post depresses
        let w = stdp_update(&cfg, 0.1, 0.5, Some(0.6), 0.5);
        assert!((w - (0.5 - 0.1 * (-0.5f64).exp())).abs() < 1e-15);
        // outside the LTP window depresses too
        let narrow = StdpConfig { ltp_window: 0.1, ..cfg };
        assert!(stdp_update(&narrow, 0.1, 0.5, Some(0.1), 0.5) < 0.5);
    }

    #[test]
    fn silent_input_only_lowers_thresholds() {
        let mut layer = layer_with(vec![vec![0.5; 2]; 4], vec![10.0; 4]);
        let rates = LearningRates { weights: 0.1, thresholds: 1.0 };
        let w = layer.wta_train_step(&SpikeList::silent(2), rates).unwrap();
        assert!(w.is_none());
        assert!(layer.thresholds().iter().all(|&t| (t - 9.75).abs() < 1e-15));
        assert!(layer.weights().data().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn firing_at_target_leaves_only_wta_terms() {
        let mut layer = layer_with(vec![vec![1.0], vec![0.0]], vec![0.5, 0.5]);
        let rates = LearningRates { weights: 0.0, thresholds: 0.2 };
        let w = layer.wta_train_step(&spikes(&[Some(0.97)]), rates).unwrap();
        assert_eq!(w, Some(Winner { neuron: 0, time: 0.97 }));
        assert!((layer.thresholds()[0] - 0.7).abs() < 1e-15);
        assert!((layer.thresholds()[1] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn two_neuron_hand_trace() {
        // neuron 1 fires at 0.5, neuron 0 never
        let mut layer = layer_with(vec![vec![0.0, 0.0], vec![1.0, 1.0]], vec![5.0, 1.0]);
        let (lr_w, lr_th, t_exp) = (0.1, 1.0, 0.97);
        let input = spikes(&[Some(0.5), None]);
        let w = layer
            .wta_train_step(&input, LearningRates { weights: lr_w, thresholds: lr_th })
            .unwrap();
        assert_eq!(w, Some(Winner { neuron: 1, time: 0.5 }));
        let th0 = 5.0 - lr_th / 2.0 - lr_th * (0.5 - t_exp);
        let th1 = 1.0 + lr_th - lr_th * (0.5 - t_exp);
        assert!((layer.thresholds()[0] - th0).abs() < 1e-12);
        assert!((layer.thresholds()[1] - th1).abs() < 1e-12);
        // winner: unit 0 potentiated (clamped), unit 1 depressed
        assert_eq!(layer.weights().get(1, 0), 1.0);
        assert!((layer.weights().get(1, 1) - 0.9).abs() < 1e-15);
        // loser untouched
        assert_eq!(layer.weights().row(0), &[0.0, 0.0]);
    }

    #[test]
    fn thresholds_respect_floor() {
        let mut layer = layer_with(vec![vec![0.5]], vec![0.02]);
        let rates = LearningRates { weights: 0.1, thresholds: 1.0 };
        layer.wta_train_step(&SpikeList::silent(1), rates).unwrap();
        assert_eq!(layer.thresholds()[0], NeuronConfig::default().threshold_floor());
    }

    #[test]
    fn conv_output_dims() {
        let layer = SnnLayer::new(
            4,
            Receptive { patch_w: 5, patch_h: 5, channels: 6, stride: 1, padding: 0 },
            NeuronConfig::default(),
            StdpConfig::default(),
            HomeostasisConfig::default(),
            EncoderConfig::default(),
            1,
        )
        .unwrap();
        assert_eq!(layer.output_dims(32, 32).unwrap(), (28, 28));
        let out = layer.infer_conv(&Tensor3::zeros(32, 32, 6)).unwrap();
        assert_eq!(out.dims(), (28, 28, 4));
        assert!(out.data().iter().all(|&v| v == 0.0));
        assert!(layer.infer_conv(&Tensor3::zeros(4, 32, 6)).is_err());
        assert!(layer.infer_conv(&Tensor3::zeros(32, 32, 3)).is_err());
    }

    #[test]
    fn layer_file_round_trip() {
        let layer = SnnLayer::new(
            3,
            Receptive { patch_w: 2, patch_h: 3, channels: 2, stride: 1, padding: 0 },
            NeuronConfig::default(),
            StdpConfig { beta: 3.0, ..StdpConfig::default() },
            HomeostasisConfig::default(),
            EncoderConfig::default(),
            42,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("layer.bin");
        layer.save(&p).unwrap();
        assert_eq!(SnnLayer::load(&p).unwrap(), layer);
        let bytes = std::fs::read(&p).unwrap();
        std::fs::write(&p, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(SnnLayer::load(&p), Err(Error::Format { .. })));
    }

    #[test]
    fn signed_filter_recombines_halves() {
        let layer = SnnLayer::from_parts(
            Receptive { patch_w: 1, patch_h: 1, channels: 4, stride: 1, padding: 0 },
            Matrix::from_rows(&[vec![0.9, 0.1, 0.2, 0.7]]).unwrap(),
            vec![1.0],
            NeuronConfig::default(),
            StdpConfig::default(),
            HomeostasisConfig::default(),
            EncoderConfig::default(),
        )
        .unwrap();
        let f = layer.signed_filter(0);
        assert_eq!(f.channels(), 2);
        assert!((f.get(0, 0, 0) - 0.7).abs() < 1e-6);
        assert!((f.get(0, 0, 1) + 0.6).abs() < 1e-6);
    }
}
