//! Latency coding of pre-processed values and decoding of output spike times.

use crate::error::{Error, Result};
use crate::numerics::Tensor3;

/// Latency coding parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncoderConfig {
    /// Exposition duration `T` of one sample.
    pub exposition: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig { exposition: 1.0 }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.exposition > 0.0 && self.exposition.is_finite() {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "exposition must be > 0, got {}",
                self.exposition
            )))
        }
    }
}

/// One input spike.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpikeEvent {
    pub time: f64,
    pub unit: usize,
}

/// At most one spike per input unit, each in `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeList {
    times: Vec<Option<f64>>,
}

impl SpikeList {
    pub fn silent(unit_count: usize) -> Self {
        SpikeList {
            times: vec![None; unit_count],
        }
    }

    pub fn from_times(times: Vec<Option<f64>>, cfg: &EncoderConfig) -> Result<Self> {
        if let Some(t) = times.iter().flatten().find(|t| !(0.0..=cfg.exposition).contains(*t)) {
            return Err(Error::Contract(format!(
                "spike time {t} outside [0, {}]",
                cfg.exposition
            )));
        }
        Ok(SpikeList { times })
    }

    pub fn unit_count(&self) -> usize {
        self.times.len()
    }

    pub fn time(&self, unit: usize) -> Option<f64> {
        self.times[unit]
    }

    pub fn times(&self) -> &[Option<f64>] {
        &self.times
    }

    pub fn spike_count(&self) -> usize {
        self.times.iter().flatten().count()
    }

    /// Spikes in ascending time; equal times keep unit order.
    pub fn events(&self) -> Vec<SpikeEvent> {
        let mut ev: Vec<SpikeEvent> = self
            .times
            .iter()
            .enumerate()
            .filter_map(|(unit, t)| t.map(|time| SpikeEvent { time, unit }))
            .collect();
        ev.sort_by(|a, b| a.time.total_cmp(&b.time));
        ev
    }
}

/// Scales a signed sample into `[-1, 1]` by `max(|min|, |max|)` and splits it
/// into positive and negative parts. Output has `2·C` channels: the `C`
/// positive planes followed by the `C` negative planes.
pub fn split_channels(sample: &Tensor3) -> Tensor3 {
    let (h, w, c) = sample.dims();
    let bound = sample.data().iter().fold(0.0f32, |m, v| m.max(v.abs()));
    let mut out = Tensor3::zeros(h, w, 2 * c);
    if bound == 0.0 {
        return out;
    }
    let dst = out.data_mut();
    for (p, px) in sample.data().chunks_exact(c).enumerate() {
        let base = p * 2 * c;
        for (ch, &v) in px.iter().enumerate() {
            let x = v / bound;
            dst[base + ch] = x.max(0.0);
            dst[base + c + ch] = (-x).max(0.0);
        }
    }
    out
}

#[inline]
fn check_unit(x: f32) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::Contract(format!("latency coding expects values in [0, 1], got {x}")))
    }
}

/// Latency coding `t = T(1 - x)`; zero values emit no spike.
pub fn encode_latency(values: &Tensor3, cfg: &EncoderConfig) -> Result<SpikeList> {
    encode_latency_slice(values.data(), cfg)
}

pub fn encode_latency_slice(values: &[f32], cfg: &EncoderConfig) -> Result<SpikeList> {
    let times = values
        .iter()
        .map(|&x| {
            check_unit(x)?;
            Ok((x > 0.0).then(|| cfg.exposition * (1.0 - f64::from(x))))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SpikeList { times })
}

/// Writes the sorted spike events of `values` into `events`, reusing its
/// allocation. Same semantics as [`encode_latency_slice`] followed by
/// [`SpikeList::events`].
pub fn encode_events_into(values: &[f32], cfg: &EncoderConfig, events: &mut Vec<SpikeEvent>) -> Result<()> {
    events.clear();
    for (unit, &x) in values.iter().enumerate() {
        check_unit(x)?;
        if x > 0.0 {
            events.push(SpikeEvent {
                time: cfg.exposition * (1.0 - f64::from(x)),
                unit,
            });
        }
    }
    events.sort_by(|a, b| a.time.total_cmp(&b.time));
    Ok(())
}

/// Maps an output spike time back to a value in `[0, 1]`; no spike decodes
/// to 0 and any spike at or before `t_expected` decodes to 1.
pub fn decode_latency(fire_time: Option<f64>, t_expected: f64, cfg: &EncoderConfig) -> f64 {
    match fire_time {
        None => 0.0,
        Some(t) => {
            let v = 1.0 - (t - t_expected) / (cfg.exposition - t_expected);
            v.clamp(0.0, 1.0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t1() -> EncoderConfig {
        EncoderConfig { exposition: 1.0 }
    }

    #[test]
    fn split_hand_example() {
        let s = Tensor3::from_vec(1, 2, 1, vec![-2.0, 1.0]).unwrap();
        let out = split_channels(&s);
        assert_eq!(out.dims(), (1, 2, 2));
        // pixel 0: x = -1 → (0, 1); pixel 1: x = 0.5 → (0.5, 0)
        assert_eq!(out.data(), &[0.0, 1.0, 0.5, 0.0]);
    }

    #[test]
    fn split_channel_order_is_positives_then_negatives() {
        let s = Tensor3::from_vec(1, 1, 3, vec![0.5, -1.0, 0.25]).unwrap();
        assert_eq!(split_channels(&s).data(), &[0.5, 0.0, 0.25, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn split_of_zero_sample_is_zero() {
        let out = split_channels(&Tensor3::zeros(2, 2, 3));
        assert_eq!(out.channels(), 6);
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn split_all_positive_has_empty_negative_half() {
        let s = Tensor3::from_vec(1, 3, 1, vec![0.1, 0.4, 0.2]).unwrap();
        let out = split_channels(&s);
        assert!(out.channel(1).data().iter().all(|&v| v == 0.0));
        assert_eq!(out.get(0, 1, 0), 1.0);
    }

    #[test]
    fn latency_examples() {
        let v = Tensor3::from_vec(1, 3, 1, vec![1.0, 0.0, 0.25]).unwrap();
        let s = encode_latency(&v, &t1()).unwrap();
        assert_eq!(s.time(0), Some(0.0));
        assert_eq!(s.time(1), None);
        assert_eq!(s.time(2), Some(0.75));
        assert_eq!(s.spike_count(), 2);
    }

    #[test]
    fn latency_rejects_out_of_range() {
        assert!(encode_latency_slice(&[0.5, 1.5], &t1()).is_err());
        assert!(encode_latency_slice(&[-0.1], &t1()).is_err());
    }

    #[test]
    fn events_are_time_then_unit_ordered() {
        let s = encode_latency_slice(&[0.5, 1.0, 0.5, 0.0, 0.9], &t1()).unwrap();
        let units: Vec<usize> = s.events().iter().map(|e| e.unit).collect();
        assert_eq!(units, vec![1, 4, 0, 2]);
        let mut buf = Vec::new();
        encode_events_into(&[0.5, 1.0, 0.5, 0.0, 0.9], &t1(), &mut buf).unwrap();
        assert_eq!(buf, s.events());
    }

    #[test]
    fn decode_examples() {
        assert_eq!(decode_latency(Some(0.97), 0.97, &t1()), 1.0);
        assert_eq!(decode_latency(Some(1.0), 0.97, &t1()), 0.0);
        assert!((decode_latency(Some(0.985), 0.97, &t1()) - 0.5).abs() < 1e-12);
        assert_eq!(decode_latency(None, 0.97, &t1()), 0.0);
        assert_eq!(decode_latency(Some(0.1), 0.97, &t1()), 1.0);
    }
}
