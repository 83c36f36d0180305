//! On/off channel split and latency coding of a small patch, then decoding
//! of output fire times back to activations.
//!
//! `cargo run --example spike_coding`

use whitespike::coding::{decode_latency, encode_latency, split_channels, EncoderConfig};
use whitespike::Tensor3;

fn main() -> whitespike::Result<()> {
    let patch = Tensor3::from_vec(2, 2, 1, vec![0.8, -0.4, 0.0, -1.6])?;
    let split = split_channels(&patch);
    println!("split (on, off) per pixel: {:?}", split.data());

    let cfg = EncoderConfig::default();
    let spikes = encode_latency(&split, &cfg)?;
    for ev in spikes.events() {
        println!("unit {} spikes at t = {:.3}", ev.unit, ev.time);
    }
    println!("{} of {} units silent", spikes.unit_count() - spikes.spike_count(), spikes.unit_count());

    let t_expected = 0.97;
    for t in [None, Some(0.0), Some(0.5), Some(0.97), Some(0.99)] {
        println!("fire time {t:?} decodes to {:.4}", decode_latency(t, t_expected, &cfg));
    }
    Ok(())
}
