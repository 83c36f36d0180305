//! Threshold homeostasis on a single neuron presented the same ramp input:
//! prints the winner fire time and threshold per presentation.
//!
//! `cargo run --release --example homeostasis [presentations]`

use whitespike::coding::{encode_latency_slice, EncoderConfig};
use whitespike::snn::{HomeostasisConfig, LearningRates, NeuronConfig, Receptive, SnnLayer, StdpConfig};

fn main() -> whitespike::Result<()> {
    let presentations: usize = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(500);
    let units = 100;
    let ramp: Vec<f32> = (0..units).map(|i| (i + 1) as f32 / units as f32).collect();
    let encoder = EncoderConfig::default();
    let input = encode_latency_slice(&ramp, &encoder)?;
    let homeostasis = HomeostasisConfig::default();
    let stdp = StdpConfig::default();
    let mut layer = SnnLayer::new(
        1,
        Receptive { patch_w: units, patch_h: 1, channels: 1, stride: 1, padding: 0 },
        NeuronConfig::default(),
        stdp,
        homeostasis,
        encoder,
        7,
    )?;
    let rates = LearningRates { weights: stdp.lr_init, thresholds: homeostasis.lr_init };
    println!("presentation,fire_time,threshold");
    for p in 0..presentations {
        let w = layer.wta_train_step(&input, rates)?;
        let t = w.map_or("none".to_string(), |w| format!("{:.4}", w.time));
        println!("{p},{t},{:.4}", layer.thresholds()[0]);
    }
    Ok(())
}
