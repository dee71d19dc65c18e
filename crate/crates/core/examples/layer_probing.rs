//! Per-layer and cumulative probes against an all-layer oracle. Only layer 0
//! carries the label; the other layers are noise.

use redunkit::labels::DEV;
use redunkit::pipeline::{layer_selector, LsMode};
use redunkit::probe::{train_oracle, ProbeConfig};
use redunkit::synth::PlantedTask;

fn main() -> redunkit::Result<()> {
    let task = PlantedTask {
        tokens: 10_000,
        layers: 4,
        layer_size: 16,
        informative: vec![2, 9],
        repeat_layer0: false,
        ..Default::default()
    };
    let (acts, data) = task.generate()?;
    let cfg = ProbeConfig::default();

    let (_, oracle) = train_oracle(&acts, &data, &cfg, DEV)?;
    println!(
        "oracle ({} neurons): {:.4}",
        acts.total_neurons(),
        oracle.accuracy
    );

    for mode in [LsMode::Individual, LsMode::CumulativeConcat] {
        let s = layer_selector(&acts, &data, &cfg, 0.99, mode, DEV)?;
        println!("\n{mode:?}");
        for (i, acc) in s.per_layer_acc.iter().enumerate() {
            let mark = if s.passing_layers.contains(&i) {
                "within 1% of oracle"
            } else {
                ""
            };
            println!("  layer {i}: {acc:.4} {mark}");
        }
        println!(
            "  selected layer {} (fallback: {})",
            s.selected_layer, s.fallback
        );
    }
    Ok(())
}
