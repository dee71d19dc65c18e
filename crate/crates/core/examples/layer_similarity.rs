//! Pairwise layer CKA on a synthetic stack where each layer is a noisier
//! copy of the one below, written out as JSON-ready rows and a PGM heatmap.

use redunkit::cka::layer_similarity;
use redunkit::report::{render_heatmap_pgm, RunConfig};
use redunkit::synth::PlantedTask;

fn main() -> redunkit::Result<()> {
    let task = PlantedTask {
        tokens: 2000,
        layers: 6,
        layer_size: 24,
        repeat_layer0: true,
        layer_noise: 0.6,
        ..Default::default()
    };
    let (acts, _) = task.generate()?;
    let sim = layer_similarity(&acts, Some(1000), 42)?;

    println!(
        "layer  {}",
        (0..sim.layers())
            .map(|j| format!("{j:>6}"))
            .collect::<String>()
    );
    for (i, row) in sim.rows().iter().enumerate() {
        println!(
            "{i:>5}  {}",
            row.iter().map(|v| format!("{v:>6.3}")).collect::<String>()
        );
    }

    let out = std::env::temp_dir().join("layer_similarity.pgm");
    std::fs::write(&out, render_heatmap_pgm(&sim, &RunConfig::new("example")))?;
    println!("heatmap written to {}", out.display());
    Ok(())
}
