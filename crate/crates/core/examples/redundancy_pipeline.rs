//! Layer selection, correlation clustering and feature selection in one run,
//! reported as JSON and as a one-row CSV summary.

use redunkit::pipeline::{run_pipeline, PipelineConfig};
use redunkit::report::{render_json, render_pipeline_csv, RunConfig};
use redunkit::synth::PlantedTask;

fn main() -> redunkit::Result<()> {
    let task = PlantedTask {
        tokens: 20_000,
        layers: 4,
        layer_size: 32,
        informative: (0..5).collect(),
        copies_in_layer: 3,
        repeat_layer0: true,
        ..Default::default()
    };
    let (acts, data) = task.generate()?;
    let cfg = PipelineConfig {
        task: "planted".into(),
        ..Default::default()
    };
    let report = run_pipeline(&acts, &data, &cfg)?;

    println!(
        "oracle {:.4} | layers used {} | clustered {} -> {} | selected {} | reduction {:.1}%",
        report.oracle_acc,
        report.ls.layers_used(),
        report.cc.input_neurons,
        report.cc.retained,
        report.final_neurons,
        100.0 * report.percent_reduction,
    );
    let run = RunConfig::new("example");
    print!("{}", render_pipeline_csv(&report, &run));
    let json = render_json(&report, &run)?;
    println!("report.json is {} bytes", json.len());
    Ok(())
}
