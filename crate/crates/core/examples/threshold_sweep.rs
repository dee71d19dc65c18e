//! Probe accuracy of the clustered representatives across thresholds:
//! redundant copies can be dropped with little loss until real signals
//! start to merge.

use redunkit::clustering::{reduce, threshold_sweep, ReduceStrategy};
use redunkit::correlation::pearson_matrix;
use redunkit::labels::{LabeledDataset, TaskKind, DEV};
use redunkit::probe::{evaluate, train, ProbeConfig};
use redunkit::synth::planted_groups;

fn main() -> redunkit::Result<()> {
    let (acts, _) = planted_groups(20, 5, 20_000, 0.05, 1)?;
    let labels: Vec<&str> = (0..acts.num_tokens())
        .map(|t| {
            if acts.value(0, t, 0) + acts.value(0, t, 1) - acts.value(0, t, 2) > 0.0 {
                "pos"
            } else {
                "neg"
            }
        })
        .collect();
    let data = LabeledDataset::from_labels(&labels, TaskKind::TokenLabeling)?
        .with_fraction_split(0.8, 0.1, 0.1)?;
    let corr = pearson_matrix(&acts.all_neurons())?;
    let cfg = ProbeConfig::default();

    let thresholds = [0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 0.95, 1.0];
    let rows = threshold_sweep(&corr, &thresholds, |clustering| {
        let view = reduce(&acts, clustering, ReduceStrategy::FirstIndex, 0)?;
        let model = train(&view, &data, &cfg)?;
        Ok(evaluate(&model, &view, &data, DEV)?.accuracy)
    })?;
    println!("{:>5} {:>9} {:>9}", "c_t", "retained", "accuracy");
    for r in rows {
        println!("{:>5} {:>9} {:>9.4}", r.threshold, r.retained, r.accuracy);
    }
    Ok(())
}
