//! Recovers planted groups of near-duplicate neurons with average-linkage
//! clustering on `1 - |corr|`, then keeps one neuron per group.

use redunkit::clustering::{reduce, span_histogram, Dendrogram, ReduceStrategy, SPAN_LABELS};
use redunkit::correlation::pearson_matrix;
use redunkit::synth::planted_groups;

fn main() -> redunkit::Result<()> {
    let (acts, planted) = planted_groups(12, 4, 500, 0.05, 7)?;
    let corr = pearson_matrix(&acts.all_neurons())?;
    let dendrogram = Dendrogram::average_linkage(&corr);

    for ct in [0.0, 0.05, 0.3, 0.9, 1.0] {
        let c = dendrogram.cut(ct)?;
        println!("c_t = {ct:<4}  clusters = {:>2}", c.len());
    }

    let clustering = dendrogram.cut(0.3)?;
    let recovered = clustering
        .clusters
        .iter()
        .all(|c| planted.iter().any(|g| g == c));
    println!(
        "{} planted groups, recovered exactly: {recovered}",
        planted.len()
    );
    println!("group of neuron 0: {:?}", clustering.clusters[0]);

    let kept = reduce(&acts, &clustering, ReduceStrategy::SeededRandom, 3)?;
    println!(
        "reduced view keeps {} of {} neurons",
        kept.num_features(),
        acts.total_neurons()
    );

    let hist = span_histogram(&clustering, acts.layer_size());
    for (label, f) in SPAN_LABELS.iter().zip(hist.fractions) {
        println!("clusters spanning {label}: {:.0}%", 100.0 * f);
    }
    Ok(())
}
