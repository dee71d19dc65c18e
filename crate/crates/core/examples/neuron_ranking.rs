//! Ranks neurons by probe weight magnitude and searches for the smallest
//! top-ranked prefix that keeps 97% of the full probe's accuracy.

use redunkit::labels::DEV;
use redunkit::probe::{evaluate, train, ProbeConfig};
use redunkit::ranking::{default_schedule, rank, rank_with, Importance, MinimalSetSearch};
use redunkit::synth::PlantedTask;

fn main() -> redunkit::Result<()> {
    let informative: Vec<usize> = (0..10).map(|i| i * 6 + 1).collect();
    let task = PlantedTask {
        tokens: 8000,
        layer_size: 64,
        informative: informative.clone(),
        ..Default::default()
    };
    let (acts, data) = task.generate()?;
    let cfg = ProbeConfig::default();

    let view = acts.all_neurons();
    let model = train(&view, &data, &cfg)?;
    let oracle = evaluate(&model, &view, &data, DEV)?.accuracy;
    let ranking = rank(&model);
    println!("planted: {informative:?}");
    println!(
        "top 10:  {:?}",
        ranking.top(10).iter().map(|n| n.0).collect::<Vec<_>>()
    );
    println!(
        "per-class share top 3: {:?}",
        rank_with(&model, Importance::PerClassShare).top(3)
    );

    let schedule = default_schedule(view.num_features());
    let search = MinimalSetSearch {
        oracle_accuracy: oracle,
        retention: 0.97,
        schedule: &schedule,
        split: DEV,
    };
    match search.run(&view, &data, &ranking, &cfg)? {
        Ok(found) => {
            for p in &found.search_trace {
                println!("  top {:>3}: {:.4}", p.size, p.accuracy);
            }
            println!(
                "minimal set: {} neurons, retention {:.4}",
                found.selected.len(),
                found.retention
            );
        }
        Err(failure) => println!(
            "no prefix reached the target; best retention {:.4}",
            failure.best_retention
        ),
    }
    Ok(())
}
