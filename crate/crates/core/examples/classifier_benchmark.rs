//! Probe training time against feature count on a synthetic design
//! matrix. Pass a token count to change the problem size.

use redunkit::bench::benchmark_classifier;
use redunkit::probe::ProbeConfig;

fn main() -> redunkit::Result<()> {
    let tokens = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(20_000);
    let rows = benchmark_classifier(
        &[10, 100, 300, 1000, 3000],
        tokens,
        &ProbeConfig::default(),
        3,
    )?;
    println!("{tokens} tokens, 10 epochs, mean of 3 runs");
    for r in &rows {
        println!("{:>6} features: {:>8.3}s", r.features, r.seconds);
    }
    let first = rows.first().expect("rows");
    let last = rows.last().expect("rows");
    println!(
        "speedup {}->{} features: {:.1}x",
        last.features,
        first.features,
        last.seconds / first.seconds
    );
    Ok(())
}
