//! A reduced congestion sweep: 5 seeds, three loads, all three schemes.
//! Pass a directory to also write the CSV tables there.

use cgrlab::experiments::{run_sweep, write_report, MetricName, ScenarioConfig};

fn main() -> cgrlab::Result<()> {
    let mut cfg = ScenarioConfig::reference((1..=5).collect(), vec![1, 5, 10]);
    cfg.workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let result = run_sweep(&cfg)?;

    println!("{:>6} {:>8} {:>10} {:>10} {:>10}", "load", "scheme", "ratio", "efficiency", "delay");
    for load in result.loads() {
        for scheme in result.schemes() {
            let Some(cell) = result.cell(scheme, load) else { continue };
            let mean = |m: MetricName| cell.stat(m).mean.map_or("-".to_string(), |v| format!("{v:.3}"));
            println!(
                "{load:>6} {:>8} {:>10} {:>10} {:>10}",
                scheme.name(),
                mean(MetricName::DeliveryRatio),
                mean(MetricName::EnergyEfficiency),
                mean(MetricName::MeanDelay),
            );
        }
    }

    if let Some(dir) = std::env::args().nth(1) {
        let manifest = write_report(dir.as_ref(), Some(&cfg), &result)?;
        println!("wrote {} files to {dir}", manifest.files.len());
    }
    Ok(())
}
