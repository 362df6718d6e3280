//! A small coverage experiment; `rocket simulate coverage` runs the same
//! thing from the command line.

use rocket_ci::harness::config::presets;
use rocket_ci::harness::{run_coverage, Estimator};

fn main() -> rocket_ci::Result<()> {
    let mut cfg = presets::coverage();
    cfg.replications = 40;
    cfg.estimators = vec![Estimator::Rocket, Estimator::Pearson];
    cfg.base_seed = 2024;
    let report = run_coverage(&cfg)?;
    println!("{} replications in {:.1}s on {} threads", cfg.replications, report.runtime_seconds, report.threads);
    for g in &report.aggregates {
        println!(
            "{:<8} {:<15} coverage {:5.1}%  width {:.3}  excluded {}",
            g.estimator.to_string(),
            g.edge,
            100.0 * g.coverage,
            g.mean_width,
            g.excluded
        );
    }
    Ok(())
}
