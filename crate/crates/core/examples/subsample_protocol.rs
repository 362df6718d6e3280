//! Disjoint-subsample check of the normal approximation: the statistics
//! `sqrt(n) Omega_hat / S` should vary with variance near 1 across blocks.

use rocket_ci::harness::config::presets;
use rocket_ci::harness::{run_subsample_synthetic, Estimator};

fn main() -> rocket_ci::Result<()> {
    let mut cfg = presets::subsample();
    cfg.estimators = vec![Estimator::Rocket, Estimator::Pearson, Estimator::Npn];
    cfg.base_seed = 8;
    let report = run_subsample_synthetic(&cfg)?;
    println!("L = {}, n_sub = {}, p = {}", report.subsamples, report.n_sub, report.p);
    for s in &report.summaries {
        println!(
            "{:<8} mean sample variance {:.3}  band proportion {:.1}%",
            s.estimator.to_string(),
            s.mean_sample_var,
            100.0 * s.mean_band_proportion
        );
    }
    Ok(())
}
