//! Rejection rates of `Omega_01 = 0` as the coupling `rho` grows.

use rocket_ci::harness::config::presets;
use rocket_ci::harness::run_power;
use rocket_ci::synth::GraphSpec;

fn main() -> rocket_ci::Result<()> {
    let mut cfg = presets::power();
    cfg.scenario.graph = GraphSpec::pair(30, 0.0);
    cfg.replications = 60;
    cfg.n = 200;
    cfg.rho_grid = vec![0.0, 0.1, 0.2, 0.3];
    cfg.base_seed = 3;
    let report = run_power(&cfg)?;
    println!("rho   estimator  power");
    for r in &report.rows {
        println!("{:.2}  {:<9}  {:.3}", r.rho, r.estimator.to_string(), r.power);
    }
    Ok(())
}
