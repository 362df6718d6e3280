//! Coverage under cell-wise contamination.

use rocket_ci::harness::config::presets;
use rocket_ci::harness::{run_coverage, Estimator};
use rocket_ci::synth::{ContaminationSpec, GraphSpec, Mechanism, RadiusLaw};

fn main() -> rocket_ci::Result<()> {
    for mechanism in [Mechanism::Element, Mechanism::RandomRow, Mechanism::DeterministicRow] {
        let mut cfg = presets::coverage();
        cfg.scenario.graph = GraphSpec::grid(6, 0.24);
        cfg.scenario.radius = RadiusLaw::Gaussian;
        cfg.scenario.contamination = Some(ContaminationSpec::new(mechanism, 0.05, 0));
        cfg.edges = presets::default_edges(&cfg.scenario.graph);
        cfg.estimators = vec![Estimator::Rocket, Estimator::Pearson];
        cfg.replications = 30;
        cfg.base_seed = 5;
        let report = run_coverage(&cfg)?;
        for g in report.aggregates.iter().filter(|g| g.edge == "edge") {
            println!("{mechanism:?} 5%: {:<8} coverage {:5.1}%", g.estimator.to_string(), 100.0 * g.coverage);
        }
    }
    Ok(())
}
