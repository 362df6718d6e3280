//! Experiments described in TOML; the echoed configuration parses back to
//! the same value.

use rocket_ci::harness::ExperimentConfig;

const TEXT: &str = r#"
n = 300
replications = 10
alpha = 0.1
base_seed = 17
estimators = ["rocket", "npn"]

[scenario]
radius = "mvt:4"
graph = { kind = "chain", p = 40, rho = 0.5 }
marginals = { cycle = ["identity", "exp"] }

[[edges]]
label = "link"
a = 9
b = 10
"#;

fn main() -> rocket_ci::Result<()> {
    let cfg = ExperimentConfig::from_toml(TEXT)?;
    let echo = cfg.to_toml()?;
    assert_eq!(ExperimentConfig::from_toml(&echo)?, cfg);
    println!("{echo}");
    let report = rocket_ci::harness::run_coverage(&cfg)?;
    for g in &report.aggregates {
        println!("{}: coverage {:.0}% of {}", g.estimator, 100.0 * g.coverage, g.used);
    }
    Ok(())
}
