//! The rank-based estimator next to the Pearson, nonparanormal and
//! pseudo-score alternatives on the same data set.

use rocket_ci::harness::estimators::evaluate_targets;
use rocket_ci::harness::Estimator;
use rocket_ci::lasso::LassoConfig;
use rocket_ci::synth::{build_precision, sample_elliptical, GraphSpec, RadiusLaw};

fn main() -> rocket_ci::Result<()> {
    let spec = GraphSpec::grid(8, 0.24);
    let model = build_precision(&spec)?;
    let n = 400;
    let x = sample_elliptical(n, &model.sigma, RadiusLaw::AbsT(5.0), 7)?;
    let (a, b) = (spec.grid_node(2, 2)?, spec.grid_node(2, 3)?);
    let cfg = LassoConfig::with_default_lambda(n, spec.p());

    println!("truth {:.3}", model.omega.get(a, b));
    let out = evaluate_targets(&x, &Estimator::ALL, &[(a, b)], &cfg, 0.05);
    for (est, row) in Estimator::ALL.iter().zip(out) {
        match &row[0] {
            Ok(e) => println!(
                "{est:<13} {:+.3}  [{:+.3}, {:+.3}]  {}",
                e.omega_ab,
                e.ci_lo,
                e.ci_hi,
                e.warnings.labels()
            ),
            Err(err) => println!("{est:<13} failed: {err}"),
        }
    }
    Ok(())
}
