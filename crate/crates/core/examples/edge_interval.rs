//! A confidence interval and test for one precision entry from
//! heavy-tailed data with distorted marginals.

use rocket_ci::edge::rocket_edge;
use rocket_ci::lasso::LassoConfig;
use rocket_ci::synth::{apply_marginals, build_precision, sample_elliptical, GraphSpec, MarginalSet, RadiusLaw};

fn main() -> rocket_ci::Result<()> {
    let spec = GraphSpec::grid(6, 0.24);
    let model = build_precision(&spec)?;
    let (n, p) = (400, spec.p());
    let x = sample_elliptical(n, &model.sigma, RadiusLaw::AbsT(5.0), 42)?;
    let x = apply_marginals(&x, &MarginalSet::standard());
    let cfg = LassoConfig::with_default_lambda(n, p);

    for (a, b) in [(spec.grid_node(2, 2)?, spec.grid_node(2, 3)?), (spec.grid_node(2, 2)?, spec.grid_node(3, 3)?)] {
        let e = rocket_edge(&x, a, b, &cfg, 0.05)?;
        println!(
            "({a},{b}) truth {:+.3}  estimate {:+.3}  95% CI [{:+.3}, {:+.3}]  z {:+.2}  p {:.3}",
            model.omega.get(a, b),
            e.omega_ab,
            e.ci_lo,
            e.ci_hi,
            e.z,
            e.p_value
        );
    }
    Ok(())
}
