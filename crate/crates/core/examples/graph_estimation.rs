//! Recovering a chain graph from p-values over all node pairs.

use rocket_ci::harness::estimate_graph;
use rocket_ci::lasso::LassoConfig;
use rocket_ci::synth::{build_precision, sample_elliptical, GraphSpec, RadiusLaw};

fn main() -> rocket_ci::Result<()> {
    let p = 15;
    let model = build_precision(&GraphSpec::chain(p, 0.5))?;
    let x = sample_elliptical(1000, &model.sigma, RadiusLaw::AbsT(5.0), 11)?;
    let g = estimate_graph(&x, &[1e-3, 1e-4], &LassoConfig::with_default_lambda(1000, p))?;
    for (t, edges) in g.thresholds.iter().zip(&g.edges) {
        let hits = edges.iter().filter(|(a, b)| b - a == 1).count();
        println!(
            "p < {t}: {} edges, {hits} of {} chain links, {} false",
            edges.len(),
            p - 1,
            edges.len() - hits
        );
    }
    Ok(())
}
