//! Joint upper-tail exceedances separate heavy-tailed elliptical data from
//! Gaussian data with the same correlation.

use rocket_ci::synth::{empirical_tail_dependence, sample_elliptical, RadiusLaw};
use rocket_ci::{CorrelationMatrix, SquareMatrix};

fn main() -> rocket_ci::Result<()> {
    let sigma = CorrelationMatrix::new(SquareMatrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 1.0]])?)?;
    let gauss = sample_elliptical(50_000, &sigma, RadiusLaw::Gaussian, 1)?;
    let heavy = sample_elliptical(50_000, &sigma, RadiusLaw::MultivariateT(3.0), 1)?;
    println!("level  gaussian  mvt(3)");
    for alpha in [0.5, 0.8, 0.9, 0.95, 0.98, 0.99] {
        println!(
            "{alpha:<5}  {:.4}    {:.4}",
            empirical_tail_dependence(&gauss, 0, 1, alpha)?,
            empirical_tail_dependence(&heavy, 0, 1, alpha)?
        );
    }
    Ok(())
}
