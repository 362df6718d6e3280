//! The synthetic graph designs and their population precision matrices.

use rocket_ci::synth::{build_precision, GraphSpec};

fn main() -> rocket_ci::Result<()> {
    let grid = GraphSpec::grid(10, 0.24);
    let m = build_precision(&grid)?;
    let (a, b) = (grid.grid_node(2, 2)?, grid.grid_node(2, 3)?);
    println!("grid 10x10: Omega[(2,2),(2,3)] = {:.4}", m.omega.get(a, b));
    println!("grid 10x10: Omega[(2,2),(2,2)] = {:.4}", m.omega.get(a, a));

    let chain = build_precision(&GraphSpec::chain(100, 0.5))?;
    println!("chain p=100: Omega[9,10] = {:.4}", chain.omega.get(9, 10));

    let pair = build_precision(&GraphSpec::pair(50, 0.3))?;
    println!(
        "pair p=50, rho=0.3: Sigma[0,1] = {:.2}, Omega[0,1] = {:.4}",
        pair.sigma.get(0, 1),
        pair.omega.get(0, 1)
    );
    Ok(())
}
