//! Exact finite-cluster laws, a Monte Carlo check against them, and the
//! mean-field cluster-size exponent from the Galton-Watson progeny law.

use iselab::percolation::{conditioned_shape_check, gw_cluster_law, gw_slope, ClusterLaw, PercModel};
use num_rational::BigRational;
use num_traits::ToPrimitive;

fn main() -> iselab::error::Result<()> {
    let model = PercModel::nearest_neighbour(2, BigRational::new(1.into(), 2.into()))?;
    for n in 1..=5 {
        let law = ClusterLaw::new(&model, n)?;
        println!("P(|C| = {n}) = {} ~ {:.6}", law.size_probability(), law.size_probability().to_f64().unwrap());
    }

    let law = ClusterLaw::new(&model, 3)?;
    println!("\ntau2(x; 3) at p = 1/2:");
    for (x, p) in law.tau2_table() {
        println!("  {:?}: {p}", x.coords(2));
    }

    let check = conditioned_shape_check(&model, 3, 20_000, 11)?;
    println!("\n|C| = 3 shapes, 20000 conditioned samples:");
    for r in &check.rows {
        println!("  {:<28} exact {:.5} observed {:.5} z {:>5.2}", r.shape, r.expected, r.frequency, r.z);
    }

    let fit = gw_slope(&gw_cluster_law(10_000), 100, 10_000)?;
    println!("\nGalton-Watson P(N = n) ~ n^{:.4} on [100, 10000]", fit.slope);
    Ok(())
}
