//! ISE m-point functions: spatial densities, total masses and transforms.

use iselab::ise::{m_point, m_point_hat_sq, m_point_total_mass, moment_characteristic, two_point};
use iselab::quadrature::QuadratureSpec;
use iselab::shapes::enumerate_shapes;

fn main() -> iselab::error::Result<()> {
    let q = QuadratureSpec::default();

    println!("two-point density A2(x), d = 1");
    for x in [0.0, 0.5, 1.0, 2.0, 3.0] {
        let a = two_point(&[x], &q)?;
        println!("  x = {x:>3}: {:.10} (+- {:.1e})", a.value, a.error);
    }

    println!("\ntotal mass per shape (d = 1) and transform at k = 0");
    for m in 2..=4 {
        let shape = &enumerate_shapes(m)?[0];
        let mass = m_point_total_mass(shape, 1, &q)?;
        let hat = m_point_hat_sq(shape, &vec![0.0; shape.edge_count()], &q)?;
        println!("  m = {m}: mass {:.8}, hat {:.12}", mass.value, hat.value);
    }

    let three = &enumerate_shapes(3)?[0];
    let y = vec![vec![0.3], vec![-0.2], vec![0.5]];
    println!("\nthree-point density at y = {y:?}: {:.8}", m_point(three, &y, &q)?.value);

    println!("\nfirst moment characteristic of ISE in d = 2");
    for k in [0.0, 0.5, 1.0, 2.0, 3.0] {
        println!("  |k| = {k}: {:.8}", moment_characteristic(&[vec![k, 0.0]], &q)?.value);
    }
    Ok(())
}
