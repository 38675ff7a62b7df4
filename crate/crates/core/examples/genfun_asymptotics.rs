//! Exact generating-function coefficients against their ISE asymptotics.

use iselab::genfun::{b_coeff, verify_eq36, verify_eq37};
use iselab::quadrature::QuadratureSpec;
use iselab::shapes::enumerate_shapes;

fn main() -> iselab::error::Result<()> {
    let q = QuadratureSpec::default();
    for m in 2..=3 {
        let shape = &enumerate_shapes(m)?[0];
        println!("m = {m}, k = 0: c_n / predicted");
        for r in verify_eq36(shape, &vec![0.0; shape.edge_count()], &[25, 100, 400, 1600], &q)? {
            println!("  n = {:>5}  ratio {:.6}  ({})", r.n, r.ratio, r.method);
        }
    }

    let two = &enumerate_shapes(2)?[0];
    println!("\nm = 2, k = 1: c_n(k n^-1/4) / predicted");
    for r in verify_eq36(two, &[1.0], &[100, 400, 1600], &q)? {
        println!("  n = {:>5}  ratio {:.6}", r.n, r.ratio);
    }

    println!("\ntime-resolved, t = 1");
    for r in verify_eq37(two, &[0.0], &[1.0], &[100, 400, 1600, 6400])? {
        println!("  n = {:>5}  ratio {:.5}", r.n, r.ratio);
    }

    println!("\nb_[tn](k n^-1/2) vs exp(-k^2 t / 2) at n = 1000");
    let n = 1000.0;
    for (k2, t) in [(0.5, 1.0), (1.0, 1.0), (2.0, 2.0)] {
        let b = b_coeff(&[(t * n) as u64], &[k2 / n])?;
        println!("  k^2 = {k2}, t = {t}: {b:.6} vs {:.6}", (-k2 * t / 2.0f64).exp());
    }
    Ok(())
}
