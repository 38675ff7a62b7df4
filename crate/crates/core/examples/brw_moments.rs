//! Conditioned branching random walk against the ISE first moment.
//!
//! Usage: `brw_moments [n] [samples]` (defaults 1025 and 2000).

use iselab::brw::{brw_moment_check, BrwConfig};
use iselab::quadrature::QuadratureSpec;
use iselab::stats::BOOTSTRAP_REPS;

fn main() -> iselab::error::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().expect("integer argument"));
    let n = args.next().unwrap_or(1025);
    let samples = args.next().unwrap_or(2000);

    let config = BrwConfig::new(2, n, samples, 7);
    let check = brw_moment_check(&config, &[0.5, 1.0, 1.5, 2.0, 3.0], 1.25, BOOTSTRAP_REPS, &QuadratureSpec::default())?;
    println!(
        "n = {n}, {samples} samples, {:?} offspring: fitted scale {:.4}, predicted {:.4}",
        check.law, check.scale, check.predicted_scale
    );
    println!("{:>5} {:>10} {:>10} {:>9} {:>6}", "k", "empirical", "ISE", "se", "z");
    for r in &check.rows {
        println!("{:>5} {:>10.5} {:>10.5} {:>9.2e} {:>6.2}", r.k, r.empirical, r.target, r.se, r.z);
    }
    println!("within 3 se everywhere: {}", check.passes);
    Ok(())
}
