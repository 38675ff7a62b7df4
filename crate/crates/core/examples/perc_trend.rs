//! Critical clusters in d = 7 conditioned on their size, against the ISE
//! first moment as n grows.
//!
//! The spatial scale is fixed by matching the mean squared radius to that
//! of ISE (per-axis variance `sqrt(pi/2)`), and the characteristic function
//! is then compared along the lattice diagonal.
//!
//! Usage: `perc_trend [samples]` (default 300). Conditioning is by
//! rejection, so the cost per sample grows roughly like n^1.5.

use iselab::ise::moment_characteristic;
use iselab::percolation::{mc_clusters, nu_moment_char, pc_reference, PercModel};
use iselab::quadrature::QuadratureSpec;
use num_rational::BigRational;

fn main() -> iselab::error::Result<()> {
    let samples = std::env::args().nth(1).map_or(300, |a| a.parse().expect("integer argument"));
    let d = 7;
    let (pc, source) = pc_reference(d).expect("tabulated");
    let model = PercModel::nearest_neighbour(d, BigRational::from_float(pc).expect("finite"))?;
    println!("d = {d}, p = {pc} ({source}), {samples} samples per size");

    let q = QuadratureSpec::default();
    let diagonal = |k: f64| vec![k / (d as f64).sqrt(); d];
    let grid = [1.0, 2.0, 3.0];
    let ise: Vec<f64> = grid
        .iter()
        .map(|&k| moment_characteristic(&[diagonal(k)], &q).map(|v| v.value))
        .collect::<Result<_, _>>()?;

    for n in [8, 16, 32, 64, 128] {
        let clusters = mc_clusters(&model, Some(n), n, samples, 1000 + n as u64)?;
        let radius2: f64 = clusters
            .iter()
            .flat_map(|c| c.sites.iter().map(|x| x.coords(d).iter().map(|&a| (a * a) as f64).sum::<f64>()))
            .sum::<f64>()
            / (samples * n) as f64;
        let scale = (std::f64::consts::FRAC_PI_2.sqrt() * d as f64 * (n as f64).sqrt() / radius2).sqrt();
        print!("n = {n:>3}: scale {scale:.3} |");
        for (&k, target) in grid.iter().zip(&ise) {
            let e = nu_moment_char(&clusters, d, &[diagonal(k)], scale, 200, 3)?;
            print!("  k = {k}: {:.4} (ISE {target:.4}, se {:.4})", e.value.re, e.se_re);
        }
        println!();
    }
    Ok(())
}
