//! Monte Carlo summaries shared by the branching-walk and percolation
//! samplers: seeded streams, bootstrap standard errors, and least squares.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Number of bootstrap replicates used by default.
pub const BOOTSTRAP_REPS: usize = 400;

/// Independent generator for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Sample mean of a complex statistic with a bootstrap interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CharEstimate {
    pub value: Complex64,
    /// Bootstrap standard error of the real part.
    pub se_re: f64,
    pub se_im: f64,
    /// Percentile 95% interval of the real part.
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub samples: usize,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn std_dev(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Bootstrap replicate index sets, drawn from stream `u64::MAX` of `seed`.
pub fn bootstrap_indices(n: usize, reps: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = stream_rng(seed, u64::MAX);
    (0..reps)
        .map(|_| (0..n).map(|_| rng.gen_range(0..n)).collect())
        .collect()
}

/// Mean of per-sample values with bootstrap errors.
pub fn bootstrap_mean(values: &[Complex64], reps: usize, seed: u64) -> Result<CharEstimate> {
    if values.len() < 2 {
        return Err(invalid("at least two samples are needed"));
    }
    if reps < 2 {
        return Err(invalid("at least two bootstrap replicates are needed"));
    }
    let n = values.len() as f64;
    let value = values.iter().sum::<Complex64>() / n;
    let mut re = Vec::with_capacity(reps);
    let mut im = Vec::with_capacity(reps);
    for idx in bootstrap_indices(values.len(), reps, seed) {
        let s: Complex64 = idx.iter().map(|&i| values[i]).sum::<Complex64>() / n;
        re.push(s.re);
        im.push(s.im);
    }
    let (se_re, se_im) = (std_dev(&re), std_dev(&im));
    re.sort_by(f64::total_cmp);
    Ok(CharEstimate {
        value,
        se_re,
        se_im,
        ci_lo: percentile(&re, 0.025),
        ci_hi: percentile(&re, 0.975),
        samples: values.len(),
    })
}

/// Ordinary least-squares line `y = a + b x`; returns `(a, b, se_b)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(invalid("linear fit needs at least three paired points"));
    }
    let n = x.len() as f64;
    let (mx, my) = (mean(x), mean(y));
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(invalid("degenerate abscissae"));
    }
    let b = sxy / sxx;
    let a = my - b * mx;
    let rss: f64 = x.iter().zip(y).map(|(u, v)| (v - a - b * u).powi(2)).sum();
    let se_b = (rss / (n - 2.0) / sxx).sqrt();
    Ok((a, b, se_b))
}

/// Root of a monotone function on `[lo, hi]` by bisection, assuming a sign
/// change.
pub fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> Result<f64> {
    let (flo, fhi) = (f(lo), f(hi));
    if flo.signum() == fhi.signum() {
        return Err(invalid(format!(
            "no sign change on [{lo}, {hi}] ({flo}, {fhi})"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid).signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi.abs().max(1.0) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
