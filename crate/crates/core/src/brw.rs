//! Critical branching random walk conditioned on total family size, and its
//! empirical moment characteristic functions.
//!
//! Family trees are sampled exactly: `n` i.i.d. offspring counts are drawn
//! conditionally on summing to `n - 1`, and the unique cyclic rotation whose
//! Lukasiewicz path first reaches `-1` at step `n` is read as a preorder
//! code. Each child is displaced from its parent by a uniform
//! nearest-neighbour step.

use num_complex::Complex64;
use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::ise;
use crate::quadrature::QuadratureSpec;
use crate::shapes::enumerate_shapes;
use crate::stats::{bisect, bootstrap_indices, bootstrap_mean, std_dev, stream_rng, CharEstimate};

/// Critical offspring distributions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OffspringLaw {
    /// 0 or 2 children with probability 1/2 each; family sizes are odd.
    Binary,
    /// `P(k) = 2^{-(k+1)}`; conditioned trees are uniform plane trees.
    Geometric,
}

impl OffspringLaw {
    /// Binary when it can produce a family of size `n`, geometric otherwise.
    pub fn for_size(n: usize) -> Self {
        if n % 2 == 1 {
            OffspringLaw::Binary
        } else {
            OffspringLaw::Geometric
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            OffspringLaw::Binary => 1.0,
            OffspringLaw::Geometric => 2.0,
        }
    }

    /// Scale `c` for which the e_1 characteristic of
    /// `c n^{-1/4} x` tends to `hat A^(2)`: depths of uniform vertices are
    /// `sqrt(n)/sigma` times a Rayleigh variable, and each coordinate of a
    /// depth-h walk has variance `h/d`.
    pub fn limiting_scale(&self, d: usize) -> f64 {
        (self.variance().sqrt() * d as f64).sqrt()
    }

    fn admits(&self, n: usize) -> bool {
        n >= 1 && (*self == OffspringLaw::Geometric || n % 2 == 1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BrwConfig {
    pub d: usize,
    /// Total family size (number of particles).
    pub n: usize,
    pub law: OffspringLaw,
    pub seed: u64,
    pub samples: usize,
    /// Multiplies positions after the `n^{-1/4}` rescaling.
    pub scale: f64,
}

impl BrwConfig {
    pub fn new(d: usize, n: usize, samples: usize, seed: u64) -> Self {
        BrwConfig {
            d,
            n,
            law: OffspringLaw::for_size(n),
            seed,
            samples,
            scale: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        if !self.law.admits(self.n) {
            return Err(invalid(format!(
                "the {:?} law cannot produce a family of size {}",
                self.law, self.n
            )));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(invalid("scale must be positive and finite"));
        }
        Ok(())
    }

    fn position_factor(&self) -> f64 {
        self.scale / (self.n as f64).powf(0.25)
    }
}

/// Offspring counts in preorder, conditioned on total size `n`.
pub fn sample_offspring(law: OffspringLaw, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<u32>> {
    if !law.admits(n) {
        return Err(invalid(format!("the {law:?} law cannot produce size {n}")));
    }
    let mut xi = vec![0u32; n];
    match law {
        OffspringLaw::Binary => {
            for i in index::sample(rng, n, (n - 1) / 2) {
                xi[i] = 2;
            }
        }
        OffspringLaw::Geometric => {
            // n - 1 balls in n boxes, uniformly: the conditional law of
            // i.i.d. geometrics given their sum
            if n > 1 {
                let len = 2 * n - 2;
                let mut is_ball = vec![false; len];
                for i in index::sample(rng, len, n - 1) {
                    is_ball[i] = true;
                }
                let mut box_i = 0;
                for b in is_ball {
                    if b {
                        xi[box_i] += 1;
                    } else {
                        box_i += 1;
                    }
                }
            }
        }
    }
    // cycle lemma: start just after the first minimum of the walk
    let (mut walk, mut min, mut at) = (0i64, i64::MAX, 0);
    for (i, &x) in xi.iter().enumerate() {
        walk += x as i64 - 1;
        if walk < min {
            min = walk;
            at = i;
        }
    }
    xi.rotate_left((at + 1) % n);
    Ok(xi)
}

/// Parent indices (root first, `usize::MAX` for the root) from a preorder
/// offspring code.
pub fn parents_from_code(xi: &[u32]) -> Result<Vec<usize>> {
    let n = xi.len();
    if n == 0 {
        return Err(invalid("empty offspring code"));
    }
    let mut parent = vec![usize::MAX; n];
    let mut stack: Vec<(usize, u32)> = Vec::new();
    if xi[0] > 0 {
        stack.push((0, xi[0]));
    }
    for i in 1..n {
        let top = stack
            .last_mut()
            .ok_or_else(|| invalid("offspring code ends early"))?;
        parent[i] = top.0;
        top.1 -= 1;
        if top.1 == 0 {
            stack.pop();
        }
        if xi[i] > 0 {
            stack.push((i, xi[i]));
        }
    }
    if !stack.is_empty() {
        return Err(invalid("offspring code leaves unfinished vertices"));
    }
    Ok(parent)
}

/// Lattice positions (flattened, `d` per particle) of one conditioned
/// branching random walk, stream `index` of `config.seed`.
pub fn sample_positions(config: &BrwConfig, index: u64) -> Result<Vec<i64>> {
    config.validate()?;
    let mut rng = stream_rng(config.seed, index);
    let xi = sample_offspring(config.law, config.n, &mut rng)?;
    let parent = parents_from_code(&xi)?;
    let d = config.d;
    let mut pos = vec![0i64; d * config.n];
    for i in 1..config.n {
        let p = parent[i];
        let step = rng.gen_range(0..2 * d);
        for c in 0..d {
            pos[i * d + c] = pos[p * d + c];
        }
        pos[i * d + step / 2] += if step % 2 == 0 { 1 } else { -1 };
    }
    Ok(pos)
}

/// Equal-mass atoms at scaled positions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMeasure {
    pub d: usize,
    pub points: Vec<Vec<f64>>,
}

impl EmpiricalMeasure {
    pub fn weight(&self) -> f64 {
        1.0 / self.points.len() as f64
    }

    pub fn total_mass(&self) -> f64 {
        self.weight() * self.points.len() as f64
    }

    /// `int e^{i k . x} mu(dx)`.
    pub fn fourier(&self, k: &[f64]) -> Complex64 {
        let s: Complex64 = self
            .points
            .iter()
            .map(|x| Complex64::from_polar(1.0, x.iter().zip(k).map(|(a, b)| a * b).sum()))
            .sum();
        s * self.weight()
    }

    /// l-th moment characteristic of this one measure: `prod_i hat mu(k_i)`.
    pub fn moment_char(&self, k: &[Vec<f64>]) -> Complex64 {
        k.iter().map(|ki| self.fourier(ki)).product()
    }
}

/// One conditioned family, scaled by `n^{-1/4}` and `config.scale`.
pub fn sample_conditioned_tree(config: &BrwConfig, index: u64) -> Result<EmpiricalMeasure> {
    let pos = sample_positions(config, index)?;
    let f = config.position_factor();
    Ok(EmpiricalMeasure {
        d: config.d,
        points: pos
            .chunks(config.d)
            .map(|x| x.iter().map(|&v| v as f64 * f).collect())
            .collect(),
    })
}

fn check_frequencies(k: &[Vec<f64>], d: usize) -> Result<()> {
    if !(1..=2).contains(&k.len()) {
        return Err(invalid("moment order l must be 1 or 2"));
    }
    if k.iter().any(|v| v.len() != d) {
        return Err(invalid(format!("frequencies must have dimension {d}")));
    }
    Ok(())
}

/// Monte Carlo l-th moment characteristic (`l = k.len()` in {1, 2}) over
/// a sample of measures, with bootstrap errors.
pub fn empirical_char(
    measures: &[EmpiricalMeasure],
    k: &[Vec<f64>],
    reps: usize,
    seed: u64,
) -> Result<CharEstimate> {
    let d = measures.first().ok_or_else(|| invalid("no samples"))?.d;
    check_frequencies(k, d)?;
    let values: Vec<Complex64> = measures.iter().map(|m| m.moment_char(k)).collect();
    bootstrap_mean(&values, reps, seed)
}

/// Streams `config.samples` families and estimates the moment
/// characteristic at each frequency tuple without storing the samples.
pub fn brw_char_table(
    config: &BrwConfig,
    k_grid: &[Vec<Vec<f64>>],
    reps: usize,
) -> Result<Vec<CharEstimate>> {
    config.validate()?;
    for k in k_grid {
        check_frequencies(k, config.d)?;
    }
    let per_sample: Vec<Vec<Complex64>> = (0..config.samples as u64)
        .into_par_iter()
        .map(|i| {
            let m = sample_conditioned_tree(config, i)?;
            Ok(k_grid.iter().map(|k| m.moment_char(k)).collect())
        })
        .collect::<Result<_>>()?;
    (0..k_grid.len())
        .map(|j| {
            let v: Vec<Complex64> = per_sample.iter().map(|s| s[j]).collect();
            bootstrap_mean(&v, reps, config.seed)
        })
        .collect()
}

/// Per-sample histograms of the first lattice coordinate. Enough to
/// evaluate the first-moment characteristic along `e_1` at any scale.
#[derive(Clone, Debug)]
pub struct Projections {
    pub n: usize,
    /// Smallest coordinate over all samples.
    pub offset: i64,
    pub width: usize,
    /// Sparse histograms `(coordinate - offset, count)`.
    pub samples: Vec<Vec<(u32, u32)>>,
}

pub fn sample_projections(config: &BrwConfig) -> Result<Projections> {
    config.validate()?;
    let hists: Vec<Vec<(i64, u32)>> = (0..config.samples as u64)
        .into_par_iter()
        .map(|i| {
            let pos = sample_positions(config, i)?;
            let mut xs: Vec<i64> = pos.chunks(config.d).map(|x| x[0]).collect();
            xs.sort_unstable();
            let mut h: Vec<(i64, u32)> = Vec::new();
            for x in xs {
                match h.last_mut() {
                    Some((v, c)) if *v == x => *c += 1,
                    _ => h.push((x, 1)),
                }
            }
            Ok(h)
        })
        .collect::<Result<_>>()?;
    let lo = hists.iter().filter_map(|h| h.first()).map(|x| x.0).min().unwrap_or(0);
    let hi = hists.iter().filter_map(|h| h.last()).map(|x| x.0).max().unwrap_or(0);
    Ok(Projections {
        n: config.n,
        offset: lo,
        width: (hi - lo + 1) as usize,
        samples: hists
            .into_iter()
            .map(|h| h.into_iter().map(|(x, c)| ((x - lo) as u32, c)).collect())
            .collect(),
    })
}

impl Projections {
    /// Pooled histogram over a multiset of sample indices.
    fn pooled(&self, idx: impl Iterator<Item = usize>) -> Vec<f64> {
        let mut h = vec![0.0; self.width];
        for i in idx {
            for &(x, c) in &self.samples[i] {
                h[x as usize] += c as f64;
            }
        }
        h
    }

    // real part of the mean of e^{i kappa x_1} under a pooled histogram
    fn char_re(&self, pooled: &[f64], kappa: f64) -> f64 {
        let total: f64 = pooled.iter().sum();
        pooled
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0.0)
            .map(|(j, &c)| c * (kappa * (j as i64 + self.offset) as f64).cos())
            .sum::<f64>()
            / total
    }

    fn kappa(&self, k: f64, scale: f64) -> f64 {
        k * scale / (self.n as f64).powf(0.25)
    }

    /// Smallest scale at which the pooled characteristic at `k_ref` falls
    /// to `target`.
    fn fit(&self, pooled: &[f64], k_ref: f64, target: f64) -> Result<f64> {
        let f = |c: f64| self.char_re(pooled, self.kappa(k_ref, c)) - target;
        let mut hi = 1e-3;
        while f(hi) > 0.0 {
            hi *= 1.25;
            if hi > 1e6 {
                return Err(invalid("characteristic never reaches the target"));
            }
        }
        bisect(hi / 1.25, hi, f)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub k: f64,
    pub empirical: f64,
    pub target: f64,
    /// Bootstrap SE with the scale refitted in every replicate.
    pub se: f64,
    /// Bootstrap SE at the fixed fitted scale.
    pub se_fixed_scale: f64,
    pub z: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentCheck {
    pub n: usize,
    pub d: usize,
    pub samples: usize,
    pub law: OffspringLaw,
    pub k_ref: f64,
    pub scale: f64,
    pub predicted_scale: f64,
    pub rows: Vec<MomentRow>,
    pub passes: bool,
}

/// Fits the scale so the first-moment characteristic along `e_1` matches
/// `hat A^(2)` at `k_ref`, then compares at every `k` in `k_grid`; a row
/// passes when the difference is within 3 bootstrap standard errors.
pub fn brw_moment_check(
    config: &BrwConfig,
    k_grid: &[f64],
    k_ref: f64,
    reps: usize,
    q: &QuadratureSpec,
) -> Result<MomentCheck> {
    if k_grid.is_empty() || !(k_ref > 0.0) {
        return Err(invalid("need a nonempty grid and a positive reference frequency"));
    }
    let proj = sample_projections(config)?;
    let s2 = enumerate_shapes(2)?.remove(0);
    let target = |k: f64| ise::m_point_hat_sq(&s2, &[k * k], q).map(|v| v.value);
    let t_ref = target(k_ref)?;
    let all = proj.pooled(0..proj.samples.len());
    let scale = proj.fit(&all, k_ref, t_ref)?;
    let mut boot: Vec<Vec<f64>> = vec![Vec::new(); k_grid.len()];
    let mut boot_fixed: Vec<Vec<f64>> = vec![Vec::new(); k_grid.len()];
    for idx in bootstrap_indices(proj.samples.len(), reps, config.seed) {
        let pooled = proj.pooled(idx.into_iter());
        let c = proj.fit(&pooled, k_ref, t_ref)?;
        for (j, &k) in k_grid.iter().enumerate() {
            boot[j].push(proj.char_re(&pooled, proj.kappa(k, c)));
            boot_fixed[j].push(proj.char_re(&pooled, proj.kappa(k, scale)));
        }
    }
    let mut rows = Vec::new();
    for (j, &k) in k_grid.iter().enumerate() {
        let empirical = proj.char_re(&all, proj.kappa(k, scale));
        let t = target(k)?;
        let se = std_dev(&boot[j]);
        rows.push(MomentRow {
            k,
            empirical,
            target: t,
            se,
            se_fixed_scale: std_dev(&boot_fixed[j]),
            z: (empirical - t) / se,
        });
    }
    let passes = rows.iter().all(|r| r.z.abs() <= 3.0);
    Ok(MomentCheck {
        n: config.n,
        d: config.d,
        samples: config.samples,
        law: config.law,
        k_ref,
        scale,
        predicted_scale: config.law.limiting_scale(config.d),
        rows,
        passes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_particle() {
        let c = BrwConfig::new(3, 1, 4, 7);
        let m = sample_conditioned_tree(&c, 0).unwrap();
        assert_eq!(m.points, vec![vec![0.0; 3]]);
        assert_eq!(m.total_mass(), 1.0);
    }

    #[test]
    fn codes_are_trees_of_exact_size() {
        for law in [OffspringLaw::Binary, OffspringLaw::Geometric] {
            for n in [1usize, 3, 9, 101, 1001] {
                let mut rng = stream_rng(11, n as u64);
                for _ in 0..20 {
                    let xi = sample_offspring(law, n, &mut rng).unwrap();
                    assert_eq!(xi.len(), n);
                    assert_eq!(xi.iter().sum::<u32>() as usize, n - 1);
                    let parent = parents_from_code(&xi).unwrap();
                    assert!(parent[1..].iter().enumerate().all(|(i, &p)| p <= i));
                }
            }
        }
        let mut rng = stream_rng(1, 1);
        assert!(sample_offspring(OffspringLaw::Binary, 4, &mut rng).is_err());
        assert!(parents_from_code(&[0, 1]).is_err());
        assert!(parents_from_code(&[2, 0]).is_err());
    }

    #[test]
    fn steps_are_nearest_neighbour() {
        let c = BrwConfig::new(2, 64, 1, 3);
        let pos = sample_positions(&c, 5).unwrap();
        let mut rng = stream_rng(3, 5);
        let xi = sample_offspring(c.law, c.n, &mut rng).unwrap();
        let parent = parents_from_code(&xi).unwrap();
        for i in 1..c.n {
            let p = parent[i];
            let l1: i64 = (0..2).map(|a| (pos[2 * i + a] - pos[2 * p + a]).abs()).sum();
            assert_eq!(l1, 1);
        }
        assert_eq!(pos, sample_positions(&c, 5).unwrap());
    }

    #[test]
    fn characteristic_basics() {
        let c = BrwConfig::new(2, 33, 50, 2);
        let ms: Vec<EmpiricalMeasure> = (0..50).map(|i| sample_conditioned_tree(&c, i).unwrap()).collect();
        let zero = empirical_char(&ms, &[vec![0.0, 0.0]], 100, 1).unwrap();
        assert!((zero.value - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        assert_eq!(zero.ci_hi - zero.ci_lo, 0.0);
        let k = vec![vec![0.7, -0.2], vec![0.1, 0.4]];
        let a = empirical_char(&ms, &k, 100, 1).unwrap();
        let neg: Vec<Vec<f64>> = k.iter().map(|v| v.iter().map(|x| -x).collect()).collect();
        let b = empirical_char(&ms, &neg, 100, 1).unwrap();
        assert!((a.value - b.value.conj()).norm() < 1e-12);
        assert!(empirical_char(&[], &k, 100, 1).is_err());
        assert!(empirical_char(&ms, &[vec![0.0; 3]], 100, 1).is_err());
        let table = brw_char_table(&c, &[vec![vec![0.7, -0.2]]], 100).unwrap();
        let direct = empirical_char(&ms, &[vec![0.7, -0.2]], 100, 2).unwrap();
        assert!((table[0].value - direct.value).norm() < 1e-12);
    }

    #[test]
    fn projections_agree_with_measures() {
        let c = BrwConfig::new(2, 40, 30, 9);
        let p = sample_projections(&c).unwrap();
        let all = p.pooled(0..30);
        let ms: Vec<EmpiricalMeasure> = (0..30).map(|i| sample_conditioned_tree(&c, i).unwrap()).collect();
        let e = empirical_char(&ms, &[vec![0.8, 0.0]], 10, 1).unwrap();
        assert!((p.char_re(&all, p.kappa(0.8, 1.0)) - e.value.re).abs() < 1e-12);
    }
}
