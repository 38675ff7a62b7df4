//! Bernoulli bond percolation: exact cluster laws for small sizes, Monte
//! Carlo clusters conditioned on size, their moment characteristic
//! functions, and the mean-field Galton-Watson total-progeny law.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use rayon::prelude::*;
use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lattice::Flavor;
use crate::stats::{bootstrap_mean, linear_fit, stream_rng, CharEstimate};

pub const PERC_MAX_DIM: usize = 8;
/// Largest number of animals the exact enumeration will hold.
pub const ANIMAL_BUDGET: usize = 3_000_000;
/// Rejection attempts allowed per accepted conditioned sample.
pub const MAX_ATTEMPTS: u64 = 5_000_000;

/// Site of `Z^d`, `d <= PERC_MAX_DIM`; unused coordinates are zero.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Point(pub [i32; PERC_MAX_DIM]);

impl Point {
    pub const ORIGIN: Point = Point([0; PERC_MAX_DIM]);

    pub fn new(coords: &[i64]) -> Result<Point> {
        if coords.len() > PERC_MAX_DIM {
            return Err(invalid(format!("at most {PERC_MAX_DIM} coordinates")));
        }
        let mut p = [0i32; PERC_MAX_DIM];
        for (a, &c) in p.iter_mut().zip(coords) {
            *a = i32::try_from(c).map_err(|_| invalid("coordinate out of range"))?;
        }
        Ok(Point(p))
    }

    pub fn coords(&self, d: usize) -> Vec<i64> {
        self.0[..d].iter().map(|&c| c as i64).collect()
    }

    fn add(self, o: Point) -> Point {
        let mut r = self.0;
        for (a, b) in r.iter_mut().zip(o.0) {
            *a += b;
        }
        Point(r)
    }

    fn sub(self, o: Point) -> Point {
        let mut r = self.0;
        for (a, b) in r.iter_mut().zip(o.0) {
            *a -= b;
        }
        Point(r)
    }

    fn dot(&self, k: &[f64]) -> f64 {
        k.iter().zip(self.0).map(|(a, b)| a * b as f64).sum()
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

/// Bond percolation on `Z^d` with an exact rational bond probability.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PercModel {
    pub d: usize,
    pub flavor: Flavor,
    pub range: usize,
    pub p: BigRational,
}

impl PercModel {
    pub fn nearest_neighbour(d: usize, p: BigRational) -> Result<Self> {
        let m = PercModel {
            d,
            flavor: Flavor::NearestNeighbour,
            range: 1,
            p,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn spread_out(d: usize, range: usize, p: BigRational) -> Result<Self> {
        let m = PercModel {
            d,
            flavor: Flavor::SpreadOut,
            range,
            p,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=PERC_MAX_DIM).contains(&self.d) {
            return Err(invalid(format!("dimension must be in 1..={PERC_MAX_DIM}")));
        }
        if self.flavor == Flavor::SpreadOut && self.range == 0 {
            return Err(invalid("spread-out range must be at least 1"));
        }
        if self.p < BigRational::zero() || self.p > BigRational::one() {
            return Err(invalid("p must lie in [0, 1]"));
        }
        if self.degree() > 100_000 {
            return Err(Error::ResourceLimit("neighbourhood too large".into()));
        }
        Ok(())
    }

    pub fn p_f64(&self) -> f64 {
        self.p.to_f64().unwrap_or(f64::NAN)
    }

    /// Number of bonds at each site.
    pub fn degree(&self) -> usize {
        match self.flavor {
            Flavor::NearestNeighbour => 2 * self.d,
            Flavor::SpreadOut => (2 * self.range + 1).pow(self.d as u32) - 1,
        }
    }

    /// Neighbour offsets in lexicographic order.
    pub fn offsets(&self) -> Vec<Point> {
        let mut out = Vec::new();
        match self.flavor {
            Flavor::NearestNeighbour => {
                for i in 0..self.d {
                    for s in [-1, 1] {
                        let mut p = Point::ORIGIN;
                        p.0[i] = s;
                        out.push(p);
                    }
                }
            }
            Flavor::SpreadOut => {
                let l = self.range as i32;
                let mut cur = vec![-l; self.d];
                loop {
                    if cur.iter().any(|&c| c != 0) {
                        let mut p = Point::ORIGIN;
                        p.0[..self.d].copy_from_slice(&cur);
                        out.push(p);
                    }
                    let mut i = self.d;
                    loop {
                        if i == 0 {
                            out.sort();
                            return out;
                        }
                        i -= 1;
                        if cur[i] < l {
                            cur[i] += 1;
                            break;
                        }
                        cur[i] = -l;
                    }
                }
            }
        }
        out.sort();
        out
    }
}

/// Literature estimates of `p_c` for nearest-neighbour bond percolation.
pub fn pc_reference(d: usize) -> Option<(f64, &'static str)> {
    match d {
        2 => Some((0.5, "exact (Kesten)")),
        3 => Some((0.248_811_8, "Monte Carlo literature value")),
        4 => Some((0.160_131_4, "Monte Carlo literature value")),
        5 => Some((0.118_171_8, "Monte Carlo literature value")),
        6 => Some((0.094_201_9, "Monte Carlo literature value")),
        7 => Some((0.078_675_2, "Monte Carlo literature value")),
        _ => None,
    }
}

/// Mean-field approximation `1 / (z - 1)` to `p_c` for a lattice of
/// coordination number `z`.
pub fn pc_bethe(model: &PercModel) -> f64 {
    1.0 / (model.degree() as f64 - 1.0)
}

/// Number of connected spanning subgraphs with `j` edges, for each `j`, of
/// a multigraph on vertices `0..vn`, by deletion-contraction.
pub fn spanning_connected_counts(vn: usize, edges: &[(usize, usize)]) -> Vec<u64> {
    let mut memo = FxHashMap::default();
    let key = canonical(vn, edges);
    counts_rec(key, &mut memo)
}

type GraphKey = (usize, Vec<(u8, u8)>);

fn canonical(vn: usize, edges: &[(usize, usize)]) -> GraphKey {
    let mut label = vec![u8::MAX; vn];
    let mut next = 0u8;
    let mut out: Vec<(u8, u8)> = Vec::with_capacity(edges.len());
    for &(a, b) in edges {
        for v in [a, b] {
            if label[v] == u8::MAX {
                label[v] = next;
                next += 1;
            }
        }
        let (x, y) = (label[a], label[b]);
        out.push((x.min(y), x.max(y)));
    }
    // unlabelled (isolated) vertices still count towards vn
    out.sort_unstable();
    (vn, out)
}

fn counts_rec(key: GraphKey, memo: &mut FxHashMap<GraphKey, Vec<u64>>) -> Vec<u64> {
    if let Some(v) = memo.get(&key) {
        return v.clone();
    }
    let (vn, edges) = &key;
    let e = edges.len();
    let mut res = vec![0u64; e + 1];
    if *vn == 1 {
        // every edge is a loop
        let mut c = 1u64;
        for (j, r) in res.iter_mut().enumerate() {
            *r = c;
            c = c * (e - j) as u64 / (j as u64 + 1);
        }
    } else if e + 1 >= *vn {
        let (a, b) = edges[e - 1];
        let rest: Vec<(usize, usize)> = edges[..e - 1].iter().map(|&(x, y)| (x as usize, y as usize)).collect();
        let without = counts_rec(canonical(*vn, &rest), memo);
        if a == b {
            for j in 0..e {
                res[j] += without[j];
                res[j + 1] += without[j];
            }
        } else {
            // contract b into a, then close up the labels
            let (a, b) = (a as usize, b as usize);
            let merged: Vec<(usize, usize)> = rest
                .iter()
                .map(|&(x, y)| {
                    let f = |v: usize| {
                        let v = if v == b { a } else { v };
                        if v > b {
                            v - 1
                        } else {
                            v
                        }
                    };
                    (f(x), f(y))
                })
                .collect();
            let with = counts_rec(canonical(*vn - 1, &merged), memo);
            for j in 0..e {
                res[j] += without[j];
                res[j + 1] += with[j];
            }
        }
    }
    memo.insert(key, res.clone());
    res
}

/// A connected site set containing the origin, with its bond data.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Animal {
    /// Sorted sites.
    pub sites: Vec<Point>,
    /// Bonds with both ends in the animal.
    pub internal_bonds: usize,
    /// Bonds with exactly one end in the animal.
    pub boundary_bonds: usize,
    /// `a_j`: connected spanning subgraphs with `j` open bonds.
    pub reliability: Vec<u64>,
}

impl Animal {
    /// `P(C(0) = S) = sum_j a_j p^j (1-p)^{E-j} (1-p)^{boundary}`.
    pub fn probability(&self, p: &BigRational) -> BigRational {
        let q = BigRational::one() - p;
        let e = self.internal_bonds;
        let mut acc = BigRational::zero();
        for (j, &a) in self.reliability.iter().enumerate() {
            if a > 0 {
                acc += BigRational::from_integer(BigInt::from(a))
                    * pow(p, j)
                    * pow(&q, e - j + self.boundary_bonds);
            }
        }
        acc
    }

    /// Representative of the translation class: shifted so the smallest site
    /// is the origin.
    pub fn shape(&self) -> Vec<Point> {
        let base = self.sites[0];
        self.sites.iter().map(|s| s.sub(base)).collect()
    }
}

fn pow(x: &BigRational, e: usize) -> BigRational {
    num_traits::pow(x.clone(), e)
}

fn bond_data(sites: &[Point], offsets: &[Point]) -> (Vec<(usize, usize)>, usize) {
    let index: FxHashMap<Point, usize> = sites.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let mut internal = Vec::new();
    let mut boundary = 0;
    for (i, s) in sites.iter().enumerate() {
        for o in offsets {
            match index.get(&s.add(*o)) {
                Some(&j) if j > i => internal.push((i, j)),
                Some(_) => {}
                None => boundary += 1,
            }
        }
    }
    (internal, boundary)
}

/// All animals of `n` sites containing the origin, in sorted order.
pub fn enumerate_animals(model: &PercModel, n: usize) -> Result<Vec<Animal>> {
    model.validate()?;
    if n == 0 {
        return Err(invalid("cluster size must be at least 1"));
    }
    let offsets = model.offsets();
    let mut level: FxHashSet<Vec<Point>> = FxHashSet::default();
    level.insert(vec![Point::ORIGIN]);
    for _ in 1..n {
        let mut next: FxHashSet<Vec<Point>> = FxHashSet::default();
        for set in &level {
            for s in set {
                for o in &offsets {
                    let x = s.add(*o);
                    if let Err(pos) = set.binary_search(&x) {
                        let mut grown = set.clone();
                        grown.insert(pos, x);
                        next.insert(grown);
                    }
                }
            }
            if next.len() > ANIMAL_BUDGET {
                return Err(Error::ResourceLimit(format!(
                    "more than {ANIMAL_BUDGET} animals of size {n}"
                )));
            }
        }
        level = next;
    }
    let mut sets: Vec<Vec<Point>> = level.into_iter().collect();
    sets.sort();
    Ok(sets
        .into_par_iter()
        .map(|sites| {
            let (internal, boundary) = bond_data(&sites, &offsets);
            let reliability = spanning_connected_counts(sites.len(), &internal);
            Animal {
                internal_bonds: internal.len(),
                boundary_bonds: boundary,
                reliability,
                sites,
            }
        })
        .collect())
}

/// Exact law of `C(0)` restricted to `|C(0)| = n`.
#[derive(Clone, Debug)]
pub struct ClusterLaw {
    pub model: PercModel,
    pub n: usize,
    pub animals: Vec<Animal>,
    pub probabilities: Vec<BigRational>,
}

impl ClusterLaw {
    pub fn new(model: &PercModel, n: usize) -> Result<Self> {
        let animals = enumerate_animals(model, n)?;
        let probabilities = animals.par_iter().map(|a| a.probability(&model.p)).collect();
        Ok(ClusterLaw {
            model: model.clone(),
            n,
            animals,
            probabilities,
        })
    }

    /// `P(|C(0)| = n)`.
    pub fn size_probability(&self) -> BigRational {
        self.probabilities.iter().fold(BigRational::zero(), |a, b| a + b)
    }

    /// `tau^(2)(x; n) = P(x in C(0), |C(0)| = n)`.
    pub fn tau2(&self, x: Point) -> BigRational {
        self.sum_where(|a| a.sites.binary_search(&x).is_ok())
    }

    /// `tau^(3)(x, y; n) = P(x, y in C(0), |C(0)| = n)`.
    pub fn tau3(&self, x: Point, y: Point) -> BigRational {
        self.sum_where(|a| a.sites.binary_search(&x).is_ok() && a.sites.binary_search(&y).is_ok())
    }

    fn sum_where(&self, f: impl Fn(&Animal) -> bool) -> BigRational {
        self.animals
            .iter()
            .zip(&self.probabilities)
            .filter(|(a, _)| f(a))
            .fold(BigRational::zero(), |acc, (_, p)| acc + p)
    }

    /// `x -> tau^(2)(x; n)` over all reachable `x`.
    pub fn tau2_table(&self) -> BTreeMap<Point, BigRational> {
        let mut out: BTreeMap<Point, BigRational> = BTreeMap::new();
        for (a, p) in self.animals.iter().zip(&self.probabilities) {
            for s in &a.sites {
                *out.entry(*s).or_insert_with(BigRational::zero) += p;
            }
        }
        out
    }

    /// `hat tau^(2)(k; n)` in floating point.
    pub fn tau2_hat(&self, k: &[f64]) -> Complex64 {
        self.tau2_table()
            .iter()
            .map(|(x, p)| Complex64::from_polar(p.to_f64().unwrap_or(f64::NAN), x.dot(k)))
            .sum()
    }

    /// Conditional law of the translation class of `C(0)` given `|C(0)| = n`.
    pub fn shape_law(&self) -> Result<BTreeMap<Vec<Point>, BigRational>> {
        let total = self.size_probability();
        if total.is_zero() {
            return Err(invalid("size n has probability zero"));
        }
        let mut out: BTreeMap<Vec<Point>, BigRational> = BTreeMap::new();
        for (a, p) in self.animals.iter().zip(&self.probabilities) {
            *out.entry(a.shape()).or_insert_with(BigRational::zero) += p;
        }
        for v in out.values_mut() {
            *v = &*v / &total;
        }
        Ok(out)
    }
}

pub fn exact_tau2(model: &PercModel, x: Point, n: usize) -> Result<BigRational> {
    Ok(ClusterLaw::new(model, n)?.tau2(x))
}

pub fn exact_tau3(model: &PercModel, x: Point, y: Point, n: usize) -> Result<BigRational> {
    Ok(ClusterLaw::new(model, n)?.tau3(x, y))
}

/// One realization of `C(0)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClusterSample {
    /// Sites in order of discovery, origin first.
    pub sites: Vec<Point>,
    /// Open bonds found during exploration.
    pub open_bonds: usize,
    /// Closed bonds with exactly one end in the cluster.
    pub boundary_closed: usize,
    /// Attempts spent on this sample (1 when unconditioned).
    pub attempts: u64,
}

impl ClusterSample {
    pub fn size(&self) -> usize {
        self.sites.len()
    }
}

// Breadth-first growth deciding each bond when first examined. Gives up
// (returns None) once the cluster exceeds `cap` sites.
fn grow(offsets: &[Point], p: f64, cap: usize, rng: &mut impl Rng) -> Option<ClusterSample> {
    let mut order = vec![Point::ORIGIN];
    let mut member: FxHashSet<Point> = FxHashSet::default();
    member.insert(Point::ORIGIN);
    let mut processed: FxHashSet<Point> = FxHashSet::default();
    let mut queue = VecDeque::from([Point::ORIGIN]);
    let mut open = 0;
    while let Some(a) = queue.pop_front() {
        for o in offsets {
            let b = a.add(*o);
            if processed.contains(&b) {
                continue;
            }
            if rng.gen::<f64>() < p {
                open += 1;
                if member.insert(b) {
                    if member.len() > cap {
                        return None;
                    }
                    order.push(b);
                    queue.push_back(b);
                }
            }
        }
        processed.insert(a);
    }
    let boundary_closed = order
        .iter()
        .map(|a| offsets.iter().filter(|o| !member.contains(&a.add(**o))).count())
        .sum();
    Some(ClusterSample {
        sites: order,
        open_bonds: open,
        boundary_closed,
        attempts: 1,
    })
}

/// Seeded cluster samples; sample `i` uses stream `i` of `seed`. With
/// `n_target`, attempts are repeated until `|C(0)| = n_target`; otherwise
/// clusters larger than `cap` are rejected.
pub fn mc_clusters(
    model: &PercModel,
    n_target: Option<usize>,
    cap: usize,
    samples: usize,
    seed: u64,
) -> Result<Vec<ClusterSample>> {
    model.validate()?;
    let p = model.p_f64();
    if n_target == Some(0) || cap == 0 {
        return Err(invalid("sizes must be positive"));
    }
    let offsets = model.offsets();
    let cap = n_target.map_or(cap, |n| n.min(cap));
    (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i);
            for attempt in 1..=MAX_ATTEMPTS {
                if let Some(mut c) = grow(&offsets, p, cap, &mut rng) {
                    if n_target.map_or(true, |n| c.size() == n) {
                        c.attempts = attempt;
                        return Ok(c);
                    }
                }
            }
            Err(Error::ResourceLimit(format!(
                "acceptance rate below {:.1e} for target size {n_target:?} at p = {p}",
                1.0 / MAX_ATTEMPTS as f64
            )))
        })
        .collect()
}

/// Monte Carlo `nu_n` moment characteristic at `k * scale * n^{-1/4}` for
/// `l = k.len()` in {1, 2}.
pub fn nu_moment_char(
    samples: &[ClusterSample],
    d: usize,
    k: &[Vec<f64>],
    scale: f64,
    reps: usize,
    seed: u64,
) -> Result<CharEstimate> {
    let n = samples.first().ok_or_else(|| invalid("no samples"))?.size();
    if samples.iter().any(|s| s.size() != n) {
        return Err(invalid("samples have different sizes"));
    }
    if !(1..=2).contains(&k.len()) || k.iter().any(|v| v.len() != d) {
        return Err(invalid(format!("need one or two frequencies of dimension {d}")));
    }
    let f = scale / (n as f64).powf(0.25);
    let scaled: Vec<Vec<f64>> = k.iter().map(|v| v.iter().map(|x| x * f).collect()).collect();
    let values: Vec<Complex64> = samples
        .iter()
        .map(|s| {
            scaled
                .iter()
                .map(|ki| s.sites.iter().map(|x| Complex64::from_polar(1.0, x.dot(ki))).sum::<Complex64>() / n as f64)
                .product()
        })
        .collect();
    bootstrap_mean(&values, reps, seed)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeRow {
    pub shape: String,
    pub exact: String,
    pub expected: f64,
    pub observed: u64,
    pub frequency: f64,
    pub sigma: f64,
    pub z: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeCheck {
    pub n: usize,
    pub samples: usize,
    pub rows: Vec<ShapeRow>,
    pub max_abs_z: f64,
    pub passes: bool,
}

/// Compares conditioned Monte Carlo frequencies of each cluster shape
/// (translation class) with the exact conditional law; a shape passes when
/// within 3 binomial standard deviations.
pub fn conditioned_shape_check(model: &PercModel, n: usize, samples: usize, seed: u64) -> Result<ShapeCheck> {
    let law = ClusterLaw::new(model, n)?.shape_law()?;
    let mc = mc_clusters(model, Some(n), n, samples, seed)?;
    let mut counts: BTreeMap<Vec<Point>, u64> = BTreeMap::new();
    for c in &mc {
        let mut s = c.sites.clone();
        s.sort();
        let base = s[0];
        *counts.entry(s.iter().map(|x| x.sub(base)).collect()).or_insert(0) += 1;
    }
    let mut rows = Vec::new();
    let mut unexpected = 0;
    for shape in counts.keys() {
        if !law.contains_key(shape) {
            unexpected += 1;
        }
    }
    let nn = samples as f64;
    for (shape, p) in &law {
        let expected = p.to_f64().unwrap_or(f64::NAN);
        let observed = counts.get(shape).copied().unwrap_or(0);
        let frequency = observed as f64 / nn;
        let sigma = (expected * (1.0 - expected) / nn).sqrt();
        let z = if sigma > 0.0 { (frequency - expected) / sigma } else { 0.0 };
        let label: Vec<String> = shape
            .iter()
            .map(|x| {
                let c: Vec<String> = x.coords(model.d).iter().map(|v| v.to_string()).collect();
                format!("({})", c.join(" "))
            })
            .collect();
        rows.push(ShapeRow {
            shape: label.join(" "),
            exact: format!("{}/{}", p.numer(), p.denom()),
            expected,
            observed,
            frequency,
            sigma,
            z,
        });
    }
    let max_abs_z = rows.iter().map(|r| r.z.abs()).fold(0.0, f64::max);
    Ok(ShapeCheck {
        n,
        samples,
        passes: unexpected == 0 && max_abs_z <= 3.0,
        rows,
        max_abs_z,
    })
}

/// `P(N = n)` for `n = 0..=max_n` (entry 0 is zero), where `N` is the total
/// progeny of a critical binary Galton-Watson tree. By the hitting-time
/// formula `P(N = n) = P(S_n = n - 1) / n`, with `S_n` the total offspring
/// of `n` individuals: `C(n, (n-1)/2) 2^{-n} / n` for odd `n`.
pub fn gw_cluster_law(max_n: usize) -> Vec<BigRational> {
    let mut out = vec![BigRational::zero(); max_n + 1];
    // b = C(n, (n-1)/2) for odd n, updated in place
    let mut b = BigInt::one();
    let mut n = 1usize;
    while n <= max_n {
        let den = BigInt::from(n) << n;
        out[n] = BigRational::new(b.clone(), den);
        let j = (n - 1) / 2;
        // C(n+2, j+1) = C(n, j) (n+1)(n+2) / ((j+1)(j+2))
        b = b * BigInt::from((n + 1) * (n + 2)) / BigInt::from((j + 1) * (j + 2));
        n += 2;
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub lo: usize,
    pub hi: usize,
    pub slope: f64,
    pub intercept: f64,
    pub se: f64,
    pub points: usize,
}

/// Least-squares slope of `log P(N = n)` against `log n` over the support
/// in `[lo, hi]`.
pub fn gw_slope(law: &[BigRational], lo: usize, hi: usize) -> Result<SlopeFit> {
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (n, p) in law.iter().enumerate().take(hi + 1).skip(lo) {
        if p.is_zero() {
            continue;
        }
        x.push((n as f64).ln());
        y.push(p.to_f64().ok_or_else(|| invalid("probability not representable"))?.ln());
    }
    let (intercept, slope, se) = linear_fit(&x, &y)?;
    Ok(SlopeFit {
        lo,
        hi,
        slope,
        intercept,
        se,
        points: x.len(),
    })
}
