//! Generating functions whose coefficients converge to ISE quantities.
//!
//! The basic two-variable function is
//!
//! ```text
//! C(z, zeta; k) = 2 / (k^2 + 2^{3/2} sqrt(1 - z) + 2 (1 - zeta))
//! ```
//!
//! and an m-shape multiplies one copy per edge. Exact coefficients live in
//! Q(√2). They are produced in closed form: with `u = 1 - sqrt(1 - z)`,
//!
//! ```text
//! (a + 2√2 sqrt(1-z))^{-e} = P^{-e} sum_j binom(e-1+j, j) beta^j u^j,
//!     P = a + 2√2,  beta = 2√2 / P,
//! [z^n] u^j = N(n, j) / 2^{2n-j},  N(n, j) = j/(2n-j) binom(2n-j, n-j),
//! ```
//!
//! so a single coefficient costs O(n) big-integer operations and whole
//! tables never require series division.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::ise;
use crate::qsqrt2::{rational_string, QSqrt2, QSqrt2Record, ZSqrt2};
use crate::quadrature::QuadratureSpec;
use crate::shapes::{enumerate_shapes, Shape, ShapeRecord};

const TWO_SQRT2: f64 = 2.0 * std::f64::consts::SQRT_2;

/// Largest table (coefficients summed over edges) that `series_cm` builds.
pub const MAX_TABLE_ENTRIES: usize = 4_000_000;

fn check_unit_disc(w: Complex64, name: &str) -> Result<()> {
    if !(w.norm() < 1.0) || !w.re.is_finite() || !w.im.is_finite() {
        return Err(invalid(format!("{name} = {w} must lie in the open unit disc")));
    }
    Ok(())
}

/// `C(z, zeta; k)` with the principal square root (cut along `z >= 1`).
pub fn eval_c2(k2: f64, z: Complex64, zeta: Complex64) -> Result<Complex64> {
    if !(k2 >= 0.0) || !k2.is_finite() {
        return Err(invalid(format!("k^2 must be finite and nonnegative, got {k2}")));
    }
    check_unit_disc(z, "z")?;
    check_unit_disc(zeta, "zeta")?;
    let w = (Complex64::new(1.0, 0.0) - z).sqrt();
    Ok(Complex64::new(2.0, 0.0) / (k2 + TWO_SQRT2 * w + 2.0 * (1.0 - zeta)))
}

/// `C(z, 1; k)`, the ζ = 1 specialization used for the z-only coefficients.
pub fn eval_c2_at_one(k2: f64, z: Complex64) -> Complex64 {
    let w = (Complex64::new(1.0, 0.0) - z).sqrt();
    Complex64::new(2.0, 0.0) / (k2 + TWO_SQRT2 * w)
}

/// `b_s(k) = prod_j (1 + k_j^2/2)^{-(s_j+1)}`, the z = 1 coefficient of
/// `prod_j zeta_j^{s_j}`.
pub fn b_coeff(s: &[u64], k2: &[f64]) -> Result<f64> {
    if s.len() != k2.len() {
        return Err(invalid("s and k^2 must have one entry per edge"));
    }
    if k2.iter().any(|&x| !(x >= 0.0)) {
        return Err(invalid("k^2 must be nonnegative"));
    }
    Ok(s.iter()
        .zip(k2)
        .map(|(&sj, &kk)| (-(sj as f64 + 1.0) * (kk / 2.0).ln_1p()).exp())
        .product())
}

// N(n, j) for j = 0..=n.
fn ballot_row(n: usize) -> Vec<BigInt> {
    let mut row = vec![BigInt::zero(); n + 1];
    if n == 0 {
        row[0] = BigInt::one();
        return row;
    }
    // N(n,1) = Catalan(n-1)
    let mut c = BigInt::one();
    for i in 0..(n - 1) {
        c = c * BigInt::from(2 * (2 * i + 1)) / BigInt::from(i + 2);
    }
    row[1] = c;
    for j in 1..n {
        let num = &row[j] * BigInt::from(j + 1) * BigInt::from(n - j);
        row[j + 1] = num / BigInt::from(j * (2 * n - j - 1));
    }
    row
}

/// `[z^n] (a + 2√2 sqrt(1-z))^{-e}` exactly, for each exponent in `exps`.
pub fn power_coeffs(n: usize, a: &BigRational, exps: &[u64]) -> Result<Vec<QSqrt2>> {
    if a.is_negative() {
        return Err(invalid("shift a must be nonnegative"));
    }
    let p = a.numer().clone();
    let q = a.denom().clone();
    let q2 = &q * &q;
    let m = &p * &p - BigInt::from(8) * &q2;
    // 2 beta M = 2(-8q^2 + 2pq√2)
    let step = ZSqrt2::new(BigInt::from(-16) * &q2, BigInt::from(4) * &p * &q);
    let mut m_pow = vec![BigInt::one(); n + 1];
    for i in 1..=n {
        m_pow[i] = &m_pow[i - 1] * &m;
    }
    let ballot = ballot_row(n);
    let mut weights = Vec::with_capacity(n + 1);
    let mut acc = ZSqrt2::one();
    for j in 0..=n {
        if !ballot[j].is_zero() {
            weights.push(acc.scale(&(&ballot[j] * &m_pow[n - j])));
        } else {
            weights.push(ZSqrt2::zero());
        }
        if j < n {
            acc = acc.mul(&step);
        }
    }
    let base = ZSqrt2::new(&q * &p, BigInt::from(-2) * &q2);
    let four_n = BigInt::one() << (2 * n);
    let mut out = Vec::with_capacity(exps.len());
    for &e in exps {
        if e == 0 {
            out.push(if n == 0 { QSqrt2::one() } else { QSqrt2::zero() });
            continue;
        }
        let mut sum = ZSqrt2::zero();
        let mut binom = BigInt::one();
        for (j, w) in weights.iter().enumerate() {
            if j > 0 {
                binom = binom * BigInt::from(e - 1 + j as u64) / BigInt::from(j);
            }
            if !ballot[j].is_zero() {
                sum.add_assign(&w.scale(&binom));
            }
        }
        let num = base.pow(e).mul(&sum);
        let mut den = &four_n * m.pow(e as u32);
        den *= &m_pow[n];
        out.push(num.over(&den));
    }
    Ok(out)
}

/// Exact `c_{n,s}` of the m = 2 function for `s = 0..=max_s`.
pub fn c2_row(n: usize, max_s: usize, k2: &BigRational) -> Result<Vec<QSqrt2>> {
    let shifted = k2 + BigRational::from_integer(2.into());
    let exps: Vec<u64> = (1..=max_s as u64 + 1).collect();
    let raw = power_coeffs(n, &shifted, &exps)?;
    Ok(raw
        .into_iter()
        .enumerate()
        .map(|(s, v)| v.scale(&BigRational::from_integer(BigInt::one() << (s + 1))))
        .collect())
}

fn convolve(x: &[QSqrt2], y: &[QSqrt2], len: usize) -> Vec<QSqrt2> {
    (0..len)
        .map(|n| {
            let mut acc = QSqrt2::zero();
            for i in 0..=n {
                if i < x.len() && n - i < y.len() {
                    acc = &acc + &(&x[i] * &y[n - i]);
                }
            }
            acc
        })
        .collect()
}

fn check_k2(k2: &[BigRational]) -> Result<()> {
    if k2.iter().any(|k| k.is_negative()) {
        return Err(invalid("k^2 must be nonnegative"));
    }
    Ok(())
}

/// Exact z-only coefficients `c_n^(m)(k)` for `n = 0..=max_n`, where the
/// product runs over edges with squared frequencies `k2`. Edges sharing a
/// value of `k^2` are combined into one power before convolving.
pub fn marginal_series(k2: &[BigRational], max_n: usize) -> Result<Vec<QSqrt2>> {
    check_k2(k2)?;
    let mut groups: BTreeMap<&BigRational, u64> = BTreeMap::new();
    for k in k2 {
        *groups.entry(k).or_default() += 1;
    }
    let mut total: Option<Vec<QSqrt2>> = None;
    for (k, e) in groups {
        let scale = BigRational::from_integer(BigInt::one() << e);
        let mut series = Vec::with_capacity(max_n + 1);
        for n in 0..=max_n {
            series.push(power_coeffs(n, k, &[e])?.remove(0).scale(&scale));
        }
        total = Some(match total {
            None => series,
            Some(t) => convolve(&t, &series, max_n + 1),
        });
    }
    total.ok_or_else(|| invalid("at least one edge required"))
}

/// Single exact `c_n^(m)(k)`. Cheap when every edge shares one `k^2`
/// (then no convolution is needed); otherwise builds the series up to n.
pub fn marginal_coeff(k2: &[BigRational], n: usize) -> Result<QSqrt2> {
    check_k2(k2)?;
    let first = k2.first().ok_or_else(|| invalid("at least one edge required"))?;
    if k2.iter().all(|k| k == first) {
        let e = k2.len() as u64;
        let scale = BigRational::from_integer(BigInt::one() << e);
        return Ok(power_coeffs(n, first, &[e])?.remove(0).scale(&scale));
    }
    Ok(marginal_series(k2, n)?.pop().expect("nonempty"))
}

/// Exact coefficient table of one edge.
#[derive(Clone, Debug)]
pub struct EdgeSeries {
    pub k2: BigRational,
    /// `coefficients[n][s] = c_{n,s}^(2)(k)`.
    pub coefficients: Vec<Vec<QSqrt2>>,
    /// `marginal[n] = c_n^(2)(k)`, the sum over all s.
    pub marginal: Vec<QSqrt2>,
}

/// Exact coefficients of the m-shape generating function up to
/// `(max_n, max_s)`, kept factored over edges in the ζ variables.
#[derive(Clone, Debug)]
pub struct SeriesTable {
    pub shape: Shape,
    pub max_n: usize,
    pub max_s: usize,
    pub edges: Vec<EdgeSeries>,
    /// `c_n^(m)(sigma; k)` for `n = 0..=max_n`.
    pub marginal: Vec<QSqrt2>,
}

impl SeriesTable {
    pub fn m(&self) -> usize {
        self.shape.m()
    }

    pub fn k2(&self) -> Vec<BigRational> {
        self.edges.iter().map(|e| e.k2.clone()).collect()
    }

    /// `c_{n, s}^(m)`, convolving the edge tables in z.
    pub fn coeff(&self, n: usize, s: &[usize]) -> Result<QSqrt2> {
        if s.len() != self.edges.len() {
            return Err(invalid("one s index per edge required"));
        }
        if n > self.max_n || s.iter().any(|&x| x > self.max_s) {
            return Err(Error::ResourceLimit(format!(
                "coefficient ({n}, {s:?}) lies outside the table ({}, {})",
                self.max_n, self.max_s
            )));
        }
        let column = |j: usize| -> Vec<QSqrt2> {
            (0..=n).map(|i| self.edges[j].coefficients[i][s[j]].clone()).collect()
        };
        let mut acc = column(0);
        for j in 1..self.edges.len() {
            acc = convolve(&acc, &column(j), n + 1);
        }
        Ok(acc.pop().expect("nonempty"))
    }

    pub fn to_record(&self) -> SeriesRecord {
        let rec = |v: &[QSqrt2]| v.iter().map(QSqrt2Record::from).collect::<Vec<_>>();
        SeriesRecord {
            m: self.m(),
            shape: self.shape.to_record(),
            max_n: self.max_n,
            max_s: self.max_s,
            edges: self
                .edges
                .iter()
                .map(|e| EdgeRecord {
                    k2: rational_string(&e.k2),
                    coefficients: e.coefficients.iter().map(|row| rec(row)).collect(),
                    marginal: rec(&e.marginal),
                })
                .collect(),
            marginal: rec(&self.marginal),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub k2: String,
    pub coefficients: Vec<Vec<QSqrt2Record>>,
    pub marginal: Vec<QSqrt2Record>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeriesRecord {
    pub m: usize,
    pub shape: ShapeRecord,
    pub max_n: usize,
    pub max_s: usize,
    pub edges: Vec<EdgeRecord>,
    pub marginal: Vec<QSqrt2Record>,
}

fn edge_series(max_n: usize, max_s: usize, k2: &BigRational) -> Result<EdgeSeries> {
    let mut coefficients = Vec::with_capacity(max_n + 1);
    for n in 0..=max_n {
        coefficients.push(c2_row(n, max_s, k2)?);
    }
    let marginal = marginal_series(std::slice::from_ref(k2), max_n)?;
    Ok(EdgeSeries {
        k2: k2.clone(),
        coefficients,
        marginal,
    })
}

/// Exact table of the m = 2 function.
pub fn series_c2(max_n: usize, max_s: usize, k2: &BigRational) -> Result<SeriesTable> {
    let shape = enumerate_shapes(2)?.remove(0);
    series_cm(&shape, max_n, max_s, std::slice::from_ref(k2))
}

/// Exact table for an m-shape with per-edge squared frequencies.
pub fn series_cm(
    shape: &Shape,
    max_n: usize,
    max_s: usize,
    k2: &[BigRational],
) -> Result<SeriesTable> {
    if k2.len() != shape.edge_count() {
        return Err(invalid(format!(
            "shape has {} edges, got {} values of k^2",
            shape.edge_count(),
            k2.len()
        )));
    }
    check_k2(k2)?;
    let entries = (max_n + 1)
        .saturating_mul(max_s + 1)
        .saturating_mul(k2.len());
    if entries > MAX_TABLE_ENTRIES {
        return Err(Error::ResourceLimit(format!(
            "table of {entries} coefficients exceeds {MAX_TABLE_ENTRIES}"
        )));
    }
    let mut cache: BTreeMap<BigRational, EdgeSeries> = BTreeMap::new();
    let mut edges = Vec::with_capacity(k2.len());
    for k in k2 {
        if !cache.contains_key(k) {
            cache.insert(k.clone(), edge_series(max_n, max_s, k)?);
        }
        edges.push(cache[k].clone());
    }
    let marginal = marginal_series(k2, max_n)?;
    Ok(SeriesTable {
        shape: shape.clone(),
        max_n,
        max_s,
        edges,
        marginal,
    })
}

/// Circle for the Cauchy integral and the initial trapezoid node count.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContourSpec {
    pub radius: f64,
    pub nodes: usize,
    /// Branch-cut deformation; not implemented, requests are rejected.
    pub deformation: bool,
}

/// Largest node count tried before giving up.
pub const MAX_CONTOUR_NODES: usize = 1 << 24;
const CONTOUR_AGREEMENT: f64 = 1e-12;

impl ContourSpec {
    /// Radius `1 - 1/(n+1)`, clamped to at least 1/2: close enough to the
    /// singularity that `r^{-n}` stays O(1), with 1024 starting nodes.
    pub fn for_order(n: usize) -> Self {
        ContourSpec {
            radius: (1.0 - 1.0 / (n as f64 + 1.0)).max(0.5),
            nodes: 1024,
            deformation: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius < 1.0) {
            return Err(invalid(format!("contour radius must lie in (0, 1), got {}", self.radius)));
        }
        if !self.nodes.is_power_of_two() || self.nodes < 2 {
            return Err(invalid("contour node count must be a power of two"));
        }
        if self.deformation {
            return Err(Error::Unsupported(
                "branch-cut contour deformation is not implemented".into(),
            ));
        }
        Ok(())
    }
}

/// Result of a contour inversion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContourEstimate {
    pub value: f64,
    /// Imaginary part of the trapezoid sum; zero up to rounding.
    pub imag: f64,
    /// Difference between the last two node counts.
    pub error: f64,
    pub nodes: usize,
}

fn trapezoid_coeff<F: Fn(Complex64) -> Complex64>(
    f: &F,
    n: usize,
    r: f64,
    nodes: usize,
) -> Complex64 {
    let tau = std::f64::consts::TAU;
    let mut acc = Complex64::new(0.0, 0.0);
    for l in 0..nodes {
        let theta = tau * l as f64 / nodes as f64;
        let phase = tau * ((l as u128 * n as u128) % nodes as u128) as f64 / nodes as f64;
        let z = Complex64::from_polar(r, theta);
        acc += f(z) * Complex64::from_polar(1.0, -phase);
    }
    acc / nodes as f64 * r.powi(-(n as i32))
}

fn invert<F: Fn(Complex64) -> Complex64>(
    f: F,
    n: usize,
    spec: &ContourSpec,
) -> Result<ContourEstimate> {
    spec.validate()?;
    let mut nodes = spec.nodes;
    let mut prev = trapezoid_coeff(&f, n, spec.radius, nodes);
    loop {
        if nodes >= MAX_CONTOUR_NODES {
            return Err(Error::NumericalFailure {
                message: format!("contour sum for n = {n} did not settle by {nodes} nodes"),
                error_estimate: f64::INFINITY,
            });
        }
        nodes *= 2;
        let next = trapezoid_coeff(&f, n, spec.radius, nodes);
        let diff = (next - prev).norm();
        if diff <= CONTOUR_AGREEMENT * next.norm().max(1.0) {
            return Ok(ContourEstimate {
                value: next.re,
                imag: next.im,
                error: diff,
                nodes,
            });
        }
        if !diff.is_finite() {
            return Err(Error::NumericalFailure {
                message: "non-finite contour sum".into(),
                error_estimate: f64::INFINITY,
            });
        }
        prev = next;
    }
}

/// `c_n^(m)(sigma; k)` by trapezoidal Cauchy integration of
/// `prod_j C(z, 1; k_j)` around a circle.
pub fn contour_coeff(
    shape: &Shape,
    n: usize,
    k2: &[f64],
    spec: &ContourSpec,
) -> Result<ContourEstimate> {
    if k2.len() != shape.edge_count() {
        return Err(invalid("one k^2 per edge required"));
    }
    contour_marginal(k2, n, spec)
}

/// [`contour_coeff`] without a shape: the product over the given edges.
pub fn contour_marginal(k2: &[f64], n: usize, spec: &ContourSpec) -> Result<ContourEstimate> {
    if k2.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(invalid("k^2 must be finite and nonnegative"));
    }
    let k2 = k2.to_vec();
    invert(
        move |z| k2.iter().map(|&kk| eval_c2_at_one(kk, z)).product(),
        n,
        spec,
    )
}

/// `c_{n,s}^(m)` by Cauchy integration in z of the ζ-coefficient
/// `prod_j 2^{s_j+1} (k_j^2 + 2 + 2√2 sqrt(1-z))^{-(s_j+1)}`.
pub fn contour_coeff_s(
    k2: &[f64],
    s: &[usize],
    n: usize,
    spec: &ContourSpec,
) -> Result<ContourEstimate> {
    if k2.len() != s.len() {
        return Err(invalid("one s index per edge required"));
    }
    if k2.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(invalid("k^2 must be finite and nonnegative"));
    }
    let k2 = k2.to_vec();
    let s = s.to_vec();
    invert(
        move |z| {
            let w = (Complex64::new(1.0, 0.0) - z).sqrt();
            k2.iter()
                .zip(&s)
                .map(|(&kk, &sj)| {
                    let x = Complex64::new(2.0, 0.0) / (kk + 2.0 + TWO_SQRT2 * w);
                    x.powu(sj as u32 + 1)
                })
                .product()
        },
        n,
        spec,
    )
}

/// Rigorous upper bound on `c_n^(m) - sum_{s <= max_s} c_{n,s}^(m)` in
/// absolute value, from Cauchy's estimate on a circle of radius `rho`
/// (optimized over a grid).
pub fn zeta_tail_bound(n: usize, max_s: usize, k2: &[f64]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 1..2000 {
        let rho = i as f64 / 2000.0;
        let root = (1.0 - rho).sqrt();
        let mut tails = Vec::with_capacity(k2.len());
        let mut sups = Vec::with_capacity(k2.len());
        for &kk in k2 {
            let x = 2.0 / (kk + 2.0 + TWO_SQRT2 * root);
            tails.push(x.powi(max_s as i32 + 2) / (1.0 - x));
            sups.push(2.0 / (kk + TWO_SQRT2 * root));
        }
        let mut total = 0.0;
        for j in 0..k2.len() {
            let mut term = tails[j];
            for i in 0..k2.len() {
                if i != j {
                    term *= sups[i] + tails[i];
                }
            }
            total += term;
        }
        let bound = total * rho.powi(-(n as i32));
        if bound < best {
            best = bound;
        }
    }
    best
}

fn perfect_square_root(n: usize) -> Option<usize> {
    let r = (n as f64).sqrt().round() as usize;
    (r * r == n).then_some(r)
}

fn exact_rational(x: f64) -> Result<BigRational> {
    BigRational::from_float(x).ok_or_else(|| invalid(format!("{x} is not a finite number")))
}

/// One line of a convergence table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub n: usize,
    pub coefficient: f64,
    pub target: f64,
    pub ratio: f64,
    /// `|ratio - 1|`.
    pub abs_err: f64,
    /// Numerical uncertainty of `ratio` (zero for exact coefficients).
    pub ratio_error: f64,
    /// "exact" or "contour".
    pub method: String,
}

/// Ratio of `c_n^(m)(sigma; k n^{-1/4})` to its predicted asymptotics
/// `(2 pi)^{-1/2} n^{m-5/2} hat A^(m)(sigma; k)` for each `n`.
///
/// `k2` holds the unscaled per-edge `|k_j|^2`. The coefficient is exact when
/// `n` is a perfect square and all edges share one `k^2`; otherwise it comes
/// from contour inversion.
pub fn verify_eq36(
    shape: &Shape,
    k2: &[f64],
    n_list: &[usize],
    q: &QuadratureSpec,
) -> Result<Vec<RatioRow>> {
    if k2.len() != shape.edge_count() {
        return Err(invalid("one k^2 per edge required"));
    }
    let hat = ise::m_point_hat_sq(shape, k2, q)?;
    let m = shape.m() as f64;
    let uniform = k2.iter().all(|&x| x == k2[0]);
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        if n == 0 {
            return Err(invalid("n must be positive"));
        }
        let (coefficient, err, method) = match perfect_square_root(n) {
            Some(root) if uniform => {
                let scale = BigRational::new(BigInt::one(), BigInt::from(root));
                let scaled: Vec<BigRational> = k2
                    .iter()
                    .map(|&x| exact_rational(x).map(|r| r * &scale))
                    .collect::<Result<_>>()?;
                (marginal_coeff(&scaled, n)?.to_f64(), 0.0, "exact")
            }
            _ => {
                let scaled: Vec<f64> = k2.iter().map(|&x| x / (n as f64).sqrt()).collect();
                let c = contour_marginal(&scaled, n, &ContourSpec::for_order(n))?;
                (c.value, c.error, "contour")
            }
        };
        let target = (n as f64).powf(m - 2.5) * hat.value / std::f64::consts::TAU.sqrt();
        let ratio = coefficient / target;
        rows.push(RatioRow {
            n,
            coefficient,
            target,
            ratio,
            abs_err: (ratio - 1.0).abs(),
            ratio_error: err / target + ratio * hat.error / hat.value,
            method: method.into(),
        });
    }
    Ok(rows)
}

/// Largest per-edge s index that [`verify_eq37`] will build.
pub const MAX_S_INDEX: usize = 100_000;

/// Ratio of `c_{n, floor(t sqrt n)}^(m)(sigma; k n^{-1/4})` to
/// `(2 pi)^{-1/2} n^{-1} hat a^(m)(sigma; k, t)`. Only m = 2, 3.
pub fn verify_eq37(
    shape: &Shape,
    k2: &[f64],
    t: &[f64],
    n_list: &[usize],
) -> Result<Vec<RatioRow>> {
    let m = shape.m();
    if !(2..=3).contains(&m) {
        return Err(Error::Unsupported(format!(
            "time-resolved coefficient check is limited to m = 2, 3, got {m}"
        )));
    }
    let edges = shape.edge_count();
    if k2.len() != edges || t.len() != edges {
        return Err(invalid("one k^2 and one t per edge required"));
    }
    if t.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
        return Err(invalid("times must be positive"));
    }
    let total: f64 = t.iter().sum();
    let damping: f64 = k2.iter().zip(t).map(|(&kk, &tt)| -kk * tt / 2.0).sum();
    let density = total * (-total * total / 2.0).exp() * damping.exp();
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        if n == 0 {
            return Err(invalid("n must be positive"));
        }
        let root_n = (n as f64).sqrt();
        let s: Vec<usize> = t.iter().map(|&tt| (tt * root_n).floor() as usize).collect();
        let needed = *s.iter().max().expect("nonempty");
        if needed > MAX_S_INDEX {
            return Err(Error::ResourceLimit(format!(
                "s index {needed} needed, budget is {MAX_S_INDEX}"
            )));
        }
        let (coefficient, err, method) = match perfect_square_root(n) {
            Some(root) if m == 2 => {
                let k = exact_rational(k2[0])? / BigRational::from_integer(root.into());
                let shifted = k + BigRational::from_integer(2.into());
                let v = power_coeffs(n, &shifted, &[s[0] as u64 + 1])?.remove(0);
                let v = v.scale(&BigRational::from_integer(BigInt::one() << (s[0] + 1)));
                (v.to_f64(), 0.0, "exact")
            }
            _ => {
                let scaled: Vec<f64> = k2.iter().map(|&x| x / root_n).collect();
                let c = contour_coeff_s(&scaled, &s, n, &ContourSpec::for_order(n))?;
                (c.value, c.error, "contour")
            }
        };
        let target = density / (std::f64::consts::TAU.sqrt() * n as f64);
        let ratio = coefficient / target;
        rows.push(RatioRow {
            n,
            coefficient,
            target,
            ratio,
            abs_err: (ratio - 1.0).abs(),
            ratio_error: err / target,
            method: method.into(),
        });
    }
    Ok(rows)
}

/// `c_n^(2)(0) = 2^{-1/2} binom(2n, n) 4^{-n}` as a double, computed from the
/// central binomial coefficient in log space.
pub fn central_binomial_coeff(n: usize) -> f64 {
    let mut log = 0.0;
    for i in 1..=n {
        log += ((n + i) as f64 / (4.0 * i as f64)).ln();
    }
    log.exp() / std::f64::consts::SQRT_2
}

/// Rational `k^2` as a double, for display.
pub fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(p: i64, d: i64) -> BigRational {
        BigRational::new(p.into(), d.into())
    }

    fn shape(m: usize) -> Shape {
        enumerate_shapes(m).unwrap().remove(0)
    }

    // Independent oracle: coefficients of 2^{-E/2} (1-z)^{-E/2}, i.e.
    // 2^{-E/2} prod_{i<n} (E/2 + i) / n!.
    fn half_power_oracle(e: usize, n: usize) -> QSqrt2 {
        let mut c = BigRational::one();
        for i in 0..n {
            c = c * BigRational::new(BigInt::from(e + 2 * i), BigInt::from(2 * (i + 1)));
        }
        let half = e / 2;
        let pow2 = BigRational::new(BigInt::one(), BigInt::one() << half);
        if e % 2 == 0 {
            QSqrt2::from_rational(c * pow2)
        } else {
            // 2^{-1/2} = √2 / 2
            QSqrt2::new(BigRational::zero(), c * pow2 / BigRational::from_integer(2.into()))
        }
    }

    // Oracle by brute power-series arithmetic in f64: expand sqrt(1-z),
    // then invert and raise the series term by term.
    fn float_series(k2: f64, zeta_coeff: Option<usize>, len: usize) -> Vec<f64> {
        let mut w = vec![0.0; len];
        w[0] = 1.0;
        for i in 1..len {
            w[i] = w[i - 1] * (i as f64 - 1.5) / i as f64;
        }
        // D = k2 + c + 2√2 w, c = 2 for the ζ coefficients, 0 at ζ = 1
        let (c, power) = match zeta_coeff {
            Some(s) => (2.0, s + 1),
            None => (0.0, 1),
        };
        let d: Vec<f64> = (0..len)
            .map(|i| TWO_SQRT2 * w[i] + if i == 0 { k2 + c } else { 0.0 })
            .collect();
        let mut inv = vec![0.0; len];
        inv[0] = 1.0 / d[0];
        for i in 1..len {
            let mut s = 0.0;
            for j in 1..=i {
                s += d[j] * inv[i - j];
            }
            inv[i] = -s / d[0];
        }
        let mut out = vec![0.0; len];
        out[0] = 1.0;
        for _ in 0..power {
            let mut next = vec![0.0; len];
            for i in 0..len {
                for j in 0..=i {
                    next[i] += out[j] * 2.0 * inv[i - j];
                }
            }
            out = next;
        }
        out
    }

    #[test]
    fn c2_values() {
        let v = eval_c2(0.0, Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)).unwrap();
        assert!((v.re - 0.414_213_562_373_095_05).abs() < 1e-15);
        assert!(eval_c2(0.0, Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)).is_err());
        assert!(eval_c2(-1.0, Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)).is_err());
        let z = Complex64::new(0.3, 0.4);
        let zeta = Complex64::new(-0.2, 0.5);
        let a = eval_c2(1.5, z, zeta).unwrap();
        let b = eval_c2(1.5, z.conj(), zeta.conj()).unwrap();
        assert!((a - b.conj()).norm() < 1e-15);
        // z -> 1 along the reals approaches 2/(k^2 + 2(1 - zeta))
        let near = eval_c2(0.5, Complex64::new(1.0 - 1e-14, 0.0), Complex64::new(0.25, 0.0))
            .unwrap();
        assert!((near.re - 2.0 / (0.5 + 1.5)).abs() < 1e-5);
    }

    #[test]
    fn b_coeff_values() {
        assert_eq!(b_coeff(&[3, 7], &[0.0, 0.0]).unwrap(), 1.0);
        assert!((b_coeff(&[0], &[2.0]).unwrap() - 0.5).abs() < 1e-16);
        let n = 4000.0;
        let v = b_coeff(&[(1.0f64 * n) as u64], &[2.0 / n]).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-3);
        assert!(b_coeff(&[1, 2], &[0.0]).is_err());
    }

    #[test]
    fn ballot_numbers() {
        assert_eq!(ballot_row(0), vec![BigInt::one()]);
        let r = ballot_row(4);
        let expect: Vec<BigInt> = [0, 5, 5, 3, 1].iter().map(|&x| BigInt::from(x)).collect();
        assert_eq!(r, expect);
    }

    #[test]
    fn marginal_matches_central_binomial() {
        let exact = marginal_series(&[q(0, 1)], 40).unwrap();
        for (n, c) in exact.iter().enumerate() {
            assert_eq!(*c, half_power_oracle(1, n), "n={n}");
        }
        assert!((exact[0].to_f64() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-16);
        assert!((exact[25].to_f64() - central_binomial_coeff(25)).abs() < 1e-15);
    }

    #[test]
    fn multi_edge_marginal_matches_half_powers() {
        for e in 1..=7usize {
            let k = vec![q(0, 1); e];
            let series = marginal_series(&k, 12).unwrap();
            for n in 0..=12 {
                assert_eq!(series[n], half_power_oracle(e, n), "e={e} n={n}");
                assert_eq!(marginal_coeff(&k, n).unwrap(), series[n]);
            }
        }
    }

    #[test]
    fn rows_match_float_power_series() {
        for (kk, kr) in [(0.0, q(0, 1)), (1.0, q(1, 1)), (0.75, q(3, 4))] {
            for s in [0usize, 1, 4] {
                let oracle = float_series(kk, Some(s), 16);
                for n in 0..16 {
                    let exact = c2_row(n, 4, &kr).unwrap()[s].to_f64();
                    assert!(
                        (exact - oracle[n]).abs() < 1e-13,
                        "k2={kk} s={s} n={n}: {exact} vs {}",
                        oracle[n]
                    );
                }
            }
            let oracle = float_series(kk, None, 16);
            let exact = marginal_series(&[kr.clone()], 15).unwrap();
            for n in 0..16 {
                assert!((exact[n].to_f64() - oracle[n]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn reference_values() {
        // multiprecision evaluation of the Taylor coefficients
        let row = c2_row(3, 2, &q(0, 1)).unwrap();
        assert!((row[2].to_f64() - 0.043_952_380_952_380_95).abs() < 1e-6);
        let row = c2_row(5, 4, &q(0, 1)).unwrap();
        assert!((row[4].to_f64() - 0.020_033_51).abs() < 1e-7);
    }

    #[test]
    fn coefficients_nonnegative_at_zero() {
        let t = series_c2(20, 20, &q(0, 1)).unwrap();
        for row in &t.edges[0].coefficients {
            for c in row {
                assert!(c.is_nonnegative());
            }
        }
    }

    #[test]
    fn zeta_sum_recovers_marginal() {
        let t = series_c2(10, 60, &q(1, 2)).unwrap();
        for n in 0..=10 {
            let mut partial = QSqrt2::zero();
            for c in &t.edges[0].coefficients[n] {
                partial = &partial + c;
            }
            let gap = (&t.marginal[n] - &partial).to_f64();
            let bound = zeta_tail_bound(n, 60, &[0.5]);
            assert!(gap >= -1e-15 && gap <= bound, "n={n}: gap {gap} bound {bound}");
        }
    }

    #[test]
    fn tail_bound_is_rigorous_for_products() {
        let s3 = shape(3);
        let k = vec![q(0, 1), q(1, 1), q(2, 1)];
        let t = series_cm(&s3, 6, 8, &k).unwrap();
        for n in 0..=6 {
            let mut partial = 0.0;
            for a in 0..=8 {
                for b in 0..=8 {
                    for c in 0..=8 {
                        partial += t.coeff(n, &[a, b, c]).unwrap().to_f64();
                    }
                }
            }
            let gap = t.marginal[n].to_f64() - partial;
            assert!(gap.abs() <= zeta_tail_bound(n, 8, &[0.0, 1.0, 2.0]));
        }
    }

    #[test]
    fn evaluation_round_trip() {
        let t = series_c2(30, 30, &q(0, 1)).unwrap();
        let mut sum = 0.0;
        for n in 0..=30 {
            for s in 0..=30 {
                sum += t.edges[0].coefficients[n][s].to_f64() * 0.1f64.powi((n + s) as i32);
            }
        }
        let direct = eval_c2(0.0, Complex64::new(0.1, 0.0), Complex64::new(0.1, 0.0)).unwrap();
        // every coefficient is at most 1, so the tail is below 2 * 0.1^31 / 0.81
        assert!((sum - direct.re).abs() < 1e-14);
    }

    #[test]
    fn m2_table_is_series_c2() {
        let a = series_c2(8, 5, &q(1, 3)).unwrap();
        let b = series_cm(&shape(2), 8, 5, &[q(1, 3)]).unwrap();
        assert_eq!(a.edges[0].coefficients, b.edges[0].coefficients);
        assert_eq!(a.marginal, b.marginal);
        assert_eq!(a.coeff(4, &[2]).unwrap(), a.edges[0].coefficients[4][2]);
        assert!(a.coeff(9, &[0]).is_err());
        assert!(series_cm(&shape(3), 8, 5, &[q(1, 3)]).is_err());
        assert!(series_cm(&shape(2), 5000, 5000, &[q(0, 1)]).is_err());
    }

    #[test]
    fn record_serializes_rationals() {
        let t = series_c2(1, 1, &q(0, 1)).unwrap();
        let json = serde_json::to_string(&t.to_record()).unwrap();
        assert!(json.contains("\"k2\":\"0/1\""));
        assert!(json.contains("\"1/2\""));
    }

    #[test]
    fn contour_matches_exact() {
        let c = contour_coeff(&shape(2), 0, &[0.0], &ContourSpec::for_order(0)).unwrap();
        assert!((c.value - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-10);
        assert!(c.imag.abs() < 1e-12);
        let exact = marginal_series(&[q(1, 1)], 5).unwrap()[5].to_f64();
        let c = contour_coeff(&shape(2), 5, &[1.0], &ContourSpec::for_order(5)).unwrap();
        assert!((c.value - exact).abs() < 1e-12);
        let k = [0.0, 0.25, 1.0];
        let kr = [q(0, 1), q(1, 4), q(1, 1)];
        let exact = marginal_series(&kr, 20).unwrap();
        for n in [0usize, 7, 20] {
            let c = contour_coeff(&shape(3), n, &k, &ContourSpec::for_order(n)).unwrap();
            assert!((c.value - exact[n].to_f64()).abs() < 1e-11);
        }
    }

    #[test]
    fn contour_s_matches_exact() {
        let row = c2_row(12, 3, &q(1, 2)).unwrap();
        let c = contour_coeff_s(&[0.5], &[3], 12, &ContourSpec::for_order(12)).unwrap();
        assert!((c.value - row[3].to_f64()).abs() < 1e-13);
        let row = c2_row(400, 10, &q(1, 20)).unwrap();
        let c = contour_coeff_s(&[0.05], &[10], 400, &ContourSpec::for_order(400)).unwrap();
        assert!((c.value - row[10].to_f64()).abs() < 1e-13 * row[10].to_f64().max(1.0));
    }

    #[test]
    fn contour_spec_validation() {
        let bad = ContourSpec {
            radius: 1.0,
            ..ContourSpec::for_order(3)
        };
        assert!(contour_coeff(&shape(2), 3, &[0.0], &bad).is_err());
        let bad = ContourSpec {
            nodes: 1000,
            ..ContourSpec::for_order(3)
        };
        assert!(bad.validate().is_err());
        let deform = ContourSpec {
            deformation: true,
            ..ContourSpec::for_order(3)
        };
        assert!(matches!(deform.validate(), Err(Error::Unsupported(_))));
    }

    #[test]
    fn eq36_m2_is_stirling_ratio() {
        let rows = verify_eq36(&shape(2), &[0.0], &[16, 100], &QuadratureSpec::default()).unwrap();
        for r in &rows {
            let oracle = (std::f64::consts::TAU * r.n as f64).sqrt() * central_binomial_coeff(r.n);
            assert!((r.ratio - oracle).abs() < 1e-9);
            assert_eq!(r.method, "exact");
        }
        assert!(rows[1].abs_err < 0.01);
        assert!(rows[1].abs_err < rows[0].abs_err);
    }

    #[test]
    fn eq36_m3_trend_and_contour_route() {
        let q = QuadratureSpec::default();
        let rows = verify_eq36(&shape(3), &[0.0; 3], &[25, 100, 400], &q).unwrap();
        assert!(rows.windows(2).all(|w| w[1].abs_err < w[0].abs_err));
        assert!(rows[2].abs_err < 0.05);
        // non-square n goes through the contour and should agree
        let exact = verify_eq36(&shape(3), &[0.0; 3], &[36], &q).unwrap();
        let cont = verify_eq36(&shape(3), &[0.0; 3], &[35], &q).unwrap();
        assert_eq!(cont[0].method, "contour");
        assert!((exact[0].ratio - cont[0].ratio).abs() < 0.05);
    }

    #[test]
    fn eq37_closed_form_target() {
        let rows = verify_eq37(&shape(2), &[0.0], &[1.0], &[400]).unwrap();
        assert!(rows[0].abs_err < 0.1);
        let expected = (-0.5f64).exp() / (std::f64::consts::TAU.sqrt() * 400.0);
        assert!((rows[0].target - expected).abs() < 1e-18);
        assert!(verify_eq37(&shape(4), &[0.0; 5], &[1.0; 5], &[4]).is_err());
        let c = verify_eq37(&shape(2), &[1.0], &[0.5], &[399]).unwrap();
        assert_eq!(c[0].method, "contour");
        assert!(c[0].abs_err < 0.15);
    }
}
