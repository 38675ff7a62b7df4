//! One-dimensional adaptive Gauss–Kronrod quadrature and Chebyshev
//! tabulation of smooth functions on an interval.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Tolerances and truncation for the semi-infinite time integrals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Time integrals over `[0, inf)` are cut at `sum t <= radius`.
    pub radius: f64,
    /// Maximum number of subintervals per one-dimensional integral.
    pub limit: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            radius: 10.0,
            limit: 400,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0 && self.radius > 0.0) {
            return Err(invalid("quadrature tolerances and radius must be positive"));
        }
        if self.limit == 0 {
            return Err(invalid("quadrature subdivision limit must be positive"));
        }
        Ok(())
    }

    /// Upper bound on the mass of `T e^{-T^2/2} T^{n-1}/(n-1)!` beyond the
    /// truncation radius, i.e. on what the cut discards from an `n`-fold
    /// time integral with integrand bounded by `(sum t) e^{-(sum t)^2/2}`.
    pub fn tail_bound(&self, n: usize) -> f64 {
        // integration by parts: int_R^inf T^n e^{-T^2/2} dT
        //   <= R^{n-1} e^{-R^2/2} / (1 - (n-1)/R^2) <= 2 R^{n-1} e^{-R^2/2}
        // once R^2 >= 2(n-1)
        let r = self.radius;
        let n = n.max(1);
        let fact: f64 = (1..n).map(|k| k as f64).product();
        2.0 * r.powi(n as i32 - 1) * (-r * r / 2.0).exp() / fact
    }
}

/// A quadrature value with its error estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];

const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

// 7-point Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7]
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_k = fc * WGK[7];
    let mut res_g = fc * WG[3];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = res_k * 0.5;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let result = res_k * half;
    res_abs *= half.abs();
    res_asc *= half.abs();
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (1.0f64).min((200.0 * err / res_asc).powf(1.5));
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    (result, err)
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Adaptive 15-point Gauss–Kronrod on `[a, b]`, bisecting the interval with
/// the largest error estimate until `error <= max(abs_tol, rel_tol |I|)`.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    limit: usize,
) -> Result<Integral> {
    if a == b {
        return Ok(Integral {
            value: 0.0,
            error: 0.0,
        });
    }
    let (v, e) = gk15(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Piece {
        a,
        b,
        value: v,
        error: e,
    });
    let mut total = v;
    let mut total_err = e;
    let mut pieces = 1;
    loop {
        if !total.is_finite() || !total_err.is_finite() {
            return Err(Error::NumericalFailure {
                message: format!("non-finite integrand on [{a}, {b}]"),
                error_estimate: f64::INFINITY,
            });
        }
        if total_err <= abs_tol.max(rel_tol * total.abs()) {
            return Ok(Integral {
                value: total,
                error: total_err,
            });
        }
        if pieces >= limit {
            return Err(Error::NumericalFailure {
                message: format!("subdivision limit {limit} reached on [{a}, {b}]"),
                error_estimate: total_err,
            });
        }
        let worst = heap.pop().expect("heap never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            return Err(Error::NumericalFailure {
                message: "interval too small to bisect".into(),
                error_estimate: total_err,
            });
        }
        let (v1, e1) = gk15(&f, worst.a, mid);
        let (v2, e2) = gk15(&f, mid, worst.b);
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Piece {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Piece {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
        pieces += 1;
        // resum periodically; the running totals drift
        if pieces % 64 == 0 {
            total = heap.iter().map(|p| p.value).sum();
            total_err = heap.iter().map(|p| p.error).sum();
        }
    }
}

/// Polynomial interpolant through Chebyshev points of the second kind,
/// evaluated by the barycentric formula.
#[derive(Clone, Debug)]
pub struct Chebyshev {
    a: f64,
    b: f64,
    nodes: Vec<f64>,
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl Chebyshev {
    /// The `degree + 1` sample points on `[a, b]`.
    pub fn points(a: f64, b: f64, degree: usize) -> Vec<f64> {
        (0..=degree)
            .map(|j| {
                let x = (std::f64::consts::PI * j as f64 / degree as f64).cos();
                0.5 * (a + b) + 0.5 * (b - a) * x
            })
            .collect()
    }

    pub fn from_values(a: f64, b: f64, values: Vec<f64>) -> Self {
        let n = values.len() - 1;
        let nodes = Self::points(a, b, n);
        let weights = (0..=n)
            .map(|j| {
                let s = if j % 2 == 0 { 1.0 } else { -1.0 };
                if j == 0 || j == n {
                    0.5 * s
                } else {
                    s
                }
            })
            .collect();
        Chebyshev {
            a,
            b,
            nodes,
            values,
            weights,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for ((&xj, &fj), &wj) in self.nodes.iter().zip(&self.values).zip(&self.weights) {
            let d = x - xj;
            if d == 0.0 {
                return fj;
            }
            let t = wj / d;
            num += t * fj;
            den += t;
        }
        num / den
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    /// Magnitude of the two highest Chebyshev coefficients, a proxy for
    /// the truncation error of the interpolant.
    pub fn tail_estimate(&self) -> f64 {
        let n = self.values.len() - 1;
        let coeff = |k: usize| -> f64 {
            let mut s = 0.0;
            for j in 0..=n {
                let w = if j == 0 || j == n { 0.5 } else { 1.0 };
                s += w * self.values[j] * (std::f64::consts::PI * (j * k) as f64 / n as f64).cos();
            }
            let scale = if k == 0 || k == n { 1.0 } else { 2.0 };
            scale * s / n as f64
        };
        coeff(n).abs() + coeff(n - 1).abs()
    }
}
