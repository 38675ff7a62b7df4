//! Densities of integrated super-Brownian excursion and their Fourier
//! transforms.
//!
//! Every m-point quantity has the form
//!
//! ```text
//! integral over t in [0,inf)^(2m-3) of  F(t_1 + ... + t_n) * prod_j g_j(t_j),
//! F(T) = T exp(-T^2/2)
//! ```
//!
//! with `g_j(t) = p_t(y_j)` for the spatial densities and
//! `g_j(t) = exp(-|k_j|^2 t / 2)` for their transforms. The integrand sees
//! the inner variables only through their partial sum, so the iterated
//! integral is evaluated from the innermost time outward, tabulating each
//! partial integral as a function of the running sum `S` on Chebyshev
//! nodes. Each level is a one-dimensional adaptive Gauss–Kronrod integral
//! in `u = sqrt(t)`, which removes the `t^{-1/2}` endpoint behaviour of the
//! one-dimensional heat kernel at the origin.

use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::quadrature::{integrate, Chebyshev, Integral, QuadratureSpec};
use crate::shapes::{enumerate_shapes, Shape};

/// Polynomial degree of the tabulated partial integrals.
const TABLE_DEGREE: usize = 128;

/// Per-edge durations together with per-edge vectors (displacements for
/// the spatial densities, frequencies for the transforms).
#[derive(Clone, Debug)]
pub struct EdgeAssignment<'a> {
    shape: &'a Shape,
    t: Vec<f64>,
    vectors: Vec<Vec<f64>>,
    d: usize,
}

impl<'a> EdgeAssignment<'a> {
    pub fn new(shape: &'a Shape, t: Vec<f64>, vectors: Vec<Vec<f64>>) -> Result<Self> {
        let n = shape.edge_count();
        if t.len() != n || vectors.len() != n {
            return Err(invalid(format!(
                "shape has {n} edges but got {} times and {} vectors",
                t.len(),
                vectors.len()
            )));
        }
        let d = vectors[0].len();
        if d == 0 || vectors.iter().any(|v| v.len() != d) {
            return Err(invalid("edge vectors must share a dimension d >= 1"));
        }
        if t.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(invalid("edge durations must be finite and nonnegative"));
        }
        Ok(EdgeAssignment {
            shape,
            t,
            vectors,
            d,
        })
    }

    pub fn shape(&self) -> &Shape {
        self.shape
    }

    pub fn times(&self) -> &[f64] {
        &self.t
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn dimension(&self) -> usize {
        self.d
    }
}

fn norm_sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn survival(total: f64) -> f64 {
    total * (-total * total / 2.0).exp()
}

/// Brownian transition density `p_t(x) = (2 pi t)^{-d/2} exp(-|x|^2 / 2t)`.
pub fn gaussian_density(x: &[f64], t: f64) -> Result<f64> {
    if x.is_empty() {
        return Err(invalid("dimension must be at least 1"));
    }
    if !(t > 0.0) {
        return Err(invalid(format!("heat kernel needs t > 0, got {t}")));
    }
    Ok(heat_kernel(norm_sq(x), t, x.len()))
}

fn heat_kernel(r2: f64, t: f64, d: usize) -> f64 {
    (2.0 * PI * t).powf(-(d as f64) / 2.0) * (-r2 / (2.0 * t)).exp()
}

/// Time-resolved two-point density `t exp(-t^2/2) p_t(x)`; zero at `t = 0`.
pub fn two_point_density(x: &[f64], t: f64) -> Result<f64> {
    if x.is_empty() {
        return Err(invalid("dimension must be at least 1"));
    }
    if !(t >= 0.0) {
        return Err(invalid(format!("time must be nonnegative, got {t}")));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    Ok(survival(t) * heat_kernel(norm_sq(x), t, x.len()))
}

/// Two-point density of the mean ISE measure, the time integral of
/// [`two_point_density`].
pub fn two_point(x: &[f64], q: &QuadratureSpec) -> Result<Integral> {
    q.validate()?;
    let d = x.len();
    if d == 0 {
        return Err(invalid("dimension must be at least 1"));
    }
    let r2 = norm_sq(x);
    if r2 == 0.0 && d >= 4 {
        return Err(invalid(format!("two-point density diverges at the origin for d = {d}")));
    }
    let root = q.radius.sqrt();
    let mut out = integrate(
        |u| {
            let t = u * u;
            if t == 0.0 {
                return 0.0;
            }
            2.0 * u * survival(t) * heat_kernel(r2, t, d)
        },
        0.0,
        root,
        q.abs_tol,
        q.rel_tol,
        q.limit,
    )?;
    out.error += q.tail_bound(1);
    Ok(out)
}

/// Time-resolved m-point density at the assignment's durations and
/// displacements. Returns 0 when all durations vanish.
pub fn m_point_density(a: &EdgeAssignment<'_>) -> Result<f64> {
    let total: f64 = a.t.iter().sum();
    if total == 0.0 {
        return Ok(0.0);
    }
    if a.t.iter().any(|&t| t == 0.0) {
        return Err(invalid("m-point density needs every duration positive"));
    }
    let product: f64 = a
        .t
        .iter()
        .zip(&a.vectors)
        .map(|(&t, y)| heat_kernel(norm_sq(y), t, a.d))
        .product();
    Ok(survival(total) * product)
}

/// Closed-form Fourier transform of the time-resolved m-point density,
/// `(sum t) exp(-(sum t)^2/2) prod_j exp(-|k_j|^2 t_j / 2)`.
pub fn m_point_density_hat(a: &EdgeAssignment<'_>) -> f64 {
    let total: f64 = a.t.iter().sum();
    let damping: f64 = a
        .t
        .iter()
        .zip(&a.vectors)
        .map(|(&t, k)| -norm_sq(k) * t / 2.0)
        .sum();
    survival(total) * damping.exp()
}

// Evaluates int_{[0,R]^n, sum t <= R} F(sum t) prod g_j(t_j) dt, outermost
// variable first in `weights`.
fn time_chain(weights: &[&dyn Fn(f64) -> f64], q: &QuadratureSpec) -> Result<Integral> {
    let n = weights.len();
    assert!(n >= 1);
    let r = q.radius;
    let level = |outer: &dyn Fn(f64) -> f64, g: &dyn Fn(f64) -> f64, s: f64| {
        let top = (r - s).max(0.0).sqrt();
        integrate(
            |u| {
                let t = u * u;
                2.0 * u * g(t) * outer(s + t)
            },
            0.0,
            top,
            q.abs_tol,
            q.rel_tol,
            q.limit,
        )
    };
    let mass = |g: &dyn Fn(f64) -> f64| -> Result<f64> {
        let v = integrate(
            |u| 2.0 * u * g(u * u),
            0.0,
            r.sqrt(),
            q.abs_tol,
            q.rel_tol,
            q.limit,
        )?;
        Ok(v.value)
    };

    let base = |s: f64| survival(s);
    let mut table: Option<Chebyshev> = None;
    // sup-norm error of the current tabulated partial integral
    let mut carried = 0.0;
    for j in (1..n).rev() {
        let outer: &dyn Fn(f64) -> f64 = match &table {
            Some(c) => &|s| c.eval(s),
            None => &base,
        };
        let pts = Chebyshev::points(0.0, r, TABLE_DEGREE);
        let mut values = Vec::with_capacity(pts.len());
        let mut worst = 0.0f64;
        for &s in &pts {
            let v = level(outer, weights[j], s)?;
            worst = worst.max(v.error);
            values.push(v.value);
        }
        let cheb = Chebyshev::from_values(0.0, r, values);
        carried = carried * mass(weights[j])? + worst + cheb.tail_estimate();
        table = Some(cheb);
    }
    let outer: &dyn Fn(f64) -> f64 = match &table {
        Some(c) => &|s| c.eval(s),
        None => &base,
    };
    let mut result = level(outer, weights[0], 0.0)?;
    if n > 1 {
        result.error += carried * mass(weights[0])?;
    }
    result.error += q.tail_bound(n);
    Ok(result)
}

/// The m-point ISE density `A^(m)(sigma; y)`, integrated over all edge
/// durations. Supported for `m <= 4`.
pub fn m_point(shape: &Shape, y: &[Vec<f64>], q: &QuadratureSpec) -> Result<Integral> {
    q.validate()?;
    let m = shape.m();
    if m > 4 {
        return Err(Error::Unsupported(format!(
            "spatial m-point densities are limited to m <= 4, got m = {m}"
        )));
    }
    if y.len() != shape.edge_count() {
        return Err(invalid(format!(
            "shape has {} edges, got {} displacements",
            shape.edge_count(),
            y.len()
        )));
    }
    let d = y[0].len();
    if d == 0 || y.iter().any(|v| v.len() != d) {
        return Err(invalid("displacements must share a dimension d >= 1"));
    }
    let r2: Vec<f64> = y.iter().map(|v| norm_sq(v)).collect();
    let singular_limit = if m == 2 { 4 } else { 2 };
    if d >= singular_limit && r2.iter().any(|&x| x == 0.0) {
        return Err(invalid(format!(
            "{m}-point density diverges at a zero displacement in d = {d}"
        )));
    }
    let kernels: Vec<Box<dyn Fn(f64) -> f64>> = r2
        .iter()
        .map(|&rr| {
            Box::new(move |t: f64| if t == 0.0 { 0.0 } else { heat_kernel(rr, t, d) })
                as Box<dyn Fn(f64) -> f64>
        })
        .collect();
    if m == 2 {
        // avoid the u = 0 node for the d = 2, 3 origin limits
        return two_point(&y[0], q);
    }
    let refs: Vec<&dyn Fn(f64) -> f64> = kernels.iter().map(|b| b.as_ref()).collect();
    time_chain(&refs, q)
}

/// Fourier transform `hat A^(m)(sigma; k)` of the m-point density, for
/// `m <= 5`. Depends on the frequencies only through `|k_j|^2`.
pub fn m_point_hat(shape: &Shape, k: &[Vec<f64>], q: &QuadratureSpec) -> Result<Integral> {
    if k.len() != shape.edge_count() {
        return Err(invalid(format!(
            "shape has {} edges, got {} frequencies",
            shape.edge_count(),
            k.len()
        )));
    }
    let k2: Vec<f64> = k.iter().map(|v| norm_sq(v)).collect();
    m_point_hat_sq(shape, &k2, q)
}

/// [`m_point_hat`] taking squared frequency norms directly.
pub fn m_point_hat_sq(shape: &Shape, k2: &[f64], q: &QuadratureSpec) -> Result<Integral> {
    q.validate()?;
    let m = shape.m();
    if m > 5 {
        return Err(Error::Unsupported(format!(
            "Fourier m-point functions are limited to m <= 5, got m = {m}"
        )));
    }
    if k2.len() != shape.edge_count() {
        return Err(invalid("one squared frequency per edge expected"));
    }
    if k2.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(invalid("squared frequencies must be finite and nonnegative"));
    }
    let damp: Vec<Box<dyn Fn(f64) -> f64>> = k2
        .iter()
        .map(|&kk| Box::new(move |t: f64| (-kk * t / 2.0).exp()) as Box<dyn Fn(f64) -> f64>)
        .collect();
    let refs: Vec<&dyn Fn(f64) -> f64> = damp.iter().map(|b| b.as_ref()).collect();
    time_chain(&refs, q)
}

/// Integral of `A^(m)(sigma; y)` over all displacements in `R^d`, for a
/// shape with `m <= 5`. The displacement integral of each edge is carried
/// out numerically inside the corresponding time level (Tonelli order
/// `t_1, y_1, t_2, y_2, ...`); the exact answer is `1/(2m-5)!!`.
pub fn m_point_total_mass(shape: &Shape, d: usize, q: &QuadratureSpec) -> Result<Integral> {
    q.validate()?;
    if d == 0 {
        return Err(invalid("dimension must be at least 1"));
    }
    if shape.m() > 5 {
        return Err(Error::Unsupported("total mass limited to m <= 5".into()));
    }
    // spatial integral of the 1-d heat kernel, by quadrature in y
    let kernel_mass = move |t: f64| -> f64 {
        if t == 0.0 {
            return 1.0;
        }
        let width = 14.0 * t.sqrt();
        let half = integrate(
            |y| heat_kernel(y * y, t, 1),
            0.0,
            width,
            1e-14,
            1e-14,
            200,
        )
        .map(|v| v.value)
        .unwrap_or(f64::NAN);
        (2.0 * half).powi(d as i32)
    };
    let refs: Vec<&dyn Fn(f64) -> f64> =
        (0..shape.edge_count()).map(|_| &kernel_mass as &dyn Fn(f64) -> f64).collect();
    let out = time_chain(&refs, q)?;
    if !out.value.is_finite() {
        return Err(Error::NumericalFailure {
            message: "spatial kernel quadrature failed".into(),
            error_estimate: f64::INFINITY,
        });
    }
    Ok(out)
}

/// Integral of `A^(2)(x)` over `R^d` computed the direct way: an outer
/// radial quadrature over `x` of the inner time integral. Supports d = 1..3.
pub fn two_point_total_mass_direct(d: usize, q: &QuadratureSpec) -> Result<Integral> {
    q.validate()?;
    let surface = match d {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => return Err(Error::Unsupported("direct route limited to d <= 3".into())),
    };
    let inner = QuadratureSpec {
        abs_tol: q.abs_tol * 1e-2,
        rel_tol: q.rel_tol * 1e-2,
        ..*q
    };
    let failed = std::cell::Cell::new(None);
    let r_max = 30.0;
    let out = integrate(
        |r| {
            let mut x = vec![0.0; d];
            x[0] = r;
            if r == 0.0 && d > 1 {
                return 0.0;
            }
            match two_point(&x, &inner) {
                Ok(v) => surface * r.powi(d as i32 - 1) * v.value,
                Err(e) => {
                    failed.set(Some(e.to_string()));
                    0.0
                }
            }
        },
        0.0,
        r_max,
        q.abs_tol,
        q.rel_tol,
        q.limit,
    )?;
    if let Some(msg) = failed.into_inner() {
        return Err(Error::NumericalFailure {
            message: msg,
            error_estimate: f64::INFINITY,
        });
    }
    Ok(out)
}

/// Fourier transform of `A^(2)` in d = 1 by direct quadrature of
/// `int A^(2)(x) cos(kx) dx`; the independent route to `hat A^(2)(k)`.
pub fn two_point_fourier_direct(k: f64, q: &QuadratureSpec) -> Result<Integral> {
    q.validate()?;
    let inner = QuadratureSpec {
        abs_tol: q.abs_tol * 1e-2,
        rel_tol: q.rel_tol * 1e-2,
        ..*q
    };
    integrate(
        |x| {
            two_point(&[x], &inner)
                .map(|v| 2.0 * v.value * (k * x).cos())
                .unwrap_or(f64::NAN)
        },
        0.0,
        30.0,
        q.abs_tol,
        q.rel_tol,
        q.limit,
    )
}

/// Edge frequencies induced by frequencies on the external vertices
/// `1..=l`: edge `j` carries the sum of `k_i` over the externals `i` whose
/// path from vertex 0 uses `j`.
pub fn route_frequencies(shape: &Shape, k: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    if k.len() + 1 != shape.m() {
        return Err(invalid(format!(
            "an {}-shape routes {} external frequencies, got {}",
            shape.m(),
            shape.m() - 1,
            k.len()
        )));
    }
    let d = k.first().map(|v| v.len()).unwrap_or(0);
    if d == 0 || k.iter().any(|v| v.len() != d) {
        return Err(invalid("frequencies must share a dimension d >= 1"));
    }
    Ok(shape
        .frequency_routing()
        .iter()
        .map(|below| {
            let mut acc = vec![0.0; d];
            for &i in below {
                for (a, b) in acc.iter_mut().zip(&k[i - 1]) {
                    *a += b;
                }
            }
            acc
        })
        .collect())
}

/// Characteristic function of the l-th ISE moment measure at frequencies
/// `k_1..k_l`: the sum over (l+1)-shapes of the routed Fourier m-point
/// function. Real-valued. Supported for `1 <= l <= 3`.
pub fn moment_characteristic(k: &[Vec<f64>], q: &QuadratureSpec) -> Result<Integral> {
    let l = k.len();
    if !(1..=3).contains(&l) {
        return Err(Error::Unsupported(format!(
            "moment characteristic functions are implemented for l = 1..3, got {l}"
        )));
    }
    let mut total = Integral {
        value: 0.0,
        error: 0.0,
    };
    for shape in enumerate_shapes(l + 1)? {
        let edges = route_frequencies(&shape, k)?;
        let v = m_point_hat(&shape, &edges, q)?;
        total.value += v.value;
        total.error += v.error;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(m: usize) -> Shape {
        enumerate_shapes(m).unwrap().remove(0)
    }

    #[test]
    fn heat_kernel_values() {
        let v = gaussian_density(&[0.0, 0.0], 1.0).unwrap();
        assert!((v - 1.0 / (2.0 * PI)).abs() < 1e-15);
        // mpmath: exp(-1/4) / (4 pi)
        let v = gaussian_density(&[1.0, 0.0], 2.0).unwrap();
        assert!((v - 0.061_974_997_154_826_48).abs() < 1e-16);
        assert!(gaussian_density(&[0.0], 0.0).is_err());
        assert!(gaussian_density(&[0.0], -1.0).is_err());
        assert!(gaussian_density(&[], 1.0).is_err());
    }

    #[test]
    fn heat_kernel_normalised() {
        let v = integrate(
            |x| gaussian_density(&[x], 0.5).unwrap(),
            -20.0,
            20.0,
            1e-13,
            1e-13,
            100,
        )
        .unwrap();
        assert!((v.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_point_density_values() {
        assert_eq!(two_point_density(&[0.3], 0.0).unwrap(), 0.0);
        // mpmath: exp(-1/2)/sqrt(2 pi)
        let v = two_point_density(&[0.0], 1.0).unwrap();
        assert!((v - 0.241_970_724_519_143_35).abs() < 1e-16);
        assert!(two_point_density(&[0.0], -0.1).is_err());
    }

    #[test]
    fn two_point_rotation_symmetric() {
        let q = QuadratureSpec::default();
        let a = two_point(&[0.3, 1.1], &q).unwrap().value;
        let b = two_point(&[1.1, 0.3], &q).unwrap().value;
        assert_eq!(a, b);
    }

    // Oracle: composite trapezoid on a dense grid in t, written out
    // independently of the adaptive machinery.
    #[test]
    fn two_point_origin_matches_dense_trapezoid() {
        let f = |t: f64| t.sqrt() * (-t * t / 2.0).exp() / (2.0 * PI).sqrt();
        // sqrt(t) at 0 spoils trapezoid convergence; substitute t = u^2
        let g = |u: f64| 2.0 * u * f(u * u);
        let n = 200_000;
        let top = 10f64.sqrt();
        let h = top / n as f64;
        let mut s = 0.5 * (g(0.0) + g(top));
        for i in 1..n {
            s += g(i as f64 * h);
        }
        let oracle = s * h;
        let v = two_point(&[0.0], &QuadratureSpec::default()).unwrap();
        assert!((v.value - oracle).abs() < 1e-9, "{} vs {}", v.value, oracle);
    }

    #[test]
    fn origin_divergence_reported() {
        let q = QuadratureSpec::default();
        assert!(two_point(&[0.0; 4], &q).is_err());
        assert!(two_point(&[0.0; 3], &q).is_ok());
        let s3 = shape(3);
        assert!(m_point(&s3, &[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]], &q).is_err());
        assert!(m_point(&shape(5), &vec![vec![1.0]; 7], &q).is_err());
    }

    #[test]
    fn m_point_density_reduces_to_two_point() {
        let s2 = shape(2);
        for &(x, t) in &[(0.0, 0.5), (0.7, 1.3), (-2.0, 3.0)] {
            let a = EdgeAssignment::new(&s2, vec![t], vec![vec![x]]).unwrap();
            let lhs = m_point_density(&a).unwrap();
            let rhs = two_point_density(&[x], t).unwrap();
            assert!((lhs - rhs).abs() <= 1e-15 * rhs.max(1e-300));
        }
    }

    #[test]
    fn m_point_density_three_point_value() {
        let s3 = shape(3);
        let a = EdgeAssignment::new(&s3, vec![1.0; 3], vec![vec![0.0]; 3]).unwrap();
        // mpmath: 3 e^{-9/2} (2 pi)^{-3/2}
        let expected = 0.002_116_051_745_381_700_7;
        assert!((m_point_density(&a).unwrap() - expected).abs() < 1e-17);
    }

    #[test]
    fn m_point_density_factorises() {
        let s4 = shape(4);
        let t = vec![0.2, 0.9, 0.4, 1.1, 0.3];
        let total: f64 = t.iter().sum();
        for y in [vec![0.0; 5], vec![0.3, -1.0, 0.5, 0.2, 2.0]] {
            let ys: Vec<Vec<f64>> = y.iter().map(|&v| vec![v]).collect();
            let a = EdgeAssignment::new(&s4, t.clone(), ys.clone()).unwrap();
            let kernels: f64 = t
                .iter()
                .zip(&ys)
                .map(|(&tt, yy)| gaussian_density(yy, tt).unwrap())
                .product();
            let ratio = m_point_density(&a).unwrap() / kernels;
            assert!((ratio - survival(total)).abs() < 1e-14);
        }
    }

    #[test]
    fn m_point_density_tail_decay() {
        let s3 = shape(3);
        let a = EdgeAssignment::new(&s3, vec![3.0, 4.0, 5.0], vec![vec![0.0]; 3]).unwrap();
        let total = 12.0f64;
        assert!(m_point_density(&a).unwrap() < (-total * total / 4.0).exp());
        let zero = EdgeAssignment::new(&s3, vec![0.0; 3], vec![vec![0.0]; 3]).unwrap();
        assert_eq!(m_point_density(&zero).unwrap(), 0.0);
        assert!(EdgeAssignment::new(&s3, vec![1.0; 2], vec![vec![0.0]; 3]).is_err());
    }

    #[test]
    fn density_hat_values() {
        let s2 = shape(2);
        let zero = EdgeAssignment::new(&s2, vec![1.3], vec![vec![0.0, 0.0]]).unwrap();
        assert!((m_point_density_hat(&zero) - survival(1.3)).abs() < 1e-16);
        let a = EdgeAssignment::new(&s2, vec![1.0], vec![vec![1.0]]).unwrap();
        assert!((m_point_density_hat(&a) - (-1.0f64).exp()).abs() < 1e-16);
        // monotone in each |k_j|^2
        let s3 = shape(3);
        let t = vec![0.4, 0.8, 1.2];
        let mut last = f64::INFINITY;
        for kk in [0.0, 0.5, 1.0, 2.0] {
            let a = EdgeAssignment::new(&s3, t.clone(), vec![vec![0.1], vec![kk], vec![0.3]])
                .unwrap();
            let v = m_point_density_hat(&a);
            assert!(v < last);
            last = v;
        }
    }

    #[test]
    fn transform_normalisation() {
        let q = QuadratureSpec::default();
        let v2 = m_point_hat(&shape(2), &[vec![0.0]], &q).unwrap();
        assert!((v2.value - 1.0).abs() < 1e-8);
        let v4 = m_point_hat(&shape(4), &vec![vec![0.0]; 5], &q).unwrap();
        assert!((v4.value - 1.0 / 3.0).abs() < 1e-8, "{v4:?}");
        let v5 = m_point_hat(&shape(5), &vec![vec![0.0]; 7], &q).unwrap();
        assert!((v5.value - 1.0 / 15.0).abs() < 1e-8, "{v5:?}");
        assert!(m_point_hat(&shape(6), &vec![vec![0.0]; 9], &q).is_err());
    }

    // Oracle: dense trapezoid for int t e^{-t^2/2 - t/2} dt on [0, 12].
    #[test]
    fn transform_two_point_unit_frequency() {
        let g = |t: f64| t * (-t * t / 2.0 - t / 2.0).exp();
        let n = 400_000;
        let h = 12.0 / n as f64;
        let mut s = 0.5 * (g(0.0) + g(12.0));
        for i in 1..n {
            s += g(i as f64 * h);
        }
        let oracle = s * h;
        let v = m_point_hat(&shape(2), &[vec![1.0]], &QuadratureSpec::default()).unwrap();
        assert!((v.value - oracle).abs() < 1e-9);
    }

    #[test]
    fn m_point_two_matches_two_point() {
        let q = QuadratureSpec::default();
        let a = m_point(&shape(2), &[vec![0.4]], &q).unwrap();
        let b = two_point(&[0.4], &q).unwrap();
        assert!((a.value - b.value).abs() <= a.error + b.error + 1e-14);
    }

    #[test]
    fn total_mass_two_and_three() {
        let q = QuadratureSpec::default();
        let v = m_point_total_mass(&shape(2), 1, &q).unwrap();
        assert!((v.value - 1.0).abs() < 1e-8);
        let v = m_point_total_mass(&shape(3), 1, &q).unwrap();
        assert!((v.value - 1.0).abs() < 1e-8);
        let v = two_point_total_mass_direct(1, &q).unwrap();
        assert!((v.value - 1.0).abs() < 1e-7, "{v:?}");
    }

    #[test]
    fn transform_matches_direct_fourier() {
        let q = QuadratureSpec {
            abs_tol: 1e-9,
            rel_tol: 1e-9,
            ..QuadratureSpec::default()
        };
        for k in [0.0, 0.5, 1.0, 2.0, 3.5] {
            let lhs = m_point_hat(&shape(2), &[vec![k]], &q).unwrap();
            let rhs = two_point_fourier_direct(k, &q).unwrap();
            assert!(
                (lhs.value - rhs.value).abs() < 1e-7,
                "k={k}: {} vs {}",
                lhs.value,
                rhs.value
            );
        }
    }

    #[test]
    fn routing_matches_worked_cases() {
        let s3 = shape(3);
        let r = route_frequencies(&s3, &[vec![1.0], vec![10.0]]).unwrap();
        assert_eq!(r, vec![vec![11.0], vec![1.0], vec![10.0]]);
        let s4 = shape(4);
        let r = route_frequencies(&s4, &[vec![1.0], vec![10.0], vec![100.0]]).unwrap();
        assert_eq!(
            r,
            vec![vec![111.0], vec![1.0], vec![110.0], vec![10.0], vec![100.0]]
        );
    }

    #[test]
    fn moment_characteristic_at_zero() {
        let q = QuadratureSpec::default();
        for l in 1..=3 {
            let v = moment_characteristic(&vec![vec![0.0, 0.0]; l], &q).unwrap();
            assert!((v.value - 1.0).abs() < 1e-8, "l={l}: {v:?}");
        }
        assert!(moment_characteristic(&vec![vec![0.0]; 4], &q).is_err());
        let one = moment_characteristic(&[vec![0.7]], &q).unwrap();
        let direct = m_point_hat(&shape(2), &[vec![0.7]], &q).unwrap();
        assert_eq!(one.value, direct.value);
    }
}
