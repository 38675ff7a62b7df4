//! Exact arithmetic in the field Q(√2).

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// `r ≈ m 2^e` with `m` a modest double, exact to about 60 bits.
fn split(r: &BigRational) -> (f64, i64) {
    let shrink = |x: &BigInt| -> (f64, i64) {
        let drop = x.bits().saturating_sub(64);
        ((x >> drop).to_f64().expect("64-bit value"), drop as i64)
    };
    let (n, en) = shrink(r.numer());
    let (d, ed) = shrink(r.denom());
    (n / d, en - ed)
}

/// `m 2^e`, applied in steps so that intermediate powers cannot overflow.
fn ldexp(mut m: f64, mut e: i64) -> f64 {
    while e > 1000 {
        m *= 2f64.powi(1000);
        e -= 1000;
        if m.is_infinite() {
            return m;
        }
    }
    while e < -1000 {
        m *= 2f64.powi(-1000);
        e += 1000;
        if m == 0.0 {
            return m;
        }
    }
    m * 2f64.powi(e as i32)
}

/// `a + b√2` with rational `a`, `b`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct QSqrt2 {
    pub a: BigRational,
    pub b: BigRational,
}

impl QSqrt2 {
    pub fn new(a: BigRational, b: BigRational) -> Self {
        QSqrt2 { a, b }
    }

    pub fn from_rational(a: BigRational) -> Self {
        QSqrt2 {
            a,
            b: BigRational::zero(),
        }
    }

    pub fn from_integer(a: i64) -> Self {
        Self::from_rational(BigRational::from_integer(a.into()))
    }

    pub fn sqrt2() -> Self {
        QSqrt2 {
            a: BigRational::zero(),
            b: BigRational::one(),
        }
    }

    pub fn zero() -> Self {
        Self::from_integer(0)
    }

    pub fn one() -> Self {
        Self::from_integer(1)
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }

    /// `(a + b√2)(a − b√2) = a² − 2b²`.
    pub fn norm(&self) -> BigRational {
        &self.a * &self.a - BigRational::from_integer(2.into()) * &self.b * &self.b
    }

    pub fn conjugate(&self) -> Self {
        QSqrt2 {
            a: self.a.clone(),
            b: -self.b.clone(),
        }
    }

    pub fn inverse(&self) -> Result<Self> {
        if self.is_zero() {
            return Err(invalid("division by zero in Q(sqrt 2)"));
        }
        let n = self.norm();
        Ok(QSqrt2 {
            a: &self.a / &n,
            b: -&self.b / &n,
        })
    }

    pub fn signum(&self) -> Ordering {
        let sa = self.a.cmp(&BigRational::zero());
        let sb = self.b.cmp(&BigRational::zero());
        match (sa, sb) {
            (Ordering::Equal, s) | (s, Ordering::Equal) => s,
            (x, y) if x == y => x,
            // opposite signs: compare a² with 2b²
            (sa, _) => {
                let n = self.norm();
                match n.cmp(&BigRational::zero()) {
                    Ordering::Equal => Ordering::Equal,
                    Ordering::Greater => sa,
                    Ordering::Less => sa.reverse(),
                }
            }
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        self.signum() != Ordering::Less
    }

    /// Nearest-ish double. When `a` and `b√2` have opposite signs the value
    /// is formed as `(a² − 2b²)/(a − b√2)` so that no cancellation occurs.
    /// Intermediates are kept as mantissa and binary exponent, so parts far
    /// outside the double range still give a finite result.
    pub fn to_f64(&self) -> f64 {
        let (ma, ea) = split(&self.a);
        let (mb, eb) = split(&self.b);
        let mb = mb * std::f64::consts::SQRT_2;
        let e = ea.max(eb);
        let sum = ldexp(ma, ea - e) + ldexp(mb, eb - e);
        if self.a.is_negative() == self.b.is_negative() || self.a.is_zero() || self.b.is_zero() {
            return ldexp(sum, e);
        }
        let diff = ldexp(ma, ea - e) - ldexp(mb, eb - e);
        let (mn, en) = split(&self.norm());
        ldexp(mn / diff, en - e)
    }

    pub fn scale(&self, r: &BigRational) -> Self {
        QSqrt2 {
            a: &self.a * r,
            b: &self.b * r,
        }
    }
}

impl fmt::Display for QSqrt2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} + {}*sqrt2", self.a, self.b)
    }
}

impl Add<&QSqrt2> for &QSqrt2 {
    type Output = QSqrt2;
    fn add(self, o: &QSqrt2) -> QSqrt2 {
        QSqrt2 {
            a: &self.a + &o.a,
            b: &self.b + &o.b,
        }
    }
}

impl Sub<&QSqrt2> for &QSqrt2 {
    type Output = QSqrt2;
    fn sub(self, o: &QSqrt2) -> QSqrt2 {
        QSqrt2 {
            a: &self.a - &o.a,
            b: &self.b - &o.b,
        }
    }
}

impl Mul<&QSqrt2> for &QSqrt2 {
    type Output = QSqrt2;
    fn mul(self, o: &QSqrt2) -> QSqrt2 {
        let two = BigRational::from_integer(2.into());
        QSqrt2 {
            a: &self.a * &o.a + two * &self.b * &o.b,
            b: &self.a * &o.b + &self.b * &o.a,
        }
    }
}

impl Neg for QSqrt2 {
    type Output = QSqrt2;
    fn neg(self) -> QSqrt2 {
        QSqrt2 {
            a: -self.a,
            b: -self.b,
        }
    }
}

/// Integer `a + b√2`, used for bulk arithmetic before a single division.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct ZSqrt2 {
    pub a: BigInt,
    pub b: BigInt,
}

impl ZSqrt2 {
    pub fn new(a: impl Into<BigInt>, b: impl Into<BigInt>) -> Self {
        ZSqrt2 {
            a: a.into(),
            b: b.into(),
        }
    }

    pub fn zero() -> Self {
        Self::new(0, 0)
    }

    pub fn one() -> Self {
        Self::new(1, 0)
    }

    pub fn mul(&self, o: &ZSqrt2) -> ZSqrt2 {
        ZSqrt2 {
            a: &self.a * &o.a + ((&self.b * &o.b) << 1),
            b: &self.a * &o.b + &self.b * &o.a,
        }
    }

    pub fn scale(&self, k: &BigInt) -> ZSqrt2 {
        ZSqrt2 {
            a: &self.a * k,
            b: &self.b * k,
        }
    }

    pub fn add_assign(&mut self, o: &ZSqrt2) {
        self.a += &o.a;
        self.b += &o.b;
    }

    pub fn pow(&self, e: u64) -> ZSqrt2 {
        let mut out = ZSqrt2::one();
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                out = out.mul(&base);
            }
            base = base.mul(&base);
            e >>= 1;
        }
        out
    }

    pub fn over(self, den: &BigInt) -> QSqrt2 {
        QSqrt2 {
            a: BigRational::new(self.a, den.clone()),
            b: BigRational::new(self.b, den.clone()),
        }
    }
}

/// Serialized form: `{"a": "p/q", "b": "p/q"}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QSqrt2Record {
    pub a: String,
    pub b: String,
}

pub fn rational_string(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let (p, q) = match s.split_once('/') {
        Some((p, q)) => (p.trim(), q.trim()),
        None => (s, "1"),
    };
    let p: BigInt = p
        .parse()
        .map_err(|_| invalid(format!("bad rational numerator in {s:?}")))?;
    let q: BigInt = q
        .parse()
        .map_err(|_| invalid(format!("bad rational denominator in {s:?}")))?;
    if q.is_zero() {
        return Err(invalid(format!("zero denominator in {s:?}")));
    }
    Ok(BigRational::new(p, q))
}

impl From<&QSqrt2> for QSqrt2Record {
    fn from(x: &QSqrt2) -> Self {
        QSqrt2Record {
            a: rational_string(&x.a),
            b: rational_string(&x.b),
        }
    }
}

impl TryFrom<&QSqrt2Record> for QSqrt2 {
    type Error = crate::Error;
    fn try_from(r: &QSqrt2Record) -> Result<Self> {
        Ok(QSqrt2 {
            a: parse_rational(&r.a)?,
            b: parse_rational(&r.b)?,
        })
    }
}
