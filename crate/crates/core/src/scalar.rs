//! Scalar fields used throughout the crate.
//!
//! Two arithmetic paths are supported: exact complex rationals ([`Cq`]) and
//! complex doubles ([`C64`]). Structure constants of root systems are always
//! real rationals ([`Q`]).

use std::fmt::{self, Debug};
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_complex::Complex;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde_json::Value;

use crate::error::{Error, Result};

pub type Q = BigRational;
pub type Cq = Complex<BigRational>;
pub type C64 = num_complex::Complex64;

/// Relative tolerance used when merging floating point exponents.
pub const FLOAT_MERGE_TOL: f64 = 1e-12;

pub fn q(n: i64, d: i64) -> Q {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn qi(n: i64) -> Q {
    BigRational::from_integer(BigInt::from(n))
}

pub fn q_to_f64(x: &Q) -> f64 {
    x.to_f64().unwrap_or_else(|| {
        // huge numerators: fall back to a ratio of floats
        let n = x.numer().to_f64().unwrap_or(f64::NAN);
        let d = x.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

/// Integer value of an integral rational.
pub fn q_to_i64(x: &Q) -> Option<i64> {
    if x.is_integer() {
        x.to_integer().to_i64()
    } else {
        None
    }
}

/// Formats a rational as `"p/q"` (or `"p"` for integers).
pub fn q_to_string(x: &Q) -> String {
    if x.is_integer() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

/// Parses `"p/q"`, `"p"`, or a terminating decimal like `"0.25"`.
pub fn parse_q(s: &str) -> Result<Q> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a rational number: {s:?}"));
    if let Some((n, d)) = s.split_once('/') {
        let n = BigInt::from_str(n.trim()).map_err(|_| bad())?;
        let d = BigInt::from_str(d.trim()).map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(n, d));
    }
    if let Some((ip, fp)) = s.split_once('.') {
        let neg = ip.trim_start().starts_with('-');
        let ip_abs = ip.trim_start_matches(['-', '+']);
        let int = if ip_abs.is_empty() {
            BigInt::zero()
        } else {
            BigInt::from_str(ip_abs).map_err(|_| bad())?
        };
        if fp.is_empty() || !fp.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let frac = BigInt::from_str(fp).map_err(|_| bad())?;
        let den = num_traits::pow(BigInt::from(10), fp.len());
        let mag = BigRational::new(int * &den + frac, den);
        return Ok(if neg { -mag } else { mag });
    }
    BigInt::from_str(s).map(BigRational::from_integer).map_err(|_| bad())
}

/// Common interface of the two complex scalar fields.
pub trait Scalar:
    Clone
    + Debug
    + PartialEq
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    const EXACT: bool;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_q(x: &Q) -> Self;
    fn from_cq(x: &Cq) -> Self;
    /// Lossy conversion of a float into the field (exact for `Cq` only on dyadics).
    fn from_c64(x: C64) -> Self;
    fn to_c64(&self) -> C64;
    fn conj(&self) -> Self;
    /// Exact zero test.
    fn is_zero(&self) -> bool;
    /// Equality up to the field's merge tolerance (exact for `Cq`).
    fn approx_eq(&self, other: &Self) -> bool;
    /// True if the value lies below `tol` in modulus (exact zero for `Cq`).
    fn is_negligible(&self, tol: f64) -> bool;
    fn to_json(&self) -> Value;
    fn from_json(v: &Value) -> Result<Self>;

    fn from_i64(n: i64) -> Self {
        Self::from_q(&qi(n))
    }
    fn abs(&self) -> f64 {
        self.to_c64().norm()
    }
    fn re_f64(&self) -> f64 {
        self.to_c64().re
    }
}

impl Scalar for Cq {
    const EXACT: bool = true;

    fn zero() -> Self {
        Complex::new(Q::zero(), Q::zero())
    }
    fn one() -> Self {
        Complex::new(Q::one(), Q::zero())
    }
    fn from_q(x: &Q) -> Self {
        Complex::new(x.clone(), Q::zero())
    }
    fn from_cq(x: &Cq) -> Self {
        x.clone()
    }
    fn from_c64(x: C64) -> Self {
        let re = BigRational::from_float(x.re).unwrap_or_else(Q::zero);
        let im = BigRational::from_float(x.im).unwrap_or_else(Q::zero);
        Complex::new(re, im)
    }
    fn to_c64(&self) -> C64 {
        C64::new(q_to_f64(&self.re), q_to_f64(&self.im))
    }
    fn conj(&self) -> Self {
        Complex::new(self.re.clone(), -self.im.clone())
    }
    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }
    fn approx_eq(&self, other: &Self) -> bool {
        self == other
    }
    fn is_negligible(&self, _tol: f64) -> bool {
        Scalar::is_zero(self)
    }
    fn to_json(&self) -> Value {
        Value::Array(vec![
            Value::String(q_to_string(&self.re)),
            Value::String(q_to_string(&self.im)),
        ])
    }
    fn from_json(v: &Value) -> Result<Self> {
        let part = |x: &Value| -> Result<Q> {
            match x {
                Value::String(s) => parse_q(s),
                Value::Number(n) => n
                    .as_i64()
                    .map(qi)
                    .ok_or_else(|| Error::Parse(format!("expected exact number, got {n}"))),
                _ => Err(Error::Parse(format!("bad rational {x}"))),
            }
        };
        match v {
            Value::Array(a) if a.len() == 2 => Ok(Complex::new(part(&a[0])?, part(&a[1])?)),
            other => Ok(Complex::new(part(other)?, Q::zero())),
        }
    }
}

impl Scalar for C64 {
    const EXACT: bool = false;

    fn zero() -> Self {
        C64::new(0.0, 0.0)
    }
    fn one() -> Self {
        C64::new(1.0, 0.0)
    }
    fn from_q(x: &Q) -> Self {
        C64::new(q_to_f64(x), 0.0)
    }
    fn from_cq(x: &Cq) -> Self {
        x.to_c64()
    }
    fn from_c64(x: C64) -> Self {
        x
    }
    fn to_c64(&self) -> C64 {
        *self
    }
    fn conj(&self) -> Self {
        Complex::conj(self)
    }
    fn is_zero(&self) -> bool {
        self.re == 0.0 && self.im == 0.0
    }
    fn approx_eq(&self, other: &Self) -> bool {
        let scale = 1.0f64.max(self.norm()).max(other.norm());
        (self - other).norm() <= FLOAT_MERGE_TOL * scale
    }
    fn is_negligible(&self, tol: f64) -> bool {
        self.norm() < tol
    }
    fn to_json(&self) -> Value {
        serde_json::json!([self.re, self.im])
    }
    fn from_json(v: &Value) -> Result<Self> {
        match v {
            Value::Array(a) if a.len() == 2 => {
                let re = a[0].as_f64().ok_or_else(|| Error::Parse(format!("bad float {v}")))?;
                let im = a[1].as_f64().ok_or_else(|| Error::Parse(format!("bad float {v}")))?;
                Ok(C64::new(re, im))
            }
            Value::Number(n) => Ok(C64::new(n.as_f64().unwrap_or(f64::NAN), 0.0)),
            _ => Err(Error::Parse(format!("bad complex {v}"))),
        }
    }
}

/// Neumaier-compensated complex accumulator.
#[derive(Clone, Copy, Default)]
pub struct CompensatedSum {
    re: (f64, f64),
    im: (f64, f64),
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, z: C64) {
        neumaier(&mut self.re, z.re);
        neumaier(&mut self.im, z.im);
    }

    pub fn value(&self) -> C64 {
        C64::new(self.re.0 + self.re.1, self.im.0 + self.im.1)
    }
}

fn neumaier(acc: &mut (f64, f64), x: f64) {
    let (s, c) = *acc;
    let t = s + x;
    let c = if s.abs() >= x.abs() { c + ((s - t) + x) } else { c + ((x - t) + s) };
    *acc = (t, c);
}

impl fmt::Display for CompensatedSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

/// Sign of a rational as -1, 0, 1.
pub fn q_sign(x: &Q) -> i32 {
    if x.is_zero() {
        0
    } else if x.is_positive() {
        1
    } else {
        -1
    }
}
