//! Points of the extended Cartan algebra `h ⊕ Cc ⊕ Cd`.
//!
//! A [`HatVector`] `v + ηc + ξd` stores the finite part `v` in ambient
//! coordinates, the coefficient `η` of `c` and the coefficient `ξ` of `d`.
//! The bilinear form extends the Euclidean form on `h` by `(c,d) = 1` and
//! `(c,c) = (d,d) = (c,v) = (d,v) = 0`.
//!
//! As a coordinate vector a `HatVector` is laid out `[v_1, …, v_n, η, ξ]`;
//! polynomial and exponential functions on the extended space use the same
//! layout.

use std::fmt;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::scalar::{Q, Scalar};

#[derive(Clone, PartialEq)]
pub struct HatVector<F> {
    pub fin: Vec<F>,
    pub c: F,
    pub d: F,
}

impl<F: Scalar> HatVector<F> {
    pub fn new(fin: Vec<F>, c: F, d: F) -> Self {
        Self { fin, c, d }
    }

    pub fn zero(n: usize) -> Self {
        Self { fin: vec![F::zero(); n], c: F::zero(), d: F::zero() }
    }

    /// The central element `c`.
    pub fn c_vec(n: usize) -> Self {
        Self { fin: vec![F::zero(); n], c: F::one(), d: F::zero() }
    }

    /// The degree element `d`.
    pub fn d_vec(n: usize) -> Self {
        Self { fin: vec![F::zero(); n], c: F::zero(), d: F::one() }
    }

    pub fn from_finite(fin: Vec<F>) -> Self {
        Self { fin, c: F::zero(), d: F::zero() }
    }

    pub fn from_q(fin: &[Q], c: &Q, d: &Q) -> Self {
        Self { fin: fin.iter().map(F::from_q).collect(), c: F::from_q(c), d: F::from_q(d) }
    }

    pub fn dim(&self) -> usize {
        self.fin.len()
    }

    /// Coordinates `[v, η, ξ]`.
    pub fn coords(&self) -> Vec<F> {
        let mut out = self.fin.clone();
        out.push(self.c.clone());
        out.push(self.d.clone());
        out
    }

    pub fn from_coords(x: &[F]) -> Self {
        let n = x.len() - 2;
        Self { fin: x[..n].to_vec(), c: x[n].clone(), d: x[n + 1].clone() }
    }

    pub fn pairing(&self, other: &Self) -> F {
        let fin = self.fin.iter().zip(&other.fin).fold(F::zero(), |acc, (a, b)| acc + a.clone() * b.clone());
        fin + self.c.clone() * other.d.clone() + self.d.clone() * other.c.clone()
    }

    pub fn add(&self, o: &Self) -> Self {
        Self {
            fin: self.fin.iter().zip(&o.fin).map(|(a, b)| a.clone() + b.clone()).collect(),
            c: self.c.clone() + o.c.clone(),
            d: self.d.clone() + o.d.clone(),
        }
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.scale(&-F::one()))
    }

    pub fn scale(&self, s: &F) -> Self {
        Self {
            fin: self.fin.iter().map(|a| a.clone() * s.clone()).collect(),
            c: self.c.clone() * s.clone(),
            d: self.d.clone() * s.clone(),
        }
    }

    pub fn map<G: Scalar>(&self, f: impl Fn(&F) -> G) -> HatVector<G> {
        HatVector { fin: self.fin.iter().map(&f).collect(), c: f(&self.c), d: f(&self.d) }
    }

    pub fn approx_eq(&self, o: &Self) -> bool {
        self.c.approx_eq(&o.c) && self.d.approx_eq(&o.d) && self.fin.iter().zip(&o.fin).all(|(a, b)| a.approx_eq(b))
    }

    /// Reflection `s_a(x) = x - (x, a^∨) a` in a vector with `(a,a) ≠ 0`.
    pub fn reflect_in(&self, a: &Self) -> Self {
        let aa = a.pairing(a);
        let coef = self.pairing(a) * F::from_i64(2) / aa;
        self.sub(&a.scale(&coef))
    }

    /// The involution exchanging `c` and `d` and fixing `h`.
    pub fn involution_e(&self) -> Self {
        Self { fin: self.fin.clone(), c: self.d.clone(), d: self.c.clone() }
    }

    /// Positive definite form `<u, v> = (E(u), v)`.
    pub fn hat_inner(&self, other: &Self) -> F {
        self.involution_e().pairing(other)
    }

    /// Translation `t_u(v + ηc + ξd) = v + ξu + (η - ξ/2 (u,u) - (v,u))c + ξd`.
    pub fn translate(&self, u: &[F]) -> Self {
        let uu = u.iter().fold(F::zero(), |acc, x| acc + x.clone() * x.clone());
        let vu = self.fin.iter().zip(u).fold(F::zero(), |acc, (a, b)| acc + a.clone() * b.clone());
        let xi = self.d.clone();
        let fin = self.fin.iter().zip(u).map(|(v, ui)| v.clone() + xi.clone() * ui.clone()).collect();
        let half = F::one() / F::from_i64(2);
        let c = self.c.clone() - half * xi.clone() * uu - vu;
        Self { fin, c, d: xi }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "fin": self.fin.iter().map(|x| x.to_json()).collect::<Vec<_>>(),
            "c": self.c.to_json(),
            "d": self.d.to_json(),
        })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let fin = v
            .get("fin")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Parse("hat vector needs a `fin` array".into()))?
            .iter()
            .map(F::from_json)
            .collect::<Result<Vec<_>>>()?;
        let c = F::from_json(v.get("c").ok_or_else(|| Error::Parse("missing `c`".into()))?)?;
        let d = F::from_json(v.get("d").ok_or_else(|| Error::Parse("missing `d`".into()))?)?;
        Ok(Self { fin, c, d })
    }
}

impl<F: Scalar> fmt::Debug for HatVector<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let fin: Vec<_> = self.fin.iter().map(|x| x.to_c64()).collect();
        write!(f, "{:?} + ({})c + ({})d", fin, self.c.to_c64(), self.d.to_c64())
    }
}
