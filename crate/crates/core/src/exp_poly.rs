//! Exponential polynomials `Σ p_i(v̂) e^{(μ̂_i, v̂)}` on the extended space.
//!
//! Coordinates of `v̂ = v + ηc + ξd` are `[v_1, …, v_n, η, ξ]`, so
//! `(μ̂, v̂) = (μ, v) + μ_c ξ + μ_d η`. The space is closed under directional
//! derivatives, pullbacks by `Ŵ^Y`, the integral-reflection operators `I(a)`
//! and `Δ̂ = Δ + 2∂_c∂_d`.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use serde_json::{json, Value};

use crate::affine_weyl::AffineWeylElement;
use crate::error::{Error, Result};
use crate::hat::HatVector;
use crate::root_system::{AffineRoot, RootSystem};
use crate::scalar::{Scalar, C64};

/// Below this `|(μ̂, a^∨)|` the float path of `I(a)` uses the degenerate branch.
pub const DEGENERATE_TOL: f64 = 1e-10;

/// Exponent vector of a monomial, ordered graded-lexicographically.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Mono(pub Vec<u32>);

impl Mono {
    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }
}

impl Ord for Mono {
    fn cmp(&self, o: &Self) -> Ordering {
        self.degree().cmp(&o.degree()).then_with(|| o.0.cmp(&self.0))
    }
}

impl PartialOrd for Mono {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Sparse polynomial in `nvars` coordinates.
#[derive(Clone, PartialEq)]
pub struct Poly<F> {
    pub nvars: usize,
    pub terms: BTreeMap<Mono, F>,
}

impl<F: Scalar> Poly<F> {
    pub fn zero(nvars: usize) -> Self {
        Self { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: F) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(Mono(vec![0; nvars]), c);
        p
    }

    pub fn one(nvars: usize) -> Self {
        Self::constant(nvars, F::one())
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        let mut p = Self::zero(nvars);
        p.add_term(Mono(e), F::one());
        p
    }

    /// `Σ coef_i x_i + c0`.
    pub fn linear(coef: &[F], c0: F) -> Self {
        let n = coef.len();
        let mut p = Self::constant(n, c0);
        for (i, c) in coef.iter().enumerate() {
            p = p.add(&Self::var(n, i).scale(c));
        }
        p
    }

    /// The linear form `x ↦ (h, x)` of a vector of the extended space.
    pub fn pairing_form(h: &HatVector<F>) -> Self {
        let mut coef = h.fin.clone();
        // (h, x) = (h_fin, v) + h_c ξ + h_d η
        coef.push(h.d.clone());
        coef.push(h.c.clone());
        Self::linear(&coef, F::zero())
    }

    fn add_term(&mut self, m: Mono, c: F) {
        let e = self.terms.entry(m.clone()).or_insert_with(F::zero);
        *e = e.clone() + c;
        // exact cancellation only; float noise is kept
        if e.is_zero() {
            self.terms.remove(&m);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Mono::degree).max().unwrap_or(0)
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut out = self.clone();
        for (m, c) in &o.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.scale(&-F::one()))
    }

    pub fn scale(&self, s: &F) -> Self {
        if s.is_zero() {
            return Self::zero(self.nvars);
        }
        Self { nvars: self.nvars, terms: self.terms.iter().map(|(m, c)| (m.clone(), c.clone() * s.clone())).collect() }
    }

    pub fn mul(&self, o: &Self) -> Self {
        let mut out = Self::zero(self.nvars);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &o.terms {
                let m = Mono(ma.0.iter().zip(&mb.0).map(|(a, b)| a + b).collect());
                out.add_term(m, ca.clone() * cb.clone());
            }
        }
        out
    }

    pub fn pow(&self, e: u32) -> Self {
        (0..e).fold(Self::one(self.nvars), |acc, _| acc.mul(self))
    }

    /// `∂/∂x_i`.
    pub fn partial(&self, i: usize) -> Self {
        let mut out = Self::zero(self.nvars);
        for (m, c) in &self.terms {
            let e = m.0[i];
            if e > 0 {
                let mut mm = m.0.clone();
                mm[i] -= 1;
                out.add_term(Mono(mm), c.clone() * F::from_i64(e as i64));
            }
        }
        out
    }

    /// Directional derivative along the coordinate vector `u`.
    pub fn directional(&self, u: &[F]) -> Self {
        let mut out = Self::zero(self.nvars);
        for (i, ui) in u.iter().enumerate() {
            if !ui.is_zero() {
                out = out.add(&self.partial(i).scale(ui));
            }
        }
        out
    }

    pub fn eval(&self, x: &[F]) -> F {
        self.terms.iter().fold(F::zero(), |acc, (m, c)| {
            let mono = m.0.iter().zip(x).fold(F::one(), |a, (&e, xi)| {
                (0..e).fold(a, |b, _| b * xi.clone())
            });
            acc + c.clone() * mono
        })
    }

    pub fn eval_c64(&self, x: &[C64]) -> C64 {
        self.terms.iter().fold(C64::new(0.0, 0.0), |acc, (m, c)| {
            let mono = m.0.iter().zip(x).fold(C64::new(1.0, 0.0), |a, (&e, xi)| a * xi.powu(e));
            acc + c.to_c64() * mono
        })
    }

    /// `p(A x)`, where row `i` of `a` gives the new expression of `x_i`.
    pub fn substitute_linear(&self, a: &[Vec<F>]) -> Self {
        let n = self.nvars;
        let images: Vec<Self> = a.iter().map(|row| Self::linear(row, F::zero())).collect();
        let mut powers: Vec<Vec<Self>> = images.iter().map(|p| vec![Self::one(n), p.clone()]).collect();
        let mut out = Self::zero(n);
        for (m, c) in &self.terms {
            let mut t = Self::constant(n, c.clone());
            for (i, &e) in m.0.iter().enumerate() {
                while powers[i].len() <= e as usize {
                    let next = powers[i].last().unwrap().mul(&images[i]);
                    powers[i].push(next);
                }
                if e > 0 {
                    t = t.mul(&powers[i][e as usize]);
                }
            }
            out = out.add(&t);
        }
        out
    }

    /// Drops float coefficients below `tol` in modulus.
    pub fn prune(&self, tol: f64) -> Self {
        Self {
            nvars: self.nvars,
            terms: self.terms.iter().filter(|(_, c)| !c.is_negligible(tol)).map(|(m, c)| (m.clone(), c.clone())).collect(),
        }
    }

    pub fn map<G: Scalar>(&self, f: impl Fn(&F) -> G) -> Poly<G> {
        let mut out = Poly::zero(self.nvars);
        for (m, c) in &self.terms {
            out.add_term(m.clone(), f(c));
        }
        out
    }

    /// Divides by the linear form `l`, returning `(quotient, remainder)` with
    /// `self = quotient·l + remainder`; the remainder is free of the pivot variable.
    pub fn div_linear(&self, l: &Self) -> Result<(Self, Self)> {
        let n = self.nvars;
        let pivot = (0..n)
            .find(|&j| {
                let mut m = vec![0; n];
                m[j] = 1;
                l.terms.get(&Mono(m)).is_some_and(|c| !c.is_zero())
            })
            .ok_or_else(|| Error::Dimension("division by a form without linear part".into()))?;
        let mut unit = vec![0; n];
        unit[pivot] = 1;
        let lead = l.terms[&Mono(unit)].clone();
        let mut rem = self.clone();
        let mut quo = Self::zero(n);
        loop {
            // the term of highest pivot degree; each step lowers that degree
            let next = rem.terms.iter().filter(|(m, _)| m.0[pivot] > 0).max_by_key(|(m, _)| m.0[pivot]);
            let Some((m, c)) = next.map(|(m, c)| (m.clone(), c.clone())) else { break };
            let mut mm = m.0.clone();
            mm[pivot] -= 1;
            let mut t = Self::zero(n);
            t.add_term(Mono(mm), c / lead.clone());
            rem = rem.sub(&t.mul(l));
            // float rounding may leave a residue in the eliminated slot
            rem.terms.remove(&m);
            quo = quo.add(&t);
        }
        Ok((quo, rem))
    }

    pub fn max_coef(&self) -> f64 {
        self.terms.values().map(|c| c.abs()).fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> Value {
        Value::Array(self.terms.iter().map(|(m, c)| json!({"mono": m.0, "coef": c.to_json()})).collect())
    }

    pub fn from_json(nvars: usize, v: &Value) -> Result<Self> {
        let arr = v.as_array().ok_or_else(|| Error::Parse("polynomial must be an array of terms".into()))?;
        let mut p = Self::zero(nvars);
        for t in arr {
            let mono: Vec<u32> = t
                .get("mono")
                .and_then(Value::as_array)
                .ok_or_else(|| Error::Parse("term needs `mono`".into()))?
                .iter()
                .map(|x| x.as_u64().map(|e| e as u32).ok_or_else(|| Error::Parse("bad exponent".into())))
                .collect::<Result<_>>()?;
            if mono.len() != nvars {
                return Err(Error::Dimension(format!("monomial of length {} in {nvars} variables", mono.len())));
            }
            let c = F::from_json(t.get("coef").ok_or_else(|| Error::Parse("term needs `coef`".into()))?)?;
            p.add_term(Mono(mono), c);
        }
        Ok(p)
    }
}

fn var_name(i: usize, nvars: usize) -> String {
    if i + 2 == nvars {
        "η".into()
    } else if i + 1 == nvars {
        "ξ".into()
    } else {
        format!("v{}", i + 1)
    }
}

fn fmt_scalar<F: Scalar>(c: &F) -> String {
    if F::EXACT {
        let j = c.to_json();
        let re = j[0].as_str().unwrap_or("0").to_string();
        let im = j[1].as_str().unwrap_or("0").to_string();
        if im == "0" {
            re
        } else {
            format!("({re}+{im}i)")
        }
    } else {
        let z = c.to_c64();
        if z.im == 0.0 {
            format!("{}", z.re)
        } else {
            format!("({}+{}i)", z.re, z.im)
        }
    }
}

impl<F: Scalar> fmt::Display for Poly<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .rev()
            .map(|(m, c)| {
                let vars: Vec<String> = m
                    .0
                    .iter()
                    .enumerate()
                    .filter(|(_, &e)| e > 0)
                    .map(|(i, &e)| if e == 1 { var_name(i, self.nvars) } else { format!("{}^{e}", var_name(i, self.nvars)) })
                    .collect();
                if vars.is_empty() {
                    fmt_scalar(c)
                } else {
                    format!("{}*{}", fmt_scalar(c), vars.join("*"))
                }
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

impl<F: Scalar> fmt::Debug for Poly<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// One term `p · e^{(μ̂, ·)}`.
#[derive(Clone, PartialEq)]
pub struct Term<F> {
    pub exp: HatVector<F>,
    pub poly: Poly<F>,
}

#[derive(Clone, PartialEq)]
pub struct ExpPoly<F> {
    /// Rank of the ambient finite part; polynomials live in `dim + 2` variables.
    pub dim: usize,
    pub terms: Vec<Term<F>>,
}

impl<F: Scalar> ExpPoly<F> {
    pub fn zero(dim: usize) -> Self {
        Self { dim, terms: vec![] }
    }

    pub fn nvars(&self) -> usize {
        self.dim + 2
    }

    /// `e^{(μ̂, ·)}`.
    pub fn exp(mu: HatVector<F>) -> Self {
        let dim = mu.dim();
        Self { dim, terms: vec![Term { exp: mu, poly: Poly::one(dim + 2) }] }
    }

    pub fn from_poly(dim: usize, p: Poly<F>) -> Self {
        Self::term(HatVector::zero(dim), p)
    }

    pub fn term(mu: HatVector<F>, p: Poly<F>) -> Self {
        let mut f = Self::zero(mu.dim());
        f.push(mu, p);
        f
    }

    fn push(&mut self, mu: HatVector<F>, p: Poly<F>) {
        if p.is_zero() {
            return;
        }
        if let Some(i) = self.terms.iter().position(|t| t.exp.approx_eq(&mu)) {
            let q = self.terms[i].poly.add(&p);
            if q.is_zero() {
                self.terms.remove(i);
            } else {
                self.terms[i].poly = q;
            }
        } else {
            self.terms.push(Term { exp: mu, poly: p });
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut out = self.clone();
        for t in &o.terms {
            out.push(t.exp.clone(), t.poly.clone());
        }
        out
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.scale(&-F::one()))
    }

    pub fn scale(&self, s: &F) -> Self {
        let mut out = Self::zero(self.dim);
        for t in &self.terms {
            out.push(t.exp.clone(), t.poly.scale(s));
        }
        out
    }

    pub fn mul_poly(&self, p: &Poly<F>) -> Self {
        let mut out = Self::zero(self.dim);
        for t in &self.terms {
            out.push(t.exp.clone(), t.poly.mul(p));
        }
        out
    }

    pub fn mul(&self, o: &Self) -> Self {
        let mut out = Self::zero(self.dim);
        for a in &self.terms {
            for b in &o.terms {
                out.push(a.exp.add(&b.exp), a.poly.mul(&b.poly));
            }
        }
        out
    }

    /// `∂_û`, with `û` a vector of the extended space.
    pub fn derivative(&self, u: &HatVector<F>) -> Self {
        let uc = u.coords();
        let mut out = Self::zero(self.dim);
        for t in &self.terms {
            let p = t.poly.directional(&uc).add(&t.poly.scale(&t.exp.pairing(u)));
            out.push(t.exp.clone(), p);
        }
        out
    }

    /// Derivative along the `i`-th coordinate basis vector (`e_1..e_n`, `c`, `d`).
    pub fn coord_derivative(&self, i: usize) -> Self {
        let n = self.nvars();
        let mut c = vec![F::zero(); n];
        c[i] = F::one();
        self.derivative(&HatVector::from_coords(&c))
    }

    /// `p(∂)` for `p ∈ S(ĥ)`, variables indexing the coordinate basis `e_1..e_n, c, d`.
    pub fn apply_poly_diffop(&self, p: &Poly<F>) -> Self {
        let mut out = Self::zero(self.dim);
        for (m, c) in &p.terms {
            let mut g = self.clone();
            for (i, &e) in m.0.iter().enumerate() {
                for _ in 0..e {
                    g = g.coord_derivative(i);
                }
            }
            out = out.add(&g.scale(c));
        }
        out
    }

    /// `Δ̂ = Σ ∂_{e_i}^2 + 2 ∂_c ∂_d`.
    pub fn laplacian_hat(&self) -> Self {
        let n = self.dim;
        let mut out = Self::zero(n);
        for i in 0..n {
            out = out.add(&self.coord_derivative(i).coord_derivative(i));
        }
        let cd = self.coord_derivative(n).coord_derivative(n + 1);
        out.add(&cd.scale(&F::from_i64(2)))
    }

    /// `f ∘ w^{-1}`.
    pub fn pullback(&self, w: &AffineWeylElement) -> Self {
        let n = self.nvars();
        let winv = w.inverse();
        // column j of the coordinate matrix of w^{-1} is w^{-1}(e_j)
        let cols: Vec<Vec<F>> = (0..n)
            .map(|j| {
                let mut e = vec![F::zero(); n];
                e[j] = F::one();
                winv.act(&HatVector::from_coords(&e)).coords()
            })
            .collect();
        let a: Vec<Vec<F>> = (0..n).map(|i| (0..n).map(|j| cols[j][i].clone()).collect()).collect();
        let mut out = Self::zero(self.dim);
        for t in &self.terms {
            out.push(w.act(&t.exp), t.poly.substitute_linear(&a));
        }
        out
    }

    /// `(I(a) f)(v̂) = ∫_0^{(a, v̂)} f(v̂ - t a^∨) dt` in closed form.
    pub fn integral_reflection(&self, rs: &RootSystem, a: AffineRoot) -> Self {
        let n = self.nvars();
        let av: HatVector<F> = rs.affine_coroot_vector(a);
        let avc = av.coords();
        let l = Poly::pairing_form(&rs.affine_root_vector::<F>(a));
        let sa = AffineWeylElement::reflection(rs, a);
        let mut out = Self::zero(self.dim);
        for t in &self.terms {
            // q_k = ((-1)^k / k!) (∂_{a^∨})^k p
            let mut qs = vec![];
            let mut d = t.poly.clone();
            let mut fact = F::one();
            let mut k = 0i64;
            while !d.is_zero() {
                let sign = if k % 2 == 0 { F::one() } else { -F::one() };
                qs.push(d.scale(&(sign / fact.clone())));
                d = d.directional(&avc);
                k += 1;
                fact = fact * F::from_i64(k);
            }
            let c = t.exp.pairing(&av);
            let degenerate = if F::EXACT { c.is_zero() } else { c.abs() < DEGENERATE_TOL };
            if degenerate {
                let mut acc = Poly::zero(n);
                let mut lp = l.clone();
                for (k, q) in qs.iter().enumerate() {
                    acc = acc.add(&q.mul(&lp).scale(&(F::one() / F::from_i64(k as i64 + 1))));
                    lp = lp.mul(&l);
                }
                out.push(t.exp.clone(), acc);
            } else {
                let cinv = F::one() / c.clone();
                let mut first = Poly::zero(n);
                let mut second = Poly::zero(n);
                let mut kfact = F::one();
                for (k, q) in qs.iter().enumerate() {
                    if k > 0 {
                        kfact = kfact * F::from_i64(k as i64);
                    }
                    // k!/c^{k+1}
                    let ck = (0..=k).fold(F::one(), |acc, _| acc * cinv.clone());
                    first = first.add(&q.scale(&(kfact.clone() * ck)));
                    // Σ_{j≤k} (k!/j!) L^j / c^{k-j+1}
                    let mut inner = Poly::zero(n);
                    let mut jfact = F::one();
                    let mut lj = Poly::one(n);
                    for j in 0..=k {
                        if j > 0 {
                            jfact = jfact * F::from_i64(j as i64);
                            lj = lj.mul(&l);
                        }
                        let cp = (0..(k - j + 1)).fold(F::one(), |acc, _| acc * cinv.clone());
                        inner = inner.add(&lj.scale(&(kfact.clone() / jfact.clone() * cp)));
                    }
                    second = second.add(&q.mul(&inner));
                }
                out.push(t.exp.clone(), first);
                out.push(sa.act(&t.exp), second.scale(&-F::one()));
            }
        }
        out
    }

    /// Numerical value at a point.
    pub fn eval(&self, x: &HatVector<C64>) -> C64 {
        let xc = x.coords();
        let mut s = C64::new(0.0, 0.0);
        for t in &self.terms {
            let mu = t.exp.map(|z| z.to_c64());
            s += t.poly.eval_c64(&xc) * mu.pairing(x).exp();
        }
        s
    }

    /// Value at `x` as a formal sum `Σ c_j e^{z_j}` with distinct exponents `z_j`.
    /// In exact mode the value is zero iff the returned list is empty.
    pub fn eval_formal(&self, x: &HatVector<F>) -> Vec<(F, F)> {
        let xc = x.coords();
        let mut out: Vec<(F, F)> = vec![];
        for t in &self.terms {
            let z = t.exp.pairing(x);
            let c = t.poly.eval(&xc);
            match out.iter_mut().find(|(zz, _)| zz.approx_eq(&z)) {
                Some(e) => e.1 = e.1.clone() + c,
                None => out.push((z, c)),
            }
        }
        out.retain(|(_, c)| !c.is_zero());
        out
    }

    pub fn map<G: Scalar>(&self, f: impl Fn(&F) -> G + Copy) -> ExpPoly<G> {
        let mut out = ExpPoly::zero(self.dim);
        for t in &self.terms {
            out.push(t.exp.map(f), t.poly.map(f));
        }
        out
    }

    pub fn to_c64(&self) -> ExpPoly<C64> {
        self.map(|x| x.to_c64())
    }

    pub fn prune(&self, tol: f64) -> Self {
        let mut out = Self::zero(self.dim);
        for t in &self.terms {
            out.push(t.exp.clone(), t.poly.prune(tol));
        }
        out
    }

    /// Largest coefficient modulus, a crude size measure.
    pub fn max_coef(&self) -> f64 {
        self.terms.iter().map(|t| t.poly.max_coef()).fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "dim": self.dim,
            "terms": self.terms.iter().map(|t| json!({"exp": t.exp.to_json(), "poly": t.poly.to_json()})).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let dim = v.get("dim").and_then(Value::as_u64).ok_or_else(|| Error::Parse("exp-poly needs `dim`".into()))? as usize;
        let mut out = Self::zero(dim);
        for t in v.get("terms").and_then(Value::as_array).ok_or_else(|| Error::Parse("exp-poly needs `terms`".into()))? {
            let mu = HatVector::from_json(t.get("exp").ok_or_else(|| Error::Parse("term needs `exp`".into()))?)?;
            if mu.dim() != dim {
                return Err(Error::Dimension("exponent dimension".into()));
            }
            let p = Poly::from_json(dim + 2, t.get("poly").ok_or_else(|| Error::Parse("term needs `poly`".into()))?)?;
            out.push(mu, p);
        }
        Ok(out)
    }
}

impl<F: Scalar> fmt::Display for ExpPoly<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|t| {
                let mut ex: Vec<String> = t.exp.fin.iter().map(fmt_scalar).collect();
                ex.push(format!("c:{}", fmt_scalar(&t.exp.c)));
                ex.push(format!("d:{}", fmt_scalar(&t.exp.d)));
                format!("({})·exp[{}]", t.poly, ex.join(", "))
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

impl<F: Scalar> fmt::Debug for ExpPoly<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::affine_weyl::random_element;
    use crate::root_system::{CartanType, LatticeChoice};
    use crate::scalar::{q, qi, Cq, Q};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rq(rng: &mut ChaCha8Rng) -> Q {
        q(rng.gen_range(-9..=9), rng.gen_range(1..=4))
    }

    /// Random exp-poly with `nterms` terms of degree ≤ `deg`.
    pub(crate) fn random_exp_poly(rng: &mut ChaCha8Rng, dim: usize, nterms: usize, deg: u32) -> ExpPoly<Cq> {
        crate::sampling::exp_poly(rng, dim, nterms, deg)
    }

    fn rand_point(rng: &mut ChaCha8Rng, dim: usize) -> HatVector<C64> {
        let fin = (0..dim).map(|_| C64::new(rng.gen_range(-0.7..0.7), 0.0)).collect();
        HatVector::new(fin, C64::new(rng.gen_range(-0.7..0.7), 0.0), C64::new(rng.gen_range(0.3..1.0), 0.0))
    }

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() <= tol * (1.0 + a.norm().max(b.norm()))
    }

    /// Adaptive Gauss-Legendre oracle on [0, L].
    fn gl_integral(f: impl Fn(f64) -> C64, l: f64) -> C64 {
        let (nodes, weights) = crate::quadrature::gauss_legendre(40);
        let mut s = C64::new(0.0, 0.0);
        let pieces = 8;
        for p in 0..pieces {
            let a = l * p as f64 / pieces as f64;
            let b = l * (p + 1) as f64 / pieces as f64;
            for (x, w) in nodes.iter().zip(&weights) {
                let t = 0.5 * (b - a) * x + 0.5 * (a + b);
                s += f(t) * (0.5 * (b - a) * w);
            }
        }
        s
    }

    #[test]
    fn derivative_examples() {
        // λ̂ = λ + 0c + κd: ∂_d e^{λ̂} = η e = 0, ∂_c e^{λ̂} = κ e
        let lam = HatVector::<Cq>::from_q(&[q(3, 2), q(-3, 2)], &qi(0), &qi(5));
        let f = ExpPoly::exp(lam.clone());
        assert!(f.derivative(&HatVector::d_vec(2)).is_zero());
        assert_eq!(f.derivative(&HatVector::c_vec(2)), f.scale(&Cq::from_i64(5)));
        let mut lam2 = lam;
        lam2.c = Cq::from_i64(3);
        let f2 = ExpPoly::exp(lam2);
        assert_eq!(f2.derivative(&HatVector::d_vec(2)), f2.scale(&Cq::from_i64(3)));
    }

    #[test]
    fn second_derivative_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..10 {
            let f = random_exp_poly(&mut rng, 2, 2, 2);
            let u = HatVector::from_q(&[rq(&mut rng), rq(&mut rng)], &rq(&mut rng), &rq(&mut rng));
            let uu = Poly::var(4, 0).scale(&u.fin[0]).add(&Poly::var(4, 1).scale(&u.fin[1]))
                .add(&Poly::var(4, 2).scale(&u.c)).add(&Poly::var(4, 3).scale(&u.d));
            let g = f.apply_poly_diffop(&uu.mul(&uu));
            assert_eq!(g, f.derivative(&u).derivative(&u));
            let x = rand_point(&mut rng, 2);
            let uf = u.map(|z| z.to_c64());
            // Richardson-extrapolated central second difference
            let norm = uf.coords().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let d2 = |h: f64| {
                let s = h / norm;
                (f.eval(&x.add(&uf.scale(&C64::new(s, 0.0)))) - f.eval(&x).scale(2.0)
                    + f.eval(&x.sub(&uf.scale(&C64::new(s, 0.0)))))
                    / (s * s)
            };
            let fd = (d2(1e-3) * 4.0 - d2(2e-3)) / 3.0;
            assert!(close(fd, g.eval(&x), 1e-6), "{fd} vs {}", g.eval(&x));
        }
    }

    #[test]
    fn pullback_properties() {
        let rs = RootSystem::new(CartanType::A(2), LatticeChoice::Coroot).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for _ in 0..10 {
            let w = random_element(&rs, &mut rng, 5);
            let f = random_exp_poly(&mut rng, 3, 2, 2);
            let x = rand_point(&mut rng, 3);
            let winvx = w.inverse().act(&x);
            assert!(close(f.pullback(&w).eval(&x), f.eval(&winvx), 1e-9));
            let v = w.inverse();
            assert_eq!(f.pullback(&w).pullback(&v), f);
        }
        let a = crate::root_system::AffineRoot { root: 0, level: 0 };
        let sa = AffineWeylElement::reflection(&rs, a);
        let mu = HatVector::<Cq>::from_q(&[q(1, 2), q(1, 3), q(-5, 6)], &qi(1), &qi(2));
        assert_eq!(ExpPoly::exp(mu.clone()).pullback(&sa), ExpPoly::exp(sa.act(&mu)));
    }

    #[test]
    fn translation_pullback_matches_closed_form() {
        // e^{(t_y λ̂, v̂)} = e^{uκ + ξη + (λ,v) + (κv - ξλ, y) - ξκ/2 (y,y)}
        let rs = RootSystem::new(CartanType::A(2), LatticeChoice::Coroot).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..20 {
            let y = rs.y_from_coords(&[rng.gen_range(-2..=2), rng.gen_range(-2..=2)]);
            let t = AffineWeylElement::translation(&y);
            let lam = HatVector::<C64>::new(
                (0..3).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect(),
                C64::new(rng.gen_range(-1.0..1.0), 0.0),
                C64::new(rng.gen_range(0.5..2.0), 0.0),
            );
            let x = rand_point(&mut rng, 3);
            let f = ExpPoly::exp(lam.clone()).pullback(&t);
            let yc: Vec<C64> = y.iter().map(C64::from_q).collect();
            let (kappa, eta) = (lam.d, lam.c);
            let (u, xi) = (x.c, x.d);
            let dotc = |a: &[C64], b: &[C64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<C64>();
            let kv_xl: Vec<C64> = x.fin.iter().zip(&lam.fin).map(|(v, l)| kappa * v - xi * l).collect();
            let e = u * kappa + xi * eta + dotc(&lam.fin, &x.fin) + dotc(&kv_xl, &yc) - xi * kappa / 2.0 * dotc(&yc, &yc);
            assert!(close(f.eval(&x), e.exp(), 1e-12));
        }
    }

    #[test]
    fn integral_reflection_examples() {
        let rs = RootSystem::new(CartanType::A(1), LatticeChoice::Coroot).unwrap();
        let a1 = rs.affine_simple_roots()[1];
        let lam = HatVector::<Cq>::from_q(&[q(3, 2), q(-3, 2)], &qi(0), &qi(5));
        let sa = AffineWeylElement::simple(&rs, 1);
        let got = ExpPoly::exp(lam.clone()).integral_reflection(&rs, a1);
        let want = ExpPoly::exp(lam.clone()).sub(&ExpPoly::exp(sa.act(&lam))).scale(&Cq::from_q(&q(1, 3)));
        assert_eq!(got, want);
        // (μ̂, a^∨) = 0: constant integrand
        let mu = HatVector::<Cq>::from_q(&[q(1, 1), q(1, 1)], &qi(2), &qi(1));
        let got = ExpPoly::exp(mu.clone()).integral_reflection(&rs, a1);
        let l = Poly::pairing_form(&rs.affine_root_vector::<Cq>(a1));
        assert_eq!(got, ExpPoly::term(mu, l));
    }

    #[test]
    fn integral_reflection_matches_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        for t in [CartanType::A(1), CartanType::B2, CartanType::G2] {
            let rs = RootSystem::new(t, LatticeChoice::Coroot).unwrap();
            for _ in 0..6 {
                let f = random_exp_poly(&mut rng, rs.dim, 2, 3);
                let a = AffineRoot { root: rng.gen_range(0..rs.num_roots()), level: rng.gen_range(-1..=1) };
                let g = f.integral_reflection(&rs, a);
                let av = rs.affine_coroot_vector::<C64>(a);
                for _ in 0..20 {
                    let x = rand_point(&mut rng, rs.dim);
                    let l = rs.pair_affine(a, &x).re;
                    let want = gl_integral(|s| f.eval(&x.sub(&av.scale(&C64::new(s, 0.0)))), l);
                    assert!(close(g.eval(&x), want, 1e-8), "{} vs {want}", g.eval(&x));
                }
            }
        }
    }

    #[test]
    fn float_near_degenerate_branch() {
        let rs = RootSystem::new(CartanType::A(1), LatticeChoice::Coroot).unwrap();
        let a1 = rs.affine_simple_roots()[1];
        let mu = HatVector::<C64>::new(vec![C64::new(1.0 + 1e-12, 0.0), C64::new(1.0, 0.0)], C64::new(0.0, 0.0), C64::new(1.0, 0.0));
        let g = ExpPoly::exp(mu.clone()).integral_reflection(&rs, a1);
        assert_eq!(g.terms.len(), 1);
        let x = HatVector::new(vec![C64::new(0.4, 0.0), C64::new(-0.1, 0.0)], C64::new(0.0, 0.0), C64::new(1.0, 0.0));
        assert!(close(g.eval(&x), mu.pairing(&x).exp() * 0.5, 1e-10));
    }

    #[test]
    fn laplacian_examples() {
        let lam = HatVector::<Cq>::from_q(&[q(3, 2), q(-3, 2)], &qi(0), &qi(5));
        let f = ExpPoly::exp(lam.clone());
        assert_eq!(f.laplacian_hat(), f.scale(&Cq::from_q(&q(9, 2))));
        let rs = RootSystem::new(CartanType::A(1), LatticeChoice::Coroot).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        let mut lam = lam;
        lam.c = Cq::from_i64(2);
        let ev = lam.pairing(&lam);
        for _ in 0..10 {
            let w = random_element(&rs, &mut rng, 6);
            let g = ExpPoly::exp(w.act(&lam));
            assert_eq!(g.laplacian_hat(), g.scale(&ev));
        }
        for _ in 0..5 {
            let f = random_exp_poly(&mut rng, 2, 2, 2);
            let x = rand_point(&mut rng, 2);
            let h = 1e-3;
            let mut fd = C64::new(0.0, 0.0);
            let shift = |x: &HatVector<C64>, i: usize, s: f64| {
                let mut c = x.coords();
                c[i] += s;
                HatVector::from_coords(&c)
            };
            for i in 0..2 {
                fd += (f.eval(&shift(&x, i, h)) - f.eval(&x) * 2.0 + f.eval(&shift(&x, i, -h))) / (h * h);
            }
            let mixed = (f.eval(&shift(&shift(&x, 2, h), 3, h)) - f.eval(&shift(&shift(&x, 2, h), 3, -h))
                - f.eval(&shift(&shift(&x, 2, -h), 3, h))
                + f.eval(&shift(&shift(&x, 2, -h), 3, -h)))
                / (4.0 * h * h);
            fd += mixed * 2.0;
            assert!(close(fd, f.laplacian_hat().eval(&x), 1e-5));
        }
    }

    #[test]
    fn closure_under_random_chains() {
        let rs = RootSystem::new(CartanType::A(2), LatticeChoice::Coroot).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(36);
        let mut f = random_exp_poly(&mut rng, 3, 1, 1).to_c64();
        let mut oracle = f.clone();
        for step in 0..10 {
            let x = rand_point(&mut rng, 3);
            let before = f.eval(&x);
            assert!(close(before, oracle.eval(&x), 1e-9));
            f = match step % 4 {
                0 => f.derivative(&rand_point(&mut rng, 3)),
                1 => f.pullback(&random_element(&rs, &mut rng, 3)),
                2 => f.integral_reflection(&rs, rs.affine_simple_roots()[rng.gen_range(0..3)]),
                _ => f.laplacian_hat(),
            };
            oracle = f.clone();
            assert!(f.terms.iter().all(|t| t.exp.dim() == 3 && t.poly.nvars == 5));
        }
    }

    #[test]
    fn json_roundtrip_and_display() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let f = random_exp_poly(&mut rng, 2, 3, 2);
        assert_eq!(ExpPoly::<Cq>::from_json(&f.to_json()).unwrap(), f);
        let s = format!("{}", ExpPoly::exp(HatVector::<Cq>::from_q(&[q(1, 2), qi(0)], &qi(0), &qi(1))));
        assert!(s.contains("1/2"));
    }

    #[test]
    fn eval_formal_detects_exact_cancellation() {
        let rs = RootSystem::new(CartanType::A(1), LatticeChoice::Coroot).unwrap();
        let a1 = rs.affine_simple_roots()[1];
        let lam = HatVector::<Cq>::from_q(&[q(3, 2), q(-3, 2)], &qi(0), &qi(5));
        let g = ExpPoly::exp(lam).integral_reflection(&rs, a1);
        // on the wall (a_1, x) = 0 the integral vanishes
        let x = HatVector::<Cq>::from_q(&[q(1, 3), q(1, 3)], &qi(4), &qi(1));
        assert!(g.eval_formal(&x).is_empty());
    }
}
