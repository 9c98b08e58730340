//! Seeded random inputs for the verification suites.

use rand::Rng;

use crate::affine_weyl::AffineWeylElement;
use crate::cocycle::regularity;
use crate::exp_poly::{ExpPoly, Poly};
use crate::hat::HatVector;
use crate::integral_reflection::Vvf;
use crate::root_system::{AffineRoot, Multiplicity, RootSystem};
use crate::scalar::{q, Cq, Scalar, Q};

/// `p/q` with `|p| ≤ num` and `1 ≤ q ≤ den`.
pub fn rational<R: Rng>(rng: &mut R, num: i64, den: i64) -> Q {
    q(rng.gen_range(-num..=num), rng.gen_range(1..=den))
}

pub fn hat_q<R: Rng>(rng: &mut R, dim: usize, num: i64, den: i64) -> HatVector<Cq> {
    let fin: Vec<Q> = (0..dim).map(|_| rational(rng, num, den)).collect();
    HatVector::from_q(&fin, &rational(rng, num, den), &rational(rng, num, den))
}

/// Random exp-poly with `nterms` exponentials, each carrying a polynomial of
/// three monomials of degree ≤ `deg`.
pub fn exp_poly<R: Rng>(rng: &mut R, dim: usize, nterms: usize, deg: u32) -> ExpPoly<Cq> {
    let n = dim + 2;
    let mut f = ExpPoly::zero(dim);
    for _ in 0..nterms {
        let mu = hat_q(rng, dim, 9, 4);
        let mut p = Poly::zero(n);
        for _ in 0..3 {
            let mut e = vec![0u32; n];
            for _ in 0..rng.gen_range(0..=deg) {
                e[rng.gen_range(0..n)] += 1;
            }
            let mut m = Poly::constant(n, Cq::from_q(&rational(rng, 9, 4)));
            for (i, &ei) in e.iter().enumerate() {
                m = m.mul(&Poly::var(n, i).pow(ei));
            }
            p = p.add(&m);
        }
        f = f.add(&ExpPoly::term(mu, p));
    }
    f
}

pub fn vvf<R: Rng>(rng: &mut R, dim: usize, dim_m: usize, nterms: usize, deg: u32) -> Vvf<Cq> {
    Vvf { comps: (0..dim_m).map(|_| exp_poly(rng, dim, nterms, deg)).collect() }
}

/// Polynomial in the variables `e_1..e_n, c, d` of total degree ≤ `deg`.
pub fn poly<R: Rng>(rng: &mut R, dim: usize, deg: u32) -> Poly<Cq> {
    let n = dim + 2;
    let mut p = Poly::zero(n);
    for _ in 0..=deg {
        let mut m = Poly::constant(n, Cq::from_q(&rational(rng, 5, 3)));
        for _ in 0..rng.gen_range(0..=deg) {
            m = m.mul(&Poly::var(n, rng.gen_range(0..n)));
        }
        p = p.add(&m);
    }
    p
}

/// Per-orbit rational multiplicities `p/q` with `|p| ≤ 6`, `q ≤ 4`.
pub fn multiplicity<R: Rng>(rng: &mut R, partition: std::sync::Arc<crate::root_system::OrbitPartition>) -> Multiplicity<Cq> {
    let vals = (0..partition.num_orbits()).map(|_| Cq::from_q(&rational(rng, 6, 4))).collect();
    Multiplicity::from_orbit_values(partition, vals).expect("one value per orbit")
}

/// A regular `λ̂` with positive rational level, redrawn until regular.
pub fn regular_lambda<R: Rng>(rng: &mut R, rs: &RootSystem, k: &Multiplicity<Cq>) -> HatVector<Cq> {
    loop {
        let fin: Vec<Q> = (0..rs.dim).map(|_| q(rng.gen_range(-40..=40), rng.gen_range(7..=13))).collect();
        let lam = HatVector::from_q(&fin, &q(rng.gen_range(-5..=5), 3), &q(rng.gen_range(20..=60), 11));
        if regularity(rs, &lam, k).is_regular {
            return lam;
        }
    }
}

/// A chamber `w` and simple index `i` with `w a_i = b`, by breadth-first
/// search over `Ŵ` up to length `max_len`.
pub fn chamber_with_wall(rs: &RootSystem, b: AffineRoot, max_len: usize) -> Option<(AffineWeylElement, usize)> {
    let asr = rs.affine_simple_roots();
    let simple: Vec<_> = (0..asr.len()).map(|i| AffineWeylElement::simple(rs, i)).collect();
    let mut layer = vec![AffineWeylElement::identity(rs.dim)];
    let mut seen: std::collections::HashSet<AffineWeylElement> = layer.iter().cloned().collect();
    for _ in 0..=max_len {
        for w in &layer {
            if let Some(i) = asr.iter().position(|a| w.act_root(rs, *a) == b) {
                return Some((w.clone(), i));
            }
        }
        let mut next = Vec::new();
        for w in &layer {
            for s in &simple {
                let x = w.mul(s);
                if seen.insert(x.clone()) {
                    next.push(x);
                }
            }
        }
        layer = next;
    }
    None
}
