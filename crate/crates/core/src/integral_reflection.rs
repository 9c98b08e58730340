//! The integral-reflection representation `Q̂` of `Ĥ^Y(k)` on
//! `ExpPoly ⊗ M`:
//! `Q̂(s_a) = s_a ⊗ π(s_a) - k_a I(a) ⊗ Id`, `Q̂(ω) = ω ⊗ π(ω)`, `Q̂(v̂) = ∂_v̂ ⊗ Id`.

use crate::affine_weyl::{coxeter_order, omega_permutation, AffineWeylElement};
use crate::exp_poly::ExpPoly;
use crate::hat::HatVector;
use crate::matrix::Mat;
use crate::root_system::{Multiplicity, RootSystem};
use crate::scalar::{Scalar, C64};
use crate::wmodules::ModuleRep;

/// An `M`-valued exponential polynomial, one component per basis vector of `M`.
#[derive(Clone, PartialEq, Debug)]
pub struct Vvf<F: Scalar> {
    pub comps: Vec<ExpPoly<F>>,
}

impl<F: Scalar> Vvf<F> {
    pub fn zero(dim_m: usize, dim: usize) -> Self {
        Self { comps: vec![ExpPoly::zero(dim); dim_m] }
    }

    /// `f ⊗ m`.
    pub fn tensor(f: &ExpPoly<F>, m: &[F]) -> Self {
        Self { comps: m.iter().map(|c| f.scale(c)).collect() }
    }

    pub fn dim_m(&self) -> usize {
        self.comps.len()
    }

    pub fn dim(&self) -> usize {
        self.comps[0].dim
    }

    pub fn is_zero(&self) -> bool {
        self.comps.iter().all(ExpPoly::is_zero)
    }

    pub fn add(&self, o: &Self) -> Self {
        Self { comps: self.comps.iter().zip(&o.comps).map(|(a, b)| a.add(b)).collect() }
    }

    pub fn sub(&self, o: &Self) -> Self {
        Self { comps: self.comps.iter().zip(&o.comps).map(|(a, b)| a.sub(b)).collect() }
    }

    pub fn scale(&self, s: &F) -> Self {
        Self { comps: self.comps.iter().map(|a| a.scale(s)).collect() }
    }

    /// `(A g)_r = Σ_c A_{rc} g_c`.
    pub fn apply_matrix(&self, a: &Mat<F>) -> Self {
        let n = self.dim_m();
        let comps = (0..n)
            .map(|r| {
                (0..n).fold(ExpPoly::zero(self.dim()), |acc, c| {
                    let x = a[(r, c)].clone();
                    if x.is_zero() {
                        acc
                    } else {
                        acc.add(&self.comps[c].scale(&x))
                    }
                })
            })
            .collect();
        Self { comps }
    }

    pub fn map_comps(&self, f: impl Fn(&ExpPoly<F>) -> ExpPoly<F>) -> Self {
        Self { comps: self.comps.iter().map(f).collect() }
    }

    pub fn pullback(&self, w: &AffineWeylElement) -> Self {
        self.map_comps(|c| c.pullback(w))
    }

    pub fn derivative(&self, v: &HatVector<F>) -> Self {
        self.map_comps(|c| c.derivative(v))
    }

    pub fn laplacian_hat(&self) -> Self {
        self.map_comps(ExpPoly::laplacian_hat)
    }

    pub fn eval(&self, x: &HatVector<C64>) -> Vec<C64> {
        self.comps.iter().map(|c| c.eval(x)).collect()
    }

    pub fn to_c64(&self) -> Vvf<C64> {
        Vvf { comps: self.comps.iter().map(ExpPoly::to_c64).collect() }
    }

    /// `0` exactly when every component vanishes identically; otherwise the
    /// largest coefficient modulus.
    pub fn residual_size(&self) -> f64 {
        if self.is_zero() {
            0.0
        } else {
            self.comps.iter().map(ExpPoly::max_coef).fold(0.0, f64::max)
        }
    }

    /// Largest Euclidean norm of the value over the sample points.
    pub fn sup_norm(&self, points: &[HatVector<C64>]) -> f64 {
        points
            .iter()
            .map(|x| self.eval(x).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}

/// `Q̂(s_i)` for the affine simple reflection `s_i`.
pub fn q_simple<F: Scalar>(rs: &RootSystem, i: usize, g: &Vvf<F>, rep: &ModuleRep, k: &Multiplicity<F>) -> Vvf<F> {
    let a = rs.affine_simple_roots()[i];
    let s = AffineWeylElement::simple(rs, i);
    let twisted = g.pullback(&s).apply_matrix(&rep.simple_f(i));
    let ka = k.get(a);
    if ka.is_zero() {
        return twisted;
    }
    let integral = g.map_comps(|c| c.integral_reflection(rs, a));
    twisted.sub(&integral.scale(&ka))
}

/// `Q̂(ω) = ω ⊗ π(ω)` for a length-zero element.
pub fn q_omega<F: Scalar>(rs: &RootSystem, omega: &AffineWeylElement, g: &Vvf<F>, rep: &ModuleRep) -> Vvf<F> {
    g.pullback(omega).apply_matrix(&rep.pi_f(rs, omega))
}

/// `Q̂(v̂) = ∂_v̂ ⊗ Id`.
pub fn q_vector<F: Scalar>(v: &HatVector<F>, g: &Vvf<F>) -> Vvf<F> {
    g.derivative(v)
}

/// `Q̂(w)` along `w = ω s_{i_1} ⋯ s_{i_l}`.
pub fn q_element<F: Scalar>(
    rs: &RootSystem,
    w: &AffineWeylElement,
    g: &Vvf<F>,
    rep: &ModuleRep,
    k: &Multiplicity<F>,
) -> Vvf<F> {
    let (omega, word) = w.reduced_word(rs);
    let mut h = g.clone();
    for &i in word.iter().rev() {
        h = q_simple(rs, i, &h, rep, k);
    }
    if omega.is_identity() {
        h
    } else {
        q_omega(rs, &omega, &h, rep)
    }
}

/// A generator of `Ĥ^Y(k)` for formal products.
#[derive(Clone, Debug)]
pub enum HGen<F: Scalar> {
    Group(AffineWeylElement),
    Vector(HatVector<F>),
}

/// `Q̂(h_1 h_2 ⋯ h_r) g`, applied right to left.
pub fn q_product<F: Scalar>(
    rs: &RootSystem,
    word: &[HGen<F>],
    g: &Vvf<F>,
    rep: &ModuleRep,
    k: &Multiplicity<F>,
) -> Vvf<F> {
    word.iter().rev().fold(g.clone(), |h, x| match x {
        HGen::Group(w) => q_element(rs, w, &h, rep, k),
        HGen::Vector(v) => q_vector(v, &h),
    })
}

// --- relation residuals ----------------------------------------------------------------
//
// Each returns the image of `g` under an element of `Ĥ^Y(k)` that vanishes by the
// defining relations; in exact arithmetic the result must be the zero function.

/// `Q̂(s_i)^2 g - g`.
pub fn residual_involution<F: Scalar>(rs: &RootSystem, i: usize, g: &Vvf<F>, rep: &ModuleRep, k: &Multiplicity<F>) -> Vvf<F> {
    q_simple(rs, i, &q_simple(rs, i, g, rep, k), rep, k).sub(g)
}

/// `(Q̂(s_i) Q̂(s_j))^{m_ij} g - g`; `None` when `m_ij = ∞`.
pub fn residual_braid<F: Scalar>(
    rs: &RootSystem,
    i: usize,
    j: usize,
    g: &Vvf<F>,
    rep: &ModuleRep,
    k: &Multiplicity<F>,
) -> Option<Vvf<F>> {
    let m = coxeter_order(rs, i, j)?;
    let mut h = g.clone();
    for _ in 0..m {
        h = q_simple(rs, j, &h, rep, k);
        h = q_simple(rs, i, &h, rep, k);
    }
    Some(h.sub(g))
}

/// `Q̂(s_i)Q̂(v̂) g - Q̂(s_i v̂)Q̂(s_i) g + k_a (a, v̂) g`.
pub fn residual_cross<F: Scalar>(
    rs: &RootSystem,
    i: usize,
    v: &HatVector<F>,
    g: &Vvf<F>,
    rep: &ModuleRep,
    k: &Multiplicity<F>,
) -> Vvf<F> {
    let a = rs.affine_simple_roots()[i];
    let s = AffineWeylElement::simple(rs, i);
    let lhs = q_simple(rs, i, &q_vector(v, g), rep, k);
    let rhs = q_vector(&s.act(v), &q_simple(rs, i, g, rep, k));
    let av = rs.pair_affine(a, v);
    lhs.sub(&rhs).add(&g.scale(&(k.get(a) * av)))
}

/// `Q̂(v̂)Q̂(v̂') g - Q̂(v̂')Q̂(v̂) g`.
pub fn residual_commute<F: Scalar>(v: &HatVector<F>, vp: &HatVector<F>, g: &Vvf<F>) -> Vvf<F> {
    q_vector(v, &q_vector(vp, g)).sub(&q_vector(vp, &q_vector(v, g)))
}

/// `Q̂(ω)Q̂(s_i) g - Q̂(s_{ω(i)})Q̂(ω) g`.
pub fn residual_omega_simple<F: Scalar>(
    rs: &RootSystem,
    omega: &AffineWeylElement,
    i: usize,
    g: &Vvf<F>,
    rep: &ModuleRep,
    k: &Multiplicity<F>,
) -> Vvf<F> {
    let perm = omega_permutation(rs, omega).expect("ω permutes the affine simple roots");
    let lhs = q_omega(rs, omega, &q_simple(rs, i, g, rep, k), rep);
    let rhs = q_simple(rs, perm[i], &q_omega(rs, omega, g, rep), rep, k);
    lhs.sub(&rhs)
}

/// `Q̂(ω)Q̂(v̂) g - Q̂(ωv̂)Q̂(ω) g`.
pub fn residual_omega_vector<F: Scalar>(
    rs: &RootSystem,
    omega: &AffineWeylElement,
    v: &HatVector<F>,
    g: &Vvf<F>,
    rep: &ModuleRep,
) -> Vvf<F> {
    let lhs = q_omega(rs, omega, &q_vector(v, g), rep);
    let rhs = q_vector(&omega.act(v), &q_omega(rs, omega, g, rep));
    lhs.sub(&rhs)
}

/// Largest deviation of `Q̂(h) g` from `g` over the given generators and
/// sample points; generators are the affine simple reflections listed in
/// `simple` and the given `Ω` elements.
pub fn q_invariance_residual<F: Scalar>(
    rs: &RootSystem,
    g: &Vvf<F>,
    rep: &ModuleRep,
    k: &Multiplicity<F>,
    simple: &[usize],
    omegas: &[AffineWeylElement],
    points: &[HatVector<C64>],
) -> f64 {
    let mut worst: f64 = 0.0;
    for &i in simple {
        worst = worst.max(q_simple(rs, i, g, rep, k).sub(g).to_c64().sup_norm(points));
    }
    for om in omegas {
        worst = worst.max(q_omega(rs, om, g, rep).sub(g).to_c64().sup_norm(points));
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affine_weyl::omega_generators;
    use crate::exp_poly::tests::random_exp_poly;
    use crate::root_system::{multiplicity_orbits, CartanType, LatticeChoice};
    use crate::scalar::{q, qi, Cq, Q};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn setup(t: CartanType, l: LatticeChoice, rng: &mut ChaCha8Rng) -> (RootSystem, Multiplicity<Cq>) {
        let rs = RootSystem::new(t, l).unwrap();
        let p = Arc::new(multiplicity_orbits(&rs));
        let vals = (0..p.num_orbits()).map(|_| Cq::from_q(&q(rng.gen_range(-6..=6), rng.gen_range(1..=4)))).collect();
        (rs.clone(), Multiplicity::from_orbit_values(p, vals).unwrap())
    }

    fn rand_vvf(rng: &mut ChaCha8Rng, dim: usize, dim_m: usize) -> Vvf<Cq> {
        Vvf { comps: (0..dim_m).map(|_| random_exp_poly(rng, dim, 1, 1)).collect() }
    }

    fn rand_hat(rng: &mut ChaCha8Rng, dim: usize) -> HatVector<Cq> {
        let fin: Vec<Q> = (0..dim).map(|_| q(rng.gen_range(-5..=5), rng.gen_range(1..=3))).collect();
        HatVector::from_q(&fin, &q(rng.gen_range(-5..=5), 2), &q(rng.gen_range(-5..=5), 2))
    }

    #[test]
    fn k_zero_is_pure_twist() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let rs = RootSystem::new(CartanType::A(2), LatticeChoice::Coroot).unwrap();
        let k = Multiplicity::zero(Arc::new(multiplicity_orbits(&rs)));
        let rep = ModuleRep::reflection(&rs).unwrap();
        let g = rand_vvf(&mut rng, 3, 2);
        let s = AffineWeylElement::simple(&rs, 1);
        assert!(q_simple(&rs, 1, &g, &rep, &k).sub(&g.pullback(&s).apply_matrix(&rep.simple_f(1))).is_zero());
    }

    #[test]
    fn q_simple_on_exponential() {
        let rs = RootSystem::new(CartanType::A(1), LatticeChoice::Coroot).unwrap();
        let k = Multiplicity::uniform(Arc::new(multiplicity_orbits(&rs)), Cq::from_i64(1));
        let triv = ModuleRep::trivial(&rs);
        let lam = HatVector::<Cq>::from_q(&[q(3, 2), q(-3, 2)], &qi(0), &qi(5));
        let s1 = AffineWeylElement::simple(&rs, 1);
        let e = ExpPoly::exp(lam.clone());
        let es = ExpPoly::exp(s1.act(&lam));
        let g = Vvf::tensor(&e, &[Cq::from_i64(1)]);
        let want = es.sub(&e.sub(&es).scale(&Cq::from_q(&q(1, 3))));
        assert!(q_simple(&rs, 1, &g, &triv, &k).comps[0].sub(&want).is_zero());
    }

    #[test]
    fn relations_hold_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for t in [CartanType::A(1), CartanType::A(2), CartanType::B2, CartanType::G2] {
            let (rs, k) = setup(t, LatticeChoice::Coweight, &mut rng);
            let rep = ModuleRep::two_dim(&rs).unwrap();
            for _ in 0..3 {
                let g = rand_vvf(&mut rng, rs.dim, rep.dim);
                let v = rand_hat(&mut rng, rs.dim);
                let vp = rand_hat(&mut rng, rs.dim);
                for i in 0..=rs.rank() {
                    assert!(residual_involution(&rs, i, &g, &rep, &k).is_zero());
                    assert!(residual_cross(&rs, i, &v, &g, &rep, &k).is_zero());
                    for j in i + 1..=rs.rank() {
                        if let Some(r) = residual_braid(&rs, i, j, &g, &rep, &k) {
                            assert!(r.is_zero(), "{t} braid {i} {j}");
                        }
                    }
                }
                assert!(residual_commute(&v, &vp, &g).is_zero());
                for om in omega_generators(&rs) {
                    assert!(residual_omega_vector(&rs, &om, &v, &g, &rep).is_zero());
                    for i in 0..=rs.rank() {
                        assert!(residual_omega_simple(&rs, &om, i, &g, &rep, &k).is_zero());
                    }
                }
            }
        }
    }

    #[test]
    fn wrong_sign_in_cross_relation_is_detected() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let (rs, k) = setup(CartanType::A(1), LatticeChoice::Coroot, &mut rng);
        let rep = ModuleRep::trivial(&rs);
        let g = Vvf::tensor(&random_exp_poly(&mut rng, 2, 1, 1), &[Cq::from_i64(1)]);
        let v = rand_hat(&mut rng, 2);
        let a = rs.affine_simple_roots()[1];
        let r = residual_cross(&rs, 1, &v, &g, &rep, &k);
        let flipped = r.sub(&g.scale(&(k.get(a) * rs.pair_affine(a, &v) * Cq::from_i64(2))));
        assert!(r.is_zero());
        assert!(k.get(a).is_zero() || rs.pair_affine(a, &v).is_zero() || !flipped.is_zero());
    }

    #[test]
    fn q_element_is_multiplicative() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let (rs, k) = setup(CartanType::A(2), LatticeChoice::Coweight, &mut rng);
        let rep = ModuleRep::reflection(&rs).unwrap();
        for _ in 0..3 {
            let u = crate::affine_weyl::random_element(&rs, &mut rng, 3);
            let w = crate::affine_weyl::random_element(&rs, &mut rng, 3);
            let g = rand_vvf(&mut rng, 3, 2);
            let lhs = q_element(&rs, &u.mul(&w), &g, &rep, &k);
            let rhs = q_product(&rs, &[HGen::Group(u), HGen::Group(w)], &g, &rep, &k);
            assert!(lhs.sub(&rhs).is_zero());
        }
    }

    #[test]
    fn single_exponential_is_not_invariant() {
        let rs = RootSystem::new(CartanType::A(1), LatticeChoice::Coroot).unwrap();
        let k = Multiplicity::uniform(Arc::new(multiplicity_orbits(&rs)), Cq::from_i64(1));
        let triv = ModuleRep::trivial(&rs);
        let lam = HatVector::<Cq>::from_q(&[q(3, 2), q(-3, 2)], &qi(0), &qi(5));
        let g = Vvf::tensor(&ExpPoly::exp(lam), &[Cq::from_i64(1)]);
        let pts = vec![HatVector::new(vec![C64::new(0.1, 0.0), C64::new(-0.2, 0.0)], C64::new(0.0, 0.0), C64::new(1.0, 0.0))];
        assert!(q_invariance_residual(&rs, &g, &triv, &k, &[0, 1], &[], &pts) > 1e-3);
    }
}
