//! Chamber-indexed families `f = {f_C}`, the Dunkl operators with Heaviside
//! weights, the propagation operator `T` and the wall jump conditions.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rand::Rng;

use crate::affine_weyl::{locate_chamber, AffineWeylElement, WALL_TOL};
use crate::error::{Error, Result};
use crate::exp_poly::{ExpPoly, Poly};
use crate::hat::HatVector;
use crate::integral_reflection::{q_element, Vvf};
use crate::matrix::Mat;
use crate::root_system::{AffineRoot, Multiplicity, RootSystem};
use crate::scalar::{q, Cq, Scalar, C64, Q};
use crate::wmodules::ModuleRep;

type Resolver<F> = dyn Fn(&AffineWeylElement) -> Vvf<F> + Send + Sync;

struct Inner<F: Scalar> {
    rs: Arc<RootSystem>,
    dim_m: usize,
    resolver: Box<Resolver<F>>,
    cache: Mutex<HashMap<AffineWeylElement, Arc<Vvf<F>>>>,
    support: Option<Vec<AffineWeylElement>>,
}

/// An element of `ℱ_M`: one `M`-valued function per chamber `wĈ₊`, `w ∈ Ŵ`.
/// Components are produced on demand and memoized.
#[derive(Clone)]
pub struct PiecewiseFamily<F: Scalar> {
    inner: Arc<Inner<F>>,
}

impl<F: Scalar + 'static> PiecewiseFamily<F> {
    pub fn new(
        rs: Arc<RootSystem>,
        dim_m: usize,
        resolver: impl Fn(&AffineWeylElement) -> Vvf<F> + Send + Sync + 'static,
    ) -> Self {
        Self {
            inner: Arc::new(Inner {
                rs,
                dim_m,
                resolver: Box::new(resolver),
                cache: Mutex::new(HashMap::new()),
                support: None,
            }),
        }
    }

    /// A family vanishing outside the listed chambers.
    pub fn finite_support(rs: Arc<RootSystem>, dim_m: usize, parts: Vec<(AffineWeylElement, Vvf<F>)>) -> Self {
        let parts: HashMap<AffineWeylElement, Vvf<F>> =
            parts.into_iter().map(|(w, f)| (w.chamber_part(&rs), f)).collect();
        let support = parts.keys().cloned().collect();
        let dim = rs.dim;
        let inner = Inner {
            rs,
            dim_m,
            resolver: Box::new(move |w| parts.get(w).cloned().unwrap_or_else(|| Vvf::zero(dim_m, dim))),
            cache: Mutex::new(HashMap::new()),
            support: Some(support),
        };
        Self { inner: Arc::new(inner) }
    }

    pub fn root_system(&self) -> &RootSystem {
        &self.inner.rs
    }

    pub fn dim_m(&self) -> usize {
        self.inner.dim_m
    }

    pub fn support(&self) -> Option<&[AffineWeylElement]> {
        self.inner.support.as_deref()
    }

    /// `f_{wĈ₊}`; any representative `w ∈ Ŵ^Y` of the chamber is accepted.
    pub fn component(&self, w: &AffineWeylElement) -> Arc<Vvf<F>> {
        let key = w.chamber_part(&self.inner.rs);
        if let Some(f) = self.inner.cache.lock().expect("cache lock").get(&key) {
            return f.clone();
        }
        // computed outside the lock: resolvers may query other families
        let f = Arc::new((self.inner.resolver)(&key));
        self.inner.cache.lock().expect("cache lock").entry(key).or_insert(f).clone()
    }

    pub fn materialized(&self) -> usize {
        self.inner.cache.lock().expect("cache lock").len()
    }

    /// `f†(x)`: the component of the chamber containing `x`.
    pub fn eval(&self, x: &HatVector<C64>) -> Result<Vec<C64>> {
        let w = locate_chamber(&self.inner.rs, x, WALL_TOL)?;
        Ok(self.component(&w).eval(x))
    }
}

/// `χ_a(wĈ₊) = 1` iff `a ∈ R̂⁺ ∩ w(R̂⁻)`.
pub fn chi(rs: &RootSystem, a: AffineRoot, chamber: &AffineWeylElement) -> bool {
    rs.is_affine_positive(a) && !rs.is_affine_positive(chamber.inverse().act_root(rs, a))
}

/// The roots `a > 0` with `χ_a(wĈ₊) = 1`.
pub fn inversion_set(rs: &RootSystem, chamber: &AffineWeylElement) -> Vec<AffineRoot> {
    chamber.inverse().positive_to_negative(rs)
}

/// `(wf)_C(v̂) = π(w) f_{w^{-1}C}(w^{-1}v̂)`.
pub fn act_group<F: Scalar + 'static>(w: &AffineWeylElement, f: &PiecewiseFamily<F>, rep: &ModuleRep) -> PiecewiseFamily<F> {
    let rs = f.inner.rs.clone();
    let pi: Mat<F> = rep.pi_f(&rs, w);
    let (w, winv, f2) = (w.clone(), w.inverse(), f.clone());
    PiecewiseFamily::new(rs, f.dim_m(), move |c| f2.component(&winv.mul(c)).pullback(&w).apply_matrix(&pi))
}


/// `D_v̂ f = ∂_v̂ f - Σ_{a>0} k_a (a, v̂) χ_a s_a f`.
pub fn dunkl_d<F: Scalar + 'static>(
    v: &HatVector<F>,
    f: &PiecewiseFamily<F>,
    rep: &ModuleRep,
    k: &Multiplicity<F>,
) -> PiecewiseFamily<F> {
    let rs = f.inner.rs.clone();
    let (v, f2, rep, k) = (v.clone(), f.clone(), rep.clone(), k.clone());
    let rs2 = rs.clone();
    PiecewiseFamily::new(rs, f.dim_m(), move |c| {
        let mut out = f2.component(c).derivative(&v);
        for a in inversion_set(&rs2, c) {
            let coef = k.get(a) * rs2.pair_affine(a, &v);
            if coef.is_zero() {
                continue;
            }
            let sa = AffineWeylElement::reflection(&rs2, a);
            // (s_a f)_C = π(s_a) f_{s_a C}(s_a ·)
            let term = f2.component(&sa.mul(c)).pullback(&sa).apply_matrix(&rep.pi_f(&rs2, &sa));
            out = out.sub(&term.scale(&coef));
        }
        out
    })
}

/// `(Tg)_{wĈ₊}(v̂) = π(w)((Q̂(w^{-1})g)(w^{-1}v̂))`.
pub fn propagate_t<F: Scalar + 'static>(
    rs: Arc<RootSystem>,
    g: &Vvf<F>,
    rep: &ModuleRep,
    k: &Multiplicity<F>,
) -> PiecewiseFamily<F> {
    let (g, rep, k, rs2) = (g.clone(), rep.clone(), k.clone(), rs.clone());
    PiecewiseFamily::new(rs, g.dim_m(), move |w| {
        q_element(&rs2, &w.inverse(), &g, &rep, &k).pullback(w).apply_matrix(&rep.pi_f(&rs2, w))
    })
}

/// `(s_b p - p) / b^∨` for `p ∈ S(ĥ)`, variables indexing `e_1..e_n, c, d`.
pub fn delta_b<F: Scalar>(rs: &RootSystem, b: AffineRoot, p: &Poly<F>) -> Result<Poly<F>> {
    let n = rs.dim + 2;
    let s = AffineWeylElement::reflection(rs, b);
    // (s_b p)(z) = p(S^T z), row i of S^T being the coordinates of s_b(e_i)
    let rows: Vec<Vec<F>> = (0..n)
        .map(|i| {
            let mut e = vec![F::zero(); n];
            e[i] = F::one();
            s.act(&HatVector::from_coords(&e)).coords()
        })
        .collect();
    let num = p.substitute_linear(&rows).sub(p);
    let bv: HatVector<F> = rs.affine_coroot_vector(b);
    let (quo, rem) = num.div_linear(&Poly::linear(&bv.coords(), F::zero()))?;
    if !rem.prune(1e-12 * (1.0 + p.max_coef())).is_zero() {
        return Err(Error::RelationFailure(format!("s_b p - p is not divisible by b^∨ (remainder {rem})")));
    }
    Ok(quo)
}

/// Residual function of the jump identity across the wall `H_b`, `b = w a_i`,
/// as an `M`-valued exp-poly on `ĥ`:
/// `p(∂)f_{wĈ₊} - p(∂)f_{s_b wĈ₊} - k_b π(s_b) Δ_b(p)(∂) f_{wĈ₊}`.
pub fn jump_residual_function<F: Scalar + 'static>(
    f: &PiecewiseFamily<F>,
    w: &AffineWeylElement,
    i: usize,
    p: &Poly<F>,
    rep: &ModuleRep,
    k: &Multiplicity<F>,
) -> Result<Vvf<F>> {
    let rs = f.root_system();
    let b = w.act_root(rs, rs.affine_simple_roots()[i]);
    let sb = AffineWeylElement::reflection(rs, b);
    let here = f.component(w);
    let there = f.component(&sb.mul(w));
    let dp = delta_b(rs, b, p)?;
    let lhs = here.map_comps(|c| c.apply_poly_diffop(p)).sub(&there.map_comps(|c| c.apply_poly_diffop(p)));
    let jump = here.map_comps(|c| c.apply_poly_diffop(&dp)).apply_matrix(&rep.pi_f(rs, &sb)).scale(&k.get(b));
    Ok(lhs.sub(&jump))
}

/// Size of the jump residual at a point `v̂ ∈ H_b`. In exact mode the point
/// value is evaluated formally (one coefficient per distinct exponent value),
/// so `0.0` certifies exact vanishing.
pub fn jump_check<F: Scalar + 'static>(
    f: &PiecewiseFamily<F>,
    w: &AffineWeylElement,
    i: usize,
    p: &Poly<F>,
    x: &HatVector<F>,
    rep: &ModuleRep,
    k: &Multiplicity<F>,
) -> Result<f64> {
    let rs = f.root_system();
    let b = w.act_root(rs, rs.affine_simple_roots()[i]);
    let bx = rs.pair_affine(b, x);
    if !(bx.is_zero() || (!F::EXACT && bx.abs() <= 1e-12)) {
        return Err(Error::NotOnWall(format!("(b, v̂) = {:e}", bx.abs())));
    }
    let r = jump_residual_function(f, w, i, p, rep, k)?;
    Ok(point_size(&r, x))
}

/// Modulus of an `M`-valued exp-poly at a point; exact mode reports the
/// largest grouped coefficient instead of a numerical value.
pub fn point_size<F: Scalar>(r: &Vvf<F>, x: &HatVector<F>) -> f64 {
    if F::EXACT {
        r.comps
            .iter()
            .flat_map(|c| c.eval_formal(x))
            .map(|(_, c)| c.abs())
            .fold(0.0, f64::max)
    } else {
        let xc = x.map(|t| t.to_c64());
        r.eval(&xc).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Uniform rational points of `H_b` with `ξ ∈ [1/2, 2]` and finite part in a box.
pub fn wall_points<R: Rng>(rs: &RootSystem, b: AffineRoot, rng: &mut R, count: usize, half_width: i64) -> Vec<HatVector<Cq>> {
    let den = 64;
    let beta = &rs.roots[b.root];
    let bb = crate::matrix::dot(beta, beta);
    (0..count)
        .map(|_| {
            let xi = q(rng.gen_range(den / 2..=2 * den), den);
            let eta = q(rng.gen_range(-half_width * den..=half_width * den), den);
            let v: Vec<Q> = (0..rs.dim).map(|_| q(rng.gen_range(-half_width * den..=half_width * den), den)).collect();
            // project v onto (β, v) + m ξ = 0
            let off = (crate::matrix::dot(beta, &v) + Q::from_integer(b.level.into()) * xi.clone()) / bb.clone();
            let v: Vec<Q> = v.iter().zip(beta).map(|(vi, bi)| vi - off.clone() * bi).collect();
            HatVector::from_q(&v, &eta, &xi)
        })
        .collect()
}

/// Intertwining residual `T(Q̂(h)g) - π̂(h)(Tg)` on the listed chambers,
/// `h` a group element.
pub fn intertwining_residual_group<F: Scalar + 'static>(
    rs: &Arc<RootSystem>,
    h: &AffineWeylElement,
    g: &Vvf<F>,
    rep: &ModuleRep,
    k: &Multiplicity<F>,
    chambers: &[AffineWeylElement],
) -> f64 {
    let lhs = propagate_t(rs.clone(), &q_element(rs, h, g, rep, k), rep, k);
    let rhs = act_group(h, &propagate_t(rs.clone(), g, rep, k), rep);
    chambers.iter().map(|c| lhs.component(c).sub(&rhs.component(c)).residual_size()).fold(0.0, f64::max)
}

/// Intertwining residual `T(∂_v̂ g) - D_v̂(Tg)` on the listed chambers.
pub fn intertwining_residual_vector<F: Scalar + 'static>(
    rs: &Arc<RootSystem>,
    v: &HatVector<F>,
    g: &Vvf<F>,
    rep: &ModuleRep,
    k: &Multiplicity<F>,
    chambers: &[AffineWeylElement],
) -> f64 {
    let lhs = propagate_t(rs.clone(), &g.derivative(v), rep, k);
    let rhs = dunkl_d(v, &propagate_t(rs.clone(), g, rep, k), rep, k);
    chambers.iter().map(|c| lhs.component(c).sub(&rhs.component(c)).residual_size()).fold(0.0, f64::max)
}

/// `f = T(e^{λ̂} ⊗ m)`.
pub fn propagate_exponential<F: Scalar + 'static>(
    rs: Arc<RootSystem>,
    lam: &HatVector<F>,
    m: &[F],
    rep: &ModuleRep,
    k: &Multiplicity<F>,
) -> PiecewiseFamily<F> {
    let g = Vvf::tensor(&ExpPoly::exp(lam.clone()), m);
    propagate_t(rs, &g, rep, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affine_weyl::{omega_generators, random_affine_word};
    use crate::exp_poly::tests::random_exp_poly;
    use crate::root_system::{multiplicity_orbits, CartanType, LatticeChoice};
    use crate::scalar::qi;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(t: CartanType) -> (Arc<RootSystem>, Multiplicity<Cq>) {
        let rs = RootSystem::new(t, LatticeChoice::Coweight).unwrap();
        let k = Multiplicity::uniform(Arc::new(multiplicity_orbits(&rs)), Cq::from_q(&q(2, 3)));
        (Arc::new(rs), k)
    }

    fn chambers(rs: &RootSystem, rng: &mut ChaCha8Rng, n: usize) -> Vec<AffineWeylElement> {
        (0..n)
            .map(|_| {
                let len = rng.gen_range(0..5);
                AffineWeylElement::from_word(rs, &random_affine_word(rs, rng, len))
            })
            .collect()
    }

    fn rand_hat(rng: &mut ChaCha8Rng, dim: usize) -> HatVector<Cq> {
        let fin: Vec<Q> = (0..dim).map(|_| q(rng.gen_range(-5..=5), rng.gen_range(1..=3))).collect();
        HatVector::from_q(&fin, &q(rng.gen_range(-5..=5), 2), &q(rng.gen_range(1..=5), 2))
    }

    #[test]
    fn chi_counts_length() {
        let (rs, _) = setup(CartanType::A(2));
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        for a in rs.affine_simple_roots() {
            assert!(!chi(&rs, a, &AffineWeylElement::identity(rs.dim)));
        }
        let s1 = AffineWeylElement::simple(&rs, 1);
        assert!(chi(&rs, rs.affine_simple_roots()[1], &s1));
        for w in chambers(&rs, &mut rng, 20) {
            let inv = inversion_set(&rs, &w);
            assert_eq!(inv.len(), w.length(&rs));
            assert!(inv.iter().all(|a| chi(&rs, *a, &w)));
        }
    }

    #[test]
    fn delta_b_divides_exactly() {
        let (rs, _) = setup(CartanType::B2);
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        for _ in 0..10 {
            let deg = rng.gen_range(0..=4);
            let p = random_exp_poly(&mut rng, 2, 1, deg).terms[0].poly.clone();
            for a in rs.affine_simple_roots() {
                let d = delta_b(&rs, a, &p).unwrap();
                assert!(d.degree() < p.degree().max(1));
            }
        }
        // degree one: Δ_b(û) = -(û, b)
        let b = rs.affine_simple_roots()[0];
        let u = HatVector::<Cq>::from_q(&[qi(1), qi(2)], &qi(3), &qi(1));
        let d = delta_b(&rs, b, &Poly::linear(&u.coords(), Cq::from_i64(0))).unwrap();
        assert_eq!(d, Poly::constant(4, -rs.pair_affine(b, &u)));
    }

    #[test]
    fn k_zero_propagation_is_constant() {
        let (rs, _) = setup(CartanType::A(1));
        let k = Multiplicity::zero(Arc::new(multiplicity_orbits(&rs)));
        let rep = ModuleRep::steinberg(&rs);
        let lam = rand_hat(&mut ChaCha8Rng::seed_from_u64(52), 2);
        let f = propagate_exponential(rs.clone(), &lam, &[Cq::from_i64(1)], &rep, &k);
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        // Q̂(w^{-1}) = w^{-1} ⊗ π(w^{-1}) undoes the outer twist
        for w in chambers(&rs, &mut rng, 10) {
            assert!(f.component(&w).comps[0].sub(&ExpPoly::exp(lam.clone())).is_zero());
        }
    }

    #[test]
    fn t_intertwines_generators() {
        let mut rng = ChaCha8Rng::seed_from_u64(54);
        for t in [CartanType::A(1), CartanType::A(2)] {
            let (rs, k) = setup(t);
            let rep = ModuleRep::two_dim(&rs).unwrap();
            let g = Vvf { comps: (0..rep.dim).map(|_| random_exp_poly(&mut rng, rs.dim, 1, 1)).collect() };
            let cs = chambers(&rs, &mut rng, 8);
            for i in 0..=rs.rank() {
                let s = AffineWeylElement::simple(&rs, i);
                assert_eq!(intertwining_residual_group(&rs, &s, &g, &rep, &k, &cs), 0.0);
            }
            for om in omega_generators(&rs) {
                assert_eq!(intertwining_residual_group(&rs, &om, &g, &rep, &k, &cs), 0.0);
            }
            let v = rand_hat(&mut rng, rs.dim);
            assert_eq!(intertwining_residual_vector(&rs, &v, &g, &rep, &k, &cs), 0.0);
        }
    }

    #[test]
    fn dunkl_operators_commute_and_cross() {
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let (rs, k) = setup(CartanType::A(2));
        let rep = ModuleRep::trivial(&rs);
        let parts = chambers(&rs, &mut rng, 4)
            .into_iter()
            .map(|w| (w, Vvf { comps: vec![random_exp_poly(&mut rng, rs.dim, 1, 1)] }))
            .collect();
        let f = PiecewiseFamily::finite_support(rs.clone(), 1, parts);
        let (v, vp) = (rand_hat(&mut rng, rs.dim), rand_hat(&mut rng, rs.dim));
        let lhs = dunkl_d(&v, &dunkl_d(&vp, &f, &rep, &k), &rep, &k);
        let rhs = dunkl_d(&vp, &dunkl_d(&v, &f, &rep, &k), &rep, &k);
        let probe = chambers(&rs, &mut rng, 12);
        for c in &probe {
            assert!(lhs.component(c).sub(&rhs.component(c)).is_zero());
        }
        for i in 0..=rs.rank() {
            let a = rs.affine_simple_roots()[i];
            let s = AffineWeylElement::simple(&rs, i);
            let l = act_group(&s, &dunkl_d(&v, &f, &rep, &k), &rep);
            let r = dunkl_d(&s.act(&v), &act_group(&s, &f, &rep), &rep, &k);
            let kav = k.get(a) * rs.pair_affine(a, &v);
            for c in &probe {
                let res = l.component(c).sub(&r.component(c)).add(&f.component(c).scale(&kav));
                assert!(res.is_zero());
            }
        }
    }

    #[test]
    fn jump_conditions_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(56);
        let (rs, k) = setup(CartanType::A(1));
        let rep = ModuleRep::trivial(&rs);
        let lam = rand_hat(&mut rng, 2);
        let f = propagate_exponential(rs.clone(), &lam, &[Cq::from_i64(1)], &rep, &k);
        let id = AffineWeylElement::identity(2);
        let one = Poly::one(4);
        let u = rand_hat(&mut rng, 2);
        let lin = Poly::linear(&u.coords(), Cq::from_i64(0));
        for i in 0..=1 {
            let b = rs.affine_simple_roots()[i];
            for x in wall_points(&rs, b, &mut rng, 5, 2) {
                assert_eq!(jump_check(&f, &id, i, &one, &x, &rep, &k).unwrap(), 0.0);
                assert_eq!(jump_check(&f, &id, i, &lin, &x, &rep, &k).unwrap(), 0.0);
            }
        }
        let off = HatVector::from_q(&[qi(1), qi(0)], &qi(0), &qi(1));
        assert!(matches!(jump_check(&f, &id, 1, &one, &off, &rep, &k), Err(Error::NotOnWall(_))));
    }

    #[test]
    fn eval_uses_the_containing_chamber() {
        let (rs, k) = setup(CartanType::A(1));
        let rep = ModuleRep::trivial(&rs);
        let lam = HatVector::<Cq>::from_q(&[q(1, 3), q(-1, 3)], &qi(0), &qi(1));
        let f = propagate_exponential(rs.clone(), &lam, &[Cq::from_i64(1)], &rep, &k);
        let x = HatVector::new(vec![C64::new(0.9, 0.0), C64::new(-0.9, 0.0)], C64::new(0.0, 0.0), C64::new(1.0, 0.0));
        let w = locate_chamber(&rs, &x, WALL_TOL).unwrap();
        assert!(!w.is_identity());
        let direct = f.component(&w).eval(&x)[0];
        assert!((f.eval(&x).unwrap()[0] - direct).norm() < 1e-14);
        assert!(f.materialized() >= 1);
    }
}
