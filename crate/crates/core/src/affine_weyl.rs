//! The extended affine Weyl group `Ŵ^Y = W ⋉ Y`.
//!
//! Elements are kept in the normal form `w = t_y u` with `u ∈ W` an
//! orthogonal rational matrix. Chambers are indexed by elements of the
//! non-extended group `Ŵ`; an element `g = û ω` of `Ŵ^Y` (`û ∈ Ŵ`, `ω ∈ Ω`)
//! maps `Ĉ₊` to `ûĈ₊`.

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::hat::HatVector;
use crate::matrix::{dot, qmat_apply, qmat_identity, qmat_mul, qmat_transpose, vadd, vneg, vscale};
use crate::root_system::{AffineRoot, RootSystem};
use crate::scalar::{qi, Scalar, Q};

/// Default wall tolerance for floating point chamber location.
pub const WALL_TOL: f64 = 1e-9;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct AffineWeylElement {
    /// Finite part `u`.
    pub u: Vec<Vec<Q>>,
    /// Translation part `y`.
    pub y: Vec<Q>,
}

impl fmt::Debug for AffineWeylElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let y: Vec<String> = self.y.iter().map(crate::scalar::q_to_string).collect();
        let u: Vec<Vec<String>> =
            self.u.iter().map(|r| r.iter().map(crate::scalar::q_to_string).collect()).collect();
        write!(f, "t_{:?}·{:?}", y, u)
    }
}

/// Which descent to strip first when building a reduced word.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TieBreak {
    Lowest,
    Highest,
}

impl AffineWeylElement {
    pub fn identity(n: usize) -> Self {
        Self { u: qmat_identity(n), y: vec![Q::from_integer(0.into()); n] }
    }

    pub fn translation(y: &[Q]) -> Self {
        Self { u: qmat_identity(y.len()), y: y.to_vec() }
    }

    pub fn finite(u: Vec<Vec<Q>>) -> Self {
        let n = u.len();
        Self { u, y: vec![qi(0); n] }
    }

    /// The affine simple reflection `s_i`, `s_0 = t_{θ^∨} s_θ`.
    pub fn simple(rs: &RootSystem, i: usize) -> Self {
        if i == 0 {
            Self { u: rs.reflection_matrix(rs.highest), y: rs.coroots[rs.highest].clone() }
        } else {
            Self::finite(rs.reflection_matrix(rs.simple_index(i)))
        }
    }

    /// `s_{α+mc} = t_{-mα^∨} s_α`.
    pub fn reflection(rs: &RootSystem, a: AffineRoot) -> Self {
        Self { u: rs.reflection_matrix(a.root), y: vscale(&rs.coroots[a.root], &qi(-a.level)) }
    }

    pub fn dim(&self) -> usize {
        self.y.len()
    }

    pub fn is_identity(&self) -> bool {
        self.y.iter().all(|x| x == &qi(0)) && self.u == qmat_identity(self.dim())
    }

    pub fn is_translation(&self) -> bool {
        self.u == qmat_identity(self.dim())
    }

    /// `(t_y u)(t_{y'} u') = t_{y + u y'} (u u')`.
    pub fn mul(&self, o: &Self) -> Self {
        Self { u: qmat_mul(&self.u, &o.u), y: vadd(&self.y, &qmat_apply(&self.u, &o.y)) }
    }

    pub fn inverse(&self) -> Self {
        let ut = qmat_transpose(&self.u);
        let y = vneg(&qmat_apply(&ut, &self.y));
        Self { u: ut, y }
    }

    pub fn pow(&self, e: usize) -> Self {
        (0..e).fold(Self::identity(self.dim()), |acc, _| acc.mul(self))
    }

    /// Action on the extended space: `t_y(u x)`.
    pub fn act<F: Scalar>(&self, x: &HatVector<F>) -> HatVector<F> {
        let fin = self
            .u
            .iter()
            .map(|row| row.iter().zip(&x.fin).fold(F::zero(), |acc, (m, v)| acc + F::from_q(m) * v.clone()))
            .collect();
        let ux = HatVector::new(fin, x.c.clone(), x.d.clone());
        let y: Vec<F> = self.y.iter().map(F::from_q).collect();
        ux.translate(&y)
    }

    /// Finite-part action on a vector of `h` (the linear part, without translation).
    pub fn act_linear_q(&self, v: &[Q]) -> Vec<Q> {
        qmat_apply(&self.u, v)
    }

    /// `w(α + mc) = uα + (m - (y, uα)) c`.
    pub fn act_root(&self, rs: &RootSystem, a: AffineRoot) -> AffineRoot {
        let r = rs.act_on_root(&self.u, a.root);
        AffineRoot { root: r, level: a.level - rs.int_pairing(&self.y, r) }
    }

    /// `{a ∈ R̂⁺ : w a ∈ R̂⁻}`, ordered by root index then level.
    pub fn positive_to_negative(&self, rs: &RootSystem) -> Vec<AffineRoot> {
        let mut out = vec![];
        for r in 0..rs.num_roots() {
            let ur = rs.act_on_root(&self.u, r);
            let t = rs.int_pairing(&self.y, ur);
            let m_min = if rs.is_positive(r) { 0 } else { 1 };
            // image level m - t must be negative, or zero with a negative gradient
            let mut m = m_min;
            while m - t < 0 || (m - t == 0 && !rs.is_positive(ur)) {
                out.push(AffineRoot { root: r, level: m });
                m += 1;
            }
        }
        out
    }

    /// `l(w) = #(R̂⁺ ∩ w^{-1} R̂⁻)` in closed form.
    pub fn length(&self, rs: &RootSystem) -> usize {
        let mut l = 0i64;
        for r in 0..rs.num_roots() {
            let ur = rs.act_on_root(&self.u, r);
            let t = rs.int_pairing(&self.y, ur);
            let m_min = if rs.is_positive(r) { 0 } else { 1 };
            l += (t - m_min).max(0);
            if t >= m_min && !rs.is_positive(ur) {
                l += 1;
            }
        }
        l as usize
    }

    /// Right descents: affine simple roots `a_i` with `w(a_i) ∈ R̂⁻`.
    pub fn right_descents(&self, rs: &RootSystem) -> Vec<usize> {
        rs.affine_simple_roots()
            .iter()
            .enumerate()
            .filter(|(_, a)| !rs.is_affine_positive(self.act_root(rs, **a)))
            .map(|(i, _)| i)
            .collect()
    }

    /// `w = ω · s_{i_1} ⋯ s_{i_l}` with `l = l(w)`, lowest descent stripped first.
    pub fn reduced_word(&self, rs: &RootSystem) -> (AffineWeylElement, Vec<usize>) {
        self.reduced_word_with(rs, TieBreak::Lowest)
    }

    pub fn reduced_word_with(&self, rs: &RootSystem, tie: TieBreak) -> (AffineWeylElement, Vec<usize>) {
        // walk on integer data: perm[r] indexes uα_r, pair[r] = (y, α_r)
        let tab = rs.weyl_table();
        let nr = rs.num_roots();
        let asr = rs.affine_simple_roots();
        let mut perm = tab.perms[rs.weyl_index(&self.u)].clone();
        let mut pair = rs.int_pairings(&self.y);
        let mut y = self.y.clone();
        let mut inv = vec![0; nr];
        let mut stripped = vec![];
        loop {
            let mut desc = (0..asr.len()).filter(|&i| {
                let r = perm[asr[i].root];
                !rs.is_affine_positive(AffineRoot { root: r, level: asr[i].level - pair[r] })
            });
            let pick = match tie {
                TieBreak::Lowest => desc.next(),
                TieBreak::Highest => desc.last(),
            };
            let Some(i) = pick else { break };
            // w s_i = t_{y + u y_i} (u u_i)
            if i == 0 {
                y = vadd(&y, &rs.coroots[perm[rs.highest]]);
            }
            for (r, &p) in perm.iter().enumerate() {
                inv[p] = r;
            }
            let sp = &tab.simple_pair[i];
            for r in 0..nr {
                pair[r] += sp[inv[r]];
            }
            perm = tab.simple_perm[i].iter().map(|&r| perm[r]).collect();
            stripped.push(i);
        }
        stripped.reverse();
        let u = tab.mats[*tab.by_perm.get(&perm).expect("root permutation of a Weyl group element")].clone();
        (AffineWeylElement { u, y }, stripped)
    }

    /// The `Ω`-part of `w = û ω`.
    pub fn omega_part(&self, rs: &RootSystem) -> AffineWeylElement {
        let (omega, _) = self.reduced_word(rs);
        omega
    }

    /// The chamber index `û = w ω^{-1} ∈ Ŵ`.
    pub fn chamber_part(&self, rs: &RootSystem) -> AffineWeylElement {
        self.mul(&self.omega_part(rs).inverse())
    }

    /// Product of affine simple reflections along a word.
    pub fn from_word(rs: &RootSystem, word: &[usize]) -> Self {
        word.iter().fold(Self::identity(rs.dim), |acc, &i| acc.mul(&Self::simple(rs, i)))
    }
}

/// Generators of `Ω`: the `Ω`-parts of the translations by the `Y` basis,
/// identities dropped and duplicates removed.
pub fn omega_generators(rs: &RootSystem) -> Vec<AffineWeylElement> {
    let mut out: Vec<AffineWeylElement> = vec![];
    for y in &rs.y_basis {
        let om = AffineWeylElement::translation(y).omega_part(rs);
        if !om.is_identity() && !out.contains(&om) {
            out.push(om);
        }
    }
    out
}

/// Permutation of the affine simple roots induced by a length-zero element:
/// `ω(a_i) = a_{perm[i]}`.
pub fn omega_permutation(rs: &RootSystem, omega: &AffineWeylElement) -> Result<Vec<usize>> {
    let asr = rs.affine_simple_roots();
    asr.iter()
        .map(|a| {
            let b = omega.act_root(rs, *a);
            asr.iter()
                .position(|s| *s == b)
                .ok_or_else(|| Error::RelationFailure(format!("{omega:?} does not permute the affine simple roots")))
        })
        .collect()
}

/// Element of `Ŵ` with `w^{-1} x ∈ Ĉ₊`, by greedy descent on the signs of `(a_i, ·)`.
pub fn locate_chamber<F: Scalar>(rs: &RootSystem, x: &HatVector<F>, tol: f64) -> Result<AffineWeylElement> {
    let xi = x.d.re_f64();
    if xi <= 0.0 {
        return Err(Error::NotPositiveLevel(xi));
    }
    let asr = rs.affine_simple_roots();
    let mut w = AffineWeylElement::identity(rs.dim);
    let mut y = x.clone();
    // the descent strictly decreases the number of separating walls, so this terminates
    loop {
        let mut moved = false;
        for (i, a) in asr.iter().enumerate() {
            let p = rs.pair_affine(*a, &y).re_f64();
            if p.abs() <= tol || (tol == 0.0 && rs.pair_affine(*a, &y).is_zero()) {
                return Err(Error::OnWall(format!("a_{i} at chamber {w:?}"), p.abs()));
            }
            if p < 0.0 {
                let s = AffineWeylElement::simple(rs, i);
                y = s.act(&y);
                w = w.mul(&s);
                moved = true;
                break;
            }
        }
        if !moved {
            return Ok(w);
        }
    }
}

/// Random element of `Ŵ^Y` as a product of `len` generators (affine simple
/// reflections and translations by `±y_j`); returns the element and the word
/// length used.
pub fn random_element<R: Rng>(rs: &RootSystem, rng: &mut R, len: usize) -> AffineWeylElement {
    let mut w = AffineWeylElement::identity(rs.dim);
    let n_gen = rs.rank() + 1;
    for _ in 0..len {
        let g = rng.gen_range(0..n_gen + 2 * rs.y_basis.len());
        let h = if g < n_gen {
            AffineWeylElement::simple(rs, g)
        } else {
            let j = (g - n_gen) / 2;
            let y = &rs.y_basis[j];
            AffineWeylElement::translation(&if (g - n_gen) % 2 == 0 { y.clone() } else { vneg(y) })
        };
        w = w.mul(&h);
    }
    w
}

/// Random element of `Ŵ` as a word of `len` affine simple reflections.
pub fn random_affine_word<R: Rng>(rs: &RootSystem, rng: &mut R, len: usize) -> Vec<usize> {
    (0..len).map(|_| rng.gen_range(0..=rs.rank())).collect()
}

/// Order of `s_i s_j` (`None` when infinite, detected as a nontrivial translation).
pub fn coxeter_order(rs: &RootSystem, i: usize, j: usize) -> Option<usize> {
    let p = AffineWeylElement::simple(rs, i).mul(&AffineWeylElement::simple(rs, j));
    if p.is_translation() && !p.is_identity() {
        return None;
    }
    let mut acc = p.clone();
    for k in 1..=12 {
        if acc.is_identity() {
            return Some(k);
        }
        acc = acc.mul(&p);
    }
    None
}

/// Coxeter exponent from the angle between affine simple roots.
pub fn coxeter_exponent_from_roots(rs: &RootSystem, i: usize, j: usize) -> Option<usize> {
    if i == j {
        return Some(1);
    }
    let asr = rs.affine_simple_roots();
    let (a, b) = (asr[i], asr[j]);
    let ab = dot(&rs.roots[a.root], &rs.roots[b.root]);
    let c = &ab * &ab * qi(4) / (&rs.norms[a.root] * &rs.norms[b.root]);
    // 4 cos² of the angle: 0, 1, 2, 3, 4 ↦ 2, 3, 4, 6, ∞
    match crate::scalar::q_to_i64(&c) {
        Some(0) => Some(2),
        Some(1) => Some(3),
        Some(2) => Some(4),
        Some(3) => Some(6),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::root_system::{CartanType, LatticeChoice};
    use crate::scalar::{q, Cq, C64};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rs(t: CartanType, l: LatticeChoice) -> RootSystem {
        RootSystem::new(t, l).unwrap()
    }

    fn types() -> Vec<CartanType> {
        vec![CartanType::A(1), CartanType::A(2), CartanType::A(3), CartanType::B2, CartanType::C2, CartanType::G2]
    }

    fn rand_hat(rng: &mut ChaCha8Rng, n: usize) -> HatVector<Cq> {
        let mut r = || q(rng.gen_range(-20..=20), rng.gen_range(1..=6));
        let fin = (0..n).map(|_| r()).collect::<Vec<_>>();
        HatVector::from_q(&fin, &r(), &r())
    }

    /// Oracle: inversion count by scanning levels in a generous window.
    fn brute_length(rs: &RootSystem, w: &AffineWeylElement) -> usize {
        let mut n = 0;
        for r in 0..rs.num_roots() {
            for m in -60..=60 {
                let a = AffineRoot { root: r, level: m };
                if rs.is_affine_positive(a) && !rs.is_affine_positive(w.act_root(rs, a)) {
                    n += 1;
                }
            }
        }
        n
    }

    #[test]
    fn group_law_and_action_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for t in types() {
            let rs = rs(t, LatticeChoice::Coweight);
            for _ in 0..20 {
                let a = random_element(&rs, &mut rng, 6);
                let b = random_element(&rs, &mut rng, 6);
                let x = rand_hat(&mut rng, rs.dim);
                assert_eq!(a.mul(&b).act(&x), a.act(&b.act(&x)));
                assert_eq!(a.mul(&a.inverse()), AffineWeylElement::identity(rs.dim));
                let xp = rand_hat(&mut rng, rs.dim);
                assert_eq!(a.act(&x).pairing(&a.act(&xp)), x.pairing(&xp));
            }
        }
    }

    #[test]
    fn finite_part_conjugates_translations() {
        let rs = rs(CartanType::B2, LatticeChoice::Coweight);
        for i in 1..=2 {
            let s = AffineWeylElement::simple(&rs, i);
            for y in &rs.y_basis {
                let lhs = s.mul(&AffineWeylElement::translation(y));
                let rhs = AffineWeylElement::translation(&s.act_linear_q(y)).mul(&s);
                assert_eq!(lhs, rhs);
            }
        }
    }

    #[test]
    fn reflection_examples() {
        let rs = rs(CartanType::A(1), LatticeChoice::Coroot);
        let s1 = AffineWeylElement::simple(&rs, 1);
        let lam = HatVector::<Cq>::from_q(&[q(3, 2), q(-3, 2)], &qi(0), &qi(0));
        assert_eq!(s1.act(&lam), HatVector::from_q(&[q(-3, 2), q(3, 2)], &qi(0), &qi(0)));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = AffineRoot { root: 0, level: 1 };
        let sa = AffineWeylElement::reflection(&rs, a);
        let rhs = AffineWeylElement::simple(&rs, 1).mul(&AffineWeylElement::translation(&rs.coroots[0]));
        assert_eq!(sa, rhs);
        for _ in 0..100 {
            let x = rand_hat(&mut rng, 2);
            assert_eq!(sa.act(&sa.act(&x)), x);
            assert_eq!(sa.act(&x), x.reflect_in(&rs.affine_root_vector(a)));
            let c = HatVector::<Cq>::c_vec(2);
            assert_eq!(sa.act(&c), c);
        }
    }

    #[test]
    fn length_examples() {
        let rs1 = rs(CartanType::A(1), LatticeChoice::Coroot);
        let t = AffineWeylElement::translation(&rs1.coroots[0]);
        assert_eq!(t.length(&rs1), 2);
        assert_eq!(AffineWeylElement::identity(2).length(&rs1), 0);
        let rsp = rs(CartanType::A(1), LatticeChoice::Coweight);
        for om in omega_generators(&rsp) {
            assert_eq!(om.length(&rsp), 0);
        }
        // translations: l(t_y) = Σ_{α>0} |(y, α)|
        for t in types() {
            let rs = rs(t, LatticeChoice::Coweight);
            for y in &rs.y_basis {
                let want: i64 = (0..rs.n_pos).map(|r| rs.int_pairing(y, r).abs()).sum();
                assert_eq!(AffineWeylElement::translation(y).length(&rs), want as usize);
            }
        }
    }

    #[test]
    fn length_matches_inversion_oracle_and_words() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for t in types() {
            let rs = rs(t, LatticeChoice::Coweight);
            for _ in 0..30 {
                let word = random_affine_word(&rs, &mut rng, 8);
                let w = AffineWeylElement::from_word(&rs, &word);
                let l = w.length(&rs);
                assert_eq!(l, brute_length(&rs, &w));
                assert!(l <= word.len());
                assert_eq!(l % 2, word.len() % 2);
                assert_eq!(w.positive_to_negative(&rs).len(), l);
                let (om, red) = w.reduced_word(&rs);
                assert_eq!(red.len(), l);
                assert!(om.is_identity());
                // descent rule
                for i in 0..=rs.rank() {
                    let si = AffineWeylElement::simple(&rs, i);
                    let li = si.mul(&w).length(&rs);
                    let a = rs.affine_simple_roots()[i];
                    let neg = !rs.is_affine_positive(w.inverse().act_root(&rs, a));
                    assert_eq!(li, if neg { l - 1 } else { l + 1 });
                }
            }
            for _ in 0..20 {
                let w = random_element(&rs, &mut rng, 6);
                let (om, red) = w.reduced_word(&rs);
                assert_eq!(om.mul(&AffineWeylElement::from_word(&rs, &red)), w);
                assert_eq!(om.length(&rs), 0);
                let (om2, red2) = w.reduced_word_with(&rs, TieBreak::Highest);
                assert_eq!(om2, om);
                assert_eq!(red2.len(), red.len());
            }
        }
    }

    #[test]
    fn reduced_word_examples() {
        let rs1 = rs(CartanType::A(1), LatticeChoice::Coroot);
        let t = AffineWeylElement::translation(&rs1.coroots[0]);
        let (om, word) = t.reduced_word(&rs1);
        assert!(om.is_identity());
        assert_eq!(word, vec![0, 1]);
        assert_eq!(AffineWeylElement::simple(&rs1, 0).mul(&AffineWeylElement::simple(&rs1, 1)), t);
        let (_, w1) = AffineWeylElement::simple(&rs1, 1).reduced_word(&rs1);
        assert_eq!(w1, vec![1]);

        let rsp = rs(CartanType::A(1), LatticeChoice::Coweight);
        let gens = omega_generators(&rsp);
        assert_eq!(gens.len(), 1);
        let (om, word) = gens[0].reduced_word(&rsp);
        assert!(word.is_empty());
        assert_eq!(om, gens[0]);
        assert_eq!(omega_permutation(&rsp, &gens[0]).unwrap(), vec![1, 0]);
    }

    #[test]
    fn coxeter_relations() {
        for t in types() {
            let rs = rs(t, LatticeChoice::Coroot);
            for i in 0..=rs.rank() {
                assert!(AffineWeylElement::simple(&rs, i).pow(2).is_identity());
                for j in 0..=rs.rank() {
                    assert_eq!(coxeter_order(&rs, i, j), coxeter_exponent_from_roots(&rs, i, j), "{t} {i} {j}");
                }
            }
        }
        let rs1 = rs(CartanType::A(1), LatticeChoice::Coroot);
        assert_eq!(coxeter_order(&rs1, 0, 1), None);
    }

    #[test]
    fn omega_normalizes_simple_reflections() {
        for t in types() {
            let rs = rs(t, LatticeChoice::Coweight);
            for om in omega_generators(&rs) {
                let perm = omega_permutation(&rs, &om).unwrap();
                for i in 0..=rs.rank() {
                    let lhs = om.mul(&AffineWeylElement::simple(&rs, i)).mul(&om.inverse());
                    assert_eq!(lhs, AffineWeylElement::simple(&rs, perm[i]));
                }
            }
        }
    }

    #[test]
    fn central_translations_are_omega() {
        let rs = rs(CartanType::A(1), LatticeChoice::Basis(vec![vec![qi(1), qi(0)], vec![qi(0), qi(1)]]));
        let t = AffineWeylElement::translation(&[qi(1), qi(1)]);
        assert_eq!(t.length(&rs), 0);
        assert_eq!(omega_permutation(&rs, &t).unwrap(), vec![0, 1]);
    }

    #[test]
    fn chamber_location() {
        let rs = rs(CartanType::A(2), LatticeChoice::Coroot);
        // small positive combination in the fundamental alcove
        let x = HatVector::<C64>::new(vec![C64::new(0.2, 0.0), C64::new(0.05, 0.0), C64::new(-0.25, 0.0)], C64::new(0.0, 0.0), C64::new(1.0, 0.0));
        assert!(locate_chamber(&rs, &x, WALL_TOL).unwrap().is_identity());
        let s0 = AffineWeylElement::simple(&rs, 0);
        assert_eq!(locate_chamber(&rs, &s0.act(&x), WALL_TOL).unwrap(), s0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let asr = rs.affine_simple_roots();
        for _ in 0..1000 {
            let fin: Vec<C64> = (0..3).map(|_| C64::new(rng.gen_range(-4.0..4.0), 0.0)).collect();
            let x = HatVector::new(fin, C64::new(rng.gen_range(-1.0..1.0), 0.0), C64::new(rng.gen_range(0.3..2.0), 0.0));
            let w = locate_chamber(&rs, &x, WALL_TOL).unwrap();
            let y = w.inverse().act(&x);
            assert!(asr.iter().all(|a| rs.pair_affine(*a, &y).re > 0.0));
            // equivariance under left multiplication, projected to Ŵ
            let g = random_element(&rs, &mut rng, 4);
            let wg = locate_chamber(&rs, &g.act(&x), WALL_TOL).unwrap();
            assert_eq!(wg, g.mul(&w).chamber_part(&rs));
        }
        let wall = HatVector::<C64>::new(vec![C64::new(0.3, 0.0), C64::new(0.3, 0.0), C64::new(-0.6, 0.0)], C64::new(0.0, 0.0), C64::new(1.0, 0.0));
        assert!(matches!(locate_chamber(&rs, &wall, WALL_TOL), Err(Error::OnWall(..))));
        let neg = HatVector::<C64>::new(vec![C64::new(0.3, 0.0); 3], C64::new(0.0, 0.0), C64::new(-1.0, 0.0));
        assert!(matches!(locate_chamber(&rs, &neg, WALL_TOL), Err(Error::NotPositiveLevel(_))));
    }
}
