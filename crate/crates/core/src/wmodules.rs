//! Finite dimensional unitarizable representations of `Ŵ^Y`.

use std::collections::{HashMap, VecDeque};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::affine_weyl::{coxeter_order, omega_generators, omega_permutation, random_element, AffineWeylElement};
use crate::error::{Error, Result};
use crate::matrix::{dot, Mat};
use crate::root_system::RootSystem;
use crate::scalar::{q_to_string, Cq, Scalar};

#[derive(Clone, Debug, PartialEq)]
pub enum RepKind {
    Trivial,
    /// The sign character `w ↦ (-1)^{l(w)}`.
    Steinberg,
    /// Pulled back along `Ŵ^Y → W`; holds the matrices of `s_1..s_n`.
    Pullback(Vec<Mat<Cq>>),
    /// User supplied generator matrices.
    Explicit,
}

#[derive(Clone, Debug)]
pub struct ModuleRep {
    pub kind: RepKind,
    pub name: String,
    pub dim: usize,
    /// Matrices of `s_0, …, s_n`.
    pub simple: Vec<Mat<Cq>>,
    pub omega_gens: Vec<AffineWeylElement>,
    pub omega_mats: Vec<Mat<Cq>>,
    /// Hermitian form for which the generators are unitary.
    pub gram: Mat<Cq>,
    omega_table: HashMap<AffineWeylElement, Mat<Cq>>,
}

/// Depth of the breadth-first enumeration of `Ω` used for explicit modules.
const OMEGA_SEARCH_DEPTH: usize = 8;

impl ModuleRep {
    pub fn trivial(rs: &RootSystem) -> Self {
        let one = Mat::identity(1);
        let og = omega_generators(rs);
        Self {
            kind: RepKind::Trivial,
            name: "trivial".into(),
            dim: 1,
            simple: vec![one.clone(); rs.rank() + 1],
            omega_mats: vec![one.clone(); og.len()],
            omega_gens: og,
            gram: one,
            omega_table: HashMap::new(),
        }
    }

    pub fn steinberg(rs: &RootSystem) -> Self {
        let m1 = Mat::scalar(1, -<Cq as Scalar>::one());
        let og = omega_generators(rs);
        Self {
            kind: RepKind::Steinberg,
            name: "steinberg".into(),
            dim: 1,
            simple: vec![m1; rs.rank() + 1],
            omega_mats: vec![Mat::identity(1); og.len()],
            omega_gens: og,
            gram: Mat::identity(1),
            omega_table: HashMap::new(),
        }
    }

    /// Pullback of a `W`-module given by the matrices of `s_1..s_n`, unitary for `gram`.
    pub fn pullback(rs: &RootSystem, finite: Vec<Mat<Cq>>, gram: Mat<Cq>, name: &str) -> Result<Self> {
        if finite.len() != rs.rank() {
            return Err(Error::Dimension(format!("expected {} finite generators", rs.rank())));
        }
        let dim = gram.dim();
        if finite.iter().any(|m| m.dim() != dim) {
            return Err(Error::Dimension("generator sizes differ from the form".into()));
        }
        for (i, m) in finite.iter().enumerate() {
            if !m.mul(m).is_identity() {
                return Err(Error::RelationFailure(format!("s_{}^2 != 1", i + 1)));
            }
            for (j, mj) in finite.iter().enumerate().skip(i + 1) {
                let e = coxeter_order(rs, i + 1, j + 1).expect("finite Coxeter exponent");
                if !m.mul(mj).pow(e as u32).is_identity() {
                    return Err(Error::RelationFailure(format!("(s_{} s_{})^{e} != 1", i + 1, j + 1)));
                }
            }
        }
        let og = omega_generators(rs);
        let word_mat = |u: &[Vec<crate::scalar::Q>]| -> Mat<Cq> {
            rs.finite_reduced_word(u).iter().fold(Mat::identity(dim), |acc, &i| acc.mul(&finite[i - 1]))
        };
        let mut simple = vec![word_mat(&rs.reflection_matrix(rs.highest))];
        simple.extend(finite.iter().cloned());
        let omega_mats = og.iter().map(|o| word_mat(&o.u)).collect();
        Ok(Self {
            kind: RepKind::Pullback(finite),
            name: name.into(),
            dim,
            simple,
            omega_gens: og,
            omega_mats,
            gram,
            omega_table: HashMap::new(),
        })
    }

    /// Reflection representation of `W` in the basis of simple roots, with the
    /// form given by the Gram matrix of the simple roots.
    pub fn reflection(rs: &RootSystem) -> Result<Self> {
        let n = rs.rank();
        let mats = (0..n)
            .map(|i| {
                let ai = &rs.simple[i];
                let rows = (0..n)
                    .map(|r| {
                        (0..n)
                            .map(|c| {
                                // s_i(α_c) = α_c - (α_c, α_i^∨) α_i
                                let aj = &rs.simple[c];
                                let coef = dot(aj, ai) * crate::scalar::qi(2) / dot(ai, ai);
                                let id = if r == c { crate::scalar::qi(1) } else { crate::scalar::qi(0) };
                                if r == i {
                                    id - coef
                                } else {
                                    id
                                }
                            })
                            .collect()
                    })
                    .collect::<Vec<_>>();
                Mat::from_q_rows(&rows)
            })
            .collect();
        let gram: Vec<Vec<_>> = rs.simple.iter().map(|a| rs.simple.iter().map(|b| dot(a, b)).collect()).collect();
        Self::pullback(rs, mats, Mat::from_q_rows(&gram), "reflection")
    }

    /// The ambient orthogonal representation of `W` (e.g. the permutation representation for `A_r`).
    pub fn ambient(rs: &RootSystem) -> Result<Self> {
        let mats = (1..=rs.rank()).map(|i| Mat::from_q_rows(&rs.reflection_matrix(rs.simple_index(i)))).collect();
        Self::pullback(rs, mats, Mat::identity(rs.dim), "ambient")
    }

    /// Sign character of `W`, pulled back.
    pub fn sign_pullback(rs: &RootSystem) -> Result<Self> {
        let m = Mat::scalar(1, -<Cq as Scalar>::one());
        Self::pullback(rs, vec![m; rs.rank()], Mat::identity(1), "sign")
    }

    /// A two dimensional pullback module, used as the standard nontrivial test module.
    pub fn two_dim(rs: &RootSystem) -> Result<Self> {
        if rs.rank() == 2 {
            Self::reflection(rs)
        } else if rs.dim == 2 {
            Self::ambient(rs)
        } else {
            Err(Error::Dimension(format!("no two dimensional test module for {}", rs.cartan)))
        }
    }

    /// Arbitrary matrices for `s_0..s_n` and the `Ω` generators of `rs`.
    pub fn explicit(rs: &RootSystem, simple: Vec<Mat<Cq>>, omega_mats: Vec<Mat<Cq>>, gram: Mat<Cq>) -> Result<Self> {
        let og = omega_generators(rs);
        if simple.len() != rs.rank() + 1 || omega_mats.len() != og.len() {
            return Err(Error::Dimension(format!(
                "need {} reflection and {} Ω matrices",
                rs.rank() + 1,
                og.len()
            )));
        }
        let dim = gram.dim();
        let mut rep = Self {
            kind: RepKind::Explicit,
            name: "explicit".into(),
            dim,
            simple,
            omega_gens: og,
            omega_mats,
            gram,
            omega_table: HashMap::new(),
        };
        rep.build_omega_table(rs)?;
        check_relations(rs, &rep)?;
        Ok(rep)
    }

    fn build_omega_table(&mut self, rs: &RootSystem) -> Result<()> {
        let id = AffineWeylElement::identity(rs.dim);
        let mut table = HashMap::from([(id.clone(), Mat::identity(self.dim))]);
        let mut gens = vec![];
        for (o, m) in self.omega_gens.iter().zip(&self.omega_mats) {
            gens.push((o.clone(), m.clone()));
            gens.push((o.inverse(), m.inverse()?));
        }
        let mut queue = VecDeque::from([(id, Mat::identity(self.dim), 0usize)]);
        while let Some((w, m, depth)) = queue.pop_front() {
            if depth == OMEGA_SEARCH_DEPTH {
                continue;
            }
            for (g, gm) in &gens {
                let wg = w.mul(g);
                let mg = m.mul(gm);
                match table.get(&wg) {
                    Some(prev) if *prev != mg => {
                        return Err(Error::RelationFailure(format!("Ω matrices inconsistent at {wg:?}")))
                    }
                    Some(_) => {}
                    None => {
                        table.insert(wg.clone(), mg.clone());
                        queue.push_back((wg, mg, depth + 1));
                    }
                }
            }
        }
        let _ = rs;
        self.omega_table = table;
        Ok(())
    }

    /// `π(ω)` for `ω ∈ Ω`.
    fn pi_omega(&self, rs: &RootSystem, omega: &AffineWeylElement) -> Mat<Cq> {
        match &self.kind {
            RepKind::Trivial | RepKind::Steinberg => Mat::identity(1),
            RepKind::Pullback(finite) => {
                rs.finite_reduced_word(&omega.u).iter().fold(Mat::identity(self.dim), |acc, &i| acc.mul(&finite[i - 1]))
            }
            RepKind::Explicit => self
                .omega_table
                .get(omega)
                .cloned()
                .unwrap_or_else(|| panic!("Ω element {omega:?} outside the enumerated range")),
        }
    }

    /// `π(w)` through `w = ω s_{i_1} ⋯ s_{i_l}`.
    pub fn pi(&self, rs: &RootSystem, w: &AffineWeylElement) -> Mat<Cq> {
        match &self.kind {
            RepKind::Trivial => Mat::identity(1),
            RepKind::Steinberg => {
                let s = if w.length(rs) % 2 == 0 { 1 } else { -1 };
                Mat::scalar(1, Cq::from_i64(s))
            }
            RepKind::Pullback(finite) => {
                let tab = rs.weyl_table();
                tab.words[rs.weyl_index(&w.u)].iter().fold(Mat::identity(self.dim), |acc, &i| acc.mul(&finite[i - 1]))
            }
            RepKind::Explicit => {
                let (omega, word) = w.reduced_word(rs);
                word.iter().fold(self.pi_omega(rs, &omega), |acc, &i| acc.mul(&self.simple[i]))
            }
        }
    }

    pub fn pi_f<F: Scalar>(&self, rs: &RootSystem, w: &AffineWeylElement) -> Mat<F> {
        self.pi(rs, w).map(F::from_cq)
    }

    pub fn simple_f<F: Scalar>(&self, i: usize) -> Mat<F> {
        self.simple[i].map(F::from_cq)
    }

    pub fn is_translation_trivial(&self) -> bool {
        matches!(self.kind, RepKind::Trivial | RepKind::Pullback(_))
    }

    pub fn to_json(&self) -> Value {
        let mat = |m: &Mat<Cq>| -> Value {
            Value::Array(m.rows().iter().map(|r| Value::Array(r.iter().map(|x| x.to_json()).collect())).collect())
        };
        json!({
            "name": self.name,
            "dim": self.dim,
            "simple": self.simple.iter().map(mat).collect::<Vec<_>>(),
            "omega": self.omega_mats.iter().map(mat).collect::<Vec<_>>(),
            "omega_translations": self.omega_gens.iter()
                .map(|o| o.y.iter().map(q_to_string).collect::<Vec<_>>()).collect::<Vec<_>>(),
            "gram": mat(&self.gram),
        })
    }

    /// Reads a document produced by [`ModuleRep::to_json`] as an explicit module.
    pub fn from_json(rs: &RootSystem, v: &Value) -> Result<Self> {
        let mat = |x: &Value| -> Result<Mat<Cq>> {
            let rows = x.as_array().ok_or_else(|| Error::Parse("matrix must be an array of rows".into()))?;
            let rows = rows
                .iter()
                .map(|r| {
                    r.as_array()
                        .ok_or_else(|| Error::Parse("matrix row must be an array".into()))?
                        .iter()
                        .map(Cq::from_json)
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            Mat::from_rows(rows)
        };
        let list = |key: &str| -> Result<Vec<Mat<Cq>>> {
            v.get(key)
                .and_then(Value::as_array)
                .map(|a| a.iter().map(mat).collect())
                .unwrap_or_else(|| Ok(vec![]))
        };
        let simple = list("simple")?;
        let omega = list("omega")?;
        let dim = simple.first().map_or(1, |m| m.dim());
        let gram = match v.get("gram") {
            Some(g) => mat(g)?,
            None => Mat::identity(dim),
        };
        let mut rep = Self::explicit(rs, simple, omega, gram)?;
        if let Some(n) = v.get("name").and_then(Value::as_str) {
            rep.name = n.to_string();
        }
        Ok(rep)
    }
}

/// True iff `(Y, P) ⊆ Z`; then `l(t_y)` is even for all `y ∈ Y`.
pub fn check_steinberg_parity(rs: &RootSystem) -> bool {
    let ok = rs.y_pairs_integrally_with_weights();
    if ok {
        debug_assert!(rs.y_basis.iter().all(|y| AffineWeylElement::translation(y).length(rs) % 2 == 0));
    }
    ok
}

/// Affine Coxeter relations, `Ω`-normalization, unitarity, and the
/// homomorphism property on a seeded sample of products.
pub fn check_relations(rs: &RootSystem, rep: &ModuleRep) -> Result<()> {
    let fail = |m: String| Err(Error::RelationFailure(m));
    let n = rs.rank();
    for i in 0..=n {
        let si = &rep.simple[i];
        if !si.mul(si).is_identity() {
            return fail(format!("π(s_{i})^2 != 1"));
        }
        for j in i + 1..=n {
            if let Some(e) = coxeter_order(rs, i, j) {
                if !si.mul(&rep.simple[j]).pow(e as u32).is_identity() {
                    return fail(format!("(π(s_{i})π(s_{j}))^{e} != 1"));
                }
            }
        }
    }
    for (o, m) in rep.omega_gens.iter().zip(&rep.omega_mats) {
        let perm = omega_permutation(rs, o)?;
        let minv = m.inverse()?;
        for i in 0..=n {
            if m.mul(&rep.simple[i]).mul(&minv) != rep.simple[perm[i]] {
                return fail(format!("π(ω) π(s_{i}) π(ω)^-1 != π(s_{})", perm[i]));
            }
        }
    }
    let unitary = |m: &Mat<Cq>| m.adjoint().mul(&rep.gram).mul(m) == rep.gram;
    if !rep.simple.iter().chain(&rep.omega_mats).all(unitary) {
        return fail("generators are not unitary for the given form".into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..24 {
        let a = random_element(rs, &mut rng, 5);
        let b = random_element(rs, &mut rng, 5);
        if rep.pi(rs, &a.mul(&b)) != rep.pi(rs, &a).mul(&rep.pi(rs, &b)) {
            return fail(format!("π is not multiplicative at {a:?}, {b:?}"));
        }
    }
    for (i, si) in rep.simple.iter().enumerate() {
        if rep.pi(rs, &AffineWeylElement::simple(rs, i)) != *si {
            return fail(format!("π(s_{i}) disagrees with its generator"));
        }
    }
    Ok(())
}
