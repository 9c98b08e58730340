//! Rational realizations of finite root systems, their affine extensions and
//! the lattices `Q^∨ ⊆ Y`, `X = Y^*`.
//!
//! All realizations use the Euclidean form on the ambient space rather than
//! the Killing normalization; rescaling the form by `t`
//! rescales `k` and the spectral parameter jointly (`(a^∨, λ̂)` is scale
//! invariant when `λ̂` is rescaled by `t` as a vector and `k` is left alone),
//! so every identity checked here is independent of that choice.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::hat::HatVector;
use crate::matrix::{coords_in_basis, dot, qmat_apply, qmat_identity, qmat_inverse, qmat_mul, vneg, vscale};
use crate::scalar::{q, q_to_i64, q_to_string, qi, Q, Scalar};

/// Supported Cartan types.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CartanType {
    /// `A_r` realized in `R^{r+1}` (`r ≤ 4`).
    A(usize),
    B2,
    C2,
    G2,
    /// `A_1` realized in `R^1` with `α = 1` (so `h = h_s`, three dimensional `V̂`).
    Sl2,
}

impl FromStr for CartanType {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_uppercase();
        match t.as_str() {
            "B2" => Ok(Self::B2),
            "C2" => Ok(Self::C2),
            "G2" => Ok(Self::G2),
            "SL2" => Ok(Self::Sl2),
            _ => {
                if let Some(r) = t.strip_prefix('A').and_then(|r| r.parse::<usize>().ok()) {
                    if (1..=4).contains(&r) {
                        return Ok(Self::A(r));
                    }
                }
                Err(Error::UnsupportedType(s.to_string()))
            }
        }
    }
}

impl fmt::Display for CartanType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::A(r) => write!(f, "A{r}"),
            Self::B2 => write!(f, "B2"),
            Self::C2 => write!(f, "C2"),
            Self::G2 => write!(f, "G2"),
            Self::Sl2 => write!(f, "sl2"),
        }
    }
}

/// Choice of the lattice `Y` with `Q^∨ ⊆ Y` and `(Y, Q) ⊆ Z`.
#[derive(Clone, Debug, PartialEq)]
pub enum LatticeChoice {
    Coroot,
    Coweight,
    Basis(Vec<Vec<Q>>),
}

/// An affine root `α + m c`; `root` indexes [`RootSystem::roots`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AffineRoot {
    pub root: usize,
    pub level: i64,
}

#[derive(Clone, Debug)]
pub struct RootSystem {
    pub cartan: CartanType,
    pub dim: usize,
    pub simple: Vec<Vec<Q>>,
    /// Positive roots (by height, then lexicographically) followed by their negatives.
    pub roots: Vec<Vec<Q>>,
    pub n_pos: usize,
    /// Coordinates of each root in the basis of simple roots.
    pub simple_coords: Vec<Vec<i64>>,
    /// `(α, α)` per root.
    pub norms: Vec<Q>,
    pub coroots: Vec<Vec<Q>>,
    /// Index of the highest root `θ`.
    pub highest: usize,
    pub rho: Vec<Q>,
    pub fundamental_weights: Vec<Vec<Q>>,
    pub fundamental_coweights: Vec<Vec<Q>>,
    pub y_basis: Vec<Vec<Q>>,
    pub x_basis: Vec<Vec<Q>>,
    index: HashMap<Vec<Q>, usize>,
    weyl_table: OnceLock<Arc<WeylTable>>,
}

/// The finite Weyl group as root permutations, with the affine simple
/// reflections' permutations and pairings, for integer descent walks.
#[derive(Debug)]
pub struct WeylTable {
    pub mats: Vec<Vec<Vec<Q>>>,
    pub by_perm: HashMap<Vec<usize>, usize>,
    pub by_mat: HashMap<Vec<Vec<Q>>, usize>,
    pub perms: Vec<Vec<usize>>,
    /// Finite reduced words (1-based), as from [`RootSystem::finite_reduced_word`].
    pub words: Vec<Vec<usize>>,
    /// Integer root coordinates when every root is integral.
    int_roots: Option<Vec<Vec<i64>>>,
    /// `simple_perm[i][r]` indexes `u_i α_r` for `s_i = t_{y_i} u_i`.
    pub simple_perm: Vec<Vec<usize>>,
    /// `simple_pair[i][r] = (y_i, α_r)`.
    pub simple_pair: Vec<Vec<i64>>,
}

fn qv(xs: &[i64]) -> Vec<Q> {
    xs.iter().map(|&x| qi(x)).collect()
}

fn reflect(v: &[Q], a: &[Q]) -> Vec<Q> {
    let coef = dot(v, a) * qi(2) / dot(a, a);
    v.iter().zip(a).map(|(x, y)| x - &coef * y).collect()
}

impl RootSystem {
    pub fn new(cartan: CartanType, lattice: LatticeChoice) -> Result<Self> {
        let (dim, simple) = match cartan {
            CartanType::A(r) => {
                if !(1..=4).contains(&r) {
                    return Err(Error::UnsupportedType(format!("A{r}")));
                }
                let n = r + 1;
                let simple = (0..r)
                    .map(|i| {
                        let mut v = vec![0i64; n];
                        v[i] = 1;
                        v[i + 1] = -1;
                        qv(&v)
                    })
                    .collect();
                (n, simple)
            }
            CartanType::B2 => (2, vec![qv(&[1, -1]), qv(&[0, 1])]),
            CartanType::C2 => (2, vec![qv(&[1, -1]), qv(&[0, 2])]),
            CartanType::G2 => (3, vec![qv(&[1, -1, 0]), qv(&[-2, 1, 1])]),
            CartanType::Sl2 => (1, vec![qv(&[1])]),
        };

        // closure of the simple roots under simple reflections
        let mut seen: HashSet<Vec<Q>> = simple.iter().cloned().collect();
        let mut queue: VecDeque<Vec<Q>> = simple.iter().cloned().collect();
        while let Some(r) = queue.pop_front() {
            for a in &simple {
                let s = reflect(&r, a);
                if seen.insert(s.clone()) {
                    queue.push_back(s);
                }
            }
        }
        let coords_of = |v: &[Q]| -> Vec<i64> {
            coords_in_basis(&simple, v)
                .expect("root in span of simple roots")
                .iter()
                .map(|c| q_to_i64(c).expect("integral root coordinates"))
                .collect()
        };
        let mut pos: Vec<(Vec<i64>, Vec<Q>)> = seen
            .into_iter()
            .map(|r| (coords_of(&r), r))
            .filter(|(c, _)| c.iter().all(|&x| x >= 0))
            .collect();
        pos.sort_by(|(ca, ra), (cb, rb)| {
            let ha: i64 = ca.iter().sum();
            let hb: i64 = cb.iter().sum();
            ha.cmp(&hb).then_with(|| cb.cmp(ca)).then_with(|| ra.cmp(rb))
        });
        let n_pos = pos.len();
        let mut roots: Vec<Vec<Q>> = pos.iter().map(|(_, r)| r.clone()).collect();
        let mut simple_coords: Vec<Vec<i64>> = pos.iter().map(|(c, _)| c.clone()).collect();
        for i in 0..n_pos {
            roots.push(vneg(&roots[i]));
            simple_coords.push(simple_coords[i].iter().map(|x| -x).collect());
        }
        let norms: Vec<Q> = roots.iter().map(|r| dot(r, r)).collect();
        let coroots: Vec<Vec<Q>> = roots.iter().zip(&norms).map(|(r, n)| vscale(r, &(qi(2) / n))).collect();
        let highest = n_pos - 1;
        let mut rho = vec![Q::zero(); dim];
        for r in &roots[..n_pos] {
            for (x, y) in rho.iter_mut().zip(r) {
                *x += y / qi(2);
            }
        }
        let index = roots.iter().enumerate().map(|(i, r)| (r.clone(), i)).collect();

        let s_gram: Vec<Vec<Q>> = simple.iter().map(|a| simple.iter().map(|b| dot(a, b)).collect()).collect();
        let s_inv = qmat_inverse(&s_gram).expect("simple roots are independent");
        let fundamental_coweights: Vec<Vec<Q>> = (0..simple.len())
            .map(|i| {
                let mut v = vec![Q::zero(); dim];
                for (j, a) in simple.iter().enumerate() {
                    for (x, y) in v.iter_mut().zip(a) {
                        *x += &s_inv[i][j] * y;
                    }
                }
                v
            })
            .collect();
        let fundamental_weights: Vec<Vec<Q>> = fundamental_coweights
            .iter()
            .zip(&simple)
            .map(|(w, a)| vscale(w, &(dot(a, a) / qi(2))))
            .collect();

        let mut rs = Self {
            cartan,
            dim,
            simple,
            roots,
            n_pos,
            simple_coords,
            norms,
            coroots,
            highest,
            rho,
            fundamental_weights,
            fundamental_coweights,
            y_basis: vec![],
            x_basis: vec![],
            index,
            weyl_table: OnceLock::new(),
        };
        let y_basis = match lattice {
            LatticeChoice::Coroot => rs.simple_coroots(),
            LatticeChoice::Coweight => rs.fundamental_coweights.clone(),
            LatticeChoice::Basis(b) => b,
        };
        rs.set_lattice(y_basis)?;
        Ok(rs)
    }

    fn set_lattice(&mut self, y_basis: Vec<Vec<Q>>) -> Result<()> {
        if y_basis.is_empty() || y_basis.iter().any(|y| y.len() != self.dim) {
            return Err(Error::InvalidLattice("Y basis vectors must live in the ambient space".into()));
        }
        let gram: Vec<Vec<Q>> = y_basis.iter().map(|a| y_basis.iter().map(|b| dot(a, b)).collect()).collect();
        let ginv = qmat_inverse(&gram).ok_or_else(|| Error::InvalidLattice("Y basis is linearly dependent".into()))?;
        for (j, y) in y_basis.iter().enumerate() {
            for (i, a) in self.simple.iter().enumerate() {
                let p = dot(y, a);
                if !p.is_integer() {
                    return Err(Error::InvalidLattice(format!(
                        "(y_{j}, a_{}) = {} is not an integer",
                        i + 1,
                        q_to_string(&p)
                    )));
                }
            }
        }
        self.y_basis = y_basis;
        for (i, cr) in self.simple_coroots().iter().enumerate() {
            if self.y_coords(cr).is_none() {
                return Err(Error::InvalidLattice(format!("simple coroot {} is not in Y", i + 1)));
            }
        }
        self.x_basis = (0..self.y_basis.len())
            .map(|i| {
                let mut v = vec![Q::zero(); self.dim];
                for (j, y) in self.y_basis.iter().enumerate() {
                    for (x, yy) in v.iter_mut().zip(y) {
                        *x += &ginv[i][j] * yy;
                    }
                }
                v
            })
            .collect();
        Ok(())
    }

    pub fn rank(&self) -> usize {
        self.simple.len()
    }

    pub fn num_roots(&self) -> usize {
        self.roots.len()
    }

    pub fn is_positive(&self, i: usize) -> bool {
        i < self.n_pos
    }

    pub fn neg(&self, i: usize) -> usize {
        if i < self.n_pos {
            i + self.n_pos
        } else {
            i - self.n_pos
        }
    }

    pub fn index_of(&self, v: &[Q]) -> Option<usize> {
        self.index.get(v).copied()
    }

    /// Index of the `i`-th simple root (`i` is 1-based as in `s_1, …, s_n`).
    pub fn simple_index(&self, i: usize) -> usize {
        self.index_of(&self.simple[i - 1]).expect("simple root present")
    }

    pub fn simple_coroots(&self) -> Vec<Vec<Q>> {
        self.simple.iter().map(|a| vscale(a, &(qi(2) / dot(a, a)))).collect()
    }

    pub fn theta(&self) -> &[Q] {
        &self.roots[self.highest]
    }

    /// Integer coordinates of `y` in the `Y` basis, if `y ∈ Y`.
    pub fn y_coords(&self, y: &[Q]) -> Option<Vec<i64>> {
        coords_in_basis(&self.y_basis, y)?.iter().map(q_to_i64).collect()
    }

    pub fn y_from_coords(&self, n: &[i64]) -> Vec<Q> {
        let mut v = vec![Q::zero(); self.dim];
        for (c, y) in n.iter().zip(&self.y_basis) {
            for (x, yy) in v.iter_mut().zip(y) {
                *x += qi(*c) * yy;
            }
        }
        v
    }

    pub fn y_gram(&self) -> Vec<Vec<Q>> {
        self.y_basis.iter().map(|a| self.y_basis.iter().map(|b| dot(a, b)).collect()).collect()
    }

    /// `(y, α)` for `y ∈ Y`, an integer.
    pub fn int_pairing(&self, y: &[Q], root: usize) -> i64 {
        q_to_i64(&dot(y, &self.roots[root])).expect("(Y, R) is integral")
    }

    /// `[(y, α_r)]` over all roots, in machine integers when the roots are integral.
    pub fn int_pairings(&self, y: &[Q]) -> Vec<i64> {
        let tab = self.weyl_table();
        let small: Option<Vec<(i64, i64)>> =
            y.iter().map(|x| Some((num_traits::ToPrimitive::to_i64(x.numer())?, num_traits::ToPrimitive::to_i64(x.denom())?))).collect();
        match (&tab.int_roots, small) {
            (Some(roots), Some(y)) => {
                let den = y.iter().fold(1i64, |acc, &(_, d)| acc.lcm(&d));
                let scaled: Vec<i64> = y.iter().map(|&(n, d)| n * (den / d)).collect();
                roots
                    .iter()
                    .map(|r| {
                        let s: i64 = scaled.iter().zip(r).map(|(a, b)| a * b).sum();
                        assert!(s % den == 0, "(Y, R) is integral");
                        s / den
                    })
                    .collect()
            }
            _ => (0..self.num_roots()).map(|r| self.int_pairing(y, r)).collect(),
        }
    }

    /// Index of a finite Weyl group matrix in [`RootSystem::weyl_table`].
    pub fn weyl_index(&self, u: &[Vec<Q>]) -> usize {
        *self.weyl_table().by_mat.get(u).expect("finite part lies in W")
    }

    pub fn reflection_matrix(&self, root: usize) -> Vec<Vec<Q>> {
        let a = &self.roots[root];
        let aa = &self.norms[root];
        (0..self.dim)
            .map(|i| {
                (0..self.dim)
                    .map(|j| {
                        let id = if i == j { Q::one() } else { Q::zero() };
                        id - qi(2) * &a[i] * &a[j] / aa
                    })
                    .collect()
            })
            .collect()
    }

    /// Images of all roots under a finite Weyl group matrix.
    pub fn act_on_root(&self, u: &[Vec<Q>], root: usize) -> usize {
        self.index_of(&qmat_apply(u, &self.roots[root])).expect("Weyl group permutes R")
    }

    /// Reduced word `[i_1, …, i_l]` (1-based) with `u = s_{i_1} ⋯ s_{i_l}`.
    pub fn finite_reduced_word(&self, u: &[Vec<Q>]) -> Vec<usize> {
        let mut u = u.to_vec();
        let mut rev = vec![];
        loop {
            let desc = (1..=self.rank()).find(|&i| !self.is_positive(self.act_on_root(&u, self.simple_index(i))));
            match desc {
                Some(i) => {
                    u = qmat_mul(&u, &self.reflection_matrix(self.simple_index(i)));
                    rev.push(i);
                }
                None => break,
            }
        }
        rev.reverse();
        rev
    }

    /// All elements of the finite Weyl group as matrices, in BFS order from the identity.
    pub fn weyl_group(&self) -> Vec<Vec<Vec<Q>>> {
        let gens: Vec<_> = (1..=self.rank()).map(|i| self.reflection_matrix(self.simple_index(i))).collect();
        let id = qmat_identity(self.dim);
        let mut seen: HashSet<Vec<Vec<Q>>> = HashSet::from([id.clone()]);
        let mut out = vec![id.clone()];
        let mut queue = VecDeque::from([id]);
        while let Some(u) = queue.pop_front() {
            for g in &gens {
                let v = qmat_mul(&u, g);
                if seen.insert(v.clone()) {
                    out.push(v.clone());
                    queue.push_back(v);
                }
            }
        }
        out
    }

    pub fn weyl_table(&self) -> Arc<WeylTable> {
        self.weyl_table
            .get_or_init(|| {
                let perm = |u: &[Vec<Q>]| (0..self.num_roots()).map(|r| self.act_on_root(u, r)).collect::<Vec<_>>();
                let mats = self.weyl_group();
                let perms: Vec<Vec<usize>> = mats.iter().map(|u| perm(u)).collect();
                let by_perm = perms.iter().enumerate().map(|(i, p)| (p.clone(), i)).collect();
                let by_mat = mats.iter().enumerate().map(|(i, u)| (u.clone(), i)).collect();
                let words = mats.iter().map(|u| self.finite_reduced_word(u)).collect();
                let int_roots = self.roots.iter().map(|r| r.iter().map(q_to_i64).collect::<Option<Vec<_>>>()).collect();
                let mut simple_perm = vec![perm(&self.reflection_matrix(self.highest))];
                let mut simple_pair = vec![(0..self.num_roots()).map(|r| self.int_pairing(&self.coroots[self.highest], r)).collect()];
                for i in 1..=self.rank() {
                    simple_perm.push(perm(&self.reflection_matrix(self.simple_index(i))));
                    simple_pair.push(vec![0; self.num_roots()]);
                }
                Arc::new(WeylTable { mats, by_perm, by_mat, perms, words, int_roots, simple_perm, simple_pair })
            })
            .clone()
    }

    /// Affine simple roots `[a_0, a_1, …, a_n]` with `a_0 = -θ + c`.
    pub fn affine_simple_roots(&self) -> Vec<AffineRoot> {
        let mut out = vec![AffineRoot { root: self.neg(self.highest), level: 1 }];
        out.extend((1..=self.rank()).map(|i| AffineRoot { root: self.simple_index(i), level: 0 }));
        out
    }

    pub fn is_affine_positive(&self, a: AffineRoot) -> bool {
        a.level > 0 || (a.level == 0 && self.is_positive(a.root))
    }

    pub fn affine_root_vector<F: Scalar>(&self, a: AffineRoot) -> HatVector<F> {
        HatVector::from_q(&self.roots[a.root], &qi(a.level), &Q::zero())
    }

    /// `a^∨ = α^∨ + (2m/(α,α)) c`.
    pub fn affine_coroot_vector<F: Scalar>(&self, a: AffineRoot) -> HatVector<F> {
        let lev = qi(2 * a.level) / &self.norms[a.root];
        HatVector::from_q(&self.coroots[a.root], &lev, &Q::zero())
    }

    /// `(a, x)` for an affine root and a point of the extended space.
    pub fn pair_affine<F: Scalar>(&self, a: AffineRoot, x: &HatVector<F>) -> F {
        let fin = self.roots[a.root].iter().zip(&x.fin).fold(F::zero(), |acc, (r, v)| acc + F::from_q(r) * v.clone());
        fin + F::from_i64(a.level) * x.d.clone()
    }

    /// `(a^∨, x)`.
    pub fn pair_coroot<F: Scalar>(&self, a: AffineRoot, x: &HatVector<F>) -> F {
        let fin =
            self.coroots[a.root].iter().zip(&x.fin).fold(F::zero(), |acc, (r, v)| acc + F::from_q(r) * v.clone());
        fin + F::from_q(&(qi(2 * a.level) / &self.norms[a.root])) * x.d.clone()
    }

    /// Decomposition of an affine root over the affine simple roots, if it is a
    /// nonnegative or nonpositive integer combination.
    pub fn affine_simple_coords(&self, a: AffineRoot) -> Vec<i64> {
        // α + m c = m a_0 + (α + m θ): coefficients of a_0 is m
        let mut out = vec![a.level];
        let th = &self.simple_coords[self.highest];
        let al = &self.simple_coords[a.root];
        out.extend(al.iter().zip(th).map(|(x, t)| x + a.level * t));
        out
    }

    /// Integrality `(Y, P) ⊆ Z` against the fundamental weights.
    pub fn y_pairs_integrally_with_weights(&self) -> bool {
        self.y_basis.iter().all(|y| self.fundamental_weights.iter().all(|w| dot(y, w).is_integer()))
    }

    pub fn to_json(&self) -> Value {
        let vecs = |vs: &[Vec<Q>]| -> Value {
            Value::Array(vs.iter().map(|v| Value::Array(v.iter().map(|x| Value::String(q_to_string(x))).collect())).collect())
        };
        let gram: Vec<Vec<Q>> = qmat_identity(self.dim);
        json!({
            "type": self.cartan.to_string(),
            "ambient_dim": self.dim,
            "simple_roots": vecs(&self.simple),
            "positive_roots": vecs(&self.roots[..self.n_pos]),
            "highest_root": vecs(std::slice::from_ref(&self.roots[self.highest]))[0],
            "gram": vecs(&gram),
            "coroot_lattice_basis": vecs(&self.simple_coroots()),
            "y_basis": vecs(&self.y_basis),
            "x_basis": vecs(&self.x_basis),
            "rho": vecs(std::slice::from_ref(&self.rho))[0],
        })
    }
}

// --- orbits of the extended affine Weyl group on affine roots ----------------------------

/// Partition of the affine roots into `Ŵ^Y`-orbits.
///
/// Orbits are `{(β, m) : β ∈ Wα, m ≡ m_0 mod p}` with one period `p` per
/// `W`-orbit of roots.
#[derive(Clone, Debug, PartialEq)]
pub struct OrbitPartition {
    /// `W`-orbit class of every root.
    pub root_class: Vec<usize>,
    pub periods: Vec<i64>,
    /// Orbit representatives, class by class, residues `0..period`.
    pub reps: Vec<AffineRoot>,
    offsets: Vec<usize>,
}

/// Window used by the breadth-first closure.
pub const ORBIT_LEVEL_WINDOW: i64 = 10;

impl OrbitPartition {
    pub fn orbit_of(&self, a: AffineRoot) -> usize {
        let c = self.root_class[a.root];
        self.offsets[c] + a.level.rem_euclid(self.periods[c]) as usize
    }

    pub fn num_orbits(&self) -> usize {
        self.reps.len()
    }

    /// True when every orbit is level independent (`k_{α+mc} = k_α` is forced).
    pub fn level_independent(&self) -> bool {
        self.periods.iter().all(|&p| p == 1)
    }
}

/// Action of the generators `s_1..s_n`, `s_0`, `t_{±y_j}` on an affine root.
fn generator_images(rs: &RootSystem, a: AffineRoot) -> Vec<AffineRoot> {
    let mut out = vec![];
    for i in 1..=rs.rank() {
        let m = rs.reflection_matrix(rs.simple_index(i));
        out.push(AffineRoot { root: rs.act_on_root(&m, a.root), level: a.level });
    }
    // s_0 = t_{θ^∨} s_θ
    let st = rs.reflection_matrix(rs.highest);
    let b = rs.act_on_root(&st, a.root);
    let th_co = &rs.coroots[rs.highest];
    let shift = q_to_i64(&dot(th_co, &rs.roots[b])).expect("integral");
    out.push(AffineRoot { root: b, level: a.level - shift });
    for y in &rs.y_basis {
        let p = rs.int_pairing(y, a.root);
        out.push(AffineRoot { root: a.root, level: a.level - p });
        out.push(AffineRoot { root: a.root, level: a.level + p });
    }
    out
}

/// Breadth-first closure of the affine roots with `|m| ≤ 10` under the
/// generators of `Ŵ^Y`, certified against the lattice periods `gcd_j (y_j, α)`.
pub fn multiplicity_orbits(rs: &RootSystem) -> OrbitPartition {
    let w = ORBIT_LEVEL_WINDOW;
    let nodes: Vec<AffineRoot> =
        (0..rs.num_roots()).flat_map(|r| (-w..=w).map(move |m| AffineRoot { root: r, level: m })).collect();
    let id_of = |a: AffineRoot| a.root * (2 * w as usize + 1) + (a.level + w) as usize;
    let mut comp = vec![usize::MAX; nodes.len()];
    let mut ncomp = 0;
    for start in &nodes {
        if comp[id_of(*start)] != usize::MAX {
            continue;
        }
        let mut queue = VecDeque::from([*start]);
        comp[id_of(*start)] = ncomp;
        while let Some(a) = queue.pop_front() {
            for b in generator_images(rs, a) {
                if b.level.abs() > w {
                    continue;
                }
                if comp[id_of(b)] == usize::MAX {
                    comp[id_of(b)] = ncomp;
                    queue.push_back(b);
                }
            }
        }
        ncomp += 1;
    }
    // W-classes: roots whose level-0 copies share a component modulo levels
    let mut root_class = vec![usize::MAX; rs.num_roots()];
    let mut periods = vec![];
    for r in 0..rs.num_roots() {
        if root_class[r] != usize::MAX {
            continue;
        }
        let c0 = comp[id_of(AffineRoot { root: r, level: 0 })];
        let period = (1..=w)
            .find(|&m| comp[id_of(AffineRoot { root: r, level: m })] == c0)
            .expect("orbit period within the window");
        let cls = periods.len();
        periods.push(period);
        for s in 0..rs.num_roots() {
            if (0..period).any(|m| comp[id_of(AffineRoot { root: s, level: m })] == c0) {
                root_class[s] = cls;
            }
        }
    }
    // certificate: the period equals gcd over the Y basis of (y_j, α)
    for r in 0..rs.num_roots() {
        let g = rs.y_basis.iter().fold(0i64, |acc, y| acc.gcd(&rs.int_pairing(y, r)));
        assert_eq!(g, periods[root_class[r]], "orbit closure disagrees with the lattice period");
    }
    let mut reps = vec![];
    let mut offsets = vec![];
    for (cls, &p) in periods.iter().enumerate() {
        offsets.push(reps.len());
        let r = (0..rs.n_pos).find(|&r| root_class[r] == cls).expect("class has a positive root");
        reps.extend((0..p).map(|m| AffineRoot { root: r, level: m }));
    }
    OrbitPartition { root_class, periods, reps, offsets }
}

/// A `Ŵ^Y`-invariant multiplicity function, stored as one value per orbit.
#[derive(Clone, Debug)]
pub struct Multiplicity<F> {
    pub partition: Arc<OrbitPartition>,
    pub values: Vec<F>,
}

impl<F: Scalar> Multiplicity<F> {
    pub fn uniform(partition: Arc<OrbitPartition>, value: F) -> Self {
        let n = partition.num_orbits();
        Self { partition, values: vec![value; n] }
    }

    pub fn zero(partition: Arc<OrbitPartition>) -> Self {
        Self::uniform(partition, F::zero())
    }

    pub fn from_orbit_values(partition: Arc<OrbitPartition>, values: Vec<F>) -> Result<Self> {
        if values.len() != partition.num_orbits() {
            return Err(Error::NonInvariantMultiplicity(format!(
                "expected {} orbit values, got {}",
                partition.num_orbits(),
                values.len()
            )));
        }
        Ok(Self { partition, values })
    }

    /// Builds `k` from values on individual affine roots; conflicting values on
    /// one orbit and orbits without a value are rejected.
    pub fn from_assignments(partition: Arc<OrbitPartition>, assigned: &[(AffineRoot, F)]) -> Result<Self> {
        let mut values: Vec<Option<(AffineRoot, F)>> = vec![None; partition.num_orbits()];
        for (a, v) in assigned {
            let o = partition.orbit_of(*a);
            match &values[o] {
                Some((b, w)) if !w.approx_eq(v) => {
                    return Err(Error::NonInvariantMultiplicity(format!(
                        "affine roots {a:?} and {b:?} lie in orbit {o} but carry values {} and {}",
                        v.to_c64(),
                        w.to_c64()
                    )))
                }
                Some(_) => {}
                None => values[o] = Some((*a, v.clone())),
            }
        }
        let values = values
            .into_iter()
            .enumerate()
            .map(|(o, v)| {
                v.map(|(_, x)| x)
                    .ok_or_else(|| Error::NonInvariantMultiplicity(format!("orbit {o} has no assigned value")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { partition, values })
    }

    pub fn get(&self, a: AffineRoot) -> F {
        self.values[self.partition.orbit_of(a)].clone()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| v.is_zero())
    }

    /// `k_{α+mc} = k_α` for all `α, m`.
    pub fn is_level_independent(&self) -> bool {
        let p = &self.partition;
        (0..p.periods.len()).all(|cls| {
            let off = p.reps.iter().position(|r| p.root_class[r.root] == cls).unwrap();
            (0..p.periods[cls] as usize).all(|m| self.values[off + m].approx_eq(&self.values[off]))
        })
    }

    pub fn map<G: Scalar>(&self, f: impl Fn(&F) -> G) -> Multiplicity<G> {
        Multiplicity { partition: self.partition.clone(), values: self.values.iter().map(f).collect() }
    }
}

/// Checks the structural invariants of a realization; used by tests and `verify`.
pub fn check_invariants(rs: &RootSystem) -> Result<()> {
    let fail = |m: String| Err(Error::RelationFailure(m));
    let lengths: HashSet<Q> = rs.norms.iter().cloned().collect();
    if lengths.len() > 2 {
        return fail("more than two root lengths".into());
    }
    for i in 0..rs.num_roots() {
        let m = rs.reflection_matrix(i);
        for j in 0..rs.num_roots() {
            if rs.index_of(&qmat_apply(&m, &rs.roots[j])).is_none() {
                return fail(format!("s_{i} does not permute R"));
            }
        }
    }
    let th = &rs.simple_coords[rs.highest];
    for c in &rs.simple_coords[..rs.n_pos] {
        if c.iter().zip(th).any(|(x, t)| t - x < 0) {
            return fail("θ - α is not a nonnegative combination".into());
        }
    }
    for a in rs.simple_coroots() {
        if !dot(&a, &rs.rho).is_one() {
            return fail("(ρ, α_i^∨) ≠ 1".into());
        }
    }
    for (i, x) in rs.x_basis.iter().enumerate() {
        for (j, y) in rs.y_basis.iter().enumerate() {
            let want = if i == j { Q::one() } else { Q::zero() };
            if dot(x, y) != want {
                return fail("X and Y bases are not dual".into());
            }
        }
    }
    for y in &rs.y_basis {
        for r in &rs.roots {
            if !dot(y, r).is_integer() {
                return fail("(Y, R) not integral".into());
            }
        }
    }
    Ok(())
}

/// Ratio of squared lengths of long and short roots.
pub fn long_short_ratio(rs: &RootSystem) -> Q {
    let max = rs.norms.iter().max().unwrap().clone();
    let min = rs.norms.iter().min().unwrap().clone();
    (max / min).abs()
}

pub fn half() -> Q {
    q(1, 2)
}
