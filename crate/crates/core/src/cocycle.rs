//! The normalized intertwiner cocycle `{J_w}`.
//!
//! `J_{s_a}(λ̂) = ((a^∨,λ̂) π(s_a) + k_a) / ((a^∨,λ̂) - k_a)`, `J_ω = π(ω)`, and
//! `J_{uw}(λ̂) = J_u(wλ̂) J_w(λ̂)`. A spectral point is written
//! `λ̂ = λ + ηc + κd`; in a [`HatVector`] `η` is the `c` field and `κ` the `d` field.

use std::fmt;

use crate::affine_weyl::AffineWeylElement;
use crate::error::{Error, Result};
use crate::hat::HatVector;
use crate::matrix::Mat;
use crate::root_system::{AffineRoot, Multiplicity, RootSystem};
use crate::scalar::{qi, Scalar, Q};
use crate::wmodules::ModuleRep;

/// Float values below this modulus count as singular in the cocycle formula.
pub const SINGULAR_TOL: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SingularKind {
    /// `(a^∨, λ̂) = 0`
    Zero,
    /// `(a^∨, λ̂) = k_a`
    K,
}

impl fmt::Display for SingularKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => write!(f, "zero"),
            Self::K => write!(f, "k_a"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RegularityReport {
    pub is_regular: bool,
    pub offending: Option<(AffineRoot, SingularKind)>,
    /// `s = min_a min(|(a^∨,λ̂)|, |(a^∨,λ̂) - k_a|)` over all of `R̂`.
    pub margin: f64,
    /// Level window `|m| ≤ window` that was scanned.
    pub window: i64,
}

fn vanishes<F: Scalar>(x: &F) -> bool {
    if F::EXACT {
        x.is_zero()
    } else {
        x.is_negligible(SINGULAR_TOL)
    }
}

/// `(α^∨, λ)` for the finite part of `λ̂` and root index `r`.
fn coroot_pairing<F: Scalar>(rs: &RootSystem, r: usize, lam: &HatVector<F>) -> F {
    rs.coroots[r].iter().zip(&lam.fin).fold(F::zero(), |acc, (c, l)| acc + F::from_q(c) * l.clone())
}

/// Level window beyond which `|(a^∨,λ̂)|` and `|(a^∨,λ̂) - k_a|` only grow.
pub fn regularity_window<F: Scalar>(rs: &RootSystem, lam: &HatVector<F>, k: &Multiplicity<F>) -> i64 {
    let re_kappa = lam.d.re_f64();
    if lam.d.is_zero() {
        return 0;
    }
    if re_kappa <= 0.0 {
        // outside the supported domain; scan a fixed window
        return 100;
    }
    let kmax = k.max_abs();
    let mut win = 0i64;
    for r in 0..rs.num_roots() {
        let x = coroot_pairing(rs, r, lam).abs();
        let kv = 2.0 * re_kappa / crate::scalar::q_to_f64(&rs.norms[r]);
        win = win.max((2.0 * (x + kmax) / kv).ceil() as i64 + 1);
    }
    win
}

/// Scans all affine roots `α + mc` (both signs of `α`) in the provable window.
pub fn regularity<F: Scalar>(rs: &RootSystem, lam: &HatVector<F>, k: &Multiplicity<F>) -> RegularityReport {
    let window = regularity_window(rs, lam, k);
    let mut margin = f64::INFINITY;
    let mut offending = None;
    // levels in the order 0, 1, -1, 2, -2, … so that level-zero offenders are reported first
    let levels: Vec<i64> = std::iter::once(0).chain((1..=window).flat_map(|m| [m, -m])).collect();
    for &m in &levels {
        for r in 0..rs.num_roots() {
            let a = AffineRoot { root: r, level: m };
            let x = rs.pair_coroot(a, lam);
            let ka = k.get(a);
            let xk = x.clone() - ka;
            margin = margin.min(x.abs()).min(xk.abs());
            if offending.is_none() {
                if vanishes(&x) {
                    offending = Some((a, SingularKind::Zero));
                } else if vanishes(&xk) {
                    offending = Some((a, SingularKind::K));
                }
            }
        }
    }
    RegularityReport { is_regular: offending.is_none(), offending, margin, window }
}

/// `J_{s_a}(λ̂)` for an affine root `a`.
pub fn j_reflection<F: Scalar>(
    rs: &RootSystem,
    a: AffineRoot,
    lam: &HatVector<F>,
    rep: &ModuleRep,
    k: &Multiplicity<F>,
) -> Result<Mat<F>> {
    let x = rs.pair_coroot(a, lam);
    let ka = k.get(a);
    if vanishes(&x) || vanishes(&(x.clone() - ka.clone())) {
        return Err(Error::SingularSpectralPoint(format!("a = {a:?} at λ̂ = {lam:?}")));
    }
    let s = rep.pi_f::<F>(rs, &AffineWeylElement::reflection(rs, a));
    let num = s.scale(&x).add(&Mat::scalar(rep.dim, ka.clone()));
    Ok(num.scale(&(F::one() / (x - ka))))
}

/// `J_{s_i}(λ̂)` for the affine simple reflection `s_i`.
pub fn j_simple<F: Scalar>(
    rs: &RootSystem,
    i: usize,
    lam: &HatVector<F>,
    rep: &ModuleRep,
    k: &Multiplicity<F>,
) -> Result<Mat<F>> {
    let a = rs.affine_simple_roots()[i];
    let x = rs.pair_coroot(a, lam);
    let ka = k.get(a);
    if vanishes(&x) || vanishes(&(x.clone() - ka.clone())) {
        return Err(Error::SingularSpectralPoint(format!("a_{i} at λ̂ = {lam:?}")));
    }
    let num = rep.simple_f::<F>(i).scale(&x).add(&Mat::scalar(rep.dim, ka.clone()));
    Ok(num.scale(&(F::one() / (x - ka))))
}

/// `J_w(λ̂)` along the word `w = ω s_{i_1} ⋯ s_{i_l}`, unwound right to left.
pub fn j_word<F: Scalar>(
    rs: &RootSystem,
    omega: &AffineWeylElement,
    word: &[usize],
    lam: &HatVector<F>,
    rep: &ModuleRep,
    k: &Multiplicity<F>,
) -> Result<Mat<F>> {
    // per generator: root vector a_i, 2/(α_i,α_i), k_{a_i}, π(s_i)
    let gens: Vec<_> = rs
        .affine_simple_roots()
        .into_iter()
        .enumerate()
        .map(|(i, a)| (rs.affine_root_vector::<F>(a), F::from_q(&(qi(2) / &rs.norms[a.root])), k.get(a), rep.simple_f::<F>(i)))
        .collect();
    let mut acc = Mat::identity(rep.dim);
    let mut mu = lam.clone();
    for &i in word.iter().rev() {
        let (av, c2, ka, s) = &gens[i];
        let x = av.pairing(&mu) * c2.clone();
        if vanishes(&x) || vanishes(&(x.clone() - ka.clone())) {
            return Err(Error::SingularSpectralPoint(format!("a_{i} at λ̂ = {mu:?}")));
        }
        let num = s.scale(&x).add(&Mat::scalar(rep.dim, ka.clone()));
        acc = num.scale(&(F::one() / (x.clone() - ka.clone()))).mul(&acc);
        // s_a μ = μ - ⟨a^∨, μ⟩ a
        mu = mu.sub(&av.scale(&x));
    }
    let om = if omega.is_identity() { Mat::identity(rep.dim) } else { rep.pi_f::<F>(rs, omega) };
    Ok(om.mul(&acc))
}

/// `J_w(λ̂)` along the canonical reduced word of `w`.
pub fn j<F: Scalar>(
    rs: &RootSystem,
    w: &AffineWeylElement,
    lam: &HatVector<F>,
    rep: &ModuleRep,
    k: &Multiplicity<F>,
) -> Result<Mat<F>> {
    let (omega, word) = w.reduced_word(rs);
    j_word(rs, &omega, &word, lam, rep, k)
}

/// Closed-form `j_{t_y}(λ̂)` on the trivial module for level independent `k`.
pub fn j_translation_trivial_product<F: Scalar>(
    rs: &RootSystem,
    y: &[Q],
    lam: &HatVector<F>,
    k: &Multiplicity<F>,
) -> Result<F> {
    if !k.is_level_independent() {
        return Err(Error::LevelDependentK("the closed-form product needs k_{α+mc} = k_α".into()));
    }
    let kappa = lam.d.clone();
    let mut out = F::one();
    for r in 0..rs.n_pos {
        let ay = rs.int_pairing(y, r);
        let kv = kappa.clone() * F::from_q(&(crate::scalar::qi(2) / &rs.norms[r]));
        let x = coroot_pairing(rs, r, lam);
        let ka = k.get(AffineRoot { root: r, level: 0 });
        let factors: Vec<F> = if ay > 0 {
            (0..ay).map(|m| F::from_i64(m) * kv.clone() + x.clone()).collect()
        } else {
            (1..=-ay).map(|m| F::from_i64(m) * kv.clone() - x.clone()).collect()
        };
        for base in factors {
            let den = base.clone() - ka.clone();
            if vanishes(&den) || vanishes(&base) {
                return Err(Error::SingularSpectralPoint(format!("root {r} in the product for y = {y:?}")));
            }
            out = out * (base + ka.clone()) / den;
        }
    }
    Ok(out)
}

/// `D = 1 + (2/s) max|k|` with `‖J_w(λ̂)‖ ≤ D^{l(w)}`.
pub fn norm_bound_d<F: Scalar>(rs: &RootSystem, lam: &HatVector<F>, k: &Multiplicity<F>) -> Result<f64> {
    let kmax = k.max_abs();
    if kmax == 0.0 {
        return Ok(1.0);
    }
    let rep = regularity(rs, lam, k);
    if !rep.is_regular {
        let (a, kind) = rep.offending.unwrap();
        return Err(Error::SingularSpectralPoint(format!("{a:?} ({kind})")));
    }
    Ok(1.0 + 2.0 / rep.margin * kmax)
}
