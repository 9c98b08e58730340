//! Certified lattice-series evaluation of the generalized Bethe wave
//! functions `E_M`, `E_M^+`, the finite Bethe sum `ψ_λ`, adKZ residuals and
//! the two limit experiments.
//!
//! Truncation: the lattice `Y` is summed over balls `‖y‖ ≤ r` in the order
//! `(y, y)`, then coordinates. The omitted tail is bounded by
//! `‖J_{t_y}‖ ≤ D^{l(t_y)}`, `l(t_y) ≤ c₁‖y‖` with `c₁ = Σ_{α>0} ‖α‖`, and a
//! lattice point count `#{‖y‖ ≤ t} ≤ ((t+δ)/δ)^n` from disjoint balls of radius
//! `δ = λ₁/2`. Terms are computed independently and summed sequentially with
//! compensated summation, so results do not depend on the thread count.

use serde_json::{json, Value};

use crate::affine_weyl::AffineWeylElement;
use crate::cocycle::{j, norm_bound_d};
use crate::error::{Error, Result};
use crate::exp_poly::ExpPoly;
use crate::hat::HatVector;
use crate::integral_reflection::Vvf;
use crate::matrix::{dot, qmat_inverse, Mat};
use crate::par::{self, Exec};
use crate::root_system::{Multiplicity, RootSystem};
use crate::scalar::{q_to_f64, q_to_string, qi, CompensatedSum, Cq, Scalar, C64, Q};
use crate::wmodules::{check_steinberg_parity, ModuleRep, RepKind};

/// Hard cap on the number of lattice points in one evaluation.
pub const MAX_SHELL_POINTS: usize = 400_000;

#[derive(Clone, Debug)]
pub struct SeriesResult {
    pub value: Mat<C64>,
    /// Bound on the operator norm (unitary norm of `M`) of the omitted tail.
    pub tail_bound: f64,
    /// Allowance for floating point error in the summed part.
    pub rounding_bound: f64,
    pub cutoff: f64,
    pub terms_summed: usize,
}

impl SeriesResult {
    pub fn error_bound(&self) -> f64 {
        self.tail_bound + self.rounding_bound
    }

    pub fn to_json(&self) -> Value {
        let rows: Vec<Vec<[f64; 2]>> =
            self.value.rows().iter().map(|r| r.iter().map(|z| [z.re, z.im]).collect()).collect();
        json!({
            "value": rows,
            "tail_bound": self.tail_bound,
            "rounding_bound": self.rounding_bound,
            "cutoff": self.cutoff,
            "terms_summed": self.terms_summed,
        })
    }

    pub fn csv_columns(dim_m: usize) -> Vec<String> {
        let mut out = vec![];
        for r in 0..dim_m {
            for c in 0..dim_m {
                out.push(format!("value_{r}{c}_re"));
                out.push(format!("value_{r}{c}_im"));
            }
        }
        out.extend(["tail_bound", "rounding_bound", "cutoff", "terms_summed"].map(String::from));
        out
    }

    pub fn csv_fields(&self) -> Vec<String> {
        let mut out = vec![];
        for row in self.value.rows() {
            for z in row {
                out.push(format!("{:.17e}", z.re));
                out.push(format!("{:.17e}", z.im));
            }
        }
        out.push(format!("{:.6e}", self.tail_bound));
        out.push(format!("{:.6e}", self.rounding_bound));
        out.push(format!("{}", self.cutoff));
        out.push(format!("{}", self.terms_summed));
        out
    }
}

/// A lattice point `y = Σ n_j y_j`.
#[derive(Clone, Debug)]
pub struct LatticePoint {
    pub y: Vec<Q>,
    pub coords: Vec<i64>,
    pub norm2: Q,
}

/// All `y ∈ Y` with `‖y‖ ≤ radius`, ordered by `(y, y)` then coordinates.
pub fn lattice_points(rs: &RootSystem, radius: f64) -> Vec<LatticePoint> {
    let gram = rs.y_gram();
    let ginv = qmat_inverse(&gram).expect("Y basis is independent");
    let n = gram.len();
    // |n_j| ≤ r sqrt((G^{-1})_{jj}) on the ball
    let bounds: Vec<i64> = (0..n).map(|j| (radius * q_to_f64(&ginv[j][j]).sqrt()).floor() as i64 + 1).collect();
    let r2 = radius * radius * (1.0 + 1e-12);
    let mut out = vec![];
    let mut c: Vec<i64> = bounds.iter().map(|b| -b).collect();
    loop {
        let mut n2 = Q::from_integer(0.into());
        for a in 0..n {
            for b in 0..n {
                n2 += &gram[a][b] * qi(c[a] * c[b]);
            }
        }
        if q_to_f64(&n2) <= r2 {
            out.push(LatticePoint { y: rs.y_from_coords(&c), coords: c.clone(), norm2: n2 });
        }
        let mut j = 0;
        loop {
            if j == n {
                out.sort_by(|a, b| a.norm2.cmp(&b.norm2).then_with(|| a.coords.cmp(&b.coords)));
                return out;
            }
            c[j] += 1;
            if c[j] <= bounds[j] {
                break;
            }
            c[j] = -bounds[j];
            j += 1;
        }
    }
}

/// `λ₁ = min_{y ≠ 0} ‖y‖`.
pub fn shortest_vector(rs: &RootSystem) -> f64 {
    let r = rs.y_basis.iter().map(|y| q_to_f64(&dot(y, y)).sqrt()).fold(f64::INFINITY, f64::min);
    lattice_points(rs, r)
        .iter()
        .filter(|p| p.coords.iter().any(|&c| c != 0))
        .map(|p| q_to_f64(&p.norm2).sqrt())
        .fold(f64::INFINITY, f64::min)
}

/// `c₁ = Σ_{α∈R⁺} ‖α‖`, so that `l(t_y) ≤ c₁‖y‖`.
pub fn length_constant(rs: &RootSystem) -> f64 {
    (0..rs.n_pos).map(|r| q_to_f64(&rs.norms[r]).sqrt()).sum()
}

/// `l(t_y) = Σ_{α∈R⁺} |(y, α)|`.
pub fn translation_length(rs: &RootSystem, y: &[Q]) -> usize {
    (0..rs.n_pos).map(|r| rs.int_pairing(y, r).unsigned_abs() as usize).sum()
}

/// Majorant `e^{A + β‖y‖ - γ‖y‖²}` of `‖e^{(t_yλ̂,v̂)} J_{t_y}(λ̂)‖` and the
/// resulting tail bound.
#[derive(Clone, Debug)]
struct TailModel {
    a: f64,
    beta: f64,
    gamma: f64,
    delta: f64,
    n: usize,
}

impl TailModel {
    fn log_g(&self, t: f64) -> f64 {
        self.a + self.beta * t - self.gamma * t * t
    }

    /// Valid for `r > β/(2γ)`; `counted` is the number of points with `‖y‖ ≤ r`.
    fn bound(&self, r: f64, counted: usize) -> f64 {
        let n = self.n as i32;
        let mu = 2.0 * self.gamma * r - self.beta;
        assert!(mu > 0.0, "tail bound used inside the growth region");
        let nbar = ((r + self.delta) / self.delta).powi(n);
        let x = mu * (r + self.delta);
        let mut s = 0.0;
        let mut term = 1.0;
        for j in 0..self.n {
            if j > 0 {
                term *= x / j as f64;
            }
            s += term;
        }
        let fact: f64 = (1..=self.n).map(|i| i as f64).product();
        let bracket = (nbar - counted as f64).max(0.0) + fact / (self.delta * mu).powi(n) * s;
        (self.log_g(r) + bracket.ln()).exp()
    }

    fn cutoff_for(&self, target: f64) -> Result<f64> {
        let mut r = (self.beta / (2.0 * self.gamma)).max(0.0) + self.delta;
        loop {
            if self.bound(r, 0) <= target {
                return Ok(r);
            }
            r += self.delta / 2.0;
            let est = ((r + self.delta) / self.delta).powi(self.n as i32);
            if est > 4.0 * MAX_SHELL_POINTS as f64 {
                return Err(Error::NoConvergence(format!("cutoff {r:.2} exceeds the lattice point budget")));
            }
        }
    }
}

fn check_level(v: &HatVector<C64>, lam: &HatVector<C64>) -> Result<(f64, f64)> {
    let xi = v.d.re;
    if xi <= 0.0 || v.d.im != 0.0 {
        return Err(Error::NotPositiveLevel(xi));
    }
    let kappa = lam.d.re;
    if kappa <= 0.0 {
        return Err(Error::NoConvergence(format!("Re κ = {kappa} ≤ 0")));
    }
    Ok((xi, kappa))
}

/// `J_{t_y}(λ̂)` on `M`; on the Steinberg module it is `(-1)^{l(t_y)}` for all `λ̂`.
fn j_translation(rs: &RootSystem, y: &[Q], lam: &HatVector<C64>, rep: &ModuleRep, k: &Multiplicity<C64>) -> Result<Mat<C64>> {
    if rep.kind == RepKind::Steinberg {
        let s = if translation_length(rs, y) % 2 == 0 { 1.0 } else { -1.0 };
        return Ok(Mat::scalar(1, C64::new(s, 0.0)));
    }
    j(rs, &AffineWeylElement::translation(y), lam, rep, k)
}

/// `J_w(λ̂)` with the Steinberg shortcut.
pub fn j_any(rs: &RootSystem, w: &AffineWeylElement, lam: &HatVector<C64>, rep: &ModuleRep, k: &Multiplicity<C64>) -> Result<Mat<C64>> {
    if rep.kind == RepKind::Steinberg {
        let s = if w.length(rs) % 2 == 0 { 1.0 } else { -1.0 };
        return Ok(Mat::scalar(1, C64::new(s, 0.0)));
    }
    j(rs, w, lam, rep, k)
}

/// `(t_y λ̂, v̂)`.
pub fn term_exponent(y: &[Q], lam: &HatVector<C64>, v: &HatVector<C64>) -> C64 {
    AffineWeylElement::translation(y).act(lam).pairing(v)
}

fn gram_c64(rep: &ModuleRep) -> Mat<C64> {
    rep.gram.to_c64()
}

fn tail_model(rs: &RootSystem, v: &HatVector<C64>, lam: &HatVector<C64>, d: f64) -> TailModel {
    let (xi, kappa) = (v.d.re, lam.d.re);
    // exponent real part: Re(λ̂, v̂) + (Re κ v - ξ Re λ, y) - (ξ Re κ / 2)(y, y)
    let b: Vec<f64> = v.fin.iter().zip(&lam.fin).map(|(vi, li)| kappa * vi.re - xi * li.re).collect();
    TailModel {
        a: lam.pairing(v).re,
        beta: b.iter().map(|x| x * x).sum::<f64>().sqrt() + length_constant(rs) * d.ln(),
        gamma: xi * kappa / 2.0,
        delta: shortest_vector(rs) / 2.0,
        n: rs.rank(),
    }
}

/// `E_M(v̂; λ̂) = Σ_{y∈Y} e^{(t_yλ̂, v̂)} J_{t_y}(λ̂)` to within `target_error`.
pub fn eval_e(
    rs: &RootSystem,
    v: &HatVector<C64>,
    lam: &HatVector<C64>,
    rep: &ModuleRep,
    k: &Multiplicity<C64>,
    target_error: f64,
) -> Result<SeriesResult> {
    eval_e_with(rs, v, lam, rep, k, target_error, Exec::default())
}

pub fn eval_e_with(
    rs: &RootSystem,
    v: &HatVector<C64>,
    lam: &HatVector<C64>,
    rep: &ModuleRep,
    k: &Multiplicity<C64>,
    target_error: f64,
    exec: Exec,
) -> Result<SeriesResult> {
    check_level(v, lam)?;
    let d = if rep.kind == RepKind::Steinberg { 1.0 } else { norm_bound_d(rs, lam, k)? };
    let model = tail_model(rs, v, lam, d);
    let cutoff = model.cutoff_for(target_error)?;
    eval_e_at_cutoff(rs, v, lam, rep, k, cutoff, exec, &model)
}

/// Sums all `‖y‖ ≤ cutoff`; the cutoff must lie beyond the growth region of the majorant.
pub fn eval_e_cutoff(
    rs: &RootSystem,
    v: &HatVector<C64>,
    lam: &HatVector<C64>,
    rep: &ModuleRep,
    k: &Multiplicity<C64>,
    cutoff: f64,
    exec: Exec,
) -> Result<SeriesResult> {
    check_level(v, lam)?;
    let d = if rep.kind == RepKind::Steinberg { 1.0 } else { norm_bound_d(rs, lam, k)? };
    let model = tail_model(rs, v, lam, d);
    let min = (model.beta / (2.0 * model.gamma)).max(0.0);
    if cutoff <= min {
        return Err(Error::NoConvergence(format!("cutoff {cutoff} inside the growth region (≤ {min:.3})")));
    }
    eval_e_at_cutoff(rs, v, lam, rep, k, cutoff, exec, &model)
}

#[allow(clippy::too_many_arguments)]
fn eval_e_at_cutoff(
    rs: &RootSystem,
    v: &HatVector<C64>,
    lam: &HatVector<C64>,
    rep: &ModuleRep,
    k: &Multiplicity<C64>,
    cutoff: f64,
    exec: Exec,
    model: &TailModel,
) -> Result<SeriesResult> {
    let pts = lattice_points(rs, cutoff);
    if pts.len() > MAX_SHELL_POINTS {
        return Err(Error::NoConvergence(format!("{} lattice points exceed the budget", pts.len())));
    }
    let terms: Vec<Result<(Mat<C64>, usize)>> = par::map(exec, &pts, |p| {
        let e = term_exponent(&p.y, lam, v).exp();
        let jt = j_translation(rs, &p.y, lam, rep, k)?;
        Ok((jt.scale(&e), translation_length(rs, &p.y)))
    });
    let dm = rep.dim;
    let mut sums: Vec<CompensatedSum> = (0..dm * dm).map(|_| CompensatedSum::new()).collect();
    let mut mass = 0.0;
    let mut lmax = 0;
    for t in terms {
        let (m, l) = t?;
        lmax = lmax.max(l);
        for r in 0..dm {
            for c in 0..dm {
                let z = m[(r, c)];
                mass += z.norm();
                sums[r * dm + c].add(z);
            }
        }
    }
    let value = Mat::from_rows((0..dm).map(|r| (0..dm).map(|c| sums[r * dm + c].value()).collect()).collect())?;
    Ok(SeriesResult {
        value,
        tail_bound: model.bound(cutoff, pts.len()),
        rounding_bound: 16.0 * f64::EPSILON * (lmax as f64 + 4.0) * mass,
        cutoff,
        terms_summed: pts.len(),
    })
}

/// `E_M^+(v̂; λ̂) = Σ_{w∈W} E_M(v̂; wλ̂) J_w(λ̂)`.
pub fn eval_e_plus(
    rs: &RootSystem,
    v: &HatVector<C64>,
    lam: &HatVector<C64>,
    rep: &ModuleRep,
    k: &Multiplicity<C64>,
    target_error: f64,
) -> Result<SeriesResult> {
    eval_e_plus_with(rs, v, lam, rep, k, target_error, Exec::default())
}

pub fn eval_e_plus_with(
    rs: &RootSystem,
    v: &HatVector<C64>,
    lam: &HatVector<C64>,
    rep: &ModuleRep,
    k: &Multiplicity<C64>,
    target_error: f64,
    exec: Exec,
) -> Result<SeriesResult> {
    let gram = gram_c64(rep);
    let weyl = rs.weyl_group();
    let mut value = Mat::zeros(rep.dim);
    let (mut tail, mut round, mut cutoff, mut terms) = (0.0, 0.0, 0.0f64, 0);
    let per = target_error / weyl.len() as f64;
    for u in weyl {
        let w = AffineWeylElement::finite(u);
        let jw = j_any(rs, &w, lam, rep, k)?;
        let nj = jw.op_norm_with(&gram);
        let e = eval_e_with(rs, v, &w.act(lam), rep, k, per / nj.max(1.0), exec)?;
        value = value.add(&e.value.mul(&jw));
        tail += nj * e.tail_bound;
        round += nj * e.rounding_bound;
        cutoff = cutoff.max(e.cutoff);
        terms += e.terms_summed;
    }
    Ok(SeriesResult { value, tail_bound: tail, rounding_bound: round, cutoff, terms_summed: terms })
}

/// `E_M^+` summed directly over `t_y u ∈ Ŵ^Y` with `J_{t_y u}` taken along its
/// own reduced word. Used to cross-check [`eval_e_plus`].
pub fn eval_e_plus_direct(
    rs: &RootSystem,
    v: &HatVector<C64>,
    lam: &HatVector<C64>,
    rep: &ModuleRep,
    k: &Multiplicity<C64>,
    cutoff: f64,
) -> Result<Mat<C64>> {
    let pts = lattice_points(rs, cutoff);
    let weyl = rs.weyl_group();
    let dm = rep.dim;
    let mut sums: Vec<CompensatedSum> = (0..dm * dm).map(|_| CompensatedSum::new()).collect();
    for u in &weyl {
        let fin = AffineWeylElement::finite(u.clone());
        for p in &pts {
            let w = AffineWeylElement::translation(&p.y).mul(&fin);
            let e = w.act(lam).pairing(v).exp();
            let m = j_any(rs, &w, lam, rep, k)?.scale(&e);
            for r in 0..dm {
                for c in 0..dm {
                    sums[r * dm + c].add(m[(r, c)]);
                }
            }
        }
    }
    Mat::from_rows((0..dm).map(|r| (0..dm).map(|c| sums[r * dm + c].value()).collect()).collect())
}

/// Truncated `E_M^+(·; λ̂)` as an `End(M)`-valued exp-poly, one [`Vvf`] per
/// column, with a tail bound valid on the convex hull of `points`.
///
/// The majorant is monotone in its exponent data, which is linear or convex
/// in `v̂`, so taking the worst value over the hull vertices covers the hull.
pub fn e_plus_function(
    rs: &RootSystem,
    points: &[HatVector<C64>],
    lam: &HatVector<C64>,
    rep: &ModuleRep,
    k: &Multiplicity<C64>,
    target_error: f64,
) -> Result<(Vec<Vvf<C64>>, f64)> {
    if points.is_empty() {
        return Err(Error::InvalidConfig("no points for the tail bound".into()));
    }
    for p in points {
        check_level(p, lam)?;
    }
    let gram = gram_c64(rep);
    let weyl = rs.weyl_group();
    let per = target_error / weyl.len() as f64;
    let dm = rep.dim;
    let mut cols: Vec<Vvf<C64>> = (0..dm).map(|_| Vvf::zero(dm, rs.dim)).collect();
    let mut tail = 0.0;
    for u in weyl {
        let w = AffineWeylElement::finite(u);
        let jw = j_any(rs, &w, lam, rep, k)?;
        let nj = jw.op_norm_with(&gram);
        let mu = w.act(lam);
        let d = if rep.kind == RepKind::Steinberg { 1.0 } else { norm_bound_d(rs, &mu, k)? };
        let mut model = tail_model(rs, &points[0], &mu, d);
        for p in &points[1..] {
            let m = tail_model(rs, p, &mu, d);
            model.a = model.a.max(m.a);
            model.beta = model.beta.max(m.beta);
            model.gamma = model.gamma.min(m.gamma);
        }
        let cutoff = model.cutoff_for(per / nj.max(1.0))?;
        let pts = lattice_points(rs, cutoff);
        for p in &pts {
            let jt = j_translation(rs, &p.y, &mu, rep, k)?.mul(&jw);
            let e = ExpPoly::exp(AffineWeylElement::translation(&p.y).act(&mu));
            for (c, col) in cols.iter_mut().enumerate() {
                let m: Vec<C64> = (0..dm).map(|r| jt[(r, c)]).collect();
                *col = col.add(&Vvf::tensor(&e, &m));
            }
        }
        tail += nj * model.bound(cutoff, pts.len());
    }
    Ok((cols, tail))
}

/// `ψ_λ(v) = Σ_{w∈W} e^{(wλ, v)} J_w(λ)` with `λ` at level zero.
pub fn eval_psi(rs: &RootSystem, v: &[C64], lam: &[C64], rep: &ModuleRep, k: &Multiplicity<C64>) -> Result<Mat<C64>> {
    let lam_h = HatVector::from_finite(lam.to_vec());
    let v_h = HatVector::from_finite(v.to_vec());
    let mut out = Mat::zeros(rep.dim);
    for u in rs.weyl_group() {
        let w = AffineWeylElement::finite(u);
        let jw = j_any(rs, &w, &lam_h, rep, k)?;
        out = out.add(&jw.scale(&w.act(&lam_h).pairing(&v_h).exp()));
    }
    Ok(out)
}

/// `ψ_λ` as an `End(M)`-valued exp-poly on `ĥ`, one [`Vvf`] per column.
pub fn psi_function<F: Scalar>(rs: &RootSystem, lam: &[F], rep: &ModuleRep, k: &Multiplicity<F>) -> Result<Vec<Vvf<F>>> {
    let lam_h = HatVector::from_finite(lam.to_vec());
    let dm = rep.dim;
    let mut cols: Vec<Vvf<F>> = (0..dm).map(|_| Vvf::zero(dm, rs.dim)).collect();
    for u in rs.weyl_group() {
        let w = AffineWeylElement::finite(u);
        let jw: Mat<F> = if rep.kind == RepKind::Steinberg {
            Mat::scalar(1, if w.length(rs) % 2 == 0 { F::one() } else { -F::one() })
        } else {
            j(rs, &w, &lam_h, rep, k)?
        };
        let e = ExpPoly::exp(w.act(&lam_h));
        for (c, col) in cols.iter_mut().enumerate() {
            let m: Vec<F> = (0..dm).map(|r| jw[(r, c)].clone()).collect();
            *col = col.add(&Vvf::tensor(&e, &m));
        }
    }
    Ok(cols)
}

/// Residual of `Ψ·w = Ψ` at `λ̂` together with the bound it must respect.
#[derive(Clone, Debug)]
pub struct AdkzCheck {
    pub residual: f64,
    pub bound: f64,
}

impl AdkzCheck {
    pub fn passes(&self) -> bool {
        self.residual <= self.bound
    }
}

/// `‖Ψ(wλ̂)J_w(λ̂) - Ψ(λ̂)‖` for a series evaluator `Ψ`.
pub fn adkz_residual_group(
    psi: &dyn Fn(&HatVector<C64>) -> Result<SeriesResult>,
    rs: &RootSystem,
    w: &AffineWeylElement,
    lam: &HatVector<C64>,
    rep: &ModuleRep,
    k: &Multiplicity<C64>,
) -> Result<AdkzCheck> {
    let gram = gram_c64(rep);
    let jw = j_any(rs, w, lam, rep, k)?;
    let moved = psi(&w.act(lam))?;
    let here = psi(lam)?;
    let nj = jw.op_norm_with(&gram);
    Ok(AdkzCheck {
        residual: moved.value.mul(&jw).sub(&here.value).op_norm_with(&gram),
        bound: moved.error_bound() * nj + here.error_bound(),
    })
}

/// adKZ residual `‖Ψ(t_yλ̂)J_{t_y}(λ̂) - Ψ(λ̂)‖`.
pub fn adkz_residual(
    psi: &dyn Fn(&HatVector<C64>) -> Result<SeriesResult>,
    rs: &RootSystem,
    y: &[Q],
    lam: &HatVector<C64>,
    rep: &ModuleRep,
    k: &Multiplicity<C64>,
) -> Result<AdkzCheck> {
    adkz_residual_group(psi, rs, &AffineWeylElement::translation(y), lam, rep, k)
}

/// The fixed-level form
/// `Ψ(λ + κy + ηc + κd) e^{-κξ(y,y)/2 - ξ(λ,y)} J_{t_y}(λ + κd) = Ψ(λ + ηc + κd)`.
pub fn adkz_residual_xi_form(
    psi: &dyn Fn(&HatVector<C64>) -> Result<SeriesResult>,
    rs: &RootSystem,
    y: &[Q],
    xi: f64,
    lam: &HatVector<C64>,
    rep: &ModuleRep,
    k: &Multiplicity<C64>,
) -> Result<AdkzCheck> {
    let gram = gram_c64(rep);
    let kappa = lam.d;
    let yc: Vec<C64> = y.iter().map(|x| C64::new(q_to_f64(x), 0.0)).collect();
    let yy = q_to_f64(&dot(y, y));
    let ly: C64 = lam.fin.iter().zip(&yc).map(|(a, b)| a * b).sum();
    let shifted = HatVector::new(lam.fin.iter().zip(&yc).map(|(l, y)| l + kappa * y).collect(), lam.c, kappa);
    let jt = j_translation(rs, y, &HatVector::new(lam.fin.clone(), C64::new(0.0, 0.0), kappa), rep, k)?;
    let factor = (-kappa * xi * yy / 2.0 - xi * ly).exp();
    let moved = psi(&shifted)?;
    let here = psi(lam)?;
    let nj = jt.op_norm_with(&gram) * factor.norm();
    Ok(AdkzCheck {
        residual: moved.value.scale(&factor).mul(&jt).sub(&here.value).op_norm_with(&gram),
        bound: moved.error_bound() * nj + here.error_bound(),
    })
}

/// Outcome of the convergence-domain scan.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainCheck {
    pub holds: bool,
    /// Coordinates of a violating `y` in the `Y` basis.
    pub witness: Option<Vec<i64>>,
}

/// Checks `(Re λ, y) > -(Re κ/2)(y, y)` for all `y ≠ 0`; beyond
/// `‖y‖ > 2‖Re λ‖/Re κ` the inequality holds automatically.
pub fn check_convergence_domain(rs: &RootSystem, re_lambda: &[f64], re_kappa: f64) -> DomainCheck {
    assert!(re_kappa > 0.0, "the convergence domain needs Re κ > 0");
    let norm = re_lambda.iter().map(|x| x * x).sum::<f64>().sqrt();
    for p in lattice_points(rs, 2.0 * norm / re_kappa) {
        if p.coords.iter().all(|&c| c == 0) {
            continue;
        }
        let ly: f64 = re_lambda.iter().zip(&p.y).map(|(l, y)| l * q_to_f64(y)).sum();
        if ly <= -re_kappa / 2.0 * q_to_f64(&p.norm2) {
            return DomainCheck { holds: false, witness: Some(p.coords) };
        }
    }
    DomainCheck { holds: true, witness: None }
}

#[derive(Clone, Debug)]
pub struct XiLimitRow {
    pub xi: f64,
    pub deviation: f64,
    pub tail_bound: f64,
}

/// `‖E_M^+(v + ξd, λ + κd) - ψ_λ(v)‖` along `ξ_grid`.
#[allow(clippy::too_many_arguments)]
pub fn limit_xi_experiment(
    rs: &RootSystem,
    v: &[f64],
    lam: &[C64],
    kappa: f64,
    rep: &ModuleRep,
    k: &Multiplicity<C64>,
    xi_grid: &[f64],
    target_error: f64,
) -> Result<Vec<XiLimitRow>> {
    let re: Vec<f64> = lam.iter().map(|z| z.re).collect();
    let dom = check_convergence_domain(rs, &re, kappa);
    if !dom.holds {
        let y = rs.y_from_coords(&dom.witness.unwrap());
        return Err(Error::DomainViolation(y.iter().map(q_to_string).collect()));
    }
    let gram = gram_c64(rep);
    let vc: Vec<C64> = v.iter().map(|&x| C64::new(x, 0.0)).collect();
    let psi = eval_psi(rs, &vc, lam, rep, k)?;
    let lam_h = HatVector::new(lam.to_vec(), C64::new(0.0, 0.0), C64::new(kappa, 0.0));
    xi_grid
        .iter()
        .map(|&xi| {
            let vh = HatVector::new(vc.clone(), C64::new(0.0, 0.0), C64::new(xi, 0.0));
            let e = eval_e_plus(rs, &vh, &lam_h, rep, k, target_error)?;
            Ok(XiLimitRow { xi, deviation: e.value.sub(&psi).op_norm_with(&gram), tail_bound: e.error_bound() })
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct CriticalRow {
    pub kappa: f64,
    pub ratio: C64,
    pub target: C64,
    pub deviation: f64,
    /// `|E_St(v̂,κd)^{-1} E_St(v̂, λ+κy+κd) - e^{κξ(y,y)/2 + (λ,v)}|`.
    pub per_y_residual: f64,
}

/// Steinberg critical limit along `λ̂(κ) = λ + κy + κd`, `κ ↓ 0`, with
/// `λ = (2π√-1/ξ) x` for `x` in the lattice dual to `Y`.
pub fn steinberg_critical_limit(
    rs: &RootSystem,
    v: &HatVector<C64>,
    x: &[Q],
    y_path: &[Q],
    kappa_grid: &[f64],
    target_error: f64,
) -> Result<Vec<CriticalRow>> {
    if !check_steinberg_parity(rs) {
        return Err(Error::ParityViolation("(Y, P) ⊄ Z".into()));
    }
    for yb in &rs.y_basis {
        if crate::scalar::q_to_i64(&dot(x, yb)).is_none() {
            return Err(Error::InvalidConfig("x is not in the lattice dual to Y".into()));
        }
    }
    for r in 0..rs.n_pos {
        if dot(&rs.coroots[r], x) == qi(0) {
            return Err(Error::SingularSpectralPoint(format!("x is singular for root {r}")));
        }
    }
    let st = ModuleRep::steinberg(rs);
    let k0 = Multiplicity::<C64>::zero(std::sync::Arc::new(crate::root_system::multiplicity_orbits(rs)));
    let xi = v.d.re;
    let tau = C64::new(0.0, 2.0 * std::f64::consts::PI / xi);
    let lam: Vec<C64> = x.iter().map(|c| tau * q_to_f64(c)).collect();
    let lam_v: C64 = lam.iter().zip(&v.fin).map(|(a, b)| a * b).sum();
    let weyl: Vec<AffineWeylElement> = rs.weyl_group().into_iter().map(AffineWeylElement::finite).collect();
    let lam_h0 = HatVector::from_finite(lam.clone());
    let target: C64 = weyl
        .iter()
        .map(|w| {
            let s = if w.length(rs) % 2 == 0 { 1.0 } else { -1.0 };
            w.act(&lam_h0).pairing(&HatVector::from_finite(v.fin.clone())).exp() * s
        })
        .sum();
    let yy = q_to_f64(&dot(y_path, y_path));
    kappa_grid
        .iter()
        .map(|&kappa| {
            let kc = C64::new(kappa, 0.0);
            let base = eval_e(rs, v, &HatVector::new(vec![C64::new(0.0, 0.0); rs.dim], C64::new(0.0, 0.0), kc), &st, &k0, target_error)?;
            let path = HatVector::new(lam.iter().zip(y_path).map(|(l, y)| l + kc * q_to_f64(y)).collect(), C64::new(0.0, 0.0), kc);
            let plus = eval_e_plus(rs, v, &path, &st, &k0, target_error)?;
            let single = eval_e(rs, v, &path, &st, &k0, target_error)?;
            let e0 = base.value[(0, 0)];
            let ratio = plus.value[(0, 0)] / e0;
            let expect = (kc * xi * yy / 2.0 + lam_v).exp();
            Ok(CriticalRow {
                kappa,
                ratio,
                target,
                deviation: (ratio - target).norm(),
                per_y_residual: (single.value[(0, 0)] / e0 - expect).norm(),
            })
        })
        .collect()
}

/// Checks that every summand `e^{wλ̂}` of `E_M^+` with `w = t_y u`, `‖y‖ ≤ radius`,
/// satisfies `Δ̂ f = ((λ,λ) + 2ηκ) f` and `∂_c f = κ f` exactly. Returns the
/// number of summands checked and the eigenvalue.
pub fn termwise_eigen_check(rs: &RootSystem, lam: &HatVector<Cq>, radius: f64) -> Result<(usize, Cq)> {
    let n = rs.dim;
    let fin2 = lam.fin.iter().fold(Cq::zero(), |acc, x| acc + x.clone() * x.clone());
    let eig = fin2 + lam.c.clone() * lam.d.clone() * Cq::from_i64(2);
    let mut count = 0;
    for p in lattice_points(rs, radius) {
        for u in rs.weyl_group() {
            let w = AffineWeylElement::translation(&p.y).mul(&AffineWeylElement::finite(u));
            let f = ExpPoly::exp(w.act(lam));
            if !f.laplacian_hat().sub(&f.scale(&eig)).is_zero() {
                return Err(Error::RelationFailure(format!("Δ̂ eigenvalue fails for {w:?}")));
            }
            if !f.coord_derivative(n).sub(&f.scale(&lam.d)).is_zero() {
                return Err(Error::RelationFailure(format!("∂_c eigenvalue fails for {w:?}")));
            }
            count += 1;
        }
    }
    Ok((count, eig))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::root_system::{multiplicity_orbits, CartanType, LatticeChoice};
    use crate::scalar::q;
    use std::sync::Arc;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn a1() -> RootSystem {
        RootSystem::new(CartanType::A(1), LatticeChoice::Coroot).unwrap()
    }

    fn kval(rs: &RootSystem, x: f64) -> Multiplicity<C64> {
        Multiplicity::uniform(Arc::new(multiplicity_orbits(rs)), c(x))
    }

    #[test]
    fn lattice_points_are_sorted_balls() {
        let rs = RootSystem::new(CartanType::A(2), LatticeChoice::Coroot).unwrap();
        let pts = lattice_points(&rs, 3.0);
        assert!(pts.windows(2).all(|w| w[0].norm2 <= w[1].norm2));
        assert_eq!(pts[0].norm2, qi(0));
        // hexagonal lattice with minimal norm √2: 1 + 6 points up to radius √2
        assert_eq!(lattice_points(&rs, 2f64.sqrt()).len(), 7);
        assert!((shortest_vector(&rs) - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn steinberg_theta_value() {
        let rs = a1();
        let st = ModuleRep::steinberg(&rs);
        let v = HatVector::new(vec![c(0.0), c(0.0)], c(0.0), c(1.0));
        let lam = HatVector::new(vec![c(0.0), c(0.0)], c(0.0), c(1.0));
        let r = eval_e(&rs, &v, &lam, &st, &kval(&rs, 1.0), 1e-12).unwrap();
        let oracle: f64 = (-6i32..=6).map(|n| (-(n * n) as f64).exp()).sum();
        assert!((r.value[(0, 0)].re - oracle).abs() < 1e-12);
        assert!((oracle - 1.772637).abs() < 1e-6);
    }

    #[test]
    fn psi_a1_documented_case() {
        let rs = a1();
        let triv = ModuleRep::trivial(&rs);
        let lam = [c(1.5), c(-1.5)];
        let v = [c(0.3), c(0.1)];
        let p = eval_psi(&rs, &v, &lam, &triv, &kval(&rs, 1.0)).unwrap();
        let want = (1.5 * 0.3 - 1.5 * 0.1f64).exp() + 2.0 * (-1.5 * 0.3 + 1.5 * 0.1f64).exp();
        assert!((p[(0, 0)].re - want).abs() < 1e-13);
    }

    #[test]
    fn psi_is_finite_q_invariant() {
        let rs = a1();
        let triv = ModuleRep::trivial(&rs);
        let k = Multiplicity::uniform(Arc::new(multiplicity_orbits(&rs)), Cq::from_i64(1));
        let lam = [Cq::from_q(&q(3, 2)), Cq::from_q(&q(-3, 2))];
        let cols = psi_function(&rs, &lam, &triv, &k).unwrap();
        for col in &cols {
            assert!(crate::integral_reflection::q_simple(&rs, 1, col, &triv, &k).sub(col).is_zero());
        }
    }

    #[test]
    fn convergence_domain_a1() {
        let rs = a1();
        // (Re λ, α^∨) = x with α^∨ = (1, -1): λ = (x/2, -x/2)
        for (x, ok) in [(0.5, true), (0.99, true), (1.0, false), (-1.5, false), (0.0, true)] {
            let d = check_convergence_domain(&rs, &[x / 2.0, -x / 2.0], 1.0);
            assert_eq!(d.holds, ok, "x = {x}");
            assert_eq!(d.witness.is_some(), !ok);
        }
    }

    #[test]
    fn e_plus_forms_agree() {
        let rs = a1();
        let triv = ModuleRep::trivial(&rs);
        let k = kval(&rs, 0.7);
        let v = HatVector::new(vec![c(0.2), c(-0.1)], c(0.1), c(1.0));
        let lam = HatVector::new(vec![C64::new(0.3, 0.2), C64::new(-0.3, -0.2)], c(0.0), c(1.3));
        let w = eval_e_plus(&rs, &v, &lam, &triv, &k, 1e-12).unwrap();
        let d = eval_e_plus_direct(&rs, &v, &lam, &triv, &k, w.cutoff).unwrap();
        assert!(w.value.sub(&d).op_norm() < 1e-10);
    }

    #[test]
    fn e_plus_function_matches_pointwise_sum() {
        let rs = a1();
        let triv = ModuleRep::trivial(&rs);
        let k = kval(&rs, 0.7);
        let lam = HatVector::new(vec![C64::new(0.3, 0.2), C64::new(-0.3, -0.2)], c(0.0), c(1.3));
        let corners: Vec<HatVector<C64>> = [(-0.3, 0.8), (0.3, 0.8), (-0.3, 1.2), (0.3, 1.2)]
            .iter()
            .map(|&(x, xi)| HatVector::new(vec![c(x), c(-x)], c(0.0), c(xi)))
            .collect();
        let (cols, tail) = e_plus_function(&rs, &corners, &lam, &triv, &k, 1e-11).unwrap();
        assert!(tail <= 1e-11);
        let v = HatVector::new(vec![c(0.1), c(-0.1)], c(0.2), c(1.0));
        let want = eval_e_plus(&rs, &v, &lam, &triv, &k, 1e-12).unwrap();
        assert!((cols[0].eval(&v)[0] - want.value[(0, 0)]).norm() < 1e-10);
    }

    #[test]
    fn adkz_holds_within_tails() {
        let rs = a1();
        let triv = ModuleRep::trivial(&rs);
        let k = kval(&rs, 0.5);
        let v = HatVector::new(vec![c(0.2), c(-0.1)], c(0.0), c(1.0));
        let lam = HatVector::new(vec![C64::new(0.35, 0.1), C64::new(-0.35, -0.1)], c(0.0), c(1.0));
        let psi = |l: &HatVector<C64>| eval_e(&rs, &v, l, &triv, &k, 1e-12);
        let y = rs.y_basis[0].clone();
        let chk = adkz_residual(&psi, &rs, &y, &lam, &triv, &k).unwrap();
        assert!(chk.residual <= 1e-8 && chk.passes(), "{chk:?}");
        let chk = adkz_residual_xi_form(&psi, &rs, &y, 1.0, &lam, &triv, &k).unwrap();
        assert!(chk.residual <= 1e-8, "{chk:?}");
        // negative control: a constant Ψ is not a solution when J_{t_y} ≠ Id
        let konst = |_: &HatVector<C64>| Ok(SeriesResult { value: Mat::identity(1), tail_bound: 0.0, rounding_bound: 0.0, cutoff: 0.0, terms_summed: 0 });
        assert!(adkz_residual(&konst, &rs, &y, &lam, &triv, &k).unwrap().residual > 1e-3);
    }

    #[test]
    fn eigenvalue_documented_case() {
        let rs = a1();
        let lam = HatVector::<Cq>::from_q(&[q(3, 2), q(-3, 2)], &qi(0), &qi(1));
        let (n, eig) = termwise_eigen_check(&rs, &lam, 3.0).unwrap();
        assert!(n > 2);
        assert_eq!(eig, Cq::from_q(&q(9, 2)));
    }

    #[test]
    fn sequential_and_parallel_agree_bitwise() {
        let rs = RootSystem::new(CartanType::A(2), LatticeChoice::Coroot).unwrap();
        let triv = ModuleRep::trivial(&rs);
        let k = kval(&rs, 0.4);
        let v = HatVector::new(vec![c(0.2), c(-0.1), c(-0.1)], c(0.0), c(1.0));
        let lam = HatVector::new(vec![C64::new(0.3, 0.1), c(0.05), C64::new(-0.35, -0.1)], c(0.0), c(1.2));
        let a = eval_e_with(&rs, &v, &lam, &triv, &k, 1e-10, Exec::Parallel).unwrap();
        let b = eval_e_with(&rs, &v, &lam, &triv, &k, 1e-10, Exec::Sequential).unwrap();
        assert!(a.value == b.value);
        assert_eq!(a.terms_summed, b.terms_summed);
    }

    #[test]
    fn xi_limit_decreases() {
        let rs = a1();
        let triv = ModuleRep::trivial(&rs);
        let k = kval(&rs, 1.0);
        let rows = limit_xi_experiment(&rs, &[0.1, -0.2], &[c(0.25), c(-0.25)], 1.0, &triv, &k, &[5.0, 10.0, 20.0, 50.0], 1e-13).unwrap();
        assert!(rows.windows(2).all(|w| w[1].deviation < w[0].deviation), "{rows:?}");
        assert!(rows[3].deviation <= 1e-6);
        let bad = limit_xi_experiment(&rs, &[0.0, 0.0], &[c(1.0), c(-1.0)], 1.0, &triv, &k, &[5.0], 1e-10);
        assert!(matches!(bad, Err(Error::DomainViolation(_))));
    }

    #[test]
    fn steinberg_critical_limit_a1() {
        let rs = a1();
        let v = HatVector::new(vec![c(0.3), c(-0.1)], c(0.0), c(1.0));
        let x = [q(1, 2), q(-1, 2)];
        let y = rs.y_basis[0].clone();
        let rows = steinberg_critical_limit(&rs, &v, &x, &y, &[0.1, 0.05, 0.025], 1e-14).unwrap();
        assert!(rows.windows(2).all(|w| w[1].deviation < w[0].deviation), "{rows:?}");
        assert!(rows.iter().all(|r| r.per_y_residual < 1e-10), "{rows:?}");
        // at v = 0 the alternating target vanishes
        let v0 = HatVector::new(vec![c(0.0), c(0.0)], c(0.0), c(1.0));
        let rows0 = steinberg_critical_limit(&rs, &v0, &x, &y, &[0.1], 1e-14).unwrap();
        assert!(rows0[0].target.norm() < 1e-15);
    }
}
