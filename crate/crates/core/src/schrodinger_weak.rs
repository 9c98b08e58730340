//! Weak form of the delta-potential Hamiltonian on `V̂⁺`: bump test functions,
//! wall surface measures and chamber-split tensor Gauss-Legendre quadrature.
//!
//! Points are handled in coordinates `[v_1..v_n, η, ξ]` for `v + ηc + ξd`, in
//! which `⟨·,·⟩` is the standard inner product and `dv̂` is Lebesgue measure.

use std::collections::HashMap;
use std::sync::Arc;

use serde_json::{json, Value};

use crate::affine_weyl::{locate_chamber, AffineWeylElement, WALL_TOL};
use crate::bethe_series::e_plus_function;
use crate::difference_reflection::{propagate_t, PiecewiseFamily};
use crate::error::{Error, Result};
use crate::hat::HatVector;
use crate::integral_reflection::Vvf;
use crate::matrix::Mat;
use crate::par::{self, Exec};
use crate::quadrature::gauss_legendre_on;
use crate::root_system::{AffineRoot, Multiplicity, RootSystem};
use crate::scalar::{q_to_f64, C64};
use crate::wmodules::ModuleRep;

/// `[column][row]` blocks of an `End(M)`-valued (or `M`-valued) pairing.
pub type Block = Vec<Vec<C64>>;

fn zero_block(cols: usize, rows: usize) -> Block {
    vec![vec![C64::new(0.0, 0.0); rows]; cols]
}

fn block_axpy(acc: &mut Block, s: C64, b: &Block) {
    for (a, x) in acc.iter_mut().zip(b) {
        for (ai, xi) in a.iter_mut().zip(x) {
            *ai += s * xi;
        }
    }
}

fn block_max(b: &Block) -> f64 {
    b.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
}

fn block_sub(a: &Block, b: &Block) -> Block {
    a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p - q).collect()).collect()
}

fn block_json(b: &Block) -> Value {
    json!(b.iter().map(|c| c.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>()).collect::<Vec<_>>())
}

/// Radial bump `exp(-1/(1 - r²))`, `r = |x - center| / radius`.
#[derive(Clone, Debug, PartialEq)]
pub struct TestFunction {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl TestFunction {
    /// The support must stay inside `ξ > 0`.
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        let xi = *center.last().ok_or_else(|| Error::InvalidConfig("empty bump center".into()))?;
        if center.len() < 3 || radius <= 0.0 || xi - radius <= 0.0 {
            return Err(Error::InvalidConfig(format!("bump at {center:?} with radius {radius} leaves ξ > 0")));
        }
        Ok(Self { center, radius })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// `(s, φ, φ_s, φ_ss)` as functions of `s = r²`, or `None` off the support.
    fn profile(&self, x: &[f64]) -> Option<(Vec<f64>, f64, f64, f64)> {
        let d: Vec<f64> = x.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        let s = d.iter().map(|t| t * t).sum::<f64>() / (self.radius * self.radius);
        if s >= 1.0 {
            return None;
        }
        let t = 1.0 - s;
        let phi = (-1.0 / t).exp();
        Some((d, phi, -phi / (t * t), phi * (2.0 * s - 1.0) / (t * t * t * t)))
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.profile(x).map_or(0.0, |p| p.1)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let r2 = self.radius * self.radius;
        match self.profile(x) {
            None => vec![0.0; x.len()],
            Some((d, _, ps, _)) => d.iter().map(|di| ps * 2.0 * di / r2).collect(),
        }
    }

    pub fn hessian(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let n = x.len();
        let r2 = self.radius * self.radius;
        let mut h = vec![vec![0.0; n]; n];
        if let Some((d, _, ps, pss)) = self.profile(x) {
            for i in 0..n {
                for j in 0..n {
                    h[i][j] = pss * 4.0 * d[i] * d[j] / (r2 * r2) + if i == j { ps * 2.0 / r2 } else { 0.0 };
                }
            }
        }
        h
    }

    /// `Δφ` over the finite coordinates.
    pub fn laplacian_fin(&self, x: &[f64]) -> f64 {
        let h = self.hessian(x);
        (0..x.len() - 2).map(|i| h[i][i]).sum()
    }

    /// `Δ̂φ = Δφ + 2∂_c∂_d φ`.
    pub fn laplacian_hat(&self, x: &[f64]) -> f64 {
        let h = self.hessian(x);
        let n = x.len();
        (0..n - 2).map(|i| h[i][i]).sum::<f64>() + 2.0 * h[n - 2][n - 1]
    }

    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.center.iter().map(|c| c - self.radius).collect(),
            self.center.iter().map(|c| c + self.radius).collect(),
        )
    }
}

/// Which scalar multiplies `k_a ∫_{H_a}` in the surface term.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WallWeight {
    /// `√⟨a,a⟩`.
    HatNorm,
    /// `√(a,a)`, the critical-level weight.
    Critical,
    /// `(a,a)/√⟨a,a⟩`: the normal flux of the jump along `a`.
    Flux,
}

impl WallWeight {
    pub fn value(self, rs: &RootSystem, a: AffineRoot) -> f64 {
        let (hat, crit) = (hat_norm2(rs, a), q_to_f64(&rs.norms[a.root]));
        match self {
            WallWeight::HatNorm => hat.sqrt(),
            WallWeight::Critical => crit.sqrt(),
            WallWeight::Flux => crit / hat.sqrt(),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "hat" => Ok(WallWeight::HatNorm),
            "critical" => Ok(WallWeight::Critical),
            "flux" => Ok(WallWeight::Flux),
            _ => Err(Error::Parse(format!("unknown wall weight {s:?} (hat|critical|flux)"))),
        }
    }
}

/// `⟨a,a⟩ = (α,α) + m²` for `a = α + mc`.
pub fn hat_norm2(rs: &RootSystem, a: AffineRoot) -> f64 {
    let v: HatVector<C64> = rs.affine_root_vector(a);
    v.hat_inner(&v).re
}

/// Quadrature nodes on `H_a ∩ supp φ`, with surface weights.
#[derive(Clone, Debug)]
pub struct WallPiece {
    pub root: AffineRoot,
    /// Coordinate eliminated by the chart.
    pub dropped: usize,
    pub nodes: Vec<(Vec<f64>, f64)>,
}

/// Iterated Gauss-Legendre rule on the support of a bump, split along every
/// wall. The `ξ` axis is cut where walls leave the support, the `v` axis at the
/// walls, and the `η` axis runs over the exact chord, so every one-dimensional
/// rule sees an integrand that is smooth inside and flat at its endpoints.
#[derive(Clone, Debug)]
pub struct QuadratureGrid {
    pub center: Vec<f64>,
    pub radius: f64,
    /// Bounding box of the support.
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// Gauss-Legendre nodes per axis and per piece.
    pub order: usize,
    pub walls: Vec<WallPiece>,
    /// `(r, m)` for each wall `r v + m ξ = 0`, in `walls` order.
    line: Vec<(f64, f64)>,
    /// `ξ` nodes and weights.
    slices: Vec<(f64, f64)>,
}

fn sorted_dedup(mut xs: Vec<f64>) -> Vec<f64> {
    xs.sort_by(|a, b| a.total_cmp(b));
    xs.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    xs
}

impl QuadratureGrid {
    /// Only the one-dimensional `sl_2` realization is supported: walls are then
    /// the planes `r v + m ξ = 0`.
    pub fn new(rs: &RootSystem, phi: &TestFunction, order: usize) -> Result<Self> {
        if rs.dim != 1 {
            return Err(Error::UnsupportedType(format!(
                "weak quadrature needs a one-dimensional realization, got dim {}",
                rs.dim
            )));
        }
        if phi.dim() != 3 || order == 0 || phi.radius <= 0.0 {
            return Err(Error::InvalidConfig(format!("bad quadrature setup: {phi:?}, order {order}")));
        }
        let (lo, hi) = phi.bounding_box();
        if lo[2] <= 0.0 {
            return Err(Error::WallEnumerationIncomplete);
        }
        let (c, rad) = (phi.center.clone(), phi.radius);
        let vmax = lo[0].abs().max(hi[0].abs());
        let mut walls = Vec::new();
        let mut line = Vec::new();
        let mut cuts = vec![lo[2], hi[2]];
        for i in 0..rs.n_pos {
            let r = q_to_f64(&rs.roots[i][0]);
            let mmax = (vmax * r.abs() / lo[2]).ceil() as i64;
            for m in -mmax..=mmax {
                let mf = m as f64;
                let norm = (r * r + mf * mf).sqrt();
                // the wall line through the origin of the (v, ξ) plane, direction (m, -r)
                let dir = (mf / norm, -r / norm);
                let dc = dir.0 * c[0] + dir.1 * c[2];
                let disc = dc * dc - (c[0] * c[0] + c[2] * c[2]) + rad * rad;
                if disc <= 0.0 {
                    continue;
                }
                let ends = [dc - disc.sqrt(), dc + disc.sqrt()].map(|s| (s * dir.0, s * dir.1));
                cuts.extend(ends.iter().map(|p| p.1));
                let drop_v = r.abs() >= mf.abs();
                let (t0, t1) = if drop_v { (ends[0].1, ends[1].1) } else { (ends[0].0, ends[1].0) };
                let jac = norm / if drop_v { r.abs() } else { mf.abs() };
                let mut nodes = Vec::with_capacity(order * order);
                for (t, wt) in gauss_legendre_on(order, t0.min(t1), t0.max(t1)) {
                    let (v, xi) = if drop_v { (-mf * t / r, t) } else { (t, -r * t / mf) };
                    let h2 = rad * rad - (v - c[0]).powi(2) - (xi - c[2]).powi(2);
                    if h2 <= 0.0 {
                        continue;
                    }
                    for (u, wu) in gauss_legendre_on(order, c[1] - h2.sqrt(), c[1] + h2.sqrt()) {
                        nodes.push((vec![v, u, xi], wt * wu * jac));
                    }
                }
                let a = if m >= 0 { AffineRoot { root: i, level: m } } else { AffineRoot { root: rs.neg(i), level: -m } };
                walls.push(WallPiece { root: a, dropped: if drop_v { 0 } else { 2 }, nodes });
                line.push((r, mf));
            }
        }
        let cuts = sorted_dedup(cuts.into_iter().filter(|x| *x >= lo[2] && *x <= hi[2]).collect());
        let slices = cuts.windows(2).flat_map(|p| gauss_legendre_on(order, p[0], p[1])).collect();
        Ok(Self { center: c, radius: rad, lo, hi, order, walls, line, slices })
    }

    /// Bounding-box corners as points of `V̂`.
    pub fn corners(&self) -> Vec<HatVector<C64>> {
        (0..8)
            .map(|b: usize| {
                let p: Vec<f64> = (0..3).map(|i| if b >> i & 1 == 1 { self.hi[i] } else { self.lo[i] }).collect();
                to_hat(&p)
            })
            .collect()
    }

    /// The `v` chord at height `ξ`, cut at the walls.
    fn pieces(&self, xi: f64) -> Vec<f64> {
        let h2 = self.radius * self.radius - (xi - self.center[2]).powi(2);
        let h = h2.max(0.0).sqrt();
        let (a, b) = (self.center[0] - h, self.center[0] + h);
        let mut pts = vec![a, b];
        for &(r, m) in &self.line {
            let v = -m * xi / r;
            if v > a && v < b {
                pts.push(v);
            }
        }
        sorted_dedup(pts)
    }

    /// The `η` chord through `(v, ξ)`, if any.
    fn u_chord(&self, v: f64, xi: f64) -> Option<(f64, f64)> {
        let h2 = self.radius * self.radius - (v - self.center[0]).powi(2) - (xi - self.center[2]).powi(2);
        (h2 > 0.0).then(|| (self.center[1] - h2.sqrt(), self.center[1] + h2.sqrt()))
    }

    pub fn bulk_nodes(&self) -> usize {
        self.slices.iter().map(|(xi, _)| (self.pieces(*xi).len() - 1) * self.order * self.order).sum()
    }
}

fn to_hat(p: &[f64]) -> HatVector<C64> {
    let n = p.len() - 2;
    HatVector::new(p[..n].iter().map(|x| C64::new(*x, 0.0)).collect(), C64::new(p[n], 0.0), C64::new(p[n + 1], 0.0))
}

/// Surface contribution of one wall.
#[derive(Clone, Debug)]
pub struct WallTerm {
    pub root: AffineRoot,
    pub hat_norm: f64,
    pub critical_norm: f64,
    /// `k_a` times the chosen [`WallWeight`].
    pub coefficient: C64,
    /// `∫_{H_a} π(s_a) g† φ dσ`.
    pub integral: Block,
}

/// Per-chamber pieces of the bulk integral.
#[derive(Clone, Debug)]
pub struct ChamberTerm {
    pub chamber: AffineWeylElement,
    /// `∫_C g_C Δ̂φ`.
    pub weak: Block,
    /// `∫_C (Δ̂ g_C) φ`.
    pub strong: Block,
}

/// `Ĥ_k^M(g†)(φ)` split into its pieces.
#[derive(Clone, Debug)]
pub struct WeakPairing {
    /// `∫ g† φ`.
    pub mass: Block,
    /// `∫ g† Δ̂φ`.
    pub bulk_hat: Block,
    /// `∫ g† Δφ`.
    pub bulk_fin: Block,
    /// `∫ g† ∂_d φ`.
    pub bulk_dd: Block,
    pub walls: Vec<WallTerm>,
    pub chambers: Vec<ChamberTerm>,
    pub nodes: usize,
}

impl WeakPairing {
    pub fn surface(&self) -> Block {
        let mut out = zero_block(self.mass.len(), self.mass.first().map_or(0, |c| c.len()));
        for w in &self.walls {
            block_axpy(&mut out, w.coefficient, &w.integral);
        }
        out
    }

    /// `∫ g† Δ̂φ + Σ_a k_a w_a ∫_{H_a} π(s_a) g† φ dσ`.
    pub fn hamiltonian(&self) -> Block {
        let mut out = self.bulk_hat.clone();
        block_axpy(&mut out, C64::new(1.0, 0.0), &self.surface());
        out
    }

    /// Per-chamber diagnostics, one CSV row per chamber and matrix entry.
    pub fn chamber_csv(&self) -> String {
        let mut s = String::from("chamber,col,row,weak_re,weak_im,strong_re,strong_im\n");
        for c in &self.chambers {
            for (j, (wc, sc)) in c.weak.iter().zip(&c.strong).enumerate() {
                for (i, (w, st)) in wc.iter().zip(sc).enumerate() {
                    s.push_str(&format!(
                        "\"{:?}\",{j},{i},{:e},{:e},{:e},{:e}\n",
                        c.chamber.y, w.re, w.im, st.re, st.im
                    ));
                }
            }
        }
        s
    }
}

struct SliceSums {
    mass: Block,
    hat: Block,
    fin: Block,
    dd: Block,
    chambers: Vec<(AffineWeylElement, Block, Block)>,
}

/// `Ĥ_k^M(g†)(φ)` by tensor quadrature. Each column of `g` must be continuous
/// across the walls inside the box.
pub fn weak_hamiltonian_apply(
    g: &[PiecewiseFamily<C64>],
    phi: &TestFunction,
    grid: &QuadratureGrid,
    rep: &ModuleRep,
    k: &Multiplicity<C64>,
    weight: WallWeight,
    exec: Exec,
) -> Result<WeakPairing> {
    let first = g.first().ok_or_else(|| Error::InvalidConfig("no columns".into()))?;
    let rs = first.root_system();
    let (ncol, dm) = (g.len(), first.dim_m());
    if phi.dim() != rs.dim + 2 {
        return Err(Error::Dimension(format!("bump in dimension {} for rank {}", phi.dim(), rs.rank())));
    }
    let xi_nodes = &grid.slices;

    // chamber of every piece, and Δ̂ of the components involved
    let mut pieces: Vec<Vec<(f64, f64, AffineWeylElement)>> = Vec::with_capacity(xi_nodes.len());
    let mut laps: HashMap<AffineWeylElement, Vec<Arc<Vvf<C64>>>> = HashMap::new();
    let mut comps: HashMap<AffineWeylElement, Vec<Arc<Vvf<C64>>>> = HashMap::new();
    let mut order: Vec<AffineWeylElement> = Vec::new();
    for (xi, _) in xi_nodes {
        let cr = grid.pieces(*xi);
        let mut row = Vec::with_capacity(cr.len() - 1);
        for p in cr.windows(2) {
            let w = locate_chamber(rs, &to_hat(&[0.5 * (p[0] + p[1]), grid.center[1], *xi]), WALL_TOL)?.chamber_part(rs);
            if !comps.contains_key(&w) {
                let cs: Vec<Arc<Vvf<C64>>> = g.iter().map(|f| f.component(&w)).collect();
                laps.insert(w.clone(), cs.iter().map(|c| Arc::new(c.laplacian_hat())).collect());
                comps.insert(w.clone(), cs);
                order.push(w.clone());
            }
            row.push((p[0], p[1], w));
        }
        pieces.push(row);
    }

    let slice_ids: Vec<usize> = (0..xi_nodes.len()).collect();
    let slices: Vec<SliceSums> = par::map(exec, &slice_ids, |&s| {
        let (xi, wxi) = xi_nodes[s];
        let mut out = SliceSums {
            mass: zero_block(ncol, dm),
            hat: zero_block(ncol, dm),
            fin: zero_block(ncol, dm),
            dd: zero_block(ncol, dm),
            chambers: Vec::new(),
        };
        for (a, b, w) in &pieces[s] {
            let (cs, ls) = (&comps[w], &laps[w]);
            let mut weak = zero_block(ncol, dm);
            let mut strong = zero_block(ncol, dm);
            for (v, wv) in gauss_legendre_on(grid.order, *a, *b) {
                let Some((u0, u1)) = grid.u_chord(v, xi) else { continue };
                for (u, wu) in gauss_legendre_on(grid.order, u0, u1) {
                    let x = [v, u, xi];
                    let val = phi.value(&x);
                    if val == 0.0 {
                        continue;
                    }
                    let wt = wxi * wv * wu;
                    let h = phi.hessian(&x);
                    let grad = phi.gradient(&x);
                    let (lhat, lfin) = (h[0][0] + 2.0 * h[1][2], h[0][0]);
                    let pt = to_hat(&x);
                    for j in 0..ncol {
                        let gv = cs[j].eval(&pt);
                        let lv = ls[j].eval(&pt);
                        for r in 0..dm {
                            out.mass[j][r] += gv[r] * (wt * val);
                            out.hat[j][r] += gv[r] * (wt * lhat);
                            out.fin[j][r] += gv[r] * (wt * lfin);
                            out.dd[j][r] += gv[r] * (wt * grad[2]);
                            weak[j][r] += gv[r] * (wt * lhat);
                            strong[j][r] += lv[r] * (wt * val);
                        }
                    }
                }
            }
            out.chambers.push((w.clone(), weak, strong));
        }
        out
    });

    let one = C64::new(1.0, 0.0);
    let mut mass = zero_block(ncol, dm);
    let mut bulk_hat = zero_block(ncol, dm);
    let mut bulk_fin = zero_block(ncol, dm);
    let mut bulk_dd = zero_block(ncol, dm);
    let mut per: HashMap<AffineWeylElement, (Block, Block)> = HashMap::new();
    for s in &slices {
        block_axpy(&mut mass, one, &s.mass);
        block_axpy(&mut bulk_hat, one, &s.hat);
        block_axpy(&mut bulk_fin, one, &s.fin);
        block_axpy(&mut bulk_dd, one, &s.dd);
        for (w, weak, strong) in &s.chambers {
            let e = per.entry(w.clone()).or_insert_with(|| (zero_block(ncol, dm), zero_block(ncol, dm)));
            block_axpy(&mut e.0, one, weak);
            block_axpy(&mut e.1, one, strong);
        }
    }
    let chambers = order
        .into_iter()
        .map(|w| {
            let (weak, strong) = per.remove(&w).expect("chamber recorded");
            ChamberTerm { chamber: w, weak, strong }
        })
        .collect();

    let walls = par::map(exec, &grid.walls, |piece| wall_term(g, rs, piece, phi, rep, k, weight))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(WeakPairing { mass, bulk_hat, bulk_fin, bulk_dd, walls, chambers, nodes: grid.bulk_nodes() })
}

fn wall_term(
    g: &[PiecewiseFamily<C64>],
    rs: &RootSystem,
    piece: &WallPiece,
    phi: &TestFunction,
    rep: &ModuleRep,
    k: &Multiplicity<C64>,
    weight: WallWeight,
) -> Result<WallTerm> {
    let a = piece.root;
    let (ncol, dm) = (g.len(), g[0].dim_m());
    let sa = AffineWeylElement::reflection(rs, a);
    let pi: Mat<C64> = rep.pi_f(rs, &sa);
    let normal: HatVector<C64> = rs.affine_root_vector::<C64>(a).involution_e();
    let nn = normal.hat_inner(&normal).re.sqrt();
    let mut integral = zero_block(ncol, dm);
    for (x, wt) in &piece.nodes {
        let val = phi.value(x);
        if val == 0.0 {
            continue;
        }
        let pt = to_hat(x);
        let eps = 1e-6 * (1.0 + x.iter().map(|t| t.abs()).fold(0.0, f64::max));
        let off = |s: f64| normal.scale(&C64::new(s * eps / nn, 0.0));
        let wp = locate_chamber(rs, &pt.add(&off(1.0)), WALL_TOL)?.chamber_part(rs);
        let wm = locate_chamber(rs, &pt.add(&off(-1.0)), WALL_TOL)?.chamber_part(rs);
        for (j, f) in g.iter().enumerate() {
            let gv = f.component(&wp).eval(&pt);
            let gm = f.component(&wm).eval(&pt);
            let scale = gv.iter().map(|z| z.norm()).fold(1.0, f64::max);
            let jump = gv.iter().zip(&gm).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
            if jump > 1e-8 * scale {
                return Err(Error::NotContinuous(format!("jump {jump:e} across the wall of {a:?} at {x:?}")));
            }
            let pg = pi.apply(&gv);
            for r in 0..dm {
                integral[j][r] += pg[r] * (wt * val);
            }
        }
    }
    let (hat, crit) = (hat_norm2(rs, a).sqrt(), q_to_f64(&rs.norms[a.root]).sqrt());
    Ok(WallTerm {
        root: a,
        hat_norm: hat,
        critical_norm: crit,
        coefficient: k.get(a) * weight.value(rs, a),
        integral,
    })
}

/// Residual of the weak time-dependent equation for `φ_λ̂ = T(E_M^+(·; λ̂))`.
#[derive(Clone, Debug)]
pub struct NonstationaryReport {
    /// `∫ φ†((-2κ∂_d + Δ)φ) + Σ_a k_a w_a ∫_{H_a} π(s_a) φ† φ dσ`.
    pub lhs: Block,
    /// `(λ̂, λ̂) ∫ φ† φ`.
    pub rhs: Block,
    /// `max |lhs - rhs|` over the largest of the pieces entering it.
    pub residual: f64,
    /// Same, with `Δ̂` in place of `-2κ∂_d + Δ`.
    pub stationary_residual: f64,
    pub scale: f64,
    pub tail_bound: f64,
    pub nodes: usize,
    pub walls: usize,
    /// `H_κ = a(-Δ - Σ_a k_a w_a δ((a,·)) π(s_a)) + b` with `a = 1/(2κ)`, `b = (λ,λ)/(2κ) + η`.
    pub hamiltonian_scale: C64,
    pub hamiltonian_shift: C64,
    pub pairing: WeakPairing,
}

impl NonstationaryReport {
    pub fn to_json(&self) -> Value {
        json!({
            "residual": self.residual,
            "stationary_residual": self.stationary_residual,
            "scale": self.scale,
            "tail_bound": self.tail_bound,
            "nodes": self.nodes,
            "walls": self.walls,
            "lhs": block_json(&self.lhs),
            "rhs": block_json(&self.rhs),
            "hamiltonian": {
                "scale": [self.hamiltonian_scale.re, self.hamiltonian_scale.im],
                "shift": [self.hamiltonian_shift.re, self.hamiltonian_shift.im],
            },
        })
    }
}

#[allow(clippy::too_many_arguments)]
pub fn nonstationary_residual(
    rs: Arc<RootSystem>,
    lam: &HatVector<C64>,
    rep: &ModuleRep,
    k: &Multiplicity<C64>,
    phi: &TestFunction,
    grid: &QuadratureGrid,
    weight: WallWeight,
    tail_target: f64,
    exec: Exec,
) -> Result<NonstationaryReport> {
    let kappa = lam.d;
    if kappa.re <= 0.0 {
        return Err(Error::NotPositiveLevel(kappa.re));
    }
    let (cols, tail_bound) = e_plus_function(&rs, &grid.corners(), lam, rep, k, tail_target)?;
    let fams: Vec<PiecewiseFamily<C64>> = cols.iter().map(|c| propagate_t(rs.clone(), c, rep, k)).collect();
    let pairing = weak_hamiltonian_apply(&fams, phi, grid, rep, k, weight, exec)?;

    let ll = lam.pairing(lam);
    let surface = pairing.surface();
    let (ncol, dm) = (pairing.mass.len(), rep.dim);
    let mut heat = pairing.bulk_fin.clone();
    block_axpy(&mut heat, -kappa * 2.0, &pairing.bulk_dd);
    let mut lhs = heat.clone();
    block_axpy(&mut lhs, C64::new(1.0, 0.0), &surface);
    let mut rhs = zero_block(ncol, dm);
    block_axpy(&mut rhs, ll, &pairing.mass);
    let mut dd2 = zero_block(ncol, dm);
    block_axpy(&mut dd2, kappa * 2.0, &pairing.bulk_dd);
    let scale = [&pairing.bulk_fin, &dd2, &surface, &rhs, &pairing.bulk_hat]
        .iter()
        .map(|b| block_max(b))
        .fold(f64::MIN_POSITIVE, f64::max);
    let residual = block_max(&block_sub(&lhs, &rhs)) / scale;
    let stationary_residual = block_max(&block_sub(&pairing.hamiltonian(), &rhs)) / scale;
    let lam_fin: C64 = lam.fin.iter().map(|z| z * z).sum();
    Ok(NonstationaryReport {
        lhs,
        rhs,
        residual,
        stationary_residual,
        scale,
        tail_bound,
        nodes: pairing.nodes,
        walls: pairing.walls.len(),
        hamiltonian_scale: C64::new(0.5, 0.0) / kappa,
        hamiltonian_shift: lam_fin / (kappa * 2.0) + lam.c,
        pairing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::difference_reflection::propagate_exponential;
    use crate::root_system::{multiplicity_orbits, CartanType, LatticeChoice};

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn sl2() -> Arc<RootSystem> {
        Arc::new(RootSystem::new(CartanType::Sl2, LatticeChoice::Coroot).unwrap())
    }

    fn kval(rs: &RootSystem, x: f64) -> Multiplicity<C64> {
        Multiplicity::uniform(Arc::new(multiplicity_orbits(rs)), c(x))
    }

    fn lam() -> HatVector<C64> {
        HatVector::new(vec![C64::new(0.37, 0.21)], C64::new(0.13, -0.05), c(1.0))
    }

    // crosses the walls of levels 1, 2 and 3 (v = -ξ, -2ξ, -3ξ after reflection)
    fn high_bump() -> TestFunction {
        TestFunction::new(vec![0.6, 0.1, 0.8], 0.5).unwrap()
    }

    // meets only the level-0 wall v = 0
    fn low_bump() -> TestFunction {
        TestFunction::new(vec![0.1, 0.0, 1.0], 0.5).unwrap()
    }

    fn exp_family(rs: &Arc<RootSystem>, k: &Multiplicity<C64>) -> Vec<PiecewiseFamily<C64>> {
        vec![propagate_exponential(rs.clone(), &lam(), &[c(1.0)], &ModuleRep::trivial(rs), k)]
    }

    fn rel(a: &Block, b: &Block) -> f64 {
        block_max(&block_sub(a, b)) / block_max(a).max(block_max(b))
    }

    #[test]
    fn hat_inner_examples() {
        let cc = HatVector::<C64>::c_vec(1);
        let dd = HatVector::<C64>::d_vec(1);
        assert_eq!(cc.hat_inner(&cc), c(1.0));
        assert_eq!(cc.hat_inner(&dd), c(0.0));
        assert_eq!(cc.involution_e(), dd);
        let rs = sl2();
        let a0 = AffineRoot { root: 0, level: 0 };
        assert_eq!(hat_norm2(&rs, a0), 1.0);
        assert_eq!(WallWeight::HatNorm.value(&rs, a0), WallWeight::Critical.value(&rs, a0));
        assert_eq!(WallWeight::Flux.value(&rs, a0), WallWeight::Critical.value(&rs, a0));
        let a2 = AffineRoot { root: 1, level: 2 };
        assert_eq!(hat_norm2(&rs, a2), 5.0);
        assert!((WallWeight::HatNorm.value(&rs, a2) - WallWeight::Critical.value(&rs, a2)).abs() > 1.0);
        assert!((WallWeight::Flux.value(&rs, a2) - 1.0 / 5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn bump_derivatives_match_differences() {
        let phi = TestFunction::new(vec![0.2, -0.1, 1.0], 0.7).unwrap();
        let x = [0.4, 0.1, 1.2];
        let h = 1e-5;
        let g = phi.gradient(&x);
        let hs = phi.hessian(&x);
        for i in 0..3 {
            let mut p = x;
            let mut m = x;
            p[i] += h;
            m[i] -= h;
            assert!(((phi.value(&p) - phi.value(&m)) / (2.0 * h) - g[i]).abs() < 1e-8);
            for j in 0..3 {
                let fd = (phi.gradient(&p)[j] - phi.gradient(&m)[j]) / (2.0 * h);
                assert!((fd - hs[i][j]).abs() < 1e-6, "{i}{j}");
            }
        }
        let lh = hs[0][0] + 2.0 * hs[1][2];
        assert!((phi.laplacian_hat(&x) - lh).abs() < 1e-15);
        assert_eq!(phi.laplacian_fin(&x), hs[0][0]);
        assert_eq!(phi.value(&[0.2, -0.1, 1.71]), 0.0);
    }

    #[test]
    fn support_must_avoid_level_zero() {
        assert!(matches!(TestFunction::new(vec![0.0, 0.0, 0.4], 0.5), Err(Error::InvalidConfig(_))));
        let phi = TestFunction { center: vec![0.0, 0.0, 0.4], radius: 0.5 };
        assert!(matches!(QuadratureGrid::new(&sl2(), &phi, 8), Err(Error::WallEnumerationIncomplete)));
        let a1 = RootSystem::new(CartanType::A(1), LatticeChoice::Coroot).unwrap();
        assert!(matches!(QuadratureGrid::new(&a1, &low_bump(), 8), Err(Error::UnsupportedType(_))));
    }

    #[test]
    fn walls_meeting_the_support_are_enumerated() {
        let rs = sl2();
        for phi in [high_bump(), low_bump(), TestFunction::new(vec![-1.3, 0.0, 0.7], 0.6).unwrap()] {
            let grid = QuadratureGrid::new(&rs, &phi, 4).unwrap();
            // normalize each wall r v + l ξ = 0 (r = ±1) to v + mξ = 0
            let mut got: Vec<(i64, i64)> = grid
                .walls
                .iter()
                .map(|w| (1, w.root.level * q_to_f64(&rs.roots[w.root.root][0]) as i64))
                .collect();
            got.sort();
            // brute force: distance from the center to v + mξ = 0 in the (v, ξ) plane
            let want: Vec<(i64, i64)> = (-50..=50)
                .filter(|m| {
                    let mf = *m as f64;
                    (phi.center[0] + mf * phi.center[2]).abs() / (1.0 + mf * mf).sqrt() < phi.radius
                })
                .map(|m| (1, m))
                .collect();
            assert_eq!(got, want, "{phi:?}");
        }
    }

    #[test]
    fn smooth_case_integrates_by_parts() {
        let rs = sl2();
        let k = kval(&rs, 0.0);
        let phi = high_bump();
        let grid = QuadratureGrid::new(&rs, &phi, 40).unwrap();
        let p = weak_hamiltonian_apply(&exp_family(&rs, &k), &phi, &grid, &ModuleRep::trivial(&rs), &k, WallWeight::Flux, Exec::default())
            .unwrap();
        let mut eig = zero_block(1, 1);
        block_axpy(&mut eig, lam().pairing(&lam()), &p.mass);
        assert!(rel(&p.bulk_hat, &eig) < 1e-4, "{}", rel(&p.bulk_hat, &eig));
        let mut strong = zero_block(1, 1);
        for ch in &p.chambers {
            block_axpy(&mut strong, c(1.0), &ch.strong);
        }
        assert!(rel(&strong, &eig) < 1e-10);
        assert!(block_max(&p.surface()) == 0.0);
    }

    #[test]
    fn propagated_exponential_satisfies_weak_identity() {
        let rs = sl2();
        let k = kval(&rs, 1.0);
        let triv = ModuleRep::trivial(&rs);
        let phi = high_bump();
        let mut errs = Vec::new();
        for n in [16, 32] {
            let grid = QuadratureGrid::new(&rs, &phi, n).unwrap();
            let p = weak_hamiltonian_apply(&exp_family(&rs, &k), &phi, &grid, &triv, &k, WallWeight::Flux, Exec::default()).unwrap();
            let mut eig = zero_block(1, 1);
            block_axpy(&mut eig, lam().pairing(&lam()), &p.mass);
            errs.push(rel(&p.hamiltonian(), &eig));
            // the divergence-theorem bookkeeping: Σ_C ∫_C (Δ̂g)φ - g Δ̂φ is the wall term
            let mut diff = zero_block(1, 1);
            for ch in &p.chambers {
                block_axpy(&mut diff, c(1.0), &ch.strong);
                block_axpy(&mut diff, c(-1.0), &ch.weak);
            }
            assert!(p.chambers.len() >= 3);
            if n == 32 {
                assert!(rel(&diff, &p.surface()) < 1e-3, "{}", rel(&diff, &p.surface()));
            }
        }
        assert!(errs[1] < 1e-3 && errs[1] < errs[0], "{errs:?}");
    }

    #[test]
    fn wrong_jumps_or_weights_break_the_identity() {
        let rs = sl2();
        let (k1, k0) = (kval(&rs, 1.0), kval(&rs, 0.0));
        let triv = ModuleRep::trivial(&rs);
        let check = |phi: &TestFunction, kh: &Multiplicity<C64>, w: WallWeight| {
            let grid = QuadratureGrid::new(&rs, phi, 32).unwrap();
            let p = weak_hamiltonian_apply(&exp_family(&rs, &k1), phi, &grid, &triv, kh, w, Exec::default()).unwrap();
            let mut eig = zero_block(1, 1);
            block_axpy(&mut eig, lam().pairing(&lam()), &p.mass);
            rel(&p.hamiltonian(), &eig)
        };
        // the family carries the k = 1 jumps, the operator none
        assert!(check(&low_bump(), &k0, WallWeight::Flux) > 0.1);
        // on level-0 walls all weights agree
        assert!(check(&low_bump(), &k1, WallWeight::HatNorm) < 1e-3);
        assert!(check(&high_bump(), &k1, WallWeight::Flux) < 1e-3);
        // on walls of level m ≠ 0 only the flux weight balances the jumps
        assert!(check(&high_bump(), &k1, WallWeight::HatNorm) > 0.1);
        assert!(check(&high_bump(), &k1, WallWeight::Critical) > 0.1);
    }

    #[test]
    fn discontinuous_family_is_rejected() {
        let rs = sl2();
        let k = kval(&rs, 0.0);
        let g = Vvf::tensor(&crate::exp_poly::ExpPoly::exp(lam()), &[c(1.0)]);
        let fam = PiecewiseFamily::finite_support(rs.clone(), 1, vec![(AffineWeylElement::identity(1), g)]);
        let phi = low_bump();
        let grid = QuadratureGrid::new(&rs, &phi, 8).unwrap();
        let r = weak_hamiltonian_apply(&[fam], &phi, &grid, &ModuleRep::trivial(&rs), &k, WallWeight::Flux, Exec::default());
        assert!(matches!(r, Err(Error::NotContinuous(_))));
    }

    #[test]
    fn nonstationary_residual_converges() {
        let rs = sl2();
        let k = kval(&rs, 1.0);
        let triv = ModuleRep::trivial(&rs);
        let phi = high_bump();
        let run = |n: usize, exec: Exec| {
            let grid = QuadratureGrid::new(&rs, &phi, n).unwrap();
            nonstationary_residual(rs.clone(), &lam(), &triv, &k, &phi, &grid, WallWeight::Flux, 1e-12, exec).unwrap()
        };
        let (a, b) = (run(12, Exec::default()), run(24, Exec::default()));
        assert!(b.residual < a.residual && b.residual < 1e-3, "{} {}", a.residual, b.residual);
        assert!(b.tail_bound <= 1e-12);
        assert!((b.hamiltonian_scale - c(0.5)).norm() < 1e-15);
        let s = run(12, Exec::Sequential);
        assert_eq!(s.lhs, a.lhs);
        assert_eq!(s.rhs, a.rhs);
        assert!(a.to_json()["residual"].is_number());
        assert!(a.pairing.chamber_csv().lines().count() > 1);
    }
}
