//! TOML run configuration and the commands behind the `cherednik` binary.
//!
//! Every command returns an [`Outcome`] carrying the exit code together with a
//! JSON document and a CSV rendering, so the same code path serves the binary,
//! the integration tests and the thread-count reproducibility check.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::affine_weyl::{omega_generators, random_element, AffineWeylElement, TieBreak};
use crate::bethe_series::{
    adkz_residual, adkz_residual_group, eval_e, eval_e_plus, eval_psi, limit_xi_experiment, steinberg_critical_limit,
    termwise_eigen_check, SeriesResult,
};
use crate::cocycle::{j, j_translation_trivial_product, j_word};
use crate::difference_reflection::{jump_residual_function, point_size, propagate_exponential, wall_points};
use crate::error::{Error, Result};
use crate::exp_poly::Poly;
use crate::hat::HatVector;
use crate::integral_reflection::{
    residual_braid, residual_commute, residual_cross, residual_involution, residual_omega_simple, residual_omega_vector,
    Vvf,
};
use crate::matrix::vneg;
use crate::par::Exec;
use crate::root_system::{
    multiplicity_orbits, AffineRoot, CartanType, LatticeChoice, Multiplicity, OrbitPartition, RootSystem,
};
use crate::sampling;
use crate::scalar::{parse_q, q_to_f64, q_to_string, qi, Cq, Scalar, C64, Q};
use crate::schrodinger_weak::{nonstationary_residual, QuadratureGrid, TestFunction, WallWeight};
use crate::wmodules::ModuleRep;

/// A real number as written in a config: integer, float, or a string such as
/// `"3/7"` or `"-0.25"` (strings are read exactly).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Num {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Num {
    /// Exact value; floats convert to their binary value.
    pub fn to_q(&self) -> Result<Q> {
        match self {
            Num::Int(n) => Ok(qi(*n)),
            Num::Float(x) => Q::from_float(*x).ok_or_else(|| Error::Parse(format!("not a finite number: {x}"))),
            Num::Text(s) => parse_q(s),
        }
    }

    pub fn to_f64(&self) -> Result<f64> {
        match self {
            Num::Float(x) => Ok(*x),
            _ => Ok(q_to_f64(&self.to_q()?)),
        }
    }
}

impl From<f64> for Num {
    fn from(x: f64) -> Self {
        Num::Float(x)
    }
}

/// A complex number: a single real, or `[re, im]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComplexNum {
    Pair([Num; 2]),
    Real(Num),
}

impl ComplexNum {
    pub fn to_cq(&self) -> Result<Cq> {
        match self {
            ComplexNum::Real(x) => Ok(Cq::new(x.to_q()?, qi(0))),
            ComplexNum::Pair([a, b]) => Ok(Cq::new(a.to_q()?, b.to_q()?)),
        }
    }

    pub fn to_c64(&self) -> Result<C64> {
        match self {
            ComplexNum::Real(x) => Ok(C64::new(x.to_f64()?, 0.0)),
            ComplexNum::Pair([a, b]) => Ok(C64::new(a.to_f64()?, b.to_f64()?)),
        }
    }
}

impl Default for ComplexNum {
    fn default() -> Self {
        ComplexNum::Real(Num::Int(0))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arithmetic {
    Exact,
    #[default]
    Float,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub arithmetic: Arithmetic,
    pub root_system: RootSystemConfig,
    #[serde(default)]
    pub multiplicity: MultiplicityConfig,
    #[serde(default)]
    pub module: ModuleConfig,
    #[serde(default)]
    pub spectral: SpectralConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    #[serde(default)]
    pub series: SeriesConfig,
    #[serde(default)]
    pub limits: LimitsConfig,
    #[serde(default)]
    pub weak: WeakConfig,
    #[serde(default)]
    pub checks: ChecksConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RootSystemConfig {
    /// `A1`..`A4`, `B2`, `C2`, `G2`, `sl2`, or `A` together with `rank`.
    #[serde(rename = "type")]
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
    /// `coroot`, `coweight` or `basis`.
    #[serde(rename = "Y", default = "default_lattice")]
    pub lattice: String,
    /// Rows spanning `Y` when `Y = "basis"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<Vec<Vec<Num>>>,
}

fn default_lattice() -> String {
    "coroot".into()
}

/// Either one value per orbit (a single value means uniform), or values on
/// chosen affine roots extended to their orbits. Unset means `k ≡ 1`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiplicityConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<ComplexNum>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assignments: Option<Vec<AssignmentConfig>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssignmentConfig {
    pub root: Vec<Num>,
    #[serde(default)]
    pub level: i64,
    pub value: ComplexNum,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModuleConfig {
    /// `trivial`, `steinberg`, `reflection`, `ambient`, `sign`, `two_dim` or `file`.
    #[serde(default = "default_module")]
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

fn default_module() -> String {
    "trivial".into()
}

impl Default for ModuleConfig {
    fn default() -> Self {
        ModuleConfig { kind: default_module(), path: None }
    }
}

/// `λ̂ = λ + η c + κ d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralConfig {
    #[serde(default)]
    pub lambda: Vec<ComplexNum>,
    #[serde(default)]
    pub eta: ComplexNum,
    #[serde(default = "default_kappa")]
    pub kappa: ComplexNum,
}

fn default_kappa() -> ComplexNum {
    ComplexNum::Real(Num::Int(1))
}

impl Default for SpectralConfig {
    fn default() -> Self {
        SpectralConfig { lambda: vec![], eta: ComplexNum::default(), kappa: default_kappa() }
    }
}

/// `v̂ = v + u c + ξ d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointConfig {
    pub v: Vec<ComplexNum>,
    #[serde(default)]
    pub u: ComplexNum,
    pub xi: ComplexNum,
}

impl PointConfig {
    fn to_hat(&self, dim: usize) -> Result<HatVector<C64>> {
        if self.v.len() != dim {
            return Err(Error::Dimension(format!("point has {} coordinates, expected {dim}", self.v.len())));
        }
        let fin = self.v.iter().map(ComplexNum::to_c64).collect::<Result<_>>()?;
        Ok(HatVector::new(fin, self.u.to_c64()?, self.xi.to_c64()?))
    }
}

/// Cartesian product `v × u × ξ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub v: Vec<Vec<ComplexNum>>,
    #[serde(default = "default_u_grid")]
    pub u: Vec<ComplexNum>,
    pub xi: Vec<ComplexNum>,
}

fn default_u_grid() -> Vec<ComplexNum> {
    vec![ComplexNum::default()]
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationConfig {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub points: Vec<PointConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesConfig {
    #[serde(default = "default_target")]
    pub target_error: f64,
}

fn default_target() -> f64 {
    1e-10
}

impl Default for SeriesConfig {
    fn default() -> Self {
        SeriesConfig { target_error: default_target() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitsConfig {
    /// Finite point for the `ξ → ∞` limit; defaults to the real part of the first evaluation point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<Vec<Num>>,
    #[serde(default = "default_xi_grid")]
    pub xi_grid: Vec<f64>,
    /// Point `v̂` of the critical limit; defaults to the first evaluation point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<PointConfig>,
    /// `x` in the lattice dual to `Y`, with `λ = (2πi/ξ) x`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<Num>>,
    /// Direction `y` of the path `λ + κy + κd`; defaults to the first basis vector of `Y`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_path: Option<Vec<Num>>,
    #[serde(default = "default_kappa_grid")]
    pub kappa_grid: Vec<f64>,
}

fn default_xi_grid() -> Vec<f64> {
    vec![5.0, 10.0, 20.0, 50.0]
}

fn default_kappa_grid() -> Vec<f64> {
    vec![0.1, 0.05, 0.025]
}

impl Default for LimitsConfig {
    fn default() -> Self {
        LimitsConfig {
            v: None,
            xi_grid: default_xi_grid(),
            point: None,
            x: None,
            y_path: None,
            kappa_grid: default_kappa_grid(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeakConfig {
    /// Bump center in coordinates `[v, η, ξ]`.
    #[serde(default = "default_center")]
    pub center: Vec<f64>,
    #[serde(default = "default_radius")]
    pub radius: f64,
    /// Gauss-Legendre orders per direction, coarse to fine.
    #[serde(default = "default_orders")]
    pub orders: Vec<usize>,
    /// `flux`, `hat` or `critical`.
    #[serde(default = "default_weight")]
    pub weight: String,
    #[serde(default = "default_tail")]
    pub tail_target: f64,
    #[serde(default = "default_weak_bound")]
    pub bound: f64,
    /// Bound for the `k = 0` control at the finest order.
    #[serde(default = "default_control_bound")]
    pub control_bound: f64,
}

fn default_center() -> Vec<f64> {
    vec![0.6, 0.1, 0.8]
}
fn default_radius() -> f64 {
    0.5
}
fn default_orders() -> Vec<usize> {
    vec![32, 64]
}
fn default_weight() -> String {
    "flux".into()
}
fn default_tail() -> f64 {
    1e-12
}
fn default_weak_bound() -> f64 {
    1e-3
}
fn default_control_bound() -> f64 {
    1e-8
}

impl Default for WeakConfig {
    fn default() -> Self {
        WeakConfig {
            center: default_center(),
            radius: default_radius(),
            orders: default_orders(),
            weight: default_weight(),
            tail_target: default_tail(),
            bound: default_weak_bound(),
            control_bound: default_control_bound(),
        }
    }
}

/// Sample counts and tolerances of `verify`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChecksConfig {
    /// Random exp-poly inputs per algebra relation.
    pub samples: usize,
    /// Exponential terms and polynomial degree of each input.
    pub input_terms: usize,
    pub input_degree: u32,
    pub cocycle_samples: usize,
    pub max_length: usize,
    pub wall_points: usize,
    pub wall_half_width: i64,
    /// Degree of the general `p(∂)` in the float jump check.
    pub poly_degree: u32,
    /// Evaluation points, spectral parameters and lattice vectors of the adKZ grid.
    pub points: usize,
    pub lambdas: usize,
    pub ys: usize,
    pub adkz_bound: f64,
    /// Relative tolerance of float-mode identities.
    pub float_tol: f64,
    pub eigen_radius: f64,
}

impl Default for ChecksConfig {
    fn default() -> Self {
        ChecksConfig {
            samples: 50,
            input_terms: 2,
            input_degree: 1,
            cocycle_samples: 100,
            max_length: 8,
            wall_points: 50,
            wall_half_width: 2,
            poly_degree: 3,
            points: 3,
            lambdas: 3,
            ys: 3,
            adkz_bound: 1e-8,
            float_tol: 1e-10,
            eigen_radius: 3.0,
        }
    }
}

impl RunConfig {
    pub fn from_toml(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn cartan(&self) -> Result<CartanType> {
        let kind = self.root_system.kind.trim();
        match self.root_system.rank {
            Some(r) if kind.eq_ignore_ascii_case("A") => format!("A{r}").parse(),
            Some(r) => {
                let t: CartanType = kind.parse()?;
                let actual = match t {
                    CartanType::A(n) => n,
                    CartanType::Sl2 => 1,
                    _ => 2,
                };
                if actual != r {
                    return Err(Error::InvalidConfig(format!("type {kind} has rank {actual}, not {r}")));
                }
                Ok(t)
            }
            None => kind.parse(),
        }
    }

    pub fn lattice(&self) -> Result<LatticeChoice> {
        match self.root_system.lattice.trim().to_ascii_lowercase().as_str() {
            "coroot" => Ok(LatticeChoice::Coroot),
            "coweight" => Ok(LatticeChoice::Coweight),
            "basis" => {
                let rows = self
                    .root_system
                    .basis
                    .as_ref()
                    .ok_or_else(|| Error::InvalidConfig("Y = \"basis\" needs root_system.basis".into()))?;
                let rows = rows.iter().map(|r| r.iter().map(Num::to_q).collect()).collect::<Result<_>>()?;
                Ok(LatticeChoice::Basis(rows))
            }
            other => Err(Error::InvalidConfig(format!("unknown lattice {other:?}"))),
        }
    }

    /// Resolves the configuration into the objects the commands work with.
    pub fn setup(&self) -> Result<Setup> {
        let rs = Arc::new(RootSystem::new(self.cartan()?, self.lattice()?)?);
        let partition = Arc::new(multiplicity_orbits(&rs));
        let k = self.multiplicity_q(&rs, partition.clone())?;
        let k_f = k.map(|x| x.to_c64());
        let rep = self.module_rep(&rs)?;
        let sp = &self.spectral;
        let fin: Vec<Cq> = if sp.lambda.is_empty() {
            vec![Cq::zero(); rs.dim]
        } else {
            sp.lambda.iter().map(ComplexNum::to_cq).collect::<Result<_>>()?
        };
        if fin.len() != rs.dim {
            return Err(Error::Dimension(format!("lambda has {} coordinates, expected {}", fin.len(), rs.dim)));
        }
        let lam = HatVector::new(fin, sp.eta.to_cq()?, sp.kappa.to_cq()?);
        let mut lam_f = lam.map(|x| x.to_c64());
        // keep the float parameter identical to the literal floats of the file
        if !sp.lambda.is_empty() {
            lam_f.fin = sp.lambda.iter().map(ComplexNum::to_c64).collect::<Result<_>>()?;
        }
        lam_f.c = sp.eta.to_c64()?;
        lam_f.d = sp.kappa.to_c64()?;
        let points = self.points(rs.dim)?;
        Ok(Setup { rs, partition, k, k_f, rep, lam, lam_f, points })
    }

    fn multiplicity_q(&self, rs: &RootSystem, partition: Arc<OrbitPartition>) -> Result<Multiplicity<Cq>> {
        let m = &self.multiplicity;
        match (&m.values, &m.assignments) {
            (Some(_), Some(_)) => Err(Error::InvalidConfig("give multiplicity values or assignments, not both".into())),
            (None, None) => Ok(Multiplicity::uniform(partition, Cq::one())),
            (Some(vals), None) => {
                let vals: Vec<Cq> = vals.iter().map(ComplexNum::to_cq).collect::<Result<_>>()?;
                if vals.len() == 1 {
                    Ok(Multiplicity::uniform(partition, vals[0].clone()))
                } else {
                    Multiplicity::from_orbit_values(partition, vals)
                }
            }
            (None, Some(asg)) => {
                let mut out = vec![];
                for a in asg {
                    let root: Vec<Q> = a.root.iter().map(Num::to_q).collect::<Result<_>>()?;
                    let idx = rs
                        .index_of(&root)
                        .ok_or_else(|| Error::InvalidConfig(format!("{:?} is not a root", a.root)))?;
                    out.push((AffineRoot { root: idx, level: a.level }, a.value.to_cq()?));
                }
                Multiplicity::from_assignments(partition, &out)
            }
        }
    }

    fn module_rep(&self, rs: &RootSystem) -> Result<ModuleRep> {
        match self.module.kind.trim().to_ascii_lowercase().as_str() {
            "trivial" => Ok(ModuleRep::trivial(rs)),
            "steinberg" => Ok(ModuleRep::steinberg(rs)),
            "reflection" => ModuleRep::reflection(rs),
            "ambient" => ModuleRep::ambient(rs),
            "sign" => ModuleRep::sign_pullback(rs),
            "two_dim" => ModuleRep::two_dim(rs),
            "file" => {
                let path = self
                    .module
                    .path
                    .as_ref()
                    .ok_or_else(|| Error::InvalidConfig("module kind \"file\" needs module.path".into()))?;
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::InvalidConfig(format!("cannot read module {path}: {e}")))?;
                let v: Value = serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
                ModuleRep::from_json(rs, &v)
            }
            other => Err(Error::InvalidConfig(format!("unknown module kind {other:?}"))),
        }
    }

    fn points(&self, dim: usize) -> Result<Vec<HatVector<C64>>> {
        let mut out: Vec<_> = self.evaluation.points.iter().map(|p| p.to_hat(dim)).collect::<Result<_>>()?;
        if let Some(g) = &self.evaluation.grid {
            for v in &g.v {
                for u in &g.u {
                    for xi in &g.xi {
                        out.push(PointConfig { v: v.clone(), u: u.clone(), xi: xi.clone() }.to_hat(dim)?);
                    }
                }
            }
        }
        Ok(out)
    }
}

/// A resolved configuration.
pub struct Setup {
    pub rs: Arc<RootSystem>,
    pub partition: Arc<OrbitPartition>,
    pub k: Multiplicity<Cq>,
    pub k_f: Multiplicity<C64>,
    pub rep: ModuleRep,
    pub lam: HatVector<Cq>,
    pub lam_f: HatVector<C64>,
    pub points: Vec<HatVector<C64>>,
}

/// Exit status for an error: 2 for bad input, 3 for mathematical domain
/// problems, 1 for failed identities.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidConfig(_)
        | Error::Parse(_)
        | Error::UnsupportedType(_)
        | Error::InvalidLattice(_)
        | Error::NonInvariantMultiplicity(_)
        | Error::LevelDependentK(_)
        | Error::Dimension(_)
        | Error::ParityViolation(_)
        | Error::WallEnumerationIncomplete => 2,
        Error::SingularSpectralPoint(_)
        | Error::DomainViolation(_)
        | Error::OnWall(..)
        | Error::NotPositiveLevel(_)
        | Error::NoConvergence(_) => 3,
        Error::RelationFailure(_) | Error::NotOnWall(_) | Error::NotContinuous(_) => 1,
    }
}

fn error_kind(e: &Error) -> String {
    let s = format!("{e:?}");
    s.split(['(', ' ']).next().unwrap_or("Error").to_string()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(Error::InvalidConfig(format!("unknown format {s:?}"))),
        }
    }
}

/// Result of a command.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub json: Value,
    pub csv: String,
}

impl Outcome {
    pub fn from_error(e: &Error) -> Self {
        let msg = e.to_string();
        Outcome {
            code: exit_code(e),
            json: json!({ "error": msg, "kind": error_kind(e) }),
            csv: format!("error,kind\n{},{}\n", csv_escape(&msg), error_kind(e)),
        }
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => serde_json::to_string_pretty(&self.json).expect("JSON values serialize") + "\n",
            Format::Csv => self.csv.clone(),
        }
    }
}

fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// One line of a `verify` report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub suite: String,
    pub name: String,
    pub samples: usize,
    pub residual: f64,
    pub bound: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Value::is_null")]
    pub detail: Value,
}

impl Check {
    fn new(suite: &str, name: &str, samples: usize, residual: f64, bound: f64) -> Self {
        Check {
            suite: suite.into(),
            name: name.into(),
            samples,
            residual,
            bound,
            pass: residual <= bound,
            detail: Value::Null,
        }
    }

    fn with_detail(mut self, detail: Value) -> Self {
        self.detail = detail;
        self
    }
}

pub const SUITES: [&str; 6] = ["algebra", "cocycle", "adkz", "jump", "eigen", "weak"];

/// Runs one suite (or `all`) and returns its checks.
pub fn verify_checks(cfg: &RunConfig, suite: &str) -> Result<Vec<Check>> {
    let setup = cfg.setup()?;
    let names: Vec<&str> = if suite == "all" {
        SUITES.to_vec()
    } else if SUITES.contains(&suite) {
        vec![suite]
    } else {
        return Err(Error::InvalidConfig(format!("unknown suite {suite:?}; expected all or one of {SUITES:?}")));
    };
    let mut out = vec![];
    for name in names {
        // the weak identity is implemented for one-dimensional realizations only
        if suite == "all" && name == "weak" && setup.rs.dim != 1 {
            continue;
        }
        out.extend(run_suite(name, cfg, &setup)?);
    }
    Ok(out)
}

fn run_suite(name: &str, cfg: &RunConfig, s: &Setup) -> Result<Vec<Check>> {
    let seed = cfg.seed;
    let exact = cfg.arithmetic == Arithmetic::Exact;
    let c = &cfg.checks;
    match name {
        "algebra" => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            if exact {
                Ok(algebra_suite(s, &s.k, c, &mut rng, 0.0, Vvf::clone, HatVector::clone))
            } else {
                Ok(algebra_suite(s, &s.k_f, c, &mut rng, c.float_tol, Vvf::to_c64, |h: &HatVector<Cq>| {
                    h.map(|x| x.to_c64())
                }))
            }
        }
        "cocycle" => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
            if exact {
                cocycle_suite(s, &s.k, c, &mut rng, 0.0, HatVector::clone)
            } else {
                cocycle_suite(s, &s.k_f, c, &mut rng, c.float_tol, |h: &HatVector<Cq>| h.map(|x| x.to_c64()))
            }
        }
        "adkz" => adkz_suite(s, cfg, &mut ChaCha8Rng::seed_from_u64(seed.wrapping_add(2))),
        "jump" => jump_suite(s, c, exact, &mut ChaCha8Rng::seed_from_u64(seed.wrapping_add(3))),
        "eigen" => eigen_suite(s, c),
        "weak" => weak_suite(s, &cfg.weak),
        _ => unreachable!("suite names are checked by the caller"),
    }
}

fn relative(residual: f64, scale: f64) -> f64 {
    residual / scale.max(1.0)
}

#[allow(clippy::too_many_arguments)]
fn algebra_suite<F: Scalar, R: Rng>(
    s: &Setup,
    k: &Multiplicity<F>,
    c: &ChecksConfig,
    rng: &mut R,
    tol: f64,
    conv: impl Fn(&Vvf<Cq>) -> Vvf<F>,
    convh: impl Fn(&HatVector<Cq>) -> HatVector<F>,
) -> Vec<Check> {
    let rs = &*s.rs;
    let (n, dim, dm) = (c.samples, rs.dim, s.rep.dim);
    let nodes = rs.rank() + 1;
    let omegas: Vec<_> = omega_generators(rs).into_iter().filter(|o| !o.is_identity()).collect();
    let draw = |rng: &mut R| {
        let g = sampling::vvf(rng, dim, dm, c.input_terms, c.input_degree);
        let scale = g.residual_size();
        (conv(&g), scale)
    };
    let mut worst = [0.0f64; 6];
    for _ in 0..n {
        let (g, sc) = draw(rng);
        for i in 0..nodes {
            worst[0] = worst[0].max(relative(residual_involution(rs, i, &g, &s.rep, k).residual_size(), sc));
        }
        let (g, sc) = draw(rng);
        for i in 0..nodes {
            for jj in i + 1..nodes {
                if let Some(r) = residual_braid(rs, i, jj, &g, &s.rep, k) {
                    worst[1] = worst[1].max(relative(r.residual_size(), sc));
                }
            }
        }
        let (g, sc) = draw(rng);
        for i in 0..nodes {
            let v = convh(&sampling::hat_q(rng, dim, 5, 3));
            worst[2] = worst[2].max(relative(residual_cross(rs, i, &v, &g, &s.rep, k).residual_size(), sc));
        }
        let (g, sc) = draw(rng);
        let (v, vp) = (convh(&sampling::hat_q(rng, dim, 5, 3)), convh(&sampling::hat_q(rng, dim, 5, 3)));
        worst[3] = worst[3].max(relative(residual_commute(&v, &vp, &g).residual_size(), sc));
        if !omegas.is_empty() {
            let (g, sc) = draw(rng);
            for om in &omegas {
                for i in 0..nodes {
                    worst[4] = worst[4].max(relative(residual_omega_simple(rs, om, i, &g, &s.rep, k).residual_size(), sc));
                }
                let v = convh(&sampling::hat_q(rng, dim, 5, 3));
                worst[5] = worst[5].max(relative(residual_omega_vector(rs, om, &v, &g, &s.rep).residual_size(), sc));
            }
        }
    }
    let names = ["involution", "braid", "cross", "commute", "omega_simple", "omega_vector"];
    let count = if omegas.is_empty() { 4 } else { 6 };
    (0..count).map(|r| Check::new("algebra", names[r], n, worst[r], tol)).collect()
}

fn cocycle_suite<F: Scalar, R: Rng>(
    s: &Setup,
    k: &Multiplicity<F>,
    c: &ChecksConfig,
    rng: &mut R,
    tol: f64,
    convh: impl Fn(&HatVector<Cq>) -> HatVector<F>,
) -> Result<Vec<Check>> {
    let rs = &*s.rs;
    let rep = &s.rep;
    let random_w = |rng: &mut R| loop {
        let len = rng.gen_range(2..=c.max_length.max(2));
        let w = random_element(rs, rng, len);
        if (1..=c.max_length).contains(&w.length(rs)) {
            return w;
        }
    };
    let mut words = 0.0f64;
    let mut distinct = 0;
    let mut cocycle = 0.0f64;
    let mut closed = 0.0f64;
    let mut closed_count = 0;
    let closed_ok = rep.is_translation_trivial() && rep.dim == 1 && s.k.is_level_independent();
    for _ in 0..c.cocycle_samples {
        let lam_q = sampling::regular_lambda(rng, rs, &s.k);
        let lam = convh(&lam_q);
        let w = random_w(rng);
        let (om1, w1) = w.reduced_word_with(rs, TieBreak::Lowest);
        let (om2, w2) = w.reduced_word_with(rs, TieBreak::Highest);
        distinct += usize::from(w1 != w2);
        let a = j_word(rs, &om1, &w1, &lam, rep, k)?;
        let b = j_word(rs, &om2, &w2, &lam, rep, k)?;
        words = words.max(relative(a.max_abs_diff(&b), a.to_c64().op_norm()));
        // J_{uw}(λ̂) = J_u(wλ̂) J_w(λ̂)
        let u = random_w(rng);
        let lhs = j(rs, &u.mul(&w), &lam, rep, k)?;
        let rhs = j(rs, &u, &w.act(&lam), rep, k)?.mul(&a);
        cocycle = cocycle.max(relative(lhs.max_abs_diff(&rhs), lhs.to_c64().op_norm()));
        if closed_ok {
            for y in &rs.y_basis {
                for y in [y.clone(), vneg(y)] {
                    let t = AffineWeylElement::translation(&y);
                    let jm = j(rs, &t, &lam, rep, k)?;
                    let prod = j_translation_trivial_product(rs, &y, &lam, k)?;
                    closed = closed.max(relative((jm[(0, 0)].clone() - prod).abs(), jm[(0, 0)].abs()));
                    closed_count += 1;
                }
            }
        }
    }
    let mut out = vec![
        Check::new("cocycle", "reduced_words", c.cocycle_samples, words, tol).with_detail(json!({ "distinct_word_pairs": distinct })),
        Check::new("cocycle", "cocycle_identity", c.cocycle_samples, cocycle, tol),
    ];
    if closed_ok {
        out.push(Check::new("cocycle", "translation_product", closed_count, closed, tol));
    }
    Ok(out)
}

/// Lattice vectors for the adKZ grid: basis vectors, their negatives, then sums.
fn y_candidates(rs: &RootSystem, count: usize) -> Vec<Vec<Q>> {
    let mut out: Vec<Vec<Q>> = vec![];
    out.extend(rs.y_basis.iter().cloned());
    out.extend(rs.y_basis.iter().map(|y| vneg(y)));
    for (i, a) in rs.y_basis.iter().enumerate() {
        for b in &rs.y_basis[i..] {
            out.push(a.iter().zip(b).map(|(x, y)| x + y).collect());
        }
    }
    out.truncate(count);
    out
}

fn adkz_suite<R: Rng>(s: &Setup, cfg: &RunConfig, rng: &mut R) -> Result<Vec<Check>> {
    let c = &cfg.checks;
    let rs = &*s.rs;
    let target = cfg.series.target_error;
    if s.points.is_empty() {
        return Err(Error::InvalidConfig("adkz needs evaluation points".into()));
    }
    let points: Vec<_> = s.points.iter().take(c.points).cloned().collect();
    let mut lams = vec![s.lam_f.clone()];
    while lams.len() < c.lambdas {
        let mut l = s.lam_f.clone();
        for a in &rs.simple {
            let z = C64::new(rng.gen_range(-0.05..0.05), rng.gen_range(-0.05..0.05));
            for (x, ai) in l.fin.iter_mut().zip(a) {
                *x += z * q_to_f64(ai);
            }
        }
        lams.push(l);
    }
    let ys = y_candidates(rs, c.ys);
    let finite_simple: Vec<_> = (1..=rs.rank()).map(|i| AffineWeylElement::simple(rs, i)).collect();
    let (mut e_res, mut p_res, mut w_res) = (0.0f64, 0.0f64, 0.0f64);
    let (mut e_ok, mut p_ok, mut w_ok) = (true, true, true);
    let mut n = 0;
    for v in &points {
        let psi_e = |l: &HatVector<C64>| eval_e(rs, v, l, &s.rep, &s.k_f, target);
        let psi_p = |l: &HatVector<C64>| eval_e_plus(rs, v, l, &s.rep, &s.k_f, target);
        for lam in &lams {
            for y in &ys {
                let chk = adkz_residual(&psi_e, rs, y, lam, &s.rep, &s.k_f)?;
                e_res = e_res.max(chk.residual);
                e_ok &= chk.passes() && chk.residual <= c.adkz_bound;
                let t = AffineWeylElement::translation(y);
                let chk = adkz_residual_group(&psi_p, rs, &t, lam, &s.rep, &s.k_f)?;
                p_res = p_res.max(chk.residual);
                p_ok &= chk.passes() && chk.residual <= c.adkz_bound;
                n += 1;
            }
            for w in &finite_simple {
                let chk = adkz_residual_group(&psi_p, rs, w, lam, &s.rep, &s.k_f)?;
                w_res = w_res.max(chk.residual);
                w_ok &= chk.passes() && chk.residual <= c.adkz_bound;
            }
        }
    }
    let mk = |name: &str, samples: usize, res: f64, ok: bool| {
        let mut ch = Check::new("adkz", name, samples, res, c.adkz_bound);
        ch.pass = ok;
        ch
    };
    let nw = points.len() * lams.len() * finite_simple.len();
    Ok(vec![
        mk("E_translation", n, e_res, e_ok),
        mk("Eplus_translation", n, p_res, p_ok),
        mk("Eplus_finite_weyl", nw, w_res, w_ok),
    ])
}

/// Positive affine roots of level 0 and 1.
fn low_walls(rs: &RootSystem) -> Vec<AffineRoot> {
    let mut out: Vec<_> = (0..rs.n_pos).map(|root| AffineRoot { root, level: 0 }).collect();
    out.extend((0..rs.num_roots()).map(|root| AffineRoot { root, level: 1 }));
    out
}

fn jump_suite<R: Rng>(s: &Setup, c: &ChecksConfig, exact: bool, rng: &mut R) -> Result<Vec<Check>> {
    let rs = &*s.rs;
    let dim = rs.dim;
    let n = dim + 2;
    let lam = sampling::regular_lambda(rng, rs, &s.k);
    let m: Vec<Cq> = (0..s.rep.dim).map(|_| Cq::from_q(&sampling::rational(rng, 5, 3))).collect();
    let f_q = propagate_exponential(s.rs.clone(), &lam, &m, &s.rep, &s.k);
    let lam_f = lam.map(|x| x.to_c64());
    let m_f: Vec<C64> = m.iter().map(|x| x.to_c64()).collect();
    let f_f = propagate_exponential(s.rs.clone(), &lam_f, &m_f, &s.rep, &s.k_f);
    let tol = if exact { 0.0 } else { c.float_tol };
    let walls = low_walls(rs);
    let (mut cont, mut deriv, mut general) = (0.0f64, 0.0f64, 0.0f64);
    for &b in &walls {
        let (w, i) = sampling::chamber_with_wall(rs, b, 16)
            .ok_or_else(|| Error::RelationFailure(format!("no chamber with wall {b:?} found")))?;
        let pts = wall_points(rs, b, rng, c.wall_points, c.wall_half_width);
        let one = Poly::constant(n, Cq::one());
        let coef: Vec<Cq> = (0..n).map(|_| Cq::from_q(&sampling::rational(rng, 5, 3))).collect();
        let lin = Poly::linear(&coef, Cq::zero());
        let gen = sampling::poly(rng, dim, c.poly_degree);
        for (p, slot) in [(&one, &mut cont), (&lin, &mut deriv)] {
            if exact {
                let r = jump_residual_function(&f_q, &w, i, p, &s.rep, &s.k)?;
                for x in &pts {
                    *slot = slot.max(point_size(&r, x));
                }
            } else {
                let pf = p.map(|z| z.to_c64());
                *slot = slot.max(float_jump(&f_f, &w, i, &pf, &pts, s)?);
            }
        }
        let gf = gen.map(|z| z.to_c64());
        general = general.max(float_jump(&f_f, &w, i, &gf, &pts, s)?);
    }
    let count = walls.len() * c.wall_points;
    let detail = json!({ "walls": walls.len(), "arithmetic": if exact { "exact" } else { "float" } });
    Ok(vec![
        Check::new("jump", "continuity", count, cont, tol).with_detail(detail.clone()),
        Check::new("jump", "derivative_jump", count, deriv, tol).with_detail(detail),
        Check::new("jump", "general_p", count, general, c.float_tol)
            .with_detail(json!({ "degree": c.poly_degree, "arithmetic": "float" })),
    ])
}

/// Largest jump residual over `pts`, relative to the size of the two one-sided terms.
fn float_jump(
    f: &crate::difference_reflection::PiecewiseFamily<C64>,
    w: &AffineWeylElement,
    i: usize,
    p: &Poly<C64>,
    pts: &[HatVector<Cq>],
    s: &Setup,
) -> Result<f64> {
    let rs = &*s.rs;
    let b = w.act_root(rs, rs.affine_simple_roots()[i]);
    let sb = AffineWeylElement::reflection(rs, b);
    let r = jump_residual_function(f, w, i, p, &s.rep, &s.k_f)?;
    let here = f.component(w).map_comps(|c| c.apply_poly_diffop(p));
    let there = f.component(&sb.mul(w)).map_comps(|c| c.apply_poly_diffop(p));
    let norm = |v: Vec<C64>| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let mut worst = 0.0f64;
    for x in pts {
        let xc = x.map(|t| t.to_c64());
        let scale = norm(here.eval(&xc)) + norm(there.eval(&xc));
        worst = worst.max(norm(r.eval(&xc)) / scale.max(f64::MIN_POSITIVE));
    }
    Ok(worst)
}

fn eigen_suite(s: &Setup, c: &ChecksConfig) -> Result<Vec<Check>> {
    let (n, eig) = termwise_eigen_check(&s.rs, &s.lam, c.eigen_radius)?;
    let lam = &s.lam;
    let expect = lam.fin.iter().fold(Cq::zero(), |acc, x| acc + x.clone() * x.clone())
        + lam.c.clone() * lam.d.clone() * Cq::from_i64(2);
    let detail = json!({
        "laplacian": [q_to_string(&eig.re), q_to_string(&eig.im)],
        "d_c": [q_to_string(&lam.d.re), q_to_string(&lam.d.im)],
    });
    Ok(vec![Check::new("eigen", "termwise", n, (eig - expect).abs(), 0.0).with_detail(detail)])
}

fn weak_suite(s: &Setup, w: &WeakConfig) -> Result<Vec<Check>> {
    if w.orders.is_empty() {
        return Err(Error::InvalidConfig("weak.orders is empty".into()));
    }
    let phi = TestFunction::new(w.center.clone(), w.radius)?;
    let weight = WallWeight::parse(&w.weight)?;
    let k0 = Multiplicity::<C64>::zero(s.partition.clone());
    let mut residuals = vec![];
    let mut walls = 0;
    for &order in &w.orders {
        let grid = QuadratureGrid::new(&s.rs, &phi, order)?;
        let rep = nonstationary_residual(s.rs.clone(), &s.lam_f, &s.rep, &s.k_f, &phi, &grid, weight, w.tail_target, Exec::default())?;
        walls = rep.walls;
        residuals.push(rep.residual);
    }
    let finest = *w.orders.last().unwrap();
    let grid = QuadratureGrid::new(&s.rs, &phi, finest)?;
    let control = nonstationary_residual(s.rs.clone(), &s.lam_f, &s.rep, &k0, &phi, &grid, weight, w.tail_target, Exec::default())?;
    let last = *residuals.last().unwrap();
    let decreasing = residuals.windows(2).all(|p| p[1] < p[0]);
    let mut main = Check::new("weak", "residual", w.orders.len(), last, w.bound)
        .with_detail(json!({ "orders": w.orders, "residuals": residuals, "walls": walls, "weight": w.weight }));
    main.pass &= decreasing;
    Ok(vec![main, Check::new("weak", "k0_control", 1, control.residual, w.control_bound)])
}

fn checks_outcome(cfg: &RunConfig, suite: &str, checks: Vec<Check>) -> Outcome {
    let pass = checks.iter().all(|c| c.pass);
    let mut csv = String::from("suite,name,samples,residual,bound,pass\n");
    for c in &checks {
        csv.push_str(&format!("{},{},{},{:.6e},{:.1e},{}\n", c.suite, c.name, c.samples, c.residual, c.bound, c.pass));
    }
    Outcome {
        code: if pass { 0 } else { 1 },
        json: json!({
            "suite": suite,
            "root_system": cfg.root_system.kind,
            "module": cfg.module.kind,
            "arithmetic": cfg.arithmetic,
            "seed": cfg.seed,
            "pass": pass,
            "checks": checks,
        }),
        csv,
    }
}

/// `verify <suite>`: exit code 0 if every check passes, 1 otherwise.
pub fn cmd_verify(cfg: &RunConfig, suite: &str) -> Outcome {
    match verify_checks(cfg, suite) {
        Ok(checks) => checks_outcome(cfg, suite, checks),
        Err(e) => Outcome::from_error(&e),
    }
}

/// Quantities `eval` can tabulate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quantity {
    E,
    EPlus,
    Psi,
    Theta,
}

impl FromStr for Quantity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "e" => Ok(Quantity::E),
            "eplus" | "e_plus" | "e+" => Ok(Quantity::EPlus),
            "psi" => Ok(Quantity::Psi),
            "theta" => Ok(Quantity::Theta),
            _ => Err(Error::InvalidConfig(format!("unknown quantity {s:?}; expected E, Eplus, psi or theta"))),
        }
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Quantity::E => "E",
            Quantity::EPlus => "Eplus",
            Quantity::Psi => "psi",
            Quantity::Theta => "theta",
        })
    }
}

fn evaluate(cfg: &RunConfig, what: Quantity) -> Result<(Setup, Vec<SeriesResult>, usize)> {
    let s = cfg.setup()?;
    if s.points.is_empty() {
        return Err(Error::InvalidConfig("no evaluation points".into()));
    }
    let rs = &*s.rs;
    let target = cfg.series.target_error;
    let steinberg = ModuleRep::steinberg(rs);
    let k0 = Multiplicity::<C64>::zero(s.partition.clone());
    let mut rows = vec![];
    for v in &s.points {
        rows.push(match what {
            Quantity::E => eval_e(rs, v, &s.lam_f, &s.rep, &s.k_f, target)?,
            Quantity::EPlus => eval_e_plus(rs, v, &s.lam_f, &s.rep, &s.k_f, target)?,
            Quantity::Theta => eval_e(rs, v, &s.lam_f, &steinberg, &k0, target)?,
            Quantity::Psi => SeriesResult {
                value: eval_psi(rs, &v.fin, &s.lam_f.fin, &s.rep, &s.k_f)?,
                tail_bound: 0.0,
                rounding_bound: 0.0,
                cutoff: 0.0,
                terms_summed: 0,
            },
        });
    }
    let dim_m = if what == Quantity::Theta { 1 } else { s.rep.dim };
    Ok((s, rows, dim_m))
}

/// `eval <quantity>` at every configured point, with tail and rounding bounds.
pub fn cmd_eval(cfg: &RunConfig, what: Quantity) -> Outcome {
    let (s, rows, dim_m) = match evaluate(cfg, what) {
        Ok(x) => x,
        Err(e) => return Outcome::from_error(&e),
    };
    let n = s.rs.dim;
    let mut header: Vec<String> = vec!["point".into()];
    for i in 0..n {
        header.push(format!("v{i}_re"));
        header.push(format!("v{i}_im"));
    }
    header.extend(["u_re", "u_im", "xi_re", "xi_im"].map(String::from));
    header.extend(SeriesResult::csv_columns(dim_m));
    let mut csv = header.join(",") + "\n";
    let mut out = vec![];
    for (idx, (v, r)) in s.points.iter().zip(&rows).enumerate() {
        let coords = v.coords();
        let mut fields = vec![idx.to_string()];
        for z in &coords {
            fields.push(format!("{:.17e}", z.re));
            fields.push(format!("{:.17e}", z.im));
        }
        fields.extend(r.csv_fields());
        csv.push_str(&(fields.join(",") + "\n"));
        let mut row = r.to_json();
        row["point"] = json!(coords.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>());
        out.push(row);
    }
    Outcome { code: 0, json: json!({ "quantity": what.to_string(), "rows": out }), csv }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Limit {
    XiInfinity,
    SteinbergCritical,
}

impl FromStr for Limit {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "xi_infinity" => Ok(Limit::XiInfinity),
            "steinberg_critical" => Ok(Limit::SteinbergCritical),
            _ => Err(Error::InvalidConfig(format!("unknown limit {s:?}; expected xi_infinity or steinberg_critical"))),
        }
    }
}

/// Deviation series of a limit; column 0 is the parameter, column 1 the deviation.
pub fn limit_rows(cfg: &RunConfig, which: Limit) -> Result<(Vec<[f64; 2]>, Value)> {
    let s = cfg.setup()?;
    let rs = &*s.rs;
    let target = cfg.series.target_error;
    let l = &cfg.limits;
    let first = || s.points.first().cloned().ok_or_else(|| Error::InvalidConfig("no evaluation points".into()));
    match which {
        Limit::XiInfinity => {
            let v: Vec<f64> = match &l.v {
                Some(v) => v.iter().map(Num::to_f64).collect::<Result<_>>()?,
                None => first()?.fin.iter().map(|z| z.re).collect(),
            };
            if v.len() != rs.dim {
                return Err(Error::Dimension(format!("limits.v has {} coordinates, expected {}", v.len(), rs.dim)));
            }
            let kappa = s.lam_f.d;
            if kappa.im != 0.0 || kappa.re <= 0.0 {
                return Err(Error::NotPositiveLevel(kappa.re));
            }
            let rows = limit_xi_experiment(rs, &v, &s.lam_f.fin, kappa.re, &s.rep, &s.k_f, &l.xi_grid, target)?;
            let detail = json!(rows
                .iter()
                .map(|r| json!({ "xi": r.xi, "deviation": r.deviation, "tail_bound": r.tail_bound }))
                .collect::<Vec<_>>());
            Ok((rows.iter().map(|r| [r.xi, r.deviation]).collect(), detail))
        }
        Limit::SteinbergCritical => {
            let v = match &l.point {
                Some(p) => p.to_hat(rs.dim)?,
                None => first()?,
            };
            let x: Vec<Q> = l
                .x
                .as_ref()
                .ok_or_else(|| Error::InvalidConfig("steinberg_critical needs limits.x".into()))?
                .iter()
                .map(Num::to_q)
                .collect::<Result<_>>()?;
            let y: Vec<Q> = match &l.y_path {
                Some(y) => y.iter().map(Num::to_q).collect::<Result<_>>()?,
                None => rs.y_basis[0].clone(),
            };
            if x.len() != rs.dim || y.len() != rs.dim {
                return Err(Error::Dimension(format!("limits.x and limits.y_path need {} coordinates", rs.dim)));
            }
            let rows = steinberg_critical_limit(rs, &v, &x, &y, &l.kappa_grid, target)?;
            let detail = json!(rows
                .iter()
                .map(|r| json!({
                    "kappa": r.kappa,
                    "deviation": r.deviation,
                    "per_y_residual": r.per_y_residual,
                    "ratio": [r.ratio.re, r.ratio.im],
                    "target": [r.target.re, r.target.im],
                }))
                .collect::<Vec<_>>());
            Ok((rows.iter().map(|r| [r.kappa, r.deviation]).collect(), detail))
        }
    }
}

/// `limits <which>`: two-column CSV of the deviation series.
pub fn cmd_limits(cfg: &RunConfig, which: Limit) -> Outcome {
    match limit_rows(cfg, which) {
        Ok((rows, detail)) => {
            let head = if which == Limit::XiInfinity { "xi" } else { "kappa" };
            let mut csv = format!("{head},deviation\n");
            for [a, b] in &rows {
                csv.push_str(&format!("{a},{b:.17e}\n"));
            }
            let name = if which == Limit::XiInfinity { "xi_infinity" } else { "steinberg_critical" };
            Outcome { code: 0, json: json!({ "limit": name, "rows": detail }), csv }
        }
        Err(e) => Outcome::from_error(&e),
    }
}

/// `dump-rootsystem`: roots, lattices and multiplicity orbits.
pub fn cmd_dump_rootsystem(cfg: &RunConfig) -> Outcome {
    let s = match cfg.setup() {
        Ok(s) => s,
        Err(e) => return Outcome::from_error(&e),
    };
    let rs = &*s.rs;
    let mut csv = String::from("index,root,norm2,positive,orbit_level0,orbit_level1\n");
    for r in 0..rs.num_roots() {
        let root: Vec<String> = rs.roots[r].iter().map(q_to_string).collect();
        csv.push_str(&format!(
            "{r},{},{},{},{},{}\n",
            root.join(" "),
            q_to_string(&rs.norms[r]),
            rs.is_positive(r),
            s.partition.orbit_of(AffineRoot { root: r, level: 0 }),
            s.partition.orbit_of(AffineRoot { root: r, level: 1 }),
        ));
    }
    let json = json!({
        "root_system": rs.to_json(),
        "orbits": s.partition.num_orbits(),
        "level_independent_orbits": s.partition.level_independent(),
        "module": s.rep.to_json(),
    });
    Outcome { code: 0, json, csv }
}
