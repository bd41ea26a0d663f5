//! Config-driven scenarios: a family, named operators and functions, and an
//! ordered task list, executed into a deterministic report.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::fields::{DomainBox, FieldFile, VectorFieldFamily};
use crate::linalg::{self, Vector};
use crate::operators::{
    audit_operator, build_hjb, build_isaacs, build_model_equation, euclideanize, infinity_laplacian_operator,
    linear_trace_operator, m_laplacian_operator, pucci_operator, reflect_operator, smooth_counterexample_operator,
    AuditSpec, HjbMode, IsaacsFamily, IsaacsMode, LinearOperator, LinearOperatorFamily, MatrixMap, ModelCoefficients,
    OperatorSpec, PucciSign, ScalarField, VectorMap,
};
use crate::poly::{Polynomial, Term};
use crate::reach::{btc_connect, integrate_trajectory, local_controllability, reachable_set, ReachParams};
use crate::sampling;
use crate::subunit::{certify_subunit, SearchParams, SubunitMode, Verdict};
use crate::verify::{
    barrier_eval, barrier_strictness, check_subsolution, hopf_test, propagation_test, scp_difference_check,
    strict_lift_check, Barrier, ExceptionalNode, GridFunction, HopfParams, HopfVerdict, JetParams, LiftParams,
    PropagationParams, PropagationStatus, SmoothFunction, StrictLift, StrictnessParams, SubsolutionVerdict,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    #[default]
    StructuredText,
    Csv,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "structured-text" => Ok(Self::StructuredText),
            "csv" => Ok(Self::Csv),
            _ => Err(Error::Parse(format!("unknown format {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub format: OutputFormat,
    #[serde(default)]
    pub family: Option<FamilySpec>,
    #[serde(default)]
    pub operators: BTreeMap<String, OperatorDesc>,
    #[serde(default)]
    pub functions: BTreeMap<String, FunctionDesc>,
    #[serde(default)]
    pub tasks: Vec<TaskSpec>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    pub catalog: Option<String>,
    /// Polynomial field document, relative to the config file.
    pub file: Option<PathBuf>,
    pub inline: Option<FieldFile>,
    /// Keep only these fields (0-based).
    pub subset: Option<Vec<usize>>,
    pub domain: Option<DomainBox>,
}

/// Operators acting on the horizontal slots `(q, Y)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum HorizontalDesc {
    /// `−s Tr Y`.
    Trace {
        #[serde(default = "one")]
        scale: f64,
    },
    Pucci {
        lambda: f64,
        big_lambda: f64,
        sign: PucciSign,
    },
    InfinityLaplacian {
        h: f64,
    },
    MLaplacian {
        m: f64,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemberDesc {
    /// Constant diffusion matrix, by rows.
    pub a: Option<Vec<Vec<f64>>>,
    /// Diffusion `s σσᵀ` from the scenario family.
    pub a_family_scale: Option<f64>,
    pub b: Option<Vec<f64>>,
    #[serde(default)]
    pub c: f64,
    #[serde(default)]
    pub f: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OperatorDesc {
    /// `−Tr(A X)`.
    Linear { a: Vec<Vec<f64>> },
    /// Pucci operator on the full Hessian.
    Pucci {
        lambda: f64,
        big_lambda: f64,
        sign: PucciSign,
    },
    /// Euclideanized `−s Tr Y` over the family.
    SubLaplacian {
        #[serde(default = "one")]
        scale: f64,
    },
    /// Euclideanized horizontal operator.
    Horizontal { g: HorizontalDesc },
    /// Euclideanized `c|r|^{k−1}r + a E(q, Y)`.
    Model {
        c: f64,
        a: f64,
        k: f64,
        e: HorizontalDesc,
    },
    Hjb {
        mode: HjbMode,
        #[serde(default = "yes")]
        homogeneous: bool,
        members: Vec<MemberDesc>,
    },
    Isaacs {
        mode: IsaacsMode,
        members: Vec<Vec<MemberDesc>>,
    },
    /// `−Tr X/(1 + |Tr X|) + f(x)` with `f = spike_value` at `spike_at` and
    /// `base` elsewhere.
    Counterexample {
        #[serde(default)]
        base: f64,
        spike_at: Option<Vec<f64>>,
        #[serde(default)]
        spike_value: f64,
    },
    /// `−F(x, −r, −p, −X)` of another named operator.
    Reflect { of: String },
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FunctionDesc {
    Polynomial {
        terms: Vec<Term>,
        grid: Option<GridSpec>,
    },
    /// `scale · (e^{−γR²} − e^{−γ|x−y|²})`.
    BarrierProfile {
        y: Vec<f64>,
        radius: f64,
        gamma: f64,
        #[serde(default = "one")]
        scale: f64,
        grid: Option<GridSpec>,
    },
    /// `base` everywhere except `value` at the node `at`.
    Spike {
        #[serde(default)]
        base: f64,
        at: Vec<f64>,
        value: f64,
        grid: GridSpec,
    },
    GridFile { path: PathBuf },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ZSpec {
    /// `"fields"`: the columns of `σ(x)`.
    Keyword(String),
    Vectors(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TaskSpec {
    CertifySubunit {
        operator: String,
        points: Vec<Vec<f64>>,
        z: ZSpec,
        #[serde(default = "plus")]
        mode: SubunitMode,
        #[serde(default)]
        search: SearchParams,
        #[serde(default = "certified")]
        expect: Verdict,
    },
    HormanderRank {
        #[serde(default)]
        points: Vec<Vec<f64>>,
        #[serde(default)]
        n_random_points: usize,
        region: Option<DomainBox>,
        max_depth: usize,
        #[serde(default = "rank_tol")]
        tol: f64,
        expect_rank: Option<usize>,
    },
    Reach {
        origin: Vec<f64>,
        region: Option<DomainBox>,
        #[serde(default)]
        params: ReachParams,
        min_fraction: Option<f64>,
    },
    Btc {
        from: Vec<f64>,
        to: Vec<f64>,
        region: Option<DomainBox>,
        t_max: f64,
        tol: Option<f64>,
        #[serde(default)]
        params: ReachParams,
        #[serde(default = "yes")]
        expect: bool,
    },
    LocalControllability {
        center: Vec<f64>,
        r: f64,
        #[serde(default)]
        params: ReachParams,
        #[serde(default = "lc_fraction")]
        min_fraction: f64,
    },
    CheckSubsolution {
        operator: String,
        u: String,
        #[serde(default)]
        jets: JetParams,
        #[serde(default = "consistent")]
        expect: SubsolutionVerdict,
    },
    Barrier {
        operator: String,
        z: Vec<f64>,
        y: Vec<f64>,
        r: f64,
        #[serde(default)]
        params: StrictnessParams,
        #[serde(default = "yes")]
        expect: bool,
    },
    Hopf {
        operator: String,
        u: String,
        x0: Vec<f64>,
        y: Vec<f64>,
        radius: f64,
        w: Vec<f64>,
        #[serde(default)]
        params: HopfParams,
        #[serde(default = "negative_bound")]
        expect: HopfVerdict,
    },
    SmpPropagate {
        operator: String,
        u: String,
        #[serde(default)]
        params: PropagationParams,
        #[serde(default = "pass")]
        expect: PropagationStatus,
    },
    ScpDifference {
        operator: String,
        u: String,
        v: String,
        #[serde(default)]
        points: Vec<Vec<f64>>,
        #[serde(default)]
        n_random_points: usize,
        region: Option<DomainBox>,
        #[serde(default = "check_tol")]
        tol: f64,
    },
    StrictLift {
        operator: String,
        u: String,
        center: Vec<f64>,
        #[serde(default)]
        lift: LiftParams,
        #[serde(default = "lift_samples")]
        n_samples: usize,
        #[serde(default = "check_tol")]
        tol: f64,
    },
    Audit {
        operator: String,
        #[serde(default)]
        spec: AuditSpec,
        #[serde(default = "yes")]
        expect_proper: bool,
        #[serde(default = "yes")]
        expect_scaling: bool,
        /// When set, the scaling failures must sit exactly at these points.
        expect_scaling_failures: Option<Vec<Vec<f64>>>,
    },
}

fn plus() -> SubunitMode {
    SubunitMode::Plus
}
fn certified() -> Verdict {
    Verdict::Certified
}
fn rank_tol() -> f64 {
    crate::fields::RANK_TOL
}
fn lc_fraction() -> f64 {
    0.95
}
fn consistent() -> SubsolutionVerdict {
    SubsolutionVerdict::ConsistentWithSubsolution
}
fn negative_bound() -> HopfVerdict {
    HopfVerdict::NegativeQuotientBound
}
fn pass() -> PropagationStatus {
    PropagationStatus::Pass
}
fn check_tol() -> f64 {
    1e-9
}
fn lift_samples() -> usize {
    256
}

impl TaskSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            TaskSpec::CertifySubunit { .. } => "certify-subunit",
            TaskSpec::HormanderRank { .. } => "hormander-rank",
            TaskSpec::Reach { .. } => "reach",
            TaskSpec::Btc { .. } => "btc",
            TaskSpec::LocalControllability { .. } => "local-controllability",
            TaskSpec::CheckSubsolution { .. } => "check-subsolution",
            TaskSpec::Barrier { .. } => "barrier",
            TaskSpec::Hopf { .. } => "hopf",
            TaskSpec::SmpPropagate { .. } => "smp-propagate",
            TaskSpec::ScpDifference { .. } => "scp-difference",
            TaskSpec::StrictLift { .. } => "strict-lift",
            TaskSpec::Audit { .. } => "audit",
        }
    }

    fn operator_ref(&self) -> Option<&str> {
        match self {
            TaskSpec::CertifySubunit { operator, .. }
            | TaskSpec::CheckSubsolution { operator, .. }
            | TaskSpec::Barrier { operator, .. }
            | TaskSpec::Hopf { operator, .. }
            | TaskSpec::SmpPropagate { operator, .. }
            | TaskSpec::ScpDifference { operator, .. }
            | TaskSpec::StrictLift { operator, .. }
            | TaskSpec::Audit { operator, .. } => Some(operator),
            _ => None,
        }
    }

    fn function_refs(&self) -> Vec<&str> {
        match self {
            TaskSpec::CheckSubsolution { u, .. }
            | TaskSpec::Hopf { u, .. }
            | TaskSpec::SmpPropagate { u, .. }
            | TaskSpec::StrictLift { u, .. } => vec![u],
            TaskSpec::ScpDifference { u, v, .. } => vec![u, v],
            _ => Vec::new(),
        }
    }

    fn needs_family(&self) -> bool {
        matches!(
            self,
            TaskSpec::HormanderRank { .. }
                | TaskSpec::Reach { .. }
                | TaskSpec::Btc { .. }
                | TaskSpec::LocalControllability { .. }
                | TaskSpec::SmpPropagate { .. }
                | TaskSpec::StrictLift { .. }
        )
    }
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    /// Reference and shape checks that do not need any numerics.
    pub fn validate(&self) -> Result<()> {
        for (name, op) in &self.operators {
            if let OperatorDesc::Reflect { of } = op {
                if of == name || !self.operators.contains_key(of) {
                    return Err(Error::Parse(format!("operator {name:?} reflects unknown operator {of:?}")));
                }
            }
        }
        for (i, t) in self.tasks.iter().enumerate() {
            if let Some(op) = t.operator_ref() {
                if !self.operators.contains_key(op) {
                    return Err(Error::Parse(format!("task {i} ({}) references unknown operator {op:?}", t.kind())));
                }
            }
            for f in t.function_refs() {
                if !self.functions.contains_key(f) {
                    return Err(Error::Parse(format!("task {i} ({}) references unknown function {f:?}", t.kind())));
                }
            }
            if t.needs_family() && self.family.is_none() {
                return Err(Error::Parse(format!("task {i} ({}) needs a family", t.kind())));
            }
        }
        Ok(())
    }
}

/// Allowed relative deviation from linear scaling of the strict-lift
/// decrease in `ε`.
const LINEARITY_TOL: f64 = 0.05;

fn derive_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

struct BuiltOperator {
    spec: OperatorSpec,
    hjb: Option<LinearOperatorFamily>,
}

/// Objects resolved from a scenario.
pub struct Context {
    family: Option<VectorFieldFamily>,
    operators: BTreeMap<String, BuiltOperator>,
    functions: BTreeMap<String, FunctionDesc>,
    base_dir: PathBuf,
}

fn build_family(spec: &FamilySpec, base: &Path) -> Result<VectorFieldFamily> {
    let sources = spec.catalog.is_some() as u8 + spec.file.is_some() as u8 + spec.inline.is_some() as u8;
    if sources != 1 {
        return Err(Error::Parse("family needs exactly one of catalog, file, inline".into()));
    }
    let mut fam = if let Some(c) = &spec.catalog {
        VectorFieldFamily::from_catalog(c)?
    } else if let Some(f) = &spec.file {
        VectorFieldFamily::load(&base.join(f))?
    } else {
        spec.inline.as_ref().unwrap().build()?
    };
    if let Some(idx) = &spec.subset {
        fam = fam.subfamily(idx)?;
    }
    if let Some(d) = &spec.domain {
        fam = fam.with_domain(DomainBox::new(d.lo.clone(), d.hi.clone())?)?;
    }
    Ok(fam)
}

fn need_family(fam: Option<&VectorFieldFamily>) -> Result<&VectorFieldFamily> {
    fam.ok_or_else(|| Error::Parse("operator needs a family".into()))
}

fn build_horizontal(g: &HorizontalDesc, m: usize) -> Result<OperatorSpec> {
    match g {
        HorizontalDesc::Trace { scale } => {
            if !(*scale >= 0.0) {
                return Err(Error::InvalidParameter("trace scale must be >= 0".into()));
            }
            let mut op = linear_trace_operator(linalg::identity(m) * *scale)?;
            op.label = format!("trace({scale})");
            Ok(op)
        }
        HorizontalDesc::Pucci { lambda, big_lambda, sign } => pucci_operator(m, *lambda, *big_lambda, *sign),
        HorizontalDesc::InfinityLaplacian { h } => infinity_laplacian_operator(m, *h),
        HorizontalDesc::MLaplacian { m: e } => m_laplacian_operator(m, *e),
    }
}

fn build_member(desc: &MemberDesc, dim: usize, fam: Option<&VectorFieldFamily>) -> Result<LinearOperator> {
    let a = match (&desc.a, desc.a_family_scale) {
        (Some(rows), None) => {
            let a = linalg::matrix_from_rows(rows)?;
            if a.nrows() != dim || a.ncols() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: a.nrows() });
            }
            MatrixMap::Constant(a)
        }
        (None, Some(s)) => MatrixMap::from_family(need_family(fam)?, s),
        _ => return Err(Error::Parse("member needs exactly one of a, a_family_scale".into())),
    };
    let b = match &desc.b {
        Some(b) if b.len() != dim => return Err(Error::DimensionMismatch { expected: dim, got: b.len() }),
        Some(b) => VectorMap::Constant(Vector::from_column_slice(b)),
        None => VectorMap::zero(dim),
    };
    if desc.c < 0.0 {
        return Err(Error::InvalidParameter("member c must be >= 0".into()));
    }
    Ok(LinearOperator::new(a, b, ScalarField::Constant(desc.c), ScalarField::Constant(desc.f)))
}

fn op_dim(fam: Option<&VectorFieldFamily>, members: &[MemberDesc]) -> Result<usize> {
    if let Some(f) = fam {
        return Ok(f.dim());
    }
    members
        .iter()
        .find_map(|m| m.a.as_ref().map(Vec::len))
        .ok_or_else(|| Error::Parse("cannot infer the operator dimension".into()))
}

fn build_operator(
    name: &str,
    descs: &BTreeMap<String, OperatorDesc>,
    fam: Option<&VectorFieldFamily>,
    depth: usize,
) -> Result<BuiltOperator> {
    if depth > descs.len() {
        return Err(Error::Parse(format!("operator {name:?} reflects in a cycle")));
    }
    let desc = descs
        .get(name)
        .ok_or_else(|| Error::Parse(format!("unknown operator {name:?}")))?;
    let plain = |spec: OperatorSpec| -> Result<BuiltOperator> { Ok(BuiltOperator { spec, hjb: None }) };
    let mut built = match desc {
        OperatorDesc::Linear { a } => plain(linear_trace_operator(linalg::matrix_from_rows(a)?)?),
        OperatorDesc::Pucci { lambda, big_lambda, sign } => {
            plain(pucci_operator(need_family(fam)?.dim(), *lambda, *big_lambda, *sign)?)
        }
        OperatorDesc::SubLaplacian { scale } => {
            let f = need_family(fam)?;
            plain(euclideanize(&build_horizontal(&HorizontalDesc::Trace { scale: *scale }, f.count())?, f)?)
        }
        OperatorDesc::Horizontal { g } => {
            let f = need_family(fam)?;
            plain(euclideanize(&build_horizontal(g, f.count())?, f)?)
        }
        OperatorDesc::Model { c, a, k, e } => {
            let f = need_family(fam)?;
            let e = build_horizontal(e, f.count())?;
            let coeffs = ModelCoefficients::new(ScalarField::Constant(*c), ScalarField::Constant(*a), *k, e)?;
            plain(euclideanize(&build_model_equation(coeffs, f)?, f)?)
        }
        OperatorDesc::Hjb {
            mode,
            homogeneous,
            members,
        } => {
            let dim = op_dim(fam, members)?;
            let ms = members.iter().map(|m| build_member(m, dim, fam)).collect::<Result<Vec<_>>>()?;
            let lf = LinearOperatorFamily::new(dim, ms)?;
            let spec = build_hjb(&lf, *mode, *homogeneous)?;
            Ok(BuiltOperator { spec, hjb: Some(lf) })
        }
        OperatorDesc::Isaacs { mode, members } => {
            let flat: Vec<MemberDesc> = members.iter().flatten().cloned().collect();
            let dim = op_dim(fam, &flat)?;
            let ms = members
                .iter()
                .map(|row| row.iter().map(|m| build_member(m, dim, fam)).collect::<Result<Vec<_>>>())
                .collect::<Result<Vec<_>>>()?;
            plain(build_isaacs(&IsaacsFamily::new(dim, ms)?, *mode)?)
        }
        OperatorDesc::Counterexample {
            base,
            spike_at,
            spike_value,
        } => {
            let dim = need_family(fam)?.dim();
            let base = *base;
            let f = match spike_at.clone() {
                Some(at) => {
                    let v = *spike_value;
                    ScalarField::from_fn(move |x| if x == at.as_slice() { v } else { base })
                }
                None => ScalarField::Constant(base),
            };
            plain(smooth_counterexample_operator(dim, f))
        }
        OperatorDesc::Reflect { of } => {
            let inner = build_operator(of, descs, fam, depth + 1)?;
            plain(reflect_operator(&inner.spec))
        }
    }?;
    if built.spec.label.is_empty() {
        built.spec.label = name.to_string();
    }
    Ok(built)
}

fn grid_box(g: &GridSpec) -> Result<DomainBox> {
    DomainBox::new(g.lo.clone(), g.hi.clone())
}

impl Context {
    pub fn build(s: &Scenario, base_dir: &Path) -> Result<Self> {
        s.validate()?;
        let family = s.family.as_ref().map(|f| build_family(f, base_dir)).transpose()?;
        let mut operators = BTreeMap::new();
        for name in s.operators.keys() {
            operators.insert(name.clone(), build_operator(name, &s.operators, family.as_ref(), 0)?);
        }
        let ctx = Self {
            family,
            operators,
            functions: s.functions.clone(),
            base_dir: base_dir.to_path_buf(),
        };
        for name in s.functions.keys() {
            ctx.check_function(name)?;
        }
        Ok(ctx)
    }

    fn family(&self) -> Result<&VectorFieldFamily> {
        need_family(self.family.as_ref())
    }

    fn operator(&self, name: &str) -> Result<&BuiltOperator> {
        self.operators
            .get(name)
            .ok_or_else(|| Error::Parse(format!("unknown operator {name:?}")))
    }

    fn function(&self, name: &str) -> Result<&FunctionDesc> {
        self.functions
            .get(name)
            .ok_or_else(|| Error::Parse(format!("unknown function {name:?}")))
    }

    fn fn_dim(&self, terms: &[Term]) -> Result<usize> {
        if let Some(f) = &self.family {
            return Ok(f.dim());
        }
        terms
            .first()
            .map(|t| t.exponents.len())
            .ok_or_else(|| Error::Parse("cannot infer the polynomial dimension".into()))
    }

    fn check_function(&self, name: &str) -> Result<()> {
        match self.function(name)? {
            FunctionDesc::GridFile { path } => {
                GridFunction::load(&self.base_dir.join(path))?;
            }
            FunctionDesc::Spike { .. } => {
                self.grid_function(name)?;
            }
            _ => {
                self.smooth(name)?;
            }
        }
        Ok(())
    }

    fn smooth(&self, name: &str) -> Result<SmoothFunction> {
        match self.function(name)? {
            FunctionDesc::Polynomial { terms, .. } => {
                Ok(SmoothFunction::Polynomial(Polynomial::from_terms(self.fn_dim(terms)?, terms)?))
            }
            FunctionDesc::BarrierProfile {
                y,
                radius,
                gamma,
                scale,
                ..
            } => {
                let mut z = y.clone();
                z[0] += radius;
                let b = Barrier::new(&z, y, *gamma)?;
                let s = *scale;
                Ok(SmoothFunction::Custom(Arc::new(move |x: &[f64]| {
                    let (v, p, h) = barrier_eval(&b, x);
                    (s * v, p * s, h * s)
                })))
            }
            _ => Err(Error::Parse(format!("function {name:?} is not smooth"))),
        }
    }

    fn grid_function(&self, name: &str) -> Result<GridFunction> {
        match self.function(name)? {
            FunctionDesc::Polynomial { grid, .. } | FunctionDesc::BarrierProfile { grid, .. } => {
                let g = grid
                    .as_ref()
                    .ok_or_else(|| Error::Parse(format!("function {name:?} has no grid")))?;
                GridFunction::from_smooth(grid_box(g)?, g.shape.clone(), &self.smooth(name)?)
            }
            FunctionDesc::Spike { base, at, value, grid } => {
                let g = GridFunction::from_fn(grid_box(grid)?, grid.shape.clone(), |_| *base)?;
                let node = g.nearest_node(at);
                let off: f64 = g.point(node).iter().zip(at).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                if off > 1e-9 {
                    return Err(Error::Parse(format!("spike point {at:?} is not a grid node")));
                }
                g.with_exceptional(vec![ExceptionalNode { node, value: *value }])
            }
            FunctionDesc::GridFile { path } => GridFunction::load(&self.base_dir.join(path)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Pass,
    Fail,
    Error,
}

/// A flat table for the CSV output.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }
}

fn num(v: f64) -> String {
    v.to_string()
}

fn list(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

#[derive(Debug, Clone, Serialize)]
pub struct TaskResult {
    pub index: usize,
    pub kind: String,
    pub outcome: Outcome,
    pub message: String,
    pub result: Value,
    /// Extra files written next to the report.
    pub exports: Vec<String>,
    #[serde(skip)]
    pub table: Table,
}

struct Done {
    pass: bool,
    message: String,
    result: Value,
    table: Table,
    exports: Vec<(String, Vec<u8>)>,
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report values serialize")
}

fn csv_bytes(t: &Table) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&t.header).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    for r in &t.rows {
        w.write_record(r).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

fn random_points(region: &DomainBox, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = sampling::rng(seed);
    (0..n)
        .map(|_| {
            region
                .lo
                .iter()
                .zip(&region.hi)
                .map(|(a, b)| a + (b - a) * rand::Rng::random::<f64>(&mut rng))
                .collect()
        })
        .collect()
}

fn run_task(ctx: &Context, task: &TaskSpec, seed: u64, format: OutputFormat, prefix: &str) -> Result<Done> {
    match task {
        TaskSpec::CertifySubunit {
            operator,
            points,
            z,
            mode,
            search,
            expect,
        } => {
            let op = &ctx.operator(operator)?.spec;
            let mut table = Table::new(&["point", "z", "verdict", "witness_p", "directions_tested", "undecided"]);
            let mut certs = Vec::new();
            let mut skipped = 0;
            let mut pass = true;
            for x in points {
                let zs: Vec<Vector> = match z {
                    ZSpec::Keyword(k) if k == "fields" => {
                        let s = ctx.family()?.sigma(x)?;
                        (0..s.ncols()).map(|i| s.column(i).into_owned()).collect()
                    }
                    ZSpec::Keyword(k) => return Err(Error::Parse(format!("unknown z keyword {k:?}"))),
                    ZSpec::Vectors(v) => v.iter().map(|c| Vector::from_column_slice(c)).collect(),
                };
                for zv in zs {
                    if zv.norm() == 0.0 {
                        skipped += 1;
                        continue;
                    }
                    let c = certify_subunit(op, x, &zv, *mode, search)?;
                    pass &= c.verdict == *expect;
                    table.push(vec![
                        list(x),
                        list(&c.z),
                        to_value(&c.verdict).as_str().unwrap_or_default().to_string(),
                        c.witness_p.as_deref().map(list).unwrap_or_default(),
                        c.directions_tested.to_string(),
                        c.undecided_directions.to_string(),
                    ]);
                    certs.push(json!({
                        "point": c.point,
                        "z": c.z,
                        "mode": c.mode,
                        "verdict": c.verdict,
                        "witness_p": c.witness_p,
                        "witness_value": c.witness_value,
                        "directions_tested": c.directions_tested,
                        "directions_skipped": c.directions_skipped,
                        "undecided_directions": c.undecided_directions,
                        "singular_evaluations": c.singular_evaluations,
                    }));
                }
            }
            let n = certs.len();
            Ok(Done {
                pass,
                message: format!("{n} certificates, expected {}; {skipped} vanishing Z skipped", to_value(expect)),
                result: json!({ "operator": op.label, "certificates": certs, "vanishing_z_skipped": skipped }),
                table,
                exports: Vec::new(),
            })
        }
        TaskSpec::HormanderRank {
            points,
            n_random_points,
            region,
            max_depth,
            tol,
            expect_rank,
        } => {
            let fam = ctx.family()?;
            let mut pts = points.clone();
            let reg = region.clone().unwrap_or_else(|| fam.domain().clone());
            pts.extend(random_points(&reg, *n_random_points, seed));
            let want = expect_rank.unwrap_or(fam.dim());
            let mut table = Table::new(&["point", "rank", "depth_used", "generators"]);
            let mut certs = Vec::new();
            let mut pass = true;
            for x in &pts {
                let c = fam.hormander_rank(x, *max_depth, *tol)?;
                pass &= c.rank == want;
                let words: Vec<String> = c
                    .generators
                    .iter()
                    .map(|g| g.word.iter().map(|w| w.to_string()).collect::<Vec<_>>().join("."))
                    .collect();
                table.push(vec![list(x), c.rank.to_string(), c.depth_used.to_string(), words.join(" ")]);
                certs.push(to_value(&c));
            }
            Ok(Done {
                pass,
                message: format!("{} points, expected rank {want}", pts.len()),
                result: json!({ "family": fam.name(), "max_depth": max_depth, "certificates": certs }),
                table,
                exports: Vec::new(),
            })
        }
        TaskSpec::Reach {
            origin,
            region,
            params,
            min_fraction,
        } => {
            let fam = ctx.family()?;
            let reg = region.clone().unwrap_or_else(|| fam.domain().clone());
            let p = ReachParams { seed, ..params.clone() };
            let set = reachable_set(fam, origin, &reg, &p)?;
            let frac = set.occupied_fraction();
            let pass = min_fraction.is_none_or(|m| frac >= m);
            let mut table = Table::default();
            let mut bytes = Vec::new();
            set.write_csv(&mut bytes)?;
            let (name, export) = match format {
                OutputFormat::StructuredText => (format!("{prefix}-reach.txt"), set.to_text().into_bytes()),
                OutputFormat::Csv => (format!("{prefix}-reach.csv"), bytes.clone()),
            };
            let mut rdr = csv::Reader::from_reader(bytes.as_slice());
            table.header = rdr.headers().map_err(|e| Error::Parse(e.to_string()))?.iter().map(String::from).collect();
            for r in rdr.records() {
                table.push(r.map_err(|e| Error::Parse(e.to_string()))?.iter().map(String::from).collect());
            }
            Ok(Done {
                pass,
                message: set.summary(),
                result: json!({
                    "origin": origin,
                    "lo": set.grid.bounds.lo,
                    "hi": set.grid.bounds.hi,
                    "resolution": set.grid.resolution,
                    "horizon": set.horizon,
                    "dt": set.dt,
                    "occupied": set.occupied_count(),
                    "cells": set.occupancy.len(),
                    "fraction": frac,
                    "export": name,
                }),
                table,
                exports: vec![(name, export)],
            })
        }
        TaskSpec::Btc {
            from,
            to,
            region,
            t_max,
            tol,
            params,
            expect,
        } => {
            let fam = ctx.family()?;
            let reg = region.clone().unwrap_or_else(|| fam.domain().clone());
            let p = ReachParams { seed, ..params.clone() };
            let rep = btc_connect(fam, from, to, &reg, *t_max, *tol, &p)?;
            let mut exports = Vec::new();
            let mut table = Table::new(&["t"]);
            let mut reverse_error = None;
            if let (Some(sig), Some(end)) = (&rep.signal, &rep.endpoint) {
                let dt = params.dt.unwrap_or(1e-2).min(1e-2);
                let tr = integrate_trajectory(fam, from, sig, sig.end(), dt)?;
                let back = integrate_trajectory(fam, end, &sig.reversed(), sig.end(), dt)?;
                reverse_error = Some(back.end_state().iter().zip(from).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt());
                let mut bytes = Vec::new();
                tr.write_csv(&mut bytes)?;
                let mut rdr = csv::Reader::from_reader(bytes.as_slice());
                table.header = rdr.headers().map_err(|e| Error::Parse(e.to_string()))?.iter().map(String::from).collect();
                for r in rdr.records() {
                    table.push(r.map_err(|e| Error::Parse(e.to_string()))?.iter().map(String::from).collect());
                }
                exports.push((format!("{prefix}-trajectory.csv"), bytes));
            }
            let mut result = to_value(&rep);
            result["reverse_error"] = json!(reverse_error);
            result["signal_pieces"] = json!(rep.signal.as_ref().map(|s| s.values.len()));
            if let Some(obj) = result.as_object_mut() {
                obj.remove("signal");
            }
            Ok(Done {
                pass: rep.success == *expect,
                message: rep.message.clone(),
                result,
                table,
                exports,
            })
        }
        TaskSpec::LocalControllability {
            center,
            r,
            params,
            min_fraction,
        } => {
            let fam = ctx.family()?;
            let p = ReachParams { seed, ..params.clone() };
            let lc = local_controllability(fam, center, *r, &p)?;
            let mut table = Table::new(&["center", "radius", "cells_in_ball", "cells_reached", "fraction"]);
            table.push(vec![
                list(center),
                num(*r),
                lc.cells_in_ball.to_string(),
                lc.cells_reached.to_string(),
                num(lc.fraction),
            ]);
            Ok(Done {
                pass: lc.fraction >= *min_fraction,
                message: format!("fraction {} (required {min_fraction})", lc.fraction),
                result: to_value(&lc),
                table,
                exports: Vec::new(),
            })
        }
        TaskSpec::CheckSubsolution {
            operator,
            u,
            jets,
            expect,
        } => {
            let op = &ctx.operator(operator)?.spec;
            let g = ctx.grid_function(u)?;
            let exact = ctx.smooth(u).ok();
            let rep = check_subsolution(op, &g, jets, exact.as_ref())?;
            let mut table = Table::new(&["node", "point", "value", "source", "p", "hess"]);
            for v in &rep.violations {
                table.push(vec![
                    v.node.to_string(),
                    list(&v.point),
                    num(v.value),
                    to_value(&v.source).as_str().unwrap_or_default().to_string(),
                    list(&v.p),
                    list(&v.hess.concat()),
                ]);
            }
            Ok(Done {
                pass: rep.verdict == *expect,
                message: format!(
                    "{} ({} touching jets at {} nodes)",
                    to_value(&rep.verdict).as_str().unwrap_or_default(),
                    rep.touching_jets,
                    rep.nodes_checked
                ),
                result: to_value(&rep),
                table,
                exports: Vec::new(),
            })
        }
        TaskSpec::Barrier {
            operator,
            z,
            y,
            r,
            params,
            expect,
        } => {
            let op = &ctx.operator(operator)?.spec;
            let p = StrictnessParams { seed, ..params.clone() };
            let rep = barrier_strictness(op, z, y, *r, &p)?;
            let mut table = Table::new(&["success", "gamma", "c", "radius", "shrinks"]);
            table.push(vec![
                rep.success.to_string(),
                opt(rep.gamma),
                opt(rep.c),
                num(rep.radius),
                rep.shrinks.to_string(),
            ]);
            Ok(Done {
                pass: rep.success == *expect,
                message: rep.message.clone(),
                result: to_value(&rep),
                table,
                exports: Vec::new(),
            })
        }
        TaskSpec::Hopf {
            operator,
            u,
            x0,
            y,
            radius,
            w,
            params,
            expect,
        } => {
            let op = &ctx.operator(operator)?.spec;
            let g = ctx.grid_function(u)?;
            let rep = hopf_test(op, &g, x0, y, *radius, w, params)?;
            let mut table = Table::new(&["tau", "quotient", "bound"]);
            for (t, q) in &rep.quotients {
                table.push(vec![num(*t), num(*q), opt(rep.quotient_bound)]);
            }
            Ok(Done {
                pass: rep.verdict == *expect,
                message: format!(
                    "{}; the comparison is checked on grid nodes in place of the maximum-principle step",
                    rep.message
                ),
                result: to_value(&rep),
                table,
                exports: Vec::new(),
            })
        }
        TaskSpec::SmpPropagate {
            operator,
            u,
            params,
            expect,
        } => {
            let op = &ctx.operator(operator)?.spec;
            let g = ctx.grid_function(u)?;
            let p = PropagationParams { seed, ..params.clone() };
            let rep = propagation_test(op, ctx.family()?, &g, &p)?;
            let mut table = Table::new(&["status", "x0", "max_value", "tol", "max_deviation", "trajectories", "k_cells"]);
            table.push(vec![
                to_value(&rep.status).as_str().unwrap_or_default().to_string(),
                list(&rep.x0),
                num(rep.max_value),
                num(rep.tol),
                num(rep.max_deviation),
                rep.trajectories_checked.to_string(),
                rep.k_cells.len().to_string(),
            ]);
            let message = match rep.status {
                PropagationStatus::Refused => format!(
                    "refused: u is not a subsolution (witness F = {})",
                    rep.precheck.worst().map(|v| v.value).unwrap_or(f64::NAN)
                ),
                _ => format!("max deviation {} against tolerance {}", rep.max_deviation, rep.tol),
            };
            let mut result = to_value(&rep);
            result["k_cell_count"] = json!(rep.k_cells.len());
            if let Some(obj) = result.as_object_mut() {
                obj.remove("k_cells");
            }
            Ok(Done {
                pass: rep.status == *expect,
                message,
                result,
                table,
                exports: Vec::new(),
            })
        }
        TaskSpec::ScpDifference {
            operator,
            u,
            v,
            points,
            n_random_points,
            region,
            tol,
        } => {
            let built = ctx.operator(operator)?;
            let lf = built
                .hjb
                .as_ref()
                .ok_or_else(|| Error::Precondition(format!("operator {operator:?} is not an HJB family")))?;
            let mut pts = points.clone();
            if *n_random_points > 0 {
                let reg = region
                    .clone()
                    .or_else(|| ctx.family.as_ref().map(|f| f.domain().clone()))
                    .ok_or_else(|| Error::Parse("random points need a region".into()))?;
                pts.extend(random_points(&reg, *n_random_points, seed));
            }
            let rep = scp_difference_check(lf, &ctx.smooth(u)?, &ctx.smooth(v)?, &pts, *tol)?;
            let mut table = Table::new(&["preconditions_ok", "margin", "samples"]);
            table.push(vec![rep.preconditions_ok.to_string(), opt(rep.margin), rep.samples.to_string()]);
            Ok(Done {
                pass: rep.pass,
                message: match &rep.precondition_failure {
                    Some(f) => format!("precondition failed at {:?}: {}", f.point, f.what),
                    None => format!("margin {}", opt(rep.margin)),
                },
                result: to_value(&rep),
                table,
                exports: Vec::new(),
            })
        }
        TaskSpec::StrictLift {
            operator,
            u,
            center,
            lift,
            n_samples,
            tol,
        } => {
            let op = &ctx.operator(operator)?.spec;
            let fam = ctx.family()?;
            let lp = LiftParams { seed, ..lift.clone() };
            let l = StrictLift::build(op, fam, center, &lp)?;
            let rep = strict_lift_check(op, fam, &ctx.smooth(u)?, &l, *n_samples, seed, *tol)?;
            let mut table = Table::new(&["epsilon", "decrease"]);
            for (e, d) in &rep.decreases {
                table.push(vec![num(*e), num(*d)]);
            }
            let linear = rep.linearity_ratios.iter().all(|q| (q - 1.0).abs() <= LINEARITY_TOL);
            Ok(Done {
                pass: rep.pass && linear,
                message: match &rep.precondition_failure {
                    Some(f) => format!("precondition failed at {:?}: {}", f.point, f.what),
                    None => format!(
                        "margin {} with r_bar = {}; decrease ratios over epsilon decades {:?}",
                        opt(rep.margin),
                        l.r_bar,
                        rep.linearity_ratios
                    ),
                },
                result: to_value(&rep),
                table,
                exports: Vec::new(),
            })
        }
        TaskSpec::Audit {
            operator,
            spec,
            expect_proper,
            expect_scaling,
            expect_scaling_failures,
        } => {
            let op = &ctx.operator(operator)?.spec;
            let s = AuditSpec { seed, ..spec.clone() };
            let rep = audit_operator(op, &s)?;
            let mut pass = rep.proper_ok == *expect_proper && rep.scaling_ok == *expect_scaling;
            if let Some(pts) = expect_scaling_failures {
                pass &= &rep.scaling_failure_points == pts;
            }
            let mut table = Table::new(&["kind", "x", "lhs", "rhs"]);
            for w in &rep.witnesses {
                table.push(vec![
                    to_value(&w.kind).as_str().unwrap_or_default().to_string(),
                    list(&w.x),
                    num(w.lhs),
                    num(w.rhs),
                ]);
            }
            Ok(Done {
                pass,
                message: format!(
                    "proper {}, scaling {} ({}); scaling failures at {:?}",
                    rep.proper_ok, rep.scaling_ok, rep.scaling_declared, rep.scaling_failure_points
                ),
                result: to_value(&rep),
                table,
                exports: Vec::new(),
            })
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub format: Option<OutputFormat>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub seed: u64,
    pub family: Option<Value>,
    pub tasks: Vec<TaskResult>,
    pub passed: usize,
    pub failed: usize,
    pub errors: usize,
}

impl RunReport {
    /// 0 when every task passed, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.failed + self.errors == 0 {
            0
        } else {
            1
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn summary_table(&self) -> Table {
        let mut t = Table::new(&["index", "kind", "outcome", "message"]);
        for r in &self.tasks {
            t.push(vec![
                r.index.to_string(),
                r.kind.clone(),
                to_value(&r.outcome).as_str().unwrap_or_default().to_string(),
                r.message.clone(),
            ]);
        }
        t
    }
}

/// Writes the report files (rewritten after every task so partial results
/// survive a crash).
fn write_report(report: &RunReport, dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
    let stem = &report.scenario;
    match format {
        OutputFormat::StructuredText => {
            let p = dir.join(format!("{stem}.report.json"));
            std::fs::write(&p, report.to_text())?;
            Ok(vec![p])
        }
        OutputFormat::Csv => {
            let mut paths = Vec::new();
            let p = dir.join(format!("{stem}.summary.csv"));
            std::fs::write(&p, csv_bytes(&report.summary_table())?)?;
            paths.push(p);
            for t in &report.tasks {
                let p = dir.join(format!("{stem}.task-{:02}-{}.csv", t.index, t.kind));
                std::fs::write(&p, csv_bytes(&t.table)?)?;
                paths.push(p);
            }
            Ok(paths)
        }
    }
}

/// Runs a parsed scenario. Config problems (unknown references, bad
/// objects) are errors; task failures are recorded in the report.
pub fn run(scenario: &Scenario, base_dir: &Path, opts: &RunOptions) -> Result<RunReport> {
    let ctx = Context::build(scenario, base_dir)?;
    let seed = opts.seed.unwrap_or(scenario.seed);
    let format = opts.format.unwrap_or(scenario.format);
    if let Some(d) = &opts.out_dir {
        std::fs::create_dir_all(d)?;
    }
    let mut report = RunReport {
        scenario: scenario.name.clone(),
        seed,
        family: ctx.family.as_ref().map(|f| {
            json!({ "name": f.name(), "dim": f.dim(), "count": f.count(), "lo": f.domain().lo, "hi": f.domain().hi })
        }),
        tasks: Vec::new(),
        passed: 0,
        failed: 0,
        errors: 0,
    };
    if let Some(d) = &opts.out_dir {
        write_report(&report, d, format)?;
    }
    for (i, task) in scenario.tasks.iter().enumerate() {
        let prefix = format!("{}.task-{i:02}", scenario.name);
        let (outcome, message, result, table, exports) =
            match run_task(&ctx, task, derive_seed(seed, i), format, &prefix) {
                Ok(d) => {
                    let o = if d.pass { Outcome::Pass } else { Outcome::Fail };
                    (o, d.message, d.result, d.table, d.exports)
                }
                Err(e) => (Outcome::Error, e.to_string(), Value::Null, Table::default(), Vec::new()),
            };
        match outcome {
            Outcome::Pass => report.passed += 1,
            Outcome::Fail => report.failed += 1,
            Outcome::Error => report.errors += 1,
        }
        let mut names = Vec::new();
        for (name, bytes) in exports {
            if let Some(d) = &opts.out_dir {
                std::fs::write(d.join(&name), bytes)?;
            }
            names.push(name);
        }
        report.tasks.push(TaskResult {
            index: i,
            kind: task.kind().to_string(),
            outcome,
            message,
            result,
            exports: names,
            table,
        });
        if let Some(d) = &opts.out_dir {
            write_report(&report, d, format)?;
        }
    }
    Ok(report)
}

/// Loads and runs a scenario file; relative paths resolve against its
/// directory.
pub fn run_file(path: &Path, opts: &RunOptions) -> Result<RunReport> {
    let scenario = Scenario::load(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    run(&scenario, base, opts)
}

/// Text listing of the built-in families, operator kinds and task kinds.
pub fn catalog_text() -> String {
    let mut s = String::new();
    let _ = writeln!(s, "families:");
    for f in VectorFieldFamily::catalog_names() {
        let _ = writeln!(s, "  {f}");
    }
    let _ = writeln!(s, "operators:");
    for k in [
        "linear", "pucci", "sub-laplacian", "horizontal", "model", "hjb", "isaacs", "counterexample", "reflect",
    ] {
        let _ = writeln!(s, "  {k}");
    }
    let _ = writeln!(s, "horizontal operators:");
    for k in ["trace", "pucci", "infinity-laplacian", "m-laplacian"] {
        let _ = writeln!(s, "  {k}");
    }
    let _ = writeln!(s, "functions:");
    for k in ["polynomial", "barrier-profile", "spike", "grid-file"] {
        let _ = writeln!(s, "  {k}");
    }
    let _ = writeln!(s, "tasks:");
    for k in [
        "certify-subunit",
        "hormander-rank",
        "reach",
        "btc",
        "local-controllability",
        "check-subsolution",
        "barrier",
        "hopf",
        "smp-propagate",
        "scp-difference",
        "strict-lift",
        "audit",
    ] {
        let _ = writeln!(s, "  {k}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_tagged_tasks() {
        let s = Scenario::from_toml_str(
            r#"
            name = "t"
            [family]
            catalog = "grushin"
            [operators.f]
            kind = "sub-laplacian"
            [[tasks]]
            kind = "hormander-rank"
            points = [[0.0, 0.0]]
            max_depth = 1
            expect_rank = 1
            [[tasks]]
            kind = "certify-subunit"
            operator = "f"
            points = [[1.0, 0.5]]
            z = "fields"
            "#,
        )
        .unwrap();
        let r = run(&s, Path::new("."), &RunOptions::default()).unwrap();
        assert_eq!(r.exit_code(), 0, "{}", r.to_text());
    }

    #[test]
    fn rejects_unknown_fields_and_references() {
        assert!(Scenario::from_toml_str("name = \"t\"\nbogus = 1").is_err());
        let s = Scenario::from_toml_str(
            r#"
            name = "t"
            [[tasks]]
            kind = "audit"
            operator = "missing"
            "#,
        )
        .unwrap();
        assert!(s.validate().is_err());
        let bad_task = Scenario::from_toml_str(
            r#"
            name = "t"
            [[tasks]]
            kind = "audit"
            operator = "f"
            typo = 3
            "#,
        );
        assert!(bad_task.is_err());
    }

    #[test]
    fn empty_task_list() {
        let s = Scenario::from_toml_str("name = \"empty\"").unwrap();
        let r = run(&s, Path::new("."), &RunOptions::default()).unwrap();
        assert_eq!(r.exit_code(), 0);
        assert_eq!(r.summary_table().rows.len(), 0);
        assert!(r.to_text().contains("\"tasks\": []"));
    }
}
