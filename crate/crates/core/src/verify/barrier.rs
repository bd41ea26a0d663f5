use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::GridFunction;
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::operators::{Jet, OperatorSpec};
use crate::sampling;
use crate::subunit::{certify_subunit, SearchParams, SubunitMode, Verdict};

/// `v(x) = e^{−γR²} − e^{−γ|x−y|²}` for the ball `B(y, R)` touching `z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Barrier {
    pub z: Vec<f64>,
    pub y: Vec<f64>,
    pub radius: f64,
    pub gamma: f64,
}

impl Barrier {
    /// Radius taken as `|z − y|`.
    pub fn new(z: &[f64], y: &[f64], gamma: f64) -> Result<Self> {
        if z.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: z.len(),
                got: y.len(),
            });
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!("gamma = {gamma} must be > 0")));
        }
        let radius = dist(z, y);
        if !(radius > 0.0) {
            return Err(Error::InvalidParameter("z and y coincide".into()));
        }
        Ok(Self {
            z: z.to_vec(),
            y: y.to_vec(),
            radius,
            gamma,
        })
    }

    /// `ν = (z − y)/R`.
    pub fn normal(&self) -> Vector {
        Vector::from_iterator(self.z.len(), self.z.iter().zip(&self.y).map(|(a, b)| (a - b) / self.radius))
    }

    pub fn with_gamma(&self, gamma: f64) -> Self {
        Self { gamma, ..self.clone() }
    }
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `(v, Dv, D²v)` at `x`:
/// `Dv = 2γ e^{−γ|x−y|²}(x−y)`, `D²v = 2γ e^{−γ|x−y|²}(I − 2γ (x−y)⊗(x−y))`.
pub fn barrier_eval(b: &Barrier, x: &[f64]) -> (f64, Vector, Matrix) {
    let d = x.len();
    let w = Vector::from_iterator(d, x.iter().zip(&b.y).map(|(a, c)| a - c));
    let e = (-b.gamma * w.norm_squared()).exp();
    let value = (-b.gamma * b.radius * b.radius).exp() - e;
    let grad = &w * (2.0 * b.gamma * e);
    let hess = (linalg::identity(d) - linalg::outer(&w, &w) * (2.0 * b.gamma)) * (2.0 * b.gamma * e);
    (value, grad, hess)
}

pub fn barrier_jet(b: &Barrier, x: &[f64]) -> Jet {
    let (v, p, hess) = barrier_eval(b, x);
    Jet {
        x: x.to_vec(),
        r: v,
        p,
        hess,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrictnessParams {
    pub gamma_grid: Vec<f64>,
    pub n_samples: usize,
    pub max_shrinks: usize,
    /// Candidate subunit vectors; defaults to the coordinate axes.
    pub candidates: Vec<Vec<f64>>,
    pub tol_dot: f64,
    pub seed: u64,
    pub search: SearchParams,
}

impl Default for StrictnessParams {
    fn default() -> Self {
        Self {
            gamma_grid: sampling::log_grid(0.5, 1e4, 30),
            n_samples: 256,
            max_shrinks: 6,
            candidates: Vec::new(),
            tol_dot: 1e-8,
            seed: 0,
            search: SearchParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateCheck {
    pub z: Vec<f64>,
    pub verdict: Verdict,
    pub dot_normal: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrictnessReport {
    pub success: bool,
    pub gamma: Option<f64>,
    /// Empirical `C = min F[v]` over the samples.
    pub c: Option<f64>,
    pub radius: f64,
    pub shrinks: usize,
    pub samples: usize,
    pub candidates: Vec<CandidateCheck>,
    pub message: String,
}

fn min_over(f: &OperatorSpec, b: &Barrier, points: &[Vec<f64>]) -> Result<f64> {
    let vals: Vec<Result<f64>> = points.par_iter().map(|x| f.eval(&barrier_jet(b, x))).collect();
    let mut m = f64::INFINITY;
    for v in vals {
        match v {
            Ok(v) => m = m.min(v),
            Err(Error::Singular(_)) => m = f64::NEG_INFINITY,
            Err(e) => return Err(e),
        }
    }
    Ok(m)
}

/// Searches the `γ` grid for `min_{B(z,r)} F[v] > 0`, halving `r` when the
/// whole grid fails. First requires some certified subunit `Z` with
/// `Z·ν ≠ 0`; without one the report is a failure.
pub fn barrier_strictness(
    f: &OperatorSpec,
    z: &[f64],
    y: &[f64],
    r: f64,
    params: &StrictnessParams,
) -> Result<StrictnessReport> {
    let d = z.len();
    if f.arg_dim != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: f.arg_dim,
        });
    }
    if !(r > 0.0) || params.gamma_grid.is_empty() || params.n_samples == 0 {
        return Err(Error::InvalidParameter("need r > 0, a gamma grid and samples".into()));
    }
    let base = Barrier::new(z, y, params.gamma_grid[0])?;
    let nu = base.normal();
    let candidates: Vec<Vector> = if params.candidates.is_empty() {
        (0..d)
            .map(|i| {
                let mut e = Vector::zeros(d);
                e[i] = 1.0;
                e
            })
            .collect()
    } else {
        params.candidates.iter().map(|c| Vector::from_column_slice(c)).collect()
    };
    let mut checks = Vec::new();
    for c in &candidates {
        if c.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: c.len() });
        }
        let dot = c.dot(&nu);
        let verdict = if c.norm() == 0.0 {
            Verdict::Inconclusive
        } else {
            certify_subunit(f, z, c, SubunitMode::Plus, &params.search)?.verdict
        };
        checks.push(CandidateCheck {
            z: c.iter().copied().collect(),
            verdict,
            dot_normal: dot,
        });
    }
    let usable = checks
        .iter()
        .any(|c| c.verdict == Verdict::Certified && c.dot_normal.abs() > params.tol_dot);
    let mut report = StrictnessReport {
        success: false,
        gamma: None,
        c: None,
        radius: r,
        shrinks: 0,
        samples: params.n_samples,
        candidates: checks,
        message: String::new(),
    };
    if !usable {
        report.message = "no certified subunit vector with Z·nu != 0 at z".into();
        return Ok(report);
    }
    let mut rng = sampling::rng(params.seed);
    let mut radius = r;
    for shrink in 0..=params.max_shrinks {
        let mut pts = vec![z.to_vec()];
        while pts.len() < params.n_samples {
            pts.push(sampling::random_in_ball(z, radius, &mut rng));
        }
        for &g in &params.gamma_grid {
            let c = min_over(f, &base.with_gamma(g), &pts)?;
            if c > 0.0 {
                report.success = true;
                report.gamma = Some(g);
                report.c = Some(c);
                report.radius = radius;
                report.shrinks = shrink;
                report.message = format!("F[v] >= {c:e} on B(z, {radius})");
                return Ok(report);
            }
        }
        radius /= 2.0;
    }
    report.radius = radius * 2.0;
    report.shrinks = params.max_shrinks;
    report.message = "gamma grid and radius shrinks exhausted".into();
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HopfParams {
    pub gamma_grid: Vec<f64>,
    /// Radius of `B(x₀, r)`; defaults to `R/2`.
    pub r: Option<f64>,
    pub tol: f64,
}

impl Default for HopfParams {
    fn default() -> Self {
        Self {
            gamma_grid: sampling::log_grid(0.5, 1e3, 24),
            r: None,
            tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HopfVerdict {
    NegativeQuotientBound,
    NoBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopfReport {
    pub verdict: HopfVerdict,
    pub gamma: Option<f64>,
    pub epsilon: Option<f64>,
    /// `ε Dv(x₀)·w = 2γε e^{−γR²} (x₀−y)·w`.
    pub quotient_bound: Option<f64>,
    /// `(τ, (u(x₀+τw) − u(x₀))/τ)` at the three smallest grid steps.
    pub quotients: Vec<(f64, f64)>,
    pub region_nodes: usize,
    pub boundary_nodes: usize,
    pub message: String,
}

/// Grid Hopf lemma at a boundary point `x₀` of the interior ball `B(y, R)`.
///
/// `ε` is fitted on the inner boundary shell of `X = B(y,R) ∩ B(x₀,r)` and
/// the comparison `u − u(x₀) ≤ ε v` is then checked on every grid node of
/// `X` (a grid stand-in for the comparison argument).
pub fn hopf_test(
    f: &OperatorSpec,
    u: &GridFunction,
    x0: &[f64],
    y: &[f64],
    radius: f64,
    w: &[f64],
    params: &HopfParams,
) -> Result<HopfReport> {
    let d = u.dim();
    for v in [x0, y, w] {
        if v.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: v.len() });
        }
    }
    if (dist(x0, y) - radius).abs() > 1e-9 * radius.max(1.0) {
        return Err(Error::Precondition(format!(
            "x0 is not on the sphere: |x0 - y| = {} vs R = {radius}",
            dist(x0, y)
        )));
    }
    let inward: f64 = w.iter().zip(x0.iter().zip(y)).map(|(wi, (a, b))| wi * (a - b)).sum();
    let wn = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(inward < -1e-12 * wn * radius) {
        return Err(Error::Precondition(format!("w·(x0 − y) = {inward} is not negative")));
    }
    let u0 = u
        .interpolate(x0)
        .ok_or_else(|| Error::OutsideDomain { point: x0.to_vec() })?;
    let inside: Vec<usize> = (0..u.len())
        .filter(|n| dist(&u.point(*n), y) < radius * (1.0 - 1e-12))
        .collect();
    if let Some(n) = inside.iter().find(|n| u.value(**n) >= u0) {
        return Err(Error::Precondition(format!(
            "interior ball condition fails: u({:?}) = {} >= u(x0) = {u0}",
            u.point(*n),
            u.value(*n)
        )));
    }
    let r = params.r.unwrap_or(radius / 2.0);
    let h = u.cell_diameter();
    let region: Vec<usize> = inside.iter().copied().filter(|n| dist(&u.point(*n), x0) <= r).collect();
    let shell: Vec<usize> = region
        .iter()
        .copied()
        .filter(|n| dist(&u.point(*n), x0) >= r - h)
        .collect();
    let hmin = u.spacing().iter().copied().fold(f64::INFINITY, f64::min);
    let quotients: Vec<(f64, f64)> = (1..=3)
        .filter_map(|k| {
            let tau = k as f64 * hmin / wn;
            let pt: Vec<f64> = x0.iter().zip(w).map(|(a, b)| a + tau * b).collect();
            u.interpolate(&pt).map(|v| (tau, (v - u0) / tau))
        })
        .collect();
    let mut report = HopfReport {
        verdict: HopfVerdict::NoBound,
        gamma: None,
        epsilon: None,
        quotient_bound: None,
        quotients,
        region_nodes: region.len(),
        boundary_nodes: shell.len(),
        message: String::new(),
    };
    if region.is_empty() || shell.is_empty() {
        return Err(Error::Precondition("the grid has no nodes in B(y,R) ∩ B(x0,r)".into()));
    }
    for &g in &params.gamma_grid {
        let b = Barrier {
            z: x0.to_vec(),
            y: y.to_vec(),
            radius,
            gamma: g,
        };
        let pts: Vec<Vec<f64>> = region.iter().map(|n| u.point(*n)).collect();
        if min_over(f, &b, &pts)? <= 0.0 {
            continue;
        }
        let eps = shell
            .iter()
            .map(|n| {
                let v = barrier_eval(&b, &u.point(*n)).0;
                (u0 - u.value(*n)) / (-v)
            })
            .fold(f64::INFINITY, f64::min);
        if !(eps > 0.0 && eps.is_finite()) {
            continue;
        }
        let holds = region
            .iter()
            .all(|n| u.value(*n) - u0 <= eps * barrier_eval(&b, &u.point(*n)).0 + params.tol);
        if !holds {
            continue;
        }
        let bound = 2.0 * g * eps * (-g * radius * radius).exp() * inward;
        report.verdict = HopfVerdict::NegativeQuotientBound;
        report.gamma = Some(g);
        report.epsilon = Some(eps);
        report.quotient_bound = Some(bound);
        report.message = "comparison u - u(x0) <= eps v holds on the grid region".into();
        return Ok(report);
    }
    report.message = "no gamma on the grid gave a strict barrier with a valid epsilon fit".into();
    Ok(report)
}
