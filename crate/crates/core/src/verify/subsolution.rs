use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::{GridFunction, SmoothFunction};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::operators::{Jet, OperatorSpec};
use crate::sampling;

/// Test-jet dictionary and touching parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JetParams {
    /// Touching neighborhood radius, in cells.
    pub rho: usize,
    /// Jets with `|p| < p_min` are discarded.
    pub p_min: f64,
    /// Quasi-uniform unit directions on top of `±e_i`.
    pub n_directions: usize,
    pub magnitudes: Vec<f64>,
    /// Curvature levels `κ > 0`; the dictionary uses `±κ I` and `±κ e_i⊗e_i`.
    pub curvatures: Vec<f64>,
    /// Add the central-difference jet of every node.
    pub fd_jets: bool,
    /// Shifts `X + κ I` applied to finite-difference and exact jets.
    pub jet_shifts: Vec<f64>,
    pub tol: f64,
    /// Slack in `u(y) ≤ φ(y)`, relative to `1 + max |u|`.
    pub touch_tol: f64,
    /// Violations kept in the report.
    pub max_violations: usize,
}

impl Default for JetParams {
    fn default() -> Self {
        Self {
            rho: 1,
            p_min: 1e-6,
            n_directions: 16,
            magnitudes: vec![1e-3, 1e-1, 1.0, 10.0],
            curvatures: vec![0.5, 2.0, 8.0, 32.0],
            fd_jets: true,
            jet_shifts: vec![0.0, 1e-3, 1e-2, 1e-1, 1.0],
            tol: 1e-9,
            touch_tol: 1e-12,
            max_violations: 16,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JetSource {
    Dictionary,
    FiniteDifference,
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub node: usize,
    pub point: Vec<f64>,
    pub p: Vec<f64>,
    pub hess: Vec<Vec<f64>>,
    pub value: f64,
    pub source: JetSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubsolutionVerdict {
    /// No sampled touching jet violated the inequality; not a proof.
    ConsistentWithSubsolution,
    Refuted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsolutionReport {
    pub operator: String,
    pub verdict: SubsolutionVerdict,
    pub nodes_checked: usize,
    pub dictionary_size: usize,
    pub touching_jets: usize,
    pub singular_skips: usize,
    /// Largest `F` over touching jets.
    pub max_value: Option<f64>,
    pub total_violations: usize,
    pub violations: Vec<Violation>,
}

impl SubsolutionReport {
    pub fn worst(&self) -> Option<&Violation> {
        self.violations.first()
    }
}

fn dictionary(d: usize, params: &JetParams) -> Vec<(Vector, Matrix)> {
    let mut dirs = Vec::new();
    for i in 0..d {
        let mut e = Vector::zeros(d);
        e[i] = 1.0;
        dirs.push(e.clone());
        dirs.push(-e);
    }
    dirs.extend(sampling::adapted_directions(d, params.n_directions, None));
    let ps: Vec<Vector> = dirs
        .iter()
        .flat_map(|u| params.magnitudes.iter().map(move |m| u * *m))
        .filter(|p| p.norm() >= params.p_min)
        .collect();
    let mut shapes = vec![Matrix::zeros(d, d)];
    for &k in &params.curvatures {
        for s in [k, -k] {
            shapes.push(linalg::identity(d) * s);
            for i in 0..d {
                let mut m = Matrix::zeros(d, d);
                m[(i, i)] = s;
                shapes.push(m);
            }
        }
    }
    ps.iter()
        .flat_map(|p| shapes.iter().map(move |x| (p.clone(), x.clone())))
        .collect()
}

struct NodeOutcome {
    touching: usize,
    singular: usize,
    max_value: Option<f64>,
    violations: Vec<Violation>,
}

/// Grid test of the viscosity subsolution inequality `F ≤ 0`.
///
/// At every node at least `ρ` cells from the edge, each test jet `(p, X)`
/// with `|p| ≥ p_min` whose quadratic touches `u` from above on the
/// `ρ`-neighborhood is evaluated; `F > tol` refutes. The dictionary is the
/// direction × magnitude × curvature grid, plus the finite-difference jet of
/// the node (and the exact jet when `exact` is given) with the shifts
/// `X + κ I`.
pub fn check_subsolution(
    f: &OperatorSpec,
    u: &GridFunction,
    params: &JetParams,
    exact: Option<&SmoothFunction>,
) -> Result<SubsolutionReport> {
    let d = u.dim();
    if f.arg_dim != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: f.arg_dim,
        });
    }
    if params.rho == 0 {
        return Err(Error::InvalidParameter("rho must be at least one cell".into()));
    }
    let dict = dictionary(d, params);
    if dict.is_empty() && !params.fd_jets && exact.is_none() {
        return Err(Error::InvalidParameter("test-jet dictionary empty after the p_min filter".into()));
    }
    let h = u.spacing();
    let stencil = u.stencil(params.rho);
    let deltas: Vec<Vector> = stencil
        .iter()
        .map(|o| Vector::from_iterator(d, o.iter().zip(&h).map(|(k, hk)| *k as f64 * hk)))
        .collect();
    let scale = 1.0 + u.values().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let slack = params.touch_tol * scale;
    let nodes: Vec<usize> = (0..u.len()).filter(|n| u.is_interior(*n, params.rho)).collect();

    let outcomes: Vec<Result<NodeOutcome>> = nodes
        .par_iter()
        .map(|&node| {
            let x = u.point(node);
            let u0 = u.value(node);
            let du: Vec<f64> = stencil
                .iter()
                .map(|o| u.value(u.offset(node, o).expect("interior node")) - u0)
                .collect();
            let touches = |p: &Vector, xm: &Matrix| {
                deltas
                    .iter()
                    .zip(&du)
                    .all(|(dl, dv)| *dv <= p.dot(dl) + 0.5 * dl.dot(&(xm * dl)) + slack)
            };
            let mut extra: Vec<(Vector, Matrix, JetSource)> = Vec::new();
            let mut shifted = |p: Vector, xm: Matrix, src: JetSource| {
                if p.norm() < params.p_min {
                    return;
                }
                for &k in &params.jet_shifts {
                    extra.push((p.clone(), linalg::symmetrize(&(&xm + linalg::identity(d) * k)), src));
                }
            };
            if params.fd_jets {
                if let Some((p, xm)) = u.fd_jet(node) {
                    shifted(p, xm, JetSource::FiniteDifference);
                }
            }
            if let Some(s) = exact {
                let (_, p, xm) = s.jet(&x);
                shifted(p, xm, JetSource::Exact);
            }
            let mut out = NodeOutcome {
                touching: 0,
                singular: 0,
                max_value: None,
                violations: Vec::new(),
            };
            let candidates = dict
                .iter()
                .map(|(p, xm)| (p, xm, JetSource::Dictionary))
                .chain(extra.iter().map(|(p, xm, s)| (p, xm, *s)));
            for (p, xm, src) in candidates {
                if !touches(p, xm) {
                    continue;
                }
                out.touching += 1;
                let jet = Jet::new(x.clone(), u0, p.clone(), xm.clone())?;
                let v = match f.eval(&jet) {
                    Ok(v) => v,
                    Err(Error::Singular(_)) => {
                        out.singular += 1;
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                out.max_value = Some(out.max_value.map_or(v, |m: f64| m.max(v)));
                if v > params.tol {
                    out.violations.push(Violation {
                        node,
                        point: x.clone(),
                        p: p.iter().copied().collect(),
                        hess: linalg::matrix_to_rows(xm),
                        value: v,
                        source: src,
                    });
                }
            }
            // keep the node's worst few only
            out.violations.sort_by(|a, b| b.value.total_cmp(&a.value));
            out.violations.truncate(params.max_violations.max(1));
            Ok(out)
        })
        .collect();

    let mut touching = 0;
    let mut singular = 0;
    let mut max_value: Option<f64> = None;
    let mut violations = Vec::new();
    let mut total = 0;
    for o in outcomes {
        let o = o?;
        touching += o.touching;
        singular += o.singular;
        if let Some(v) = o.max_value {
            max_value = Some(max_value.map_or(v, |m| m.max(v)));
        }
        total += o.violations.len();
        violations.extend(o.violations);
    }
    violations.sort_by(|a, b| b.value.total_cmp(&a.value).then(a.node.cmp(&b.node)));
    violations.truncate(params.max_violations);
    Ok(SubsolutionReport {
        operator: f.label.clone(),
        verdict: if total > 0 {
            SubsolutionVerdict::Refuted
        } else {
            SubsolutionVerdict::ConsistentWithSubsolution
        },
        nodes_checked: nodes.len(),
        dictionary_size: dict.len(),
        touching_jets: touching,
        singular_skips: singular,
        max_value,
        total_violations: total,
        violations,
    })
}
