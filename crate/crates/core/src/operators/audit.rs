use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Jet, OperatorSpec, Scaling};
use crate::error::{Error, Result};
use crate::fields::DomainBox;
use crate::linalg::{self, Matrix};
use crate::sampling;

/// Sampling plan for [`audit_operator`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditSpec {
    /// Points always audited.
    pub points: Vec<Vec<f64>>,
    /// Extra points drawn uniformly from `region`.
    pub n_random_points: usize,
    pub region: Option<DomainBox>,
    pub jets_per_point: usize,
    /// Scale of the random gradient and Hessian entries.
    pub jet_scale: f64,
    pub xi_grid: Vec<f64>,
    pub s_grid: Vec<f64>,
    pub seed: u64,
    /// Relative tolerance of every inequality.
    pub tol: f64,
}

impl Default for AuditSpec {
    fn default() -> Self {
        Self {
            points: Vec::new(),
            n_random_points: 0,
            region: None,
            jets_per_point: 32,
            jet_scale: 1.0,
            xi_grid: (0..=10).map(|k| 0.5f64.powi(k)).collect(),
            s_grid: vec![-1.0, -0.5, -0.1, 0.0],
            seed: 0,
            tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WitnessKind {
    /// `F(x, r, p, X + P) > F(x, r, p, X)` for a PSD `P`.
    ProperHessian,
    /// `F(x, r + δ, p, X) < F(x, r, p, X)` for `δ > 0`.
    ProperR,
    /// Declared scaling inequality violated.
    Scaling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditWitness {
    pub kind: WitnessKind,
    pub x: Vec<f64>,
    pub r: f64,
    pub p: Vec<f64>,
    pub hess: Vec<Vec<f64>>,
    /// PSD increment for `ProperHessian`, `δ·I`-free otherwise.
    pub increment: Option<Vec<Vec<f64>>>,
    pub delta_r: Option<f64>,
    pub xi: Option<f64>,
    /// Left and right side of the violated inequality `lhs ≥ rhs`.
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub label: String,
    pub proper_ok: bool,
    pub scaling_ok: bool,
    /// False when the scaling is undeclared (nothing to audit).
    pub scaling_checked: bool,
    pub scaling_declared: String,
    pub points_audited: usize,
    pub jets_per_point: usize,
    pub skipped_evaluations: usize,
    /// Distinct points with a properness violation.
    pub proper_failure_points: Vec<Vec<f64>>,
    /// Distinct points with a scaling violation.
    pub scaling_failure_points: Vec<Vec<f64>>,
    /// First witness of each kind at each failing point.
    pub witnesses: Vec<AuditWitness>,
}

struct PointOutcome {
    witnesses: Vec<AuditWitness>,
    skipped: usize,
}

fn slack(tol: f64, a: f64, b: f64) -> f64 {
    tol * (1.0 + a.abs() + b.abs())
}

fn witness(kind: WitnessKind, jet: &Jet, lhs: f64, rhs: f64) -> AuditWitness {
    AuditWitness {
        kind,
        x: jet.x.clone(),
        r: jet.r,
        p: jet.p.iter().copied().collect(),
        hess: linalg::matrix_to_rows(&jet.hess),
        increment: None,
        delta_r: None,
        xi: None,
        lhs,
        rhs,
    }
}

fn audit_point(f: &OperatorSpec, spec: &AuditSpec, x: &[f64], stream: u64) -> PointOutcome {
    let n = f.arg_dim;
    let mut rng = sampling::substream(spec.seed, stream);
    let mut out = PointOutcome {
        witnesses: Vec::new(),
        skipped: 0,
    };
    let mut seen = [false; 3];
    let mut record = |w: AuditWitness, out: &mut PointOutcome| {
        let slot = w.kind as usize;
        if !seen[slot] {
            seen[slot] = true;
            out.witnesses.push(w);
        }
    };

    for _ in 0..spec.jets_per_point {
        let p = sampling::gaussian_vector(n, &mut rng) * spec.jet_scale;
        let hess = linalg::symmetrize(&sampling::gaussian_matrix(n, n, &mut rng)) * spec.jet_scale;
        let r: f64 = rng.random_range(-1.0..1.0);
        let base = Jet {
            x: x.to_vec(),
            r,
            p,
            hess,
        };
        let b = sampling::gaussian_matrix(n, rng.random_range(1..=n), &mut rng) * spec.jet_scale;
        let incr: Matrix = &b * b.transpose();
        let delta: f64 = rng.random_range(0.01..1.0);

        match (f.eval(&base), f.eval(&Jet { hess: &base.hess + &incr, ..base.clone() })) {
            (Ok(v0), Ok(v1)) => {
                if v1 > v0 + slack(spec.tol, v0, v1) {
                    let mut w = witness(WitnessKind::ProperHessian, &base, v0, v1);
                    w.increment = Some(linalg::matrix_to_rows(&incr));
                    record(w, &mut out);
                }
            }
            _ => out.skipped += 1,
        }
        match (f.eval(&base), f.eval(&Jet { r: base.r + delta, ..base.clone() })) {
            (Ok(v0), Ok(v1)) => {
                if v1 < v0 - slack(spec.tol, v0, v1) {
                    let mut w = witness(WitnessKind::ProperR, &base, v1, v0);
                    w.delta_r = Some(delta);
                    record(w, &mut out);
                }
            }
            _ => out.skipped += 1,
        }

        if matches!(f.scaling, Scaling::Undeclared) {
            continue;
        }
        for &s in &spec.s_grid {
            let jet = Jet { r: s, ..base.clone() };
            let v = match f.eval(&jet) {
                Ok(v) => v,
                Err(_) => {
                    out.skipped += 1;
                    continue;
                }
            };
            for &xi in &spec.xi_grid {
                let vx = match f.eval(&jet.scaled(xi)) {
                    Ok(v) => v,
                    Err(_) => {
                        out.skipped += 1;
                        continue;
                    }
                };
                let violated = match &f.scaling {
                    Scaling::Power(a) => {
                        let rhs = xi.powf(*a) * v;
                        (vx < rhs - slack(spec.tol, vx, rhs)).then_some(rhs)
                    }
                    Scaling::JetPower { exponent, .. } => {
                        let rhs = xi.powf(exponent(&jet)) * v;
                        (vx < rhs - slack(spec.tol, vx, rhs)).then_some(rhs)
                    }
                    Scaling::Implication => {
                        (v > slack(spec.tol, v, 0.0) && vx <= 0.0).then_some(0.0)
                    }
                    Scaling::Undeclared => None,
                };
                if let Some(rhs) = violated {
                    let mut w = witness(WitnessKind::Scaling, &jet, vx, rhs);
                    w.xi = Some(xi);
                    record(w, &mut out);
                }
            }
        }
    }
    out
}

/// Samples jets at each point and tests properness (antitone in `X`,
/// nondecreasing in `r`) and the declared scaling inequality for
/// `s ≤ 0`. Lower semicontinuity is not audited.
pub fn audit_operator(f: &OperatorSpec, spec: &AuditSpec) -> Result<AuditReport> {
    let mut points = spec.points.clone();
    if spec.n_random_points > 0 {
        let region = spec.region.as_ref().ok_or_else(|| {
            Error::InvalidParameter("random audit points need a region".into())
        })?;
        let mut rng = sampling::rng(spec.seed);
        for _ in 0..spec.n_random_points {
            points.push(
                region
                    .lo
                    .iter()
                    .zip(&region.hi)
                    .map(|(a, b)| rng.random_range(*a..=*b))
                    .collect(),
            );
        }
    }
    if points.is_empty() {
        return Err(Error::InvalidParameter("audit has no points".into()));
    }
    let outcomes: Vec<PointOutcome> = points
        .par_iter()
        .enumerate()
        .map(|(i, x)| audit_point(f, spec, x, i as u64 + 1))
        .collect();

    let mut report = AuditReport {
        label: f.label.clone(),
        proper_ok: true,
        scaling_ok: true,
        scaling_checked: !matches!(f.scaling, Scaling::Undeclared),
        scaling_declared: f.scaling.describe(),
        points_audited: points.len(),
        jets_per_point: spec.jets_per_point,
        skipped_evaluations: 0,
        proper_failure_points: Vec::new(),
        scaling_failure_points: Vec::new(),
        witnesses: Vec::new(),
    };
    for (x, o) in points.iter().zip(outcomes) {
        report.skipped_evaluations += o.skipped;
        let mut proper_bad = false;
        let mut scaling_bad = false;
        for w in o.witnesses {
            match w.kind {
                WitnessKind::Scaling => scaling_bad = true,
                _ => proper_bad = true,
            }
            report.witnesses.push(w);
        }
        if proper_bad {
            report.proper_ok = false;
            report.proper_failure_points.push(x.clone());
        }
        if scaling_bad {
            report.scaling_ok = false;
            report.scaling_failure_points.push(x.clone());
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{
        build_hjb, pucci_operator, smooth_counterexample_operator, HjbMode, LinearOperator,
        LinearOperatorFamily, PucciSign, ScalarField,
    };

    fn spec(points: Vec<Vec<f64>>) -> AuditSpec {
        AuditSpec {
            points,
            seed: 11,
            ..AuditSpec::default()
        }
    }

    #[test]
    fn pucci_passes() {
        let f = pucci_operator(3, 1.0, 2.0, PucciSign::Plus).unwrap();
        let r = audit_operator(&f, &spec(vec![vec![0.0; 3], vec![1.0, 2.0, 3.0]])).unwrap();
        assert!(r.proper_ok && r.scaling_ok && r.scaling_checked);
    }

    #[test]
    fn positive_trace_is_improper() {
        let f = OperatorSpec::custom("+tr", 2, |j: &Jet| Ok(j.hess.trace()));
        let r = audit_operator(&f, &spec(vec![vec![0.0; 2]])).unwrap();
        assert!(!r.proper_ok);
        let w = r.witnesses.iter().find(|w| w.kind == WitnessKind::ProperHessian).unwrap();
        assert!(w.increment.is_some());
    }

    #[test]
    fn counterexample_fails_only_where_f_negative() {
        let f = smooth_counterexample_operator(
            2,
            ScalarField::from_fn(|x: &[f64]| if x.iter().all(|v| *v == 0.0) { -1.0 } else { 0.0 }),
        );
        let pts = vec![vec![0.0, 0.0], vec![0.5, 0.0], vec![-0.25, 0.75]];
        let r = audit_operator(&f, &spec(pts)).unwrap();
        assert!(r.proper_ok);
        assert_eq!(r.scaling_failure_points, vec![vec![0.0, 0.0]]);
    }

    #[test]
    fn hjb_audit_with_zero_order() {
        let l = LinearOperator::diffusion(linalg::diag(&[1.0, 0.0])).with_zero_order(2.0.into());
        let fam = LinearOperatorFamily::new(2, vec![l]).unwrap();
        let f = build_hjb(&fam, HjbMode::Sup, true).unwrap();
        let r = audit_operator(&f, &spec(vec![vec![0.1, 0.2]])).unwrap();
        assert!(r.proper_ok && r.scaling_ok);
    }
}
