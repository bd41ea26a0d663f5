use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::barrier::dist;
use super::grid::SmoothFunction;
use crate::error::{Error, Result};
use crate::fields::VectorFieldFamily;
use crate::linalg::{self, Vector};
use crate::operators::{build_hjb, HjbMode, Jet, LinearOperatorFamily, OperatorSpec};
use crate::sampling;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointFailure {
    pub point: Vec<f64>,
    pub value: f64,
    pub what: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScpDifferenceReport {
    pub preconditions_ok: bool,
    pub precondition_failure: Option<PointFailure>,
    /// `max F_i[(u − v)-jet]` over the samples.
    pub margin: Option<f64>,
    pub worst_point: Option<Vec<f64>>,
    pub pass: bool,
    pub samples: usize,
}

fn jet_of(x: &[f64], s: &SmoothFunction) -> Jet {
    let (r, p, hess) = s.jet(x);
    Jet {
        x: x.to_vec(),
        r,
        p,
        hess: linalg::symmetrize(&hess),
    }
}

/// Checks that `w = u − v` satisfies the homogeneous inequality
/// `inf_α L^α w ≤ tol` wherever `u` and `v` are smooth sub- and
/// supersolutions of the inf-operator built from `family`.
pub fn scp_difference_check(
    family: &LinearOperatorFamily,
    u: &SmoothFunction,
    v: &SmoothFunction,
    points: &[Vec<f64>],
    tol: f64,
) -> Result<ScpDifferenceReport> {
    if points.is_empty() {
        return Err(Error::InvalidParameter("no sample points".into()));
    }
    let f = build_hjb(family, HjbMode::Inf, false)?;
    let fi = build_hjb(family, HjbMode::Inf, true)?;
    let mut report = ScpDifferenceReport {
        preconditions_ok: true,
        precondition_failure: None,
        margin: None,
        worst_point: None,
        pass: false,
        samples: points.len(),
    };
    for x in points {
        family.check_at(x)?;
        let fu = f.eval(&jet_of(x, u))?;
        let fv = f.eval(&jet_of(x, v))?;
        let failure = if fu > tol {
            Some((fu, "F[u] > tol"))
        } else if fv < -tol {
            Some((fv, "F[v] < -tol"))
        } else {
            None
        };
        if let Some((value, what)) = failure {
            report.preconditions_ok = false;
            report.precondition_failure = Some(PointFailure {
                point: x.clone(),
                value,
                what: what.into(),
            });
            return Ok(report);
        }
    }
    let mut margin = f64::NEG_INFINITY;
    let mut worst = None;
    for x in points {
        let ju = jet_of(x, u);
        let jv = jet_of(x, v);
        let jw = Jet {
            x: x.clone(),
            r: ju.r - jv.r,
            p: ju.p - jv.p,
            hess: ju.hess - jv.hess,
        };
        let m = fi.eval(&jw)?;
        if m > margin {
            margin = m;
            worst = Some(x.clone());
        }
    }
    report.margin = Some(margin);
    report.worst_point = worst;
    report.pass = margin <= tol;
    Ok(report)
}

/// Estimate of `sup |F(x,r,p,X) − F(x,r,p',X)| / |p − p'|` from random
/// jets at the given points; a lower bound on the true constant.
pub fn estimate_lipschitz_p(f: &OperatorSpec, points: &[Vec<f64>], jets_per_point: usize, seed: u64) -> Result<f64> {
    let d = f.arg_dim;
    let step = 1e-4;
    let per: Vec<Result<f64>> = points
        .par_iter()
        .enumerate()
        .map(|(k, x)| {
            let mut rng = sampling::substream(seed, k as u64);
            let mut best: f64 = 0.0;
            for _ in 0..jets_per_point {
                let p = sampling::gaussian_vector(d, &mut rng);
                let hess = linalg::symmetrize(&sampling::gaussian_matrix(d, d, &mut rng));
                let r: f64 = rand::Rng::random_range(&mut rng, -1.0..0.0);
                let e = sampling::random_unit(d, &mut rng) * step;
                let a = f.eval(&Jet::new(x.clone(), r, p.clone(), hess.clone())?);
                let b = f.eval(&Jet::new(x.clone(), r, &p + &e, hess)?);
                if let (Ok(a), Ok(b)) = (a, b) {
                    best = best.max((a - b).abs() / step);
                }
            }
            Ok(best)
        })
        .collect();
    per.into_iter().try_fold(0.0f64, |acc, v| Ok(acc.max(v?)))
}

/// Parameters of `u_ε = u + ε(e^{|x−x̄|²/2} − λ)` on `B(x̄, r̄)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrictLift {
    pub center: Vec<f64>,
    pub epsilon: f64,
    pub lambda: f64,
    pub delta: f64,
    pub r_bar: f64,
    pub r1: f64,
    pub l_k: f64,
    pub eta_bar: f64,
    /// `L_K` was estimated by sampling rather than declared.
    pub l_k_estimated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LiftParams {
    pub epsilon: f64,
    pub delta: f64,
    pub r1: f64,
    /// Defaults to `e^{r̄²/2}`.
    pub lambda: Option<f64>,
    /// Samples of `K = B(x̄, r₁)` for `η̄` and `L_K`.
    pub k_samples: usize,
    pub seed: u64,
}

impl Default for LiftParams {
    fn default() -> Self {
        Self {
            epsilon: 1e-2,
            delta: 0.5,
            r1: 0.5,
            lambda: None,
            k_samples: 256,
            seed: 0,
        }
    }
}

impl StrictLift {
    /// Computes `η̄ = min_K η` with `η = (1/m)Σ|Z_i|²`, takes `L_K` from the
    /// operator (or estimates it) and sets `r̄ = min((η̄ − δ)/L_K, r₁)`.
    pub fn build(f: &OperatorSpec, family: &VectorFieldFamily, center: &[f64], params: &LiftParams) -> Result<Self> {
        if !(params.epsilon > 0.0 && params.r1 > 0.0) {
            return Err(Error::InvalidParameter("need epsilon > 0 and r1 > 0".into()));
        }
        family.check_point(center)?;
        let mut rng = sampling::rng(params.seed);
        let mut k_points = vec![center.to_vec()];
        while k_points.len() < params.k_samples.max(1) {
            k_points.push(sampling::random_in_ball(center, params.r1, &mut rng));
        }
        let mut eta_bar = f64::INFINITY;
        for x in &k_points {
            eta_bar = eta_bar.min(family.mean_square_norm(x)?);
        }
        let (l_k, estimated) = match f.lipschitz_p {
            Some(l) => (l, false),
            None => (estimate_lipschitz_p(f, &k_points, 8, params.seed)?, true),
        };
        if !(params.delta > 0.0 && params.delta < eta_bar) {
            return Err(Error::Precondition(format!(
                "need 0 < delta < eta_bar, got delta = {}, eta_bar = {eta_bar}",
                params.delta
            )));
        }
        let r_bar = if l_k > 0.0 {
            ((eta_bar - params.delta) / l_k).min(params.r1)
        } else {
            params.r1
        };
        let lambda_min = (r_bar * r_bar / 2.0).exp();
        let lambda = params.lambda.unwrap_or(lambda_min);
        if lambda < lambda_min {
            return Err(Error::Precondition(format!("lambda = {lambda} below e^(r_bar^2/2) = {lambda_min}")));
        }
        Ok(Self {
            center: center.to_vec(),
            epsilon: params.epsilon,
            lambda,
            delta: params.delta,
            r_bar,
            r1: params.r1,
            l_k,
            eta_bar,
            l_k_estimated: estimated,
        })
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        Self { epsilon, ..self.clone() }
    }

    /// Jet of `u_ε` at `x`.
    pub fn lifted_jet(&self, u: &SmoothFunction, x: &[f64]) -> Jet {
        let d = x.len();
        let (r, p, hess) = u.jet(x);
        let w = Vector::from_iterator(d, x.iter().zip(&self.center).map(|(a, b)| a - b));
        let e = (w.norm_squared() / 2.0).exp();
        let eps = self.epsilon;
        Jet {
            x: x.to_vec(),
            r: r + eps * (e - self.lambda),
            p: p + &w * (eps * e),
            hess: linalg::symmetrize(&(hess + (linalg::identity(d) + linalg::outer(&w, &w)) * (eps * e))),
        }
    }

    /// `α(x) = −ε e^{|x−x̄|²/2} δ`.
    pub fn bound(&self, x: &[f64]) -> f64 {
        let n2: f64 = x.iter().zip(&self.center).map(|(a, b)| (a - b) * (a - b)).sum();
        -self.epsilon * (n2 / 2.0).exp() * self.delta
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrictLiftReport {
    pub lift: StrictLift,
    pub preconditions_ok: bool,
    pub precondition_failure: Option<PointFailure>,
    /// `max F[u_ε]` over the samples.
    pub max_value: Option<f64>,
    /// `max (F[u_ε] − α)`; nonpositive when the strict bound holds.
    pub margin: Option<f64>,
    pub pass: bool,
    /// Decrease `min_x (F[u] − F[u_ε])` at `ε`, `ε/10`, `ε/100`.
    pub decreases: Vec<(f64, f64)>,
    /// Consecutive decrease ratios divided by 10.
    pub linearity_ratios: Vec<f64>,
    pub samples: usize,
}

/// Evaluates `F` on the exact jet of `u_ε` at samples of `B(x̄, r̄)` and
/// checks `F[u_ε] ≤ −ε e^{|x−x̄|²/2} δ`. Also checks, at every sample, the
/// modulus bound `F(X + I) ≤ F(X) − η(x)` on the jet of `u`.
pub fn strict_lift_check(
    f: &OperatorSpec,
    family: &VectorFieldFamily,
    u: &SmoothFunction,
    lift: &StrictLift,
    n_samples: usize,
    seed: u64,
    tol: f64,
) -> Result<StrictLiftReport> {
    let mut rng = sampling::rng(seed);
    let mut points = vec![lift.center.clone()];
    while points.len() < n_samples.max(1) {
        points.push(sampling::random_in_ball(&lift.center, lift.r_bar, &mut rng));
    }
    let mut report = StrictLiftReport {
        lift: lift.clone(),
        preconditions_ok: true,
        precondition_failure: None,
        max_value: None,
        margin: None,
        pass: false,
        decreases: Vec::new(),
        linearity_ratios: Vec::new(),
        samples: points.len(),
    };
    let d = lift.center.len();
    let mut base = Vec::with_capacity(points.len());
    for x in &points {
        debug_assert!(dist(x, &lift.center) <= lift.r_bar * (1.0 + 1e-12));
        let ju = jet_of(x, u);
        let fu = f.eval(&ju)?;
        let eta = family.mean_square_norm(x)?;
        let shifted = Jet {
            hess: &ju.hess + linalg::identity(d),
            ..ju.clone()
        };
        let fs = f.eval(&shifted)?;
        let failure = if fu > tol {
            Some((fu, "F[u] > tol".to_string()))
        } else if fs > fu - eta + tol.max(1e-12 * (1.0 + fu.abs())) {
            Some((fs - fu, format!("F(X + I) - F(X) > -eta(x) = {}", -eta)))
        } else {
            None
        };
        if let Some((value, what)) = failure {
            report.preconditions_ok = false;
            report.precondition_failure = Some(PointFailure {
                point: x.clone(),
                value,
                what,
            });
            return Ok(report);
        }
        base.push(fu);
    }
    let eval_at = |l: &StrictLift| -> Result<Vec<f64>> {
        points.iter().map(|x| f.eval(&l.lifted_jet(u, x))).collect()
    };
    let vals = eval_at(lift)?;
    let mut max_value = f64::NEG_INFINITY;
    let mut margin = f64::NEG_INFINITY;
    for (x, v) in points.iter().zip(&vals) {
        max_value = max_value.max(*v);
        margin = margin.max(v - lift.bound(x));
    }
    for k in 0..3 {
        let eps = lift.epsilon / 10f64.powi(k);
        let l = lift.with_epsilon(eps);
        let dec = eval_at(&l)?
            .iter()
            .zip(&base)
            .map(|(v, b)| b - v)
            .fold(f64::INFINITY, f64::min);
        report.decreases.push((eps, dec));
    }
    report.linearity_ratios = report
        .decreases
        .windows(2)
        .map(|w| w[0].1 / (10.0 * w[1].1))
        .collect();
    report.max_value = Some(max_value);
    report.margin = Some(margin);
    report.pass = margin <= tol;
    Ok(report)
}
