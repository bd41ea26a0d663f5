use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::GridFunction;
use super::subsolution::{check_subsolution, JetParams, SubsolutionReport, SubsolutionVerdict};
use crate::error::{Error, Result};
use crate::fields::VectorFieldFamily;
use crate::operators::OperatorSpec;
use crate::reach::{integrate_trajectory, random_signal};
use crate::sampling;
use crate::subunit::{certify_subunit, SearchParams, SubunitMode, Verdict};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagationParams {
    /// Defaults to `2 · Lip(u) · cell diameter`, floored at
    /// `1e-12 · (1 + |max u|)`.
    pub tol: Option<f64>,
    pub n_traj: usize,
    pub horizon: f64,
    /// Constant pieces per random control.
    pub pieces: usize,
    /// Defaults to `min spacing / (4 max |Z|)`.
    pub dt: Option<f64>,
    pub seed: u64,
    /// Random nodes (besides the maximum point) at which the fields are
    /// certified subunit for `F`.
    pub subunit_points: usize,
    pub jets: JetParams,
    pub search: SearchParams,
}

impl Default for PropagationParams {
    fn default() -> Self {
        Self {
            tol: None,
            n_traj: 64,
            horizon: 1.0,
            pieces: 8,
            dt: None,
            seed: 0,
            subunit_points: 3,
            jets: JetParams::default(),
            search: SearchParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PropagationStatus {
    Pass,
    Fail,
    /// `u` failed the subsolution precheck.
    Refused,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubunitCheck {
    pub point: Vec<f64>,
    pub field: usize,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagationReport {
    pub status: PropagationStatus,
    pub x0: Vec<f64>,
    pub max_value: f64,
    pub tol: f64,
    /// Nodes with `u ≥ max − tol`.
    pub k_cells: Vec<usize>,
    pub trajectories_checked: usize,
    pub trajectories_exited: usize,
    pub max_deviation: f64,
    pub endpoints_in_k: bool,
    pub subunit_checks: Vec<SubunitCheck>,
    pub precheck: SubsolutionReport,
}

/// Integrates random controls of the system from the maximum point of `u`
/// and measures how far `u` moves from its maximum along them.
pub fn propagation_test(
    f: &OperatorSpec,
    family: &VectorFieldFamily,
    u: &GridFunction,
    params: &PropagationParams,
) -> Result<PropagationReport> {
    if family.dim() != u.dim() {
        return Err(Error::DimensionMismatch {
            expected: u.dim(),
            got: family.dim(),
        });
    }
    if params.n_traj == 0 || !(params.horizon > 0.0) {
        return Err(Error::InvalidParameter("need n_traj > 0 and horizon > 0".into()));
    }
    let x0_node = u.argmax();
    let x0 = u.point(x0_node);
    let max_value = u.value(x0_node);
    let tol = params
        .tol
        .unwrap_or((2.0 * u.lipschitz_estimate() * u.cell_diameter()).max(1e-12 * (1.0 + max_value.abs())));
    let k_cells: Vec<usize> = (0..u.len()).filter(|n| u.value(*n) >= max_value - tol).collect();
    let precheck = check_subsolution(f, u, &params.jets, None)?;
    let mut report = PropagationReport {
        status: PropagationStatus::Refused,
        x0: x0.clone(),
        max_value,
        tol,
        k_cells,
        trajectories_checked: 0,
        trajectories_exited: 0,
        max_deviation: 0.0,
        endpoints_in_k: true,
        subunit_checks: Vec::new(),
        precheck,
    };
    if report.precheck.verdict == SubsolutionVerdict::Refuted {
        return Ok(report);
    }
    if max_value < 0.0 {
        return Err(Error::Precondition(format!("maximum {max_value} is negative")));
    }
    let fam = family.clone().with_domain(u.bounds().clone())?;

    let mut rng = sampling::rng(params.seed);
    let mut points = vec![x0.clone()];
    for _ in 0..params.subunit_points {
        let n = rand::Rng::random_range(&mut rng, 0..u.len());
        points.push(u.point(n));
    }
    for pt in &points {
        for i in 0..fam.count() {
            let z = fam.eval_field(i, pt)?;
            if z.norm() == 0.0 {
                continue;
            }
            let cert = certify_subunit(f, pt, &z, SubunitMode::Plus, &params.search)?;
            report.subunit_checks.push(SubunitCheck {
                point: pt.clone(),
                field: i,
                verdict: cert.verdict,
            });
        }
    }
    if report.subunit_checks.iter().any(|c| c.verdict == Verdict::Refuted) {
        return Err(Error::Precondition("a field is not subunit for F at a sampled point".into()));
    }

    let hmin = u.spacing().iter().copied().fold(f64::INFINITY, f64::min);
    let dt = params.dt.unwrap_or_else(|| {
        let zmax = fam.max_field_norm(u.bounds());
        if zmax > 0.0 {
            hmin / (4.0 * zmax)
        } else {
            hmin
        }
    });
    let results: Vec<Result<(f64, bool, bool)>> = (0..params.n_traj)
        .into_par_iter()
        .map(|k| {
            let mut r = sampling::substream(params.seed, k as u64 + 1);
            let signal = random_signal(fam.count(), params.horizon, params.pieces, &mut r)?;
            let tr = integrate_trajectory(&fam, &x0, &signal, params.horizon, dt)?;
            let mut dev: f64 = 0.0;
            let mut last_inside = x0.clone();
            for y in &tr.states {
                if let Some(v) = u.interpolate(y) {
                    dev = dev.max((v - max_value).abs());
                    last_inside = y.clone();
                }
            }
            let end_node = u.nearest_node(&last_inside);
            let in_k = u.value(end_node) >= max_value - tol;
            Ok((dev, tr.exited.is_some(), in_k))
        })
        .collect();
    for r in results {
        let (dev, exited, in_k) = r?;
        report.trajectories_checked += 1;
        report.trajectories_exited += exited as usize;
        report.max_deviation = report.max_deviation.max(dev);
        report.endpoints_in_k &= in_k;
    }
    report.status = if report.max_deviation <= tol && report.endpoints_in_k {
        PropagationStatus::Pass
    } else {
        PropagationStatus::Fail
    };
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::DomainBox;
    use crate::linalg;
    use crate::operators::linear_trace_operator;

    fn u_line() -> GridFunction {
        GridFunction::from_fn(DomainBox::cube(2, 1.0), vec![21, 21], |x| -x[1] * x[1]).unwrap()
    }

    #[test]
    fn single_field_passes() {
        let fam = VectorFieldFamily::euclidean(2).subfamily(&[0]).unwrap();
        let f = linear_trace_operator(linalg::diag(&[1.0, 0.0])).unwrap();
        let r = propagation_test(&f, &fam, &u_line(), &PropagationParams::default()).unwrap();
        assert_eq!(r.status, PropagationStatus::Pass);
        assert_eq!(r.max_deviation, 0.0);
        assert!(r.k_cells.contains(&u_line().argmax()));
    }

    #[test]
    fn full_laplacian_refused() {
        let fam = VectorFieldFamily::euclidean(2);
        let f = linear_trace_operator(linalg::identity(2)).unwrap();
        let r = propagation_test(&f, &fam, &u_line(), &PropagationParams::default()).unwrap();
        assert_eq!(r.status, PropagationStatus::Refused);
        assert!((r.precheck.worst().unwrap().value - 2.0).abs() < 1e-9);
    }

    #[test]
    fn zero_function_passes() {
        let fam = VectorFieldFamily::grushin();
        let u = GridFunction::from_fn(DomainBox::cube(2, 1.0), vec![11, 11], |_| 0.0).unwrap();
        let f = linear_trace_operator(linalg::identity(2)).unwrap();
        let r = propagation_test(&f, &fam, &u, &PropagationParams::default()).unwrap();
        assert_eq!(r.status, PropagationStatus::Pass);
    }
}
