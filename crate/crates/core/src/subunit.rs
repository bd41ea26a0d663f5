//! Subunit vectors: the classical test `A ⪰ Z⊗Z`, its scaling radius, the
//! sampled certification of `sup_γ F(x, 0, p, I − γ p⊗p) > 0`, and the
//! structural characterizations for HJB and Isaacs families.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::operators::{IsaacsFamily, Jet, LinearOperator, LinearOperatorFamily, OperatorSpec};
use crate::sampling;

/// Eigenvalues of `A` at most this (relative to `max(1, λ_max)`) count as
/// kernel.
pub const KERNEL_TOL: f64 = 1e-12;
/// Slope in `γ`, per unit `|p|²` and operator scale, below which a probe
/// profile counts as flat.
const SLOPE_NOISE: f64 = 8.0 * f64::EPSILON;

/// `min eig(A − Z⊗Z) ≥ −tol`.
pub fn classical_subunit(a: &Matrix, z: &Vector, tol: f64) -> Result<bool> {
    check_sizes(a, z)?;
    Ok(linalg::min_eigenvalue(&(a - linalg::outer(z, z)))? >= -tol)
}

fn check_sizes(a: &Matrix, z: &Vector) -> Result<()> {
    linalg::ensure_square(a)?;
    if a.nrows() != z.len() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            got: z.len(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingRadius {
    /// Largest `r` with `A ⪰ r²Z⊗Z`; infinite when `Z = 0`.
    pub r_max: f64,
    /// Set when `Z = 0`, where every `r` works.
    pub degenerate: bool,
}

/// `r_max = (Σ_{λ_i>0} Z̃_i²/λ_i)^{−1/2}` in the eigenbasis of `A`, or `0`
/// when `Z` has a component in `ker A`.
pub fn subunit_scaling_radius(a: &Matrix, z: &Vector) -> Result<ScalingRadius> {
    check_sizes(a, z)?;
    let zn = z.norm();
    if zn == 0.0 {
        return Ok(ScalingRadius {
            r_max: f64::INFINITY,
            degenerate: true,
        });
    }
    let eig = linalg::symmetric_eigen(a)?;
    let lmax = eig.values.iter().copied().fold(0.0, f64::max);
    let cutoff = KERNEL_TOL * lmax.max(1.0);
    let zt = eig.vectors.transpose() * z;
    let mut quad = 0.0;
    for (lam, c) in eig.values.iter().zip(zt.iter()) {
        if *lam <= cutoff {
            if c.abs() > KERNEL_TOL * zn.max(1.0) {
                return Ok(ScalingRadius {
                    r_max: 0.0,
                    degenerate: false,
                });
            }
        } else {
            quad += c * c / lam;
        }
    }
    Ok(ScalingRadius {
        r_max: 1.0 / quad.sqrt(),
        degenerate: false,
    })
}

/// Unit vector in `ker A` along the projection of `Z`, if that projection
/// is nonzero: then `p̄·A p̄ = 0` and `p̄·Z ≠ 0`.
pub fn kernel_witness(a: &Matrix, z: &Vector) -> Result<Option<Vector>> {
    check_sizes(a, z)?;
    let eig = linalg::symmetric_eigen(a)?;
    let lmax = eig.values.iter().copied().fold(0.0, f64::max);
    let cutoff = KERNEL_TOL * lmax.max(1.0);
    let mut proj = Vector::zeros(z.len());
    for (k, lam) in eig.values.iter().enumerate() {
        if *lam <= cutoff {
            let v = eig.vectors.column(k);
            proj += v * v.dot(z);
        }
    }
    let n = proj.norm();
    Ok((n > KERNEL_TOL * z.norm().max(1.0)).then(|| proj / n))
}

/// Unit vectors spanning `ker A`.
pub fn kernel_basis(a: &Matrix) -> Result<Vec<Vector>> {
    let eig = linalg::symmetric_eigen(a)?;
    let lmax = eig.values.iter().copied().fold(0.0, f64::max);
    let cutoff = KERNEL_TOL * lmax.max(1.0);
    Ok(eig
        .values
        .iter()
        .enumerate()
        .filter(|(_, l)| **l <= cutoff)
        .map(|(k, _)| eig.vectors.column(k).into_owned())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubunitMode {
    /// `sup_γ F(x, 0, p, I − γ p⊗p) > 0`.
    Plus,
    /// `inf_γ F(x, 0, p, γ p⊗p − I) < 0`.
    Minus,
    /// `F(x, 0, p, I − γ p⊗p) → +∞`.
    Strong,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Certified,
    Refuted,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchParams {
    /// Quasi-uniform unit directions (added to `±Z/|Z|` and `±e_i`).
    pub n_samples: usize,
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub n_gamma: usize,
    pub tol_dot: f64,
    pub tol_pos: f64,
    /// Radial sub-grid applied to every unit direction.
    pub radii: Vec<f64>,
    /// Strong mode: value required at `γ_max`.
    pub strong_threshold: f64,
    /// Extra directions, tested with both signs.
    pub extra_directions: Vec<Vec<f64>>,
}

impl Default for SearchParams {
    fn default() -> Self {
        Self {
            n_samples: 256,
            gamma_min: 1e-2,
            gamma_max: 1e8,
            n_gamma: 64,
            tol_dot: 1e-8,
            tol_pos: 1e-10,
            radii: vec![1.0, 0.1, 10.0],
            strong_threshold: 10.0,
            extra_directions: Vec::new(),
        }
    }
}

impl SearchParams {
    pub fn gamma_grid(&self) -> Vec<f64> {
        sampling::log_grid(self.gamma_min, self.gamma_max, self.n_gamma)
    }

    fn validate(&self) -> Result<()> {
        if !(self.gamma_min > 0.0 && self.gamma_max > self.gamma_min && self.n_gamma >= 2) {
            return Err(Error::InvalidParameter("bad gamma grid".into()));
        }
        if self.radii.is_empty() || self.radii.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::InvalidParameter("radii must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeStatus {
    Positive,
    Refuting,
    Undecided,
}

/// Outcome for one direction `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub p: Vec<f64>,
    pub status: ProbeStatus,
    /// First grid `γ` at which the condition held.
    pub gamma_star: Option<f64>,
    /// Value of the profile at the largest evaluated `γ`.
    pub last_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubunitCertificate {
    pub operator: String,
    pub point: Vec<f64>,
    pub z: Vec<f64>,
    pub mode: SubunitMode,
    pub verdict: Verdict,
    pub witness_p: Option<Vec<f64>>,
    pub witness_value: Option<f64>,
    pub directions_tested: usize,
    /// Directions dropped because `|Z·p| ≤ tol_dot`.
    pub directions_skipped: usize,
    pub undecided_directions: usize,
    pub singular_evaluations: usize,
    pub probes: Vec<Probe>,
    pub search_params: SearchParams,
}

fn direction_set(dim: usize, z: &Vector, params: &SearchParams) -> Result<Vec<Vector>> {
    let zu = z / z.norm();
    let mut dirs = vec![zu.clone(), -&zu];
    for e in &params.extra_directions {
        if e.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: e.len(),
            });
        }
        let v = Vector::from_column_slice(e);
        let n = v.norm();
        if n > 0.0 {
            dirs.push(&v / n);
            dirs.push(-&v / n);
        }
    }
    for i in 0..dim {
        let mut e = Vector::zeros(dim);
        e[i] = 1.0;
        dirs.push(e.clone());
        dirs.push(-e);
    }
    dirs.extend(sampling::adapted_directions(dim, params.n_samples, Some(z)));
    Ok(dirs)
}

struct Profile {
    values: Vec<f64>,
    singular: usize,
}

/// Values of the probe along `grid`; in plus and minus mode the profile
/// stops at the first value above `stop_above`, which already decides it.
fn profile(f: &OperatorSpec, x: &[f64], p: &Vector, mode: SubunitMode, grid: &[f64], stop_above: f64) -> Result<Profile> {
    let mut values = Vec::with_capacity(grid.len());
    let mut singular = 0;
    for &g in grid {
        let jet = Jet::subunit_probe(x, p, g);
        let v = match mode {
            SubunitMode::Plus | SubunitMode::Strong => f.eval(&jet),
            SubunitMode::Minus => f.eval(&jet.negated()).map(|v| -v),
        };
        match v {
            Ok(v) => values.push(v),
            Err(Error::Singular(_)) => {
                singular += 1;
                values.push(f64::NAN);
            }
            Err(e) => return Err(e),
        }
        if mode != SubunitMode::Strong && values.last().is_some_and(|v| *v > stop_above) {
            break;
        }
    }
    Ok(Profile { values, singular })
}

fn classify(
    prof: &Profile,
    grid: &[f64],
    p_norm2: f64,
    mode: SubunitMode,
    params: &SearchParams,
) -> (ProbeStatus, Option<f64>, f64) {
    let valid: Vec<(f64, f64)> = grid
        .iter()
        .zip(&prof.values)
        .filter(|(_, v)| v.is_finite())
        .map(|(g, v)| (*g, *v))
        .collect();
    let Some(&(g_last, last)) = valid.last() else {
        return (ProbeStatus::Undecided, None, f64::NAN);
    };
    match mode {
        SubunitMode::Plus | SubunitMode::Minus => {
            if let Some(&(g, _)) = valid.iter().find(|(_, v)| *v > params.tol_pos) {
                return (ProbeStatus::Positive, Some(g), last);
            }
            let tail: Vec<(f64, f64)> = valid.iter().copied().filter(|(g, _)| *g >= g_last / 100.0).collect();
            // rounding in p·Ap grows like γ|p|² times the operator scale
            let scale = 1.0 + valid[0].1.abs();
            let non_increasing = tail.windows(2).all(|w| {
                let noise = 1e-12 * (1.0 + w[0].1.abs()) + SLOPE_NOISE * (w[1].0 - w[0].0) * p_norm2 * scale;
                w[1].1 <= w[0].1 + noise
            });
            if tail.len() >= 2 && non_increasing && last < params.tol_pos {
                (ProbeStatus::Refuting, None, last)
            } else {
                (ProbeStatus::Undecided, None, last)
            }
        }
        SubunitMode::Strong => {
            let earlier = valid
                .iter()
                .rev()
                .find(|(g, _)| *g <= g_last / 10.0)
                .map(|(_, v)| *v);
            if last >= params.strong_threshold && earlier.is_some_and(|e| last > e) {
                let g = valid
                    .iter()
                    .find(|(_, v)| *v >= params.strong_threshold)
                    .map(|(g, _)| *g);
                (ProbeStatus::Positive, g, last)
            } else if last < params.strong_threshold {
                (ProbeStatus::Refuting, None, last)
            } else {
                (ProbeStatus::Undecided, None, last)
            }
        }
    }
}

/// Sampled certification of `Z` as a subunit vector of `F` at `x`.
///
/// Every direction `p` (unit directions times the radial sub-grid) with
/// `|Z·p| > tol_dot` is probed along the `γ` grid. A direction refutes only
/// when its profile is non-increasing over the top two decades of the grid
/// and still below `tol_pos` at the end; any refuting direction refutes `Z`,
/// otherwise any undecided one makes the verdict inconclusive.
pub fn certify_subunit(
    f: &OperatorSpec,
    x: &[f64],
    z: &Vector,
    mode: SubunitMode,
    params: &SearchParams,
) -> Result<SubunitCertificate> {
    params.validate()?;
    let d = f.arg_dim;
    if z.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: z.len(),
        });
    }
    if z.norm() == 0.0 {
        return Err(Error::InvalidParameter("Z = 0 makes the condition vacuous".into()));
    }
    let grid = params.gamma_grid();
    let mut candidates = Vec::new();
    let mut skipped = 0;
    for u in direction_set(d, z, params)? {
        for &rho in &params.radii {
            let p = &u * rho;
            if z.dot(&p).abs() > params.tol_dot {
                candidates.push(p);
            } else {
                skipped += 1;
            }
        }
    }
    let results: Vec<Result<(Probe, usize)>> = candidates
        .par_iter()
        .map(|p| {
            let prof = profile(f, x, p, mode, &grid, params.tol_pos)?;
            let (status, gamma_star, last_value) = classify(&prof, &grid, p.norm_squared(), mode, params);
            Ok((
                Probe {
                    p: p.iter().copied().collect(),
                    status,
                    gamma_star,
                    last_value,
                },
                prof.singular,
            ))
        })
        .collect();
    let mut probes = Vec::with_capacity(results.len());
    let mut singular = 0;
    for r in results {
        let (probe, s) = r?;
        singular += s;
        probes.push(probe);
    }
    let witness = probes.iter().find(|p| p.status == ProbeStatus::Refuting);
    let undecided = probes.iter().filter(|p| p.status == ProbeStatus::Undecided).count();
    let verdict = if witness.is_some() {
        Verdict::Refuted
    } else if undecided > 0 || probes.is_empty() {
        Verdict::Inconclusive
    } else {
        Verdict::Certified
    };
    Ok(SubunitCertificate {
        operator: f.label.clone(),
        point: x.to_vec(),
        z: z.iter().copied().collect(),
        mode,
        verdict,
        witness_p: witness.map(|w| w.p.clone()),
        witness_value: witness.map(|w| w.last_value),
        directions_tested: probes.len(),
        directions_skipped: skipped,
        undecided_directions: undecided,
        singular_evaluations: singular,
        probes,
        search_params: params.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyMode {
    HjbInf,
    HjbSup,
    IsaacsInfsup,
    IsaacsSupinf,
}

pub enum FamilyInput<'a> {
    Hjb(&'a LinearOperatorFamily),
    Isaacs(&'a IsaacsFamily),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyVerdict {
    pub mode: FamilyMode,
    /// The structural condition with the classical test `A ⪰ Z⊗Z` per member.
    pub holds: bool,
    /// The same quantifier pattern with "`rZ` is subunit for some `r > 0`"
    /// per member. Since the subunit property depends only on the direction
    /// of `Z`, this is the form equivalent to certification in `HjbInf`.
    pub holds_up_to_scaling: bool,
    /// True only for `HjbInf`; the other modes are sufficient conditions.
    pub equivalence: bool,
    pub summary: String,
    /// Classical test per member, `[α][β]` (one column for HJB).
    pub classical: Vec<Vec<bool>>,
    pub scaling_radius: Vec<Vec<f64>>,
    /// Index that decides the verdict (`ᾱ`, `β̄`, or a failing member).
    pub decisive_index: Option<Vec<usize>>,
}

fn member_tests(members: &[Vec<LinearOperator>], x: &[f64], z: &Vector, tol: f64) -> Result<(Vec<Vec<bool>>, Vec<Vec<f64>>)> {
    let mut classical = Vec::new();
    let mut radius = Vec::new();
    for row in members {
        let mut c_row = Vec::new();
        let mut r_row = Vec::new();
        for l in row {
            let a = l.a.eval(x);
            c_row.push(classical_subunit(&a, z, tol)?);
            r_row.push(subunit_scaling_radius(&a, z)?.r_max);
        }
        classical.push(c_row);
        radius.push(r_row);
    }
    Ok((classical, radius))
}

/// Evaluates the quantifier pattern of `mode` over a boolean table
/// `ok[α][β]`; returns the verdict and the decisive index.
fn quantify(mode: FamilyMode, ok: &[Vec<bool>]) -> (bool, Option<Vec<usize>>) {
    let na = ok.len();
    let nb = ok.first().map_or(0, Vec::len);
    match mode {
        FamilyMode::HjbInf => match (0..na).find(|&a| !ok[a][0]) {
            Some(a) => (false, Some(vec![a])),
            None => (true, None),
        },
        FamilyMode::HjbSup => match (0..na).find(|&a| ok[a][0]) {
            Some(a) => (true, Some(vec![a])),
            None => (false, None),
        },
        FamilyMode::IsaacsSupinf => match (0..nb).find(|&b| (0..na).all(|a| ok[a][b])) {
            Some(b) => (true, Some(vec![b])),
            None => (false, None),
        },
        FamilyMode::IsaacsInfsup => match (0..na).find(|&a| !(0..nb).any(|b| ok[a][b])) {
            Some(a) => (false, Some(vec![a])),
            None => (true, None),
        },
    }
}

/// Structural subunit test for HJB and Isaacs families at `x`.
pub fn family_subunit(input: FamilyInput<'_>, x: &[f64], z: &Vector, mode: FamilyMode, tol: f64) -> Result<FamilyVerdict> {
    let members: Vec<Vec<LinearOperator>> = match (&input, mode) {
        (FamilyInput::Hjb(f), FamilyMode::HjbInf | FamilyMode::HjbSup) => {
            f.members.iter().map(|m| vec![m.clone()]).collect()
        }
        (FamilyInput::Isaacs(f), FamilyMode::IsaacsInfsup | FamilyMode::IsaacsSupinf) => f.members.clone(),
        _ => {
            return Err(Error::InvalidParameter(format!(
                "mode {mode:?} does not match the family kind"
            )))
        }
    };
    let (classical, scaling_radius) = member_tests(&members, x, z, tol)?;
    let positive: Vec<Vec<bool>> = scaling_radius
        .iter()
        .map(|row| row.iter().map(|r| *r > 0.0).collect())
        .collect();
    let (holds, idx_c) = quantify(mode, &classical);
    let (holds_up_to_scaling, idx_s) = quantify(mode, &positive);
    let equivalence = mode == FamilyMode::HjbInf;
    let summary = match (equivalence, holds_up_to_scaling) {
        (true, true) => "subunit (up to scaling) for every member: Z is a subunit vector",
        (true, false) => "some member has Z outside its range: Z is not a subunit vector",
        (false, true) => "sufficient condition met",
        (false, false) => "sufficient condition not met",
    }
    .to_string();
    Ok(FamilyVerdict {
        mode,
        holds,
        holds_up_to_scaling,
        equivalence,
        summary,
        classical,
        scaling_radius,
        decisive_index: if holds { idx_c } else { idx_s.or(idx_c) },
    })
}
