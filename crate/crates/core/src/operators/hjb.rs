use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Jet, MatrixMap, OperatorSpec, ScalarField, Scaling, VectorMap};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};

/// Smallest eigenvalue accepted for `A^α(x)`.
pub const PSD_TOL: f64 = 1e-10;

/// `L u = −Tr(A(x) D²u) − b(x)·Du + c(x) u`, with source `f(x)`.
#[derive(Clone, Debug)]
pub struct LinearOperator {
    pub a: MatrixMap,
    pub b: VectorMap,
    pub c: ScalarField,
    pub f: ScalarField,
}

impl LinearOperator {
    pub fn new(a: MatrixMap, b: VectorMap, c: ScalarField, f: ScalarField) -> Self {
        Self { a, b, c, f }
    }

    /// Constant `A`, no drift, no zero-order term, no source.
    pub fn diffusion(a: Matrix) -> Self {
        let d = a.nrows();
        Self::new(
            MatrixMap::Constant(a),
            VectorMap::zero(d),
            ScalarField::Constant(0.0),
            ScalarField::Constant(0.0),
        )
    }

    pub fn with_drift(mut self, b: VectorMap) -> Self {
        self.b = b;
        self
    }

    pub fn with_zero_order(mut self, c: ScalarField) -> Self {
        self.c = c;
        self
    }

    pub fn with_source(mut self, f: ScalarField) -> Self {
        self.f = f;
        self
    }

    /// `L` at the jet, minus `f(x)` unless `homogeneous`.
    pub fn eval(&self, jet: &Jet, homogeneous: bool) -> f64 {
        let a = self.a.eval(&jet.x);
        let b = self.b.eval(&jet.x);
        let mut v = -(a.component_mul(&jet.hess)).sum() - b.dot(&jet.p) + self.c.eval(&jet.x) * jet.r;
        if !homogeneous {
            v -= self.f.eval(&jet.x);
        }
        v
    }

    /// Checks `A(x) ⪰ 0`, `c(x) ≥ 0` and the sizes at `x`.
    pub fn check_at(&self, x: &[f64], dim: usize) -> Result<()> {
        let a = self.a.eval(x);
        if a.nrows() != dim || a.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: a.nrows(),
            });
        }
        let b = self.b.eval(x);
        if b.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: b.len(),
            });
        }
        let min = linalg::min_eigenvalue(&a)?;
        if min < -PSD_TOL {
            return Err(Error::Precondition(format!(
                "A(x) not positive semidefinite at {x:?} (min eigenvalue {min:e})"
            )));
        }
        let c = self.c.eval(x);
        if c < 0.0 {
            return Err(Error::Precondition(format!("c(x) = {c} < 0 at {x:?}")));
        }
        Ok(())
    }
}

/// The finite parameter list `α ↦ L^α`.
#[derive(Clone, Debug)]
pub struct LinearOperatorFamily {
    pub dim: usize,
    pub members: Vec<LinearOperator>,
}

impl LinearOperatorFamily {
    pub fn new(dim: usize, members: Vec<LinearOperator>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::InvalidParameter("empty operator family".into()));
        }
        Ok(Self { dim, members })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn check_at(&self, x: &[f64]) -> Result<()> {
        self.members.iter().try_for_each(|m| m.check_at(x, self.dim))
    }

    /// `max_α |b^α(x)|` over the given points.
    pub fn drift_bound(&self, points: &[Vec<f64>]) -> f64 {
        points
            .iter()
            .flat_map(|x| self.members.iter().map(move |m| m.b.eval(x).norm()))
            .fold(0.0, f64::max)
    }

    /// Exact when every drift is constant.
    fn constant_drift_bound(&self) -> Option<f64> {
        self.members
            .iter()
            .map(|m| match &m.b {
                VectorMap::Constant(b) => Some(b.norm()),
                _ => None,
            })
            .try_fold(0.0f64, |acc, b| b.map(|b| acc.max(b)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HjbMode {
    Inf,
    Sup,
}

/// `inf_α` (or `sup_α`) of `−Tr(A^α X) − b^α·p + c^α r − f^α`; the source is
/// dropped when `homogeneous`.
pub fn build_hjb(family: &LinearOperatorFamily, mode: HjbMode, homogeneous: bool) -> Result<OperatorSpec> {
    if family.is_empty() {
        return Err(Error::InvalidParameter("empty operator family".into()));
    }
    let members = family.members.clone();
    let eval = move |jet: &Jet| -> Result<f64> {
        let values = members.iter().map(|m| m.eval(jet, homogeneous));
        Ok(match mode {
            HjbMode::Inf => values.fold(f64::INFINITY, f64::min),
            HjbMode::Sup => values.fold(f64::NEG_INFINITY, f64::max),
        })
    };
    let label = format!(
        "hjb-{}{}(n={})",
        match mode {
            HjbMode::Inf => "inf",
            HjbMode::Sup => "sup",
        },
        if homogeneous { "" } else { "+f" },
        family.len()
    );
    Ok(OperatorSpec::new(label, family.dim, Arc::new(eval))
        .with_scaling(if homogeneous {
            Scaling::Power(1.0)
        } else {
            Scaling::Undeclared
        })
        .with_lipschitz_p(family.constant_drift_bound()))
}

/// Two-parameter family, indexed `members[α][β]`.
#[derive(Clone, Debug)]
pub struct IsaacsFamily {
    pub dim: usize,
    pub members: Vec<Vec<LinearOperator>>,
}

impl IsaacsFamily {
    pub fn new(dim: usize, members: Vec<Vec<LinearOperator>>) -> Result<Self> {
        let nb = members.first().map_or(0, Vec::len);
        if members.is_empty() || nb == 0 {
            return Err(Error::InvalidParameter("empty Isaacs family".into()));
        }
        if members.iter().any(|row| row.len() != nb) {
            return Err(Error::InvalidParameter("Isaacs family must be rectangular".into()));
        }
        Ok(Self { dim, members })
    }

    pub fn n_alpha(&self) -> usize {
        self.members.len()
    }

    pub fn n_beta(&self) -> usize {
        self.members[0].len()
    }

    /// The slice `β ↦ L^{α,β}` at fixed `α`.
    pub fn fixed_alpha(&self, alpha: usize) -> Vec<LinearOperator> {
        self.members[alpha].clone()
    }

    /// The slice `α ↦ L^{α,β}` at fixed `β`.
    pub fn fixed_beta(&self, beta: usize) -> Vec<LinearOperator> {
        self.members.iter().map(|row| row[beta].clone()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IsaacsMode {
    /// `F₊ = inf_α sup_β`.
    Infsup,
    /// `F₋ = sup_β inf_α`.
    Supinf,
}

/// Homogeneous Isaacs operators over a finite two-parameter family.
pub fn build_isaacs(family: &IsaacsFamily, mode: IsaacsMode) -> Result<OperatorSpec> {
    let members = family.members.clone();
    let nb = family.n_beta();
    let eval = move |jet: &Jet| -> Result<f64> {
        let table: Vec<Vec<f64>> = members
            .iter()
            .map(|row| row.iter().map(|l| l.eval(jet, true)).collect())
            .collect();
        Ok(match mode {
            IsaacsMode::Infsup => table
                .iter()
                .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
                .fold(f64::INFINITY, f64::min),
            IsaacsMode::Supinf => (0..nb)
                .map(|b| table.iter().map(|row| row[b]).fold(f64::INFINITY, f64::min))
                .fold(f64::NEG_INFINITY, f64::max),
        })
    };
    let label = format!(
        "isaacs-{}({}x{})",
        match mode {
            IsaacsMode::Infsup => "infsup",
            IsaacsMode::Supinf => "supinf",
        },
        family.n_alpha(),
        nb
    );
    Ok(OperatorSpec::new(label, family.dim, Arc::new(eval)).with_scaling(Scaling::Power(1.0)))
}

/// `−Tr(A X) − b·p` for constant data, as a one-member family.
pub(crate) fn constant_linear(a: Matrix, b: Vector) -> LinearOperator {
    LinearOperator::diffusion(a).with_drift(VectorMap::Constant(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{pucci_operator, PucciSign};
    use crate::sampling;
    use proptest::prelude::*;

    fn jet(x: &[f64], r: f64, p: &[f64], h: Matrix) -> Jet {
        Jet::new(x.to_vec(), r, Vector::from_column_slice(p), h).unwrap()
    }

    fn axes_family() -> LinearOperatorFamily {
        LinearOperatorFamily::new(
            2,
            vec![
                LinearOperator::diffusion(linalg::diag(&[1.0, 0.0])),
                LinearOperator::diffusion(linalg::diag(&[0.0, 1.0])),
            ],
        )
        .unwrap()
    }

    #[test]
    fn two_member_values() {
        let fam = axes_family();
        let inf = build_hjb(&fam, HjbMode::Inf, true).unwrap();
        let sup = build_hjb(&fam, HjbMode::Sup, true).unwrap();
        let j = jet(&[0.0, 0.0], 0.0, &[0.0, 0.0], Matrix::identity(2, 2));
        assert_eq!(inf.eval(&j).unwrap(), -1.0);
        let j = jet(&[0.0, 0.0], 0.0, &[0.0, 0.0], linalg::diag(&[1.0, 0.0]));
        assert_eq!(sup.eval(&j).unwrap(), 0.0);
        assert_eq!(inf.eval(&j).unwrap(), -1.0);
    }

    #[test]
    fn singleton_is_linear() {
        let a = linalg::matrix_from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let l = constant_linear(a.clone(), Vector::from_vec(vec![1.0, -1.0])).with_zero_order(0.5.into());
        let fam = LinearOperatorFamily::new(2, vec![l]).unwrap();
        let f = build_hjb(&fam, HjbMode::Inf, true).unwrap();
        let h = linalg::matrix_from_rows(&[vec![1.0, 2.0], vec![2.0, -1.0]]).unwrap();
        let j = jet(&[0.0, 0.0], 2.0, &[0.5, 0.25], h.clone());
        let expected = -(a.component_mul(&h)).sum() - (0.5 - 0.25) + 1.0;
        assert!((f.eval(&j).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn source_term_respected() {
        let l = LinearOperator::diffusion(Matrix::identity(1, 1)).with_source(3.0.into());
        let fam = LinearOperatorFamily::new(1, vec![l]).unwrap();
        let f = build_hjb(&fam, HjbMode::Inf, false).unwrap();
        let j = jet(&[0.0], 0.0, &[0.0], Matrix::zeros(1, 1));
        assert_eq!(f.eval(&j).unwrap(), -3.0);
    }

    #[test]
    fn check_rejects_indefinite() {
        let l = LinearOperator::diffusion(linalg::diag(&[1.0, -0.1]));
        assert!(l.check_at(&[0.0, 0.0], 2).is_err());
        let l = LinearOperator::diffusion(linalg::diag(&[1.0, 0.0])).with_zero_order((-1.0).into());
        assert!(l.check_at(&[0.0, 0.0], 2).is_err());
    }

    #[test]
    fn singleton_beta_reduces_to_hjb_inf() {
        let fam = axes_family();
        let isaacs = IsaacsFamily::new(2, fam.members.iter().map(|m| vec![m.clone()]).collect()).unwrap();
        let fm = build_isaacs(&isaacs, IsaacsMode::Supinf).unwrap();
        let inf = build_hjb(&fam, HjbMode::Inf, true).unwrap();
        let mut rng = sampling::rng(5);
        for _ in 0..50 {
            let h = linalg::symmetrize(&sampling::gaussian_matrix(2, 2, &mut rng));
            let j = jet(&[0.0, 0.0], 0.0, &[0.1, 0.2], h);
            assert_eq!(fm.eval(&j).unwrap(), inf.eval(&j).unwrap());
        }
    }

    /// `a M⁺ + b M⁻` equals `sup_β inf_α −Tr((a A_β + b A_α) X)` with the
    /// extremal matrices of each Pucci operator enumerated on a grid of
    /// diagonal `A` (exact in `d = 1`).
    #[test]
    fn pucci_combination_is_isaacs() {
        let (lambda, big) = (1.0, 2.0);
        let (ca, cb) = (0.7, 1.3);
        let levels = [lambda, big];
        let members: Vec<Vec<LinearOperator>> = levels
            .iter()
            .map(|&al| {
                levels
                    .iter()
                    .map(|&be| LinearOperator::diffusion(linalg::diag(&[ca * be + cb * al])))
                    .collect()
            })
            .collect();
        let fam = IsaacsFamily::new(1, members).unwrap();
        let fm = build_isaacs(&fam, IsaacsMode::Supinf).unwrap();
        let plus = pucci_operator(1, lambda, big, PucciSign::Plus).unwrap();
        let minus = pucci_operator(1, lambda, big, PucciSign::Minus).unwrap();
        for t in [-2.0, -0.3, 0.0, 0.4, 5.0] {
            let j = jet(&[0.0], 0.0, &[0.0], linalg::diag(&[t]));
            let direct = ca * plus.eval(&j).unwrap() + cb * minus.eval(&j).unwrap();
            assert!((fm.eval(&j).unwrap() - direct).abs() < 1e-14);
        }
    }

    proptest! {
        #[test]
        fn minimax_order(seed in 0u64..500) {
            let mut rng = sampling::rng(seed);
            let members: Vec<Vec<LinearOperator>> = (0..3)
                .map(|_| (0..4).map(|_| {
                    let s = sampling::gaussian_matrix(2, 2, &mut rng);
                    constant_linear(&s * s.transpose(), sampling::gaussian_vector(2, &mut rng))
                }).collect())
                .collect();
            let fam = IsaacsFamily::new(2, members).unwrap();
            let lo = build_isaacs(&fam, IsaacsMode::Supinf).unwrap();
            let hi = build_isaacs(&fam, IsaacsMode::Infsup).unwrap();
            let h = linalg::symmetrize(&sampling::gaussian_matrix(2, 2, &mut rng));
            let j = Jet::new(vec![0.0, 0.0], 0.3, sampling::gaussian_vector(2, &mut rng), h).unwrap();
            prop_assert!(lo.eval(&j).unwrap() <= hi.eval(&j).unwrap() + 1e-12);
        }

        #[test]
        fn hjb_one_homogeneous(seed in 0u64..500, xi in prop::sample::select(vec![0.1, 0.5, 1.0])) {
            let mut rng = sampling::rng(seed);
            let members = (0..3).map(|_| {
                let s = sampling::gaussian_matrix(3, 3, &mut rng);
                constant_linear(&s * s.transpose(), sampling::gaussian_vector(3, &mut rng))
                    .with_zero_order(1.5.into())
            }).collect();
            let fam = LinearOperatorFamily::new(3, members).unwrap();
            for mode in [HjbMode::Inf, HjbMode::Sup] {
                let f = build_hjb(&fam, mode, true).unwrap();
                let h = linalg::symmetrize(&sampling::gaussian_matrix(3, 3, &mut rng));
                let j = Jet::new(vec![0.0; 3], -0.4, sampling::gaussian_vector(3, &mut rng), h).unwrap();
                let a = f.eval(&j.scaled(xi)).unwrap();
                let b = xi * f.eval(&j).unwrap();
                prop_assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()));
            }
        }
    }
}
