//! Degenerate elliptic operators `F(x, r, p, X)` (and horizontal operators
//! `G(x, r, q, Y)`, which use the same [`Jet`] type with `p = q`, `X = Y`).

mod audit;
mod coeff;
mod hjb;
mod laplacian;
mod model;
mod pucci;
mod transform;

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};

pub use audit::{audit_operator, AuditReport, AuditSpec, AuditWitness, WitnessKind};
pub use coeff::{MatrixMap, ScalarField, VectorMap};
pub use hjb::{
    build_hjb, build_isaacs, HjbMode, IsaacsFamily, IsaacsMode, LinearOperator,
    LinearOperatorFamily, PSD_TOL,
};
pub use laplacian::{
    infinity_laplacian, infinity_laplacian_operator, m_laplacian, m_laplacian_operator,
};
pub use model::{build_model_equation, ModelCoefficients};
pub use pucci::{
    pucci_extremal, pucci_operator, pucci_sampled_extremum, pucci_variational_oracle, PucciSign,
};
pub use transform::{euclideanize, linear_trace_operator, reflect_operator, smooth_counterexample_operator};

/// Asymmetry tolerance for the Hessian slot, relative to `max(1, |X|)`.
pub const JET_SYMMETRY_TOL: f64 = 1e-12;

/// An evaluation point `(x, r, p, X)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub x: Vec<f64>,
    pub r: f64,
    pub p: Vector,
    /// The Hessian slot `X`.
    pub hess: Matrix,
}

impl Jet {
    pub fn new(x: Vec<f64>, r: f64, p: Vector, hess: Matrix) -> Result<Self> {
        if hess.nrows() != p.len() || hess.ncols() != p.len() {
            return Err(Error::DimensionMismatch {
                expected: p.len(),
                got: hess.nrows().max(hess.ncols()),
            });
        }
        let finite = x.iter().all(|v| v.is_finite())
            && r.is_finite()
            && p.iter().all(|v| v.is_finite())
            && hess.iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParameter("non-finite jet entry".into()));
        }
        linalg::ensure_symmetric(&hess, JET_SYMMETRY_TOL * hess.norm().max(1.0))?;
        Ok(Self { x, r, p, hess })
    }

    /// `(x, 0, p, I − γ p⊗p)`, the jet of the subunit test.
    pub fn subunit_probe(x: &[f64], p: &Vector, gamma: f64) -> Self {
        let n = p.len();
        Self {
            x: x.to_vec(),
            r: 0.0,
            p: p.clone(),
            hess: linalg::identity(n) - linalg::outer(p, p) * gamma,
        }
    }

    /// `(x, ξr, ξp, ξX)`.
    pub fn scaled(&self, xi: f64) -> Self {
        Self {
            x: self.x.clone(),
            r: xi * self.r,
            p: &self.p * xi,
            hess: &self.hess * xi,
        }
    }

    /// `(x, −r, −p, −X)`.
    pub fn negated(&self) -> Self {
        self.scaled(-1.0)
    }

    pub fn arg_dim(&self) -> usize {
        self.p.len()
    }
}

pub type Evaluator = Arc<dyn Fn(&Jet) -> Result<f64> + Send + Sync>;
pub type JetExponent = Arc<dyn Fn(&Jet) -> f64 + Send + Sync>;

/// The declared scaling function `φ` of assumption
/// `F(x, ξs, ξp, ξX) ≥ φ(ξ) F(x, s, p, X)` for `s ≤ 0`, `ξ ∈ (0, 1]`.
#[derive(Clone)]
pub enum Scaling {
    /// `φ(ξ) = ξ^a`.
    Power(f64),
    /// `φ(ξ) = ξ^{a(jet)}`, the exponent chosen per jet.
    JetPower { exponent: JetExponent, label: String },
    /// Only `F(jet) > 0 ⟹ F(ξ·jet) > 0` is claimed.
    Implication,
    Undeclared,
}

impl fmt::Debug for Scaling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scaling::Power(a) => write!(f, "Power({a})"),
            Scaling::JetPower { label, .. } => write!(f, "JetPower({label})"),
            Scaling::Implication => write!(f, "Implication"),
            Scaling::Undeclared => write!(f, "Undeclared"),
        }
    }
}

impl Scaling {
    pub fn describe(&self) -> String {
        match self {
            Scaling::Power(a) => format!("xi^{a}"),
            Scaling::JetPower { label, .. } => label.clone(),
            Scaling::Implication => "implication".into(),
            Scaling::Undeclared => "undeclared".into(),
        }
    }
}

/// An operator evaluator with its structural metadata.
#[derive(Clone)]
pub struct OperatorSpec {
    evaluator: Evaluator,
    pub scaling: Scaling,
    pub proper: bool,
    pub singular_at_zero_gradient: bool,
    pub label: String,
    /// Length of the gradient slot (`d` for `F`, `m` for `G`).
    pub arg_dim: usize,
    /// Known bound on `|F(x,r,p,X) − F(x,r,p',X)| / |p − p'|`, if any.
    pub lipschitz_p: Option<f64>,
}

impl fmt::Debug for OperatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OperatorSpec")
            .field("label", &self.label)
            .field("arg_dim", &self.arg_dim)
            .field("scaling", &self.scaling)
            .field("proper", &self.proper)
            .field("singular_at_zero_gradient", &self.singular_at_zero_gradient)
            .finish()
    }
}

impl OperatorSpec {
    pub fn new(label: impl Into<String>, arg_dim: usize, evaluator: Evaluator) -> Self {
        Self {
            evaluator,
            scaling: Scaling::Undeclared,
            proper: true,
            singular_at_zero_gradient: false,
            label: label.into(),
            arg_dim,
            lipschitz_p: None,
        }
    }

    /// Wraps a closure; metadata defaults to proper, regular, undeclared
    /// scaling.
    pub fn custom<F>(label: impl Into<String>, arg_dim: usize, f: F) -> Self
    where
        F: Fn(&Jet) -> Result<f64> + Send + Sync + 'static,
    {
        Self::new(label, arg_dim, Arc::new(f))
    }

    pub fn with_scaling(mut self, scaling: Scaling) -> Self {
        self.scaling = scaling;
        self
    }

    pub fn with_proper(mut self, proper: bool) -> Self {
        self.proper = proper;
        self
    }

    pub fn with_singular(mut self, singular: bool) -> Self {
        self.singular_at_zero_gradient = singular;
        self
    }

    pub fn with_lipschitz_p(mut self, l: Option<f64>) -> Self {
        self.lipschitz_p = l;
        self
    }

    pub fn evaluator(&self) -> Evaluator {
        self.evaluator.clone()
    }

    /// `F(jet)`. Fails on a slot-size mismatch, on `p = 0` for operators
    /// singular there, and on non-finite output.
    pub fn eval(&self, jet: &Jet) -> Result<f64> {
        if jet.arg_dim() != self.arg_dim {
            return Err(Error::DimensionMismatch {
                expected: self.arg_dim,
                got: jet.arg_dim(),
            });
        }
        if self.singular_at_zero_gradient && jet.p.iter().all(|v| *v == 0.0) {
            return Err(Error::Singular(format!("{} at zero gradient", self.label)));
        }
        let v = (self.evaluator)(jet)?;
        if !v.is_finite() {
            return Err(Error::Singular(format!("{} returned {v}", self.label)));
        }
        Ok(v)
    }

    /// Convenience: `F(x, r, p, X)` from raw parts.
    pub fn eval_parts(&self, x: &[f64], r: f64, p: &Vector, hess: &Matrix) -> Result<f64> {
        self.eval(&Jet::new(x.to_vec(), r, p.clone(), hess.clone())?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jet_rejects_asymmetric() {
        let h = linalg::matrix_from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert!(Jet::new(vec![0.0; 2], 0.0, Vector::zeros(2), h).is_err());
    }

    #[test]
    fn singular_operator_refuses_zero_gradient() {
        let f = OperatorSpec::custom("one", 2, |_| Ok(1.0)).with_singular(true);
        let j = Jet::subunit_probe(&[0.0, 0.0], &Vector::zeros(2), 1.0);
        assert!(matches!(f.eval(&j), Err(Error::Singular(_))));
    }
}
