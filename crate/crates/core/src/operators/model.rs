use std::sync::Arc;

use super::{Jet, OperatorSpec, ScalarField, Scaling};
use crate::error::{Error, Result};
use crate::fields::VectorFieldFamily;

/// Coefficients of `c(x)|r|^{k−1}r + a(x) E(q, Y)`.
#[derive(Clone, Debug)]
pub struct ModelCoefficients {
    pub c: ScalarField,
    pub a: ScalarField,
    pub k: f64,
    /// Homogeneity degree of `E`.
    pub alpha_degree: f64,
    /// `E` as a horizontal operator; only its `(q, Y)` slots are used.
    pub e: OperatorSpec,
}

impl ModelCoefficients {
    /// Takes `alpha_degree` from `E`'s declared power scaling.
    pub fn new(c: ScalarField, a: ScalarField, k: f64, e: OperatorSpec) -> Result<Self> {
        let alpha_degree = match e.scaling {
            Scaling::Power(a) => a,
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "E = {} has no declared homogeneity degree",
                    e.label
                )))
            }
        };
        Ok(Self {
            c,
            a,
            k,
            alpha_degree,
            e,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k > 0.0) {
            return Err(Error::InvalidParameter(format!("k = {} must be > 0", self.k)));
        }
        if !(self.alpha_degree >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha = {} must be >= 0",
                self.alpha_degree
            )));
        }
        if !self.c.is_identically_zero() && self.alpha_degree > self.k {
            return Err(Error::InvalidParameter(format!(
                "either c = 0 or alpha <= k (alpha = {}, k = {})",
                self.alpha_degree, self.k
            )));
        }
        Ok(())
    }
}

/// `G(x, r, q, Y) = c(x)|r|^{k−1}r + a(x) E(q, Y)` over the `m` horizontal
/// slots of `family`.
///
/// `E` enters with a plus sign: the catalog `E`s (Pucci, ∞- and
/// m-Laplacians) are already nonincreasing in `Y`, so `G` stays proper.
pub fn build_model_equation(coeffs: ModelCoefficients, family: &VectorFieldFamily) -> Result<OperatorSpec> {
    coeffs.validate()?;
    let m = family.count();
    if coeffs.e.arg_dim != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: coeffs.e.arg_dim,
        });
    }
    let c_zero = coeffs.c.is_identically_zero();
    let exponent = if c_zero {
        coeffs.alpha_degree
    } else {
        coeffs.k.min(coeffs.alpha_degree)
    };
    let label = format!("model[{}](k={})", coeffs.e.label, coeffs.k);
    let singular = coeffs.e.singular_at_zero_gradient;
    let ModelCoefficients { c, a, k, e, .. } = coeffs;
    let eval = move |jet: &Jet| -> Result<f64> {
        let zero_order = if c_zero || jet.r == 0.0 {
            0.0
        } else {
            c.eval(&jet.x) * jet.r.abs().powf(k - 1.0) * jet.r
        };
        Ok(zero_order + a.eval(&jet.x) * e.eval(jet)?)
    };
    Ok(OperatorSpec::new(label, m, Arc::new(eval))
        .with_scaling(Scaling::Power(exponent))
        .with_singular(singular))
}
