use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{OperatorSpec, Scaling};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, EIGEN_TOL};
use crate::sampling;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PucciSign {
    Plus,
    Minus,
}

fn check_bounds(lambda: f64, big_lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && big_lambda >= lambda && big_lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < lambda <= Lambda, got {lambda}, {big_lambda}"
        )));
    }
    Ok(())
}

/// Diagonal of the optimal `A` in `M`'s eigenbasis.
fn optimal_weights(values: &[f64], lambda: f64, big_lambda: f64, sign: PucciSign) -> Vec<f64> {
    values
        .iter()
        .map(|&e| {
            let positive = e > 0.0;
            match (sign, positive) {
                (PucciSign::Plus, true) | (PucciSign::Minus, false) => lambda,
                (PucciSign::Plus, false) | (PucciSign::Minus, true) => big_lambda,
            }
        })
        .collect()
}

/// `M⁺(M) = −λΣ_{e>0} e − ΛΣ_{e<0} e` and
/// `M⁻(M) = −ΛΣ_{e>0} e − λΣ_{e<0} e`; eigenvalues below `1e-12` in
/// modulus count as zero.
pub fn pucci_extremal(m: &Matrix, lambda: f64, big_lambda: f64, sign: PucciSign) -> Result<f64> {
    check_bounds(lambda, big_lambda)?;
    let eig = linalg::symmetric_eigen(m)?;
    // both sums run in increasing |e| so that M⁺(M) = −M⁻(−M) bit for bit
    let pos: f64 = eig.values.iter().filter(|e| **e > EIGEN_TOL).sum();
    let neg: f64 = eig.values.iter().rev().filter(|e| **e < -EIGEN_TOL).sum();
    Ok(match sign {
        PucciSign::Plus => -lambda * pos - big_lambda * neg,
        PucciSign::Minus => -big_lambda * pos - lambda * neg,
    })
}

/// Extremum of `−Tr(AM)` over `n_samples` random `A = Qᵀ diag(a) Q` with
/// `a ∈ [λ, Λ]^n` (sup for `Plus`, inf for `Minus`), optionally together
/// with the optimal `A` built from `M`'s eigenbasis.
pub fn pucci_sampled_extremum(
    m: &Matrix,
    lambda: f64,
    big_lambda: f64,
    sign: PucciSign,
    n_samples: usize,
    seed: u64,
    include_optimum: bool,
) -> Result<f64> {
    check_bounds(lambda, big_lambda)?;
    linalg::ensure_symmetric(m, 1e-9 * m.norm().max(1.0))?;
    let n = m.nrows();
    let mut rng = sampling::rng(seed);
    let better = |a: f64, b: f64| match sign {
        PucciSign::Plus => a.max(b),
        PucciSign::Minus => a.min(b),
    };
    let mut best = match sign {
        PucciSign::Plus => f64::NEG_INFINITY,
        PucciSign::Minus => f64::INFINITY,
    };
    for _ in 0..n_samples {
        let q = sampling::random_orthogonal(n, &mut rng);
        let a: Vec<f64> = (0..n)
            .map(|_| lambda + (big_lambda - lambda) * rand::Rng::random::<f64>(&mut rng))
            .collect();
        let mat = q.transpose() * linalg::diag(&a) * &q;
        best = better(best, -(mat * m).trace());
    }
    if include_optimum {
        let eig = linalg::symmetric_eigen(m)?;
        let w = optimal_weights(eig.values.as_slice(), lambda, big_lambda, sign);
        let a = &eig.vectors * linalg::diag(&w) * eig.vectors.transpose();
        best = better(best, -(a * m).trace());
    }
    Ok(best)
}

/// Variational form of the Pucci operators: random sampling plus the
/// analytic optimum.
pub fn pucci_variational_oracle(
    m: &Matrix,
    lambda: f64,
    big_lambda: f64,
    sign: PucciSign,
    n_samples: usize,
    seed: u64,
) -> Result<f64> {
    pucci_sampled_extremum(m, lambda, big_lambda, sign, n_samples, seed, true)
}

/// `F(x, r, p, X) = M±(X)` on `dim × dim` Hessians.
pub fn pucci_operator(dim: usize, lambda: f64, big_lambda: f64, sign: PucciSign) -> Result<OperatorSpec> {
    check_bounds(lambda, big_lambda)?;
    let label = match sign {
        PucciSign::Plus => format!("pucci+({lambda},{big_lambda})"),
        PucciSign::Minus => format!("pucci-({lambda},{big_lambda})"),
    };
    Ok(OperatorSpec::new(
        label,
        dim,
        Arc::new(move |jet| pucci_extremal(&jet.hess, lambda, big_lambda, sign)),
    )
    .with_scaling(Scaling::Power(1.0))
    .with_lipschitz_p(Some(0.0)))
}
