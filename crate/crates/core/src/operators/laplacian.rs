use std::sync::Arc;

use super::{OperatorSpec, Scaling};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};

fn check(q: &Vector, y: &Matrix) -> Result<()> {
    if y.nrows() != q.len() || y.ncols() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: q.len(),
            got: y.nrows(),
        });
    }
    Ok(())
}

/// `−|q|^{h−3} q·Yq`, homogeneous of degree `h`.
///
/// At `q = 0` the value is `0` for `h ≥ 3` and a singular evaluation for
/// `h < 3`.
pub fn infinity_laplacian(q: &Vector, y: &Matrix, h: f64) -> Result<f64> {
    check(q, y)?;
    if !(h >= 0.0) {
        return Err(Error::InvalidParameter(format!("h = {h} must be >= 0")));
    }
    let n2 = q.norm_squared();
    let qyq = q.dot(&(y * q));
    if h == 3.0 {
        return Ok(-qyq);
    }
    if n2 == 0.0 {
        return if h > 3.0 {
            Ok(0.0)
        } else {
            Err(Error::Singular("infinity-Laplacian at q = 0".into()))
        };
    }
    Ok(-n2.sqrt().powf(h - 3.0) * qyq)
}

/// `−(|q|^{m−2} Tr Y + (m−2)|q|^{m−4} q·Yq)`, homogeneous of degree `m−1`.
///
/// At `q = 0`: `−Tr Y` for `m = 2`, `0` for `m > 2`, singular for `m < 2`.
pub fn m_laplacian(q: &Vector, y: &Matrix, m_exp: f64) -> Result<f64> {
    check(q, y)?;
    if !(m_exp > 1.0) {
        return Err(Error::InvalidParameter(format!("m = {m_exp} must be > 1")));
    }
    if m_exp == 2.0 {
        return Ok(-y.trace());
    }
    let n2 = q.norm_squared();
    if n2 == 0.0 {
        return if m_exp > 2.0 {
            Ok(0.0)
        } else {
            Err(Error::Singular("m-Laplacian at q = 0".into()))
        };
    }
    let n = n2.sqrt();
    let qyq = q.dot(&(y * q));
    Ok(-(n.powf(m_exp - 2.0) * y.trace() + (m_exp - 2.0) * n.powf(m_exp - 4.0) * qyq))
}

pub fn infinity_laplacian_operator(arg_dim: usize, h: f64) -> Result<OperatorSpec> {
    if !(h >= 0.0) {
        return Err(Error::InvalidParameter(format!("h = {h} must be >= 0")));
    }
    Ok(OperatorSpec::new(
        format!("inf-laplacian(h={h})"),
        arg_dim,
        Arc::new(move |jet| infinity_laplacian(&jet.p, &jet.hess, h)),
    )
    .with_scaling(Scaling::Power(h))
    .with_singular(h < 3.0))
}

pub fn m_laplacian_operator(arg_dim: usize, m_exp: f64) -> Result<OperatorSpec> {
    if !(m_exp > 1.0) {
        return Err(Error::InvalidParameter(format!("m = {m_exp} must be > 1")));
    }
    Ok(OperatorSpec::new(
        format!("m-laplacian(m={m_exp})"),
        arg_dim,
        Arc::new(move |jet| m_laplacian(&jet.p, &jet.hess, m_exp)),
    )
    .with_scaling(Scaling::Power(m_exp - 1.0))
    .with_singular(m_exp < 2.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    #[test]
    fn infinity_values() {
        let i2 = Matrix::identity(2, 2);
        assert_eq!(infinity_laplacian(&v(&[1.0, 0.0]), &i2, 3.0).unwrap(), -1.0);
        let y = linalg::diag(&[5.0, 0.0]);
        for h in [0.5, 1.0, 3.0, 4.0] {
            assert_eq!(infinity_laplacian(&v(&[0.0, 1.0]), &y, h).unwrap(), 0.0);
        }
        assert!(infinity_laplacian(&v(&[0.0, 0.0]), &y, 1.0).is_err());
    }

    #[test]
    fn m_values() {
        let y = linalg::diag(&[1.0, 1.0]);
        assert_eq!(m_laplacian(&v(&[1.0, 0.0]), &y, 4.0).unwrap(), -4.0);
        let y = linalg::diag(&[2.0, -7.0]);
        assert_eq!(m_laplacian(&v(&[0.3, 0.1]), &y, 2.0).unwrap(), 5.0);
        assert!(m_laplacian(&v(&[0.0, 0.0]), &y, 1.5).is_err());
    }

    #[test]
    fn ellipticity_witnesses() {
        let q = v(&[0.6, -1.1]);
        let y = linalg::matrix_from_rows(&[vec![1.0, 0.3], vec![0.3, -2.0]]).unwrap();
        let g = 2.5;
        let shifted = &y - linalg::outer(&q, &q) * g;
        let n = q.norm();
        let d_inf = infinity_laplacian(&q, &shifted, 3.0).unwrap() - infinity_laplacian(&q, &y, 3.0).unwrap();
        assert!((d_inf - g * n.powi(4)).abs() < 1e-12);
        let m = 3.5;
        let d_m = m_laplacian(&q, &shifted, m).unwrap() - m_laplacian(&q, &y, m).unwrap();
        assert!((d_m - g * n.powf(m) * (m - 1.0)).abs() < 1e-12);
    }
}
