//! Small dense helpers on top of `nalgebra`: a cyclic Jacobi eigensolver for
//! symmetric matrices and a few constructors used throughout the crate.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Off-diagonal convergence tolerance of the Jacobi sweep, relative to the
/// Frobenius norm of the input.
pub const EIGEN_TOL: f64 = 1e-12;

const MAX_SWEEPS: usize = 100;

/// Eigen-decomposition `A = V diag(values) Vᵀ`, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vector,
    /// Columns are the orthonormal eigenvectors.
    pub vectors: Matrix,
}

/// Largest absolute entry of `A - Aᵀ`.
pub fn asymmetry(a: &Matrix) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

pub fn ensure_square(a: &Matrix) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            got: a.ncols(),
        });
    }
    Ok(())
}

/// Rejects matrices whose asymmetry exceeds `tol`.
pub fn ensure_symmetric(a: &Matrix, tol: f64) -> Result<()> {
    ensure_square(a)?;
    let asym = asymmetry(a);
    if asym > tol || !asym.is_finite() {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }
    Ok(())
}

/// `(A + Aᵀ) / 2`.
pub fn symmetrize(a: &Matrix) -> Matrix {
    (a + a.transpose()) * 0.5
}

pub fn outer(u: &Vector, v: &Vector) -> Matrix {
    u * v.transpose()
}

pub fn identity(n: usize) -> Matrix {
    Matrix::identity(n, n)
}

pub fn diag(entries: &[f64]) -> Matrix {
    Matrix::from_diagonal(&Vector::from_column_slice(entries))
}

/// Row-major construction from nested slices.
pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().find(|r| r.len() != ncols) {
        return Err(Error::DimensionMismatch {
            expected: ncols,
            got: bad.len(),
        });
    }
    Ok(Matrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(a: &Matrix) -> Vec<Vec<f64>> {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)]).collect())
        .collect()
}

/// Cyclic Jacobi eigensolver for a symmetric matrix.
///
/// Each sweep annihilates every off-diagonal pair with a plane rotation;
/// iteration stops once the off-diagonal Frobenius mass falls below
/// `EIGEN_TOL` times the norm of the input.
pub fn symmetric_eigen(a: &Matrix) -> Result<SymmetricEigen> {
    ensure_square(a)?;
    let n = a.nrows();
    let scale = a.norm();
    if !scale.is_finite() {
        return Err(Error::InvalidParameter("non-finite matrix entry".into()));
    }
    ensure_symmetric(a, 1e-9 * scale.max(1.0))?;
    let mut m = symmetrize(a);
    let mut v = identity(n);
    let threshold = EIGEN_TOL * scale.max(f64::MIN_POSITIVE);

    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += 2.0 * m[(p, q)] * m[(p, q)];
            }
        }
        if off.sqrt() <= threshold {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // A <- Jᵀ A J with J the (p, q) rotation
                for k in 0..n {
                    let akp = m[(k, p)];
                    let akq = m[(k, q)];
                    m[(k, p)] = c * akp - s * akq;
                    m[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[(p, k)];
                    let aqk = m[(q, k)];
                    m[(p, k)] = c * apk - s * aqk;
                    m[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]));
    let values = Vector::from_iterator(n, order.iter().map(|&i| m[(i, i)]));
    let vectors = Matrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(SymmetricEigen { values, vectors })
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(a: &Matrix) -> Result<f64> {
    let eig = symmetric_eigen(a)?;
    Ok(eig.values.iter().copied().fold(f64::INFINITY, f64::min))
}

/// Singular values, descending.
pub fn singular_values(a: &Matrix) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let svd = nalgebra::SVD::new(a.clone(), false, false);
    let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Numerical rank: singular values above `tol · max(σ_max, 1)`.
pub fn numerical_rank(singular: &[f64], tol: f64) -> usize {
    let largest = singular.iter().copied().fold(0.0, f64::max).max(1.0);
    singular.iter().filter(|&&s| s > tol * largest).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn diagonal_eigenvalues_sorted() {
        let e = symmetric_eigen(&diag(&[3.0, -1.0, 2.0])).unwrap();
        assert_eq!(e.values.as_slice(), &[-1.0, 2.0, 3.0]);
    }

    #[test]
    fn rejects_asymmetric() {
        let a = matrix_from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(
            symmetric_eigen(&a),
            Err(Error::NotSymmetric { .. })
        ));
    }

    #[test]
    fn two_by_two_closed_form() {
        let a = matrix_from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let e = symmetric_eigen(&a).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-14);
        assert!((e.values[1] - 3.0).abs() < 1e-14);
    }

    fn sym_strategy(n: usize) -> impl Strategy<Value = Matrix> {
        proptest::collection::vec(-5.0f64..5.0, n * n).prop_map(move |v| {
            let m = Matrix::from_vec(n, n, v);
            symmetrize(&m)
        })
    }

    proptest! {
        #[test]
        fn jacobi_matches_nalgebra(m in (1usize..6).prop_flat_map(sym_strategy)) {
            let ours = symmetric_eigen(&m).unwrap();
            let mut reference: Vec<f64> =
                nalgebra::SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
            reference.sort_by(f64::total_cmp);
            for (a, b) in ours.values.iter().zip(reference.iter()) {
                prop_assert!((a - b).abs() <= 1e-10 * (1.0 + m.norm()));
            }
            let rebuilt = &ours.vectors * Matrix::from_diagonal(&ours.values) * ours.vectors.transpose();
            prop_assert!((rebuilt - &m).norm() <= 1e-10 * (1.0 + m.norm()));
        }
    }
}
