//! Horizontal calculus for a vector-field family: `q = σᵀp` and the
//! symmetrized horizontal Hessian `σᵀXσ + g(x, p)`.

use crate::error::{Error, Result};
use crate::fields::VectorFieldFamily;
use crate::linalg::{self, Matrix, Vector};

/// Asymmetry allowed in the Hessian slot.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct HorizontalJet {
    pub q: Vector,
    pub h: Matrix,
}

fn check_p(family: &VectorFieldFamily, p: &Vector) -> Result<()> {
    if p.len() != family.dim() {
        return Err(Error::DimensionMismatch {
            expected: family.dim(),
            got: p.len(),
        });
    }
    Ok(())
}

/// `σ(x)ᵀ p`.
pub fn horizontal_gradient(family: &VectorFieldFamily, x: &[f64], p: &Vector) -> Result<Vector> {
    check_p(family, p)?;
    Ok(family.sigma(x)?.transpose() * p)
}

/// `g_ij(x, p) = ½[(Dσʲ σⁱ)·p + (Dσⁱ σʲ)·p]`.
pub fn correction_term(family: &VectorFieldFamily, x: &[f64], p: &Vector) -> Result<Matrix> {
    check_p(family, p)?;
    family.check_point(x)?;
    Ok(correction_unchecked(family, x, p))
}

fn correction_unchecked(family: &VectorFieldFamily, x: &[f64], p: &Vector) -> Matrix {
    let m = family.count();
    let fields = family.fields();
    let values: Vec<Vector> = fields.iter().map(|f| f.eval(x)).collect();
    // pullback of p through each Jacobian: (Dσʲ v)·p = v·(Dσʲ)ᵀp
    let pulled: Vec<Vector> = fields.iter().map(|f| f.jacobian(x).transpose() * p).collect();
    let mut g = Matrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let v = 0.5 * (pulled[j].dot(&values[i]) + pulled[i].dot(&values[j]));
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

/// `σ(x)ᵀ X σ(x) + g(x, p)`, symmetrized.
pub fn horizontal_hessian(
    family: &VectorFieldFamily,
    x: &[f64],
    p: &Vector,
    hess: &Matrix,
) -> Result<Matrix> {
    Ok(horizontal_jet(family, x, p, hess)?.h)
}

pub fn horizontal_jet(
    family: &VectorFieldFamily,
    x: &[f64],
    p: &Vector,
    hess: &Matrix,
) -> Result<HorizontalJet> {
    check_p(family, p)?;
    let d = family.dim();
    if hess.nrows() != d || hess.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: hess.nrows().max(hess.ncols()),
        });
    }
    linalg::ensure_symmetric(hess, SYMMETRY_TOL * hess.norm().max(1.0))?;
    let sigma = family.sigma(x)?;
    let q = sigma.transpose() * p;
    let h = sigma.transpose() * hess * &sigma + correction_unchecked(family, x, p);
    Ok(HorizontalJet {
        q,
        h: linalg::symmetrize(&h),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Polynomial;
    use proptest::prelude::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    #[test]
    fn grushin_gradient() {
        let g = VectorFieldFamily::grushin();
        let q = horizontal_gradient(&g, &[2.0, 0.0], &v(&[1.0, 1.0])).unwrap();
        assert_eq!(q.as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn heisenberg_gradient_at_origin() {
        let h = VectorFieldFamily::heisenberg();
        let q = horizontal_gradient(&h, &[0.0; 3], &v(&[0.3, -1.2, 7.0])).unwrap();
        assert_eq!(q.as_slice(), &[0.3, -1.2]);
    }

    #[test]
    fn grushin_correction() {
        let g = VectorFieldFamily::grushin();
        let c = correction_term(&g, &[1.5, -0.3], &v(&[4.0, 3.0])).unwrap();
        assert_eq!(linalg::matrix_to_rows(&c), vec![vec![0.0, 1.5], vec![1.5, 0.0]]);
    }

    #[test]
    fn heisenberg_correction_vanishes() {
        let h = VectorFieldFamily::heisenberg();
        let c = correction_term(&h, &[0.2, 0.7, -1.0], &v(&[1.0, -2.0, 3.0])).unwrap();
        assert_eq!(c.norm(), 0.0);
        let e = VectorFieldFamily::euclidean(3);
        assert_eq!(correction_term(&e, &[0.1; 3], &v(&[1.0, 2.0, 3.0])).unwrap().norm(), 0.0);
    }

    #[test]
    fn grushin_hessian_display() {
        let g = VectorFieldFamily::grushin();
        let (x1, u1, u2) = (0.7, -0.4, 1.3);
        let (u11, u12, u22) = (2.0, -0.5, 3.0);
        let hess = linalg::matrix_from_rows(&[vec![u11, u12], vec![u12, u22]]).unwrap();
        let h = horizontal_hessian(&g, &[x1, 0.2], &v(&[u1, u2]), &hess).unwrap();
        let off = x1 * u12 + u2 / 2.0;
        assert!((h[(0, 0)] - u11).abs() < 1e-15);
        assert!((h[(0, 1)] - off).abs() < 1e-15);
        assert!((h[(1, 0)] - off).abs() < 1e-15);
        assert!((h[(1, 1)] - x1 * x1 * u22).abs() < 1e-15);
    }

    #[test]
    fn heisenberg_identity_at_origin() {
        let h = VectorFieldFamily::heisenberg();
        let out = horizontal_hessian(&h, &[0.0; 3], &v(&[1.0, 2.0, 3.0]), &Matrix::identity(3, 3)).unwrap();
        assert_eq!(out, Matrix::identity(2, 2));
    }

    #[test]
    fn rejects_asymmetric_hessian() {
        let g = VectorFieldFamily::grushin();
        let hess = linalg::matrix_from_rows(&[vec![1.0, 0.5], vec![0.0, 1.0]]).unwrap();
        assert!(horizontal_hessian(&g, &[0.0, 0.0], &v(&[0.0, 0.0]), &hess).is_err());
    }

    /// `X_i(X_j u)` for a polynomial `u`, computed symbolically.
    fn second_derivative(family: &VectorFieldFamily, u: &Polynomial, i: usize, j: usize, x: &[f64]) -> f64 {
        let d = family.dim();
        let apply = |field: usize, w: &Polynomial| -> Polynomial {
            let comps = &family.fields()[field].as_poly().unwrap().components;
            (0..d).fold(Polynomial::zero(d), |acc, k| acc.add(&comps[k].mul(&w.derivative(k))))
        };
        apply(i, &apply(j, u)).eval(x)
    }

    fn cubic(d: usize, coeffs: &[f64]) -> Polynomial {
        // a fixed sparse cubic with the given coefficients
        let mut exps: Vec<Vec<u32>> = Vec::new();
        for a in 0..d {
            let mut e = vec![0; d];
            e[a] = 1;
            exps.push(e.clone());
            e[a] = 2;
            exps.push(e.clone());
            e[a] = 3;
            exps.push(e);
            for b in (a + 1)..d {
                let mut e = vec![0; d];
                e[a] = 1;
                e[b] = 1;
                exps.push(e.clone());
                e[b] = 2;
                exps.push(e);
            }
        }
        exps.into_iter()
            .zip(coeffs.iter().cycle())
            .fold(Polynomial::zero(d), |acc, (e, &c)| acc.add(&Polynomial::monomial(e, c)))
    }

    proptest! {
        #[test]
        fn matches_symbolic_second_derivatives(
            coeffs in proptest::collection::vec(-2.0f64..2.0, 20),
            pt in proptest::collection::vec(-1.5f64..1.5, 3),
            heis in any::<bool>(),
        ) {
            let family = if heis { VectorFieldFamily::heisenberg() } else { VectorFieldFamily::grushin() };
            let d = family.dim();
            let u = cubic(d, &coeffs);
            let x = &pt[..d];
            let h = horizontal_hessian(&family, x, &u.gradient(x), &u.hessian(x)).unwrap();
            for i in 0..family.count() {
                for j in 0..family.count() {
                    let sym = 0.5 * (second_derivative(&family, &u, i, j, x) + second_derivative(&family, &u, j, i, x));
                    prop_assert!((h[(i, j)] - sym).abs() <= 1e-9 * (1.0 + sym.abs()));
                }
            }
        }

        #[test]
        fn linear_in_jet(
            a in proptest::collection::vec(-3.0f64..3.0, 3 + 9),
            b in proptest::collection::vec(-3.0f64..3.0, 3 + 9),
            s in -2.0f64..2.0,
            pt in proptest::collection::vec(-1.0f64..1.0, 3),
        ) {
            let family = VectorFieldFamily::heisenberg();
            let jet = |w: &[f64]| (v(&w[..3]), linalg::symmetrize(&Matrix::from_column_slice(3, 3, &w[3..])));
            let (pa, xa) = jet(&a);
            let (pb, xb) = jet(&b);
            let lhs = horizontal_hessian(&family, &pt, &(&pa + &pb * s), &(&xa + &xb * s)).unwrap();
            let rhs = horizontal_hessian(&family, &pt, &pa, &xa).unwrap()
                + horizontal_hessian(&family, &pt, &pb, &xb).unwrap() * s;
            prop_assert!((lhs - &rhs).norm() <= 1e-12 * (1.0 + rhs.norm()) * 10.0);
        }

        #[test]
        fn correction_homogeneous(p in proptest::collection::vec(-3.0f64..3.0, 2), xi in 0.01f64..10.0, x1 in -2.0f64..2.0) {
            let g = VectorFieldFamily::grushin();
            let p = v(&p);
            let a = correction_term(&g, &[x1, 0.0], &(&p * xi)).unwrap();
            let b = correction_term(&g, &[x1, 0.0], &p).unwrap() * xi;
            prop_assert!((a - b).norm() <= 1e-14 * (1.0 + p.norm() * xi));
        }
    }
}
