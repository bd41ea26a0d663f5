use std::sync::Arc;

use super::hjb::{build_hjb, constant_linear, HjbMode, LinearOperatorFamily};
use super::{Jet, OperatorSpec, ScalarField, Scaling};
use crate::error::{Error, Result};
use crate::fields::VectorFieldFamily;
use crate::horizontal;
use crate::linalg::{Matrix, Vector};

/// `F⁻(x, r, p, X) = −F(x, −r, −p, −X)`.
pub fn reflect_operator(f: &OperatorSpec) -> OperatorSpec {
    let inner = f.clone();
    let label = if let Some(orig) = f.label.strip_prefix("reflect(").and_then(|s| s.strip_suffix(')')) {
        orig.to_string()
    } else {
        format!("reflect({})", f.label)
    };
    OperatorSpec::new(label, f.arg_dim, Arc::new(move |jet| Ok(-inner.eval(&jet.negated())?)))
        .with_proper(f.proper)
        .with_singular(f.singular_at_zero_gradient)
        .with_lipschitz_p(f.lipschitz_p)
}

/// `F(x, r, p, X) = G(x, r, σᵀp, σᵀXσ + g(x, p))`.
pub fn euclideanize(g: &OperatorSpec, family: &VectorFieldFamily) -> Result<OperatorSpec> {
    if g.arg_dim != family.count() {
        return Err(Error::DimensionMismatch {
            expected: family.count(),
            got: g.arg_dim,
        });
    }
    let inner = g.clone();
    let fam = family.clone();
    let eval = move |jet: &Jet| -> Result<f64> {
        let hj = horizontal::horizontal_jet(&fam, &jet.x, &jet.p, &jet.hess)?;
        inner.eval(&Jet {
            x: jet.x.clone(),
            r: jet.r,
            p: hj.q,
            hess: hj.h,
        })
    };
    Ok(OperatorSpec::new(
        format!("{}@{}", g.label, family.name()),
        family.dim(),
        Arc::new(eval),
    )
    .with_scaling(g.scaling.clone())
    .with_proper(g.proper)
    .with_singular(g.singular_at_zero_gradient))
}

/// `−Tr(A X)` for a constant `A`.
pub fn linear_trace_operator(a: Matrix) -> Result<OperatorSpec> {
    let d = a.nrows();
    let fam = LinearOperatorFamily::new(d, vec![constant_linear(a, Vector::zeros(d))])?;
    let mut f = build_hjb(&fam, HjbMode::Inf, true)?;
    f.label = "linear".into();
    Ok(f)
}

/// `−Tr X / (1 + |Tr X|) + f(x)`.
///
/// Declared scaling: `φ(ξ) = 1` where `Tr X ≥ 0` and `φ(ξ) = ξ` where
/// `Tr X < 0`, which holds wherever `f ≥ 0`.
pub fn smooth_counterexample_operator(dim: usize, f: ScalarField) -> OperatorSpec {
    let eval = move |jet: &Jet| -> Result<f64> {
        let t = jet.hess.trace();
        Ok(-t / (1.0 + t.abs()) + f.eval(&jet.x))
    };
    let exponent = Arc::new(|jet: &Jet| if jet.hess.trace() >= 0.0 { 0.0 } else { 1.0 });
    OperatorSpec::new("counterexample", dim, Arc::new(eval))
        .with_scaling(Scaling::JetPower {
            exponent,
            label: "1 if tr X >= 0, xi otherwise".into(),
        })
        .with_lipschitz_p(Some(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;
    use crate::operators::{pucci_operator, PucciSign};
    use crate::sampling;

    fn random_jet(d: usize, rng: &mut sampling::SeededRng) -> Jet {
        let h = linalg::symmetrize(&sampling::gaussian_matrix(d, d, rng));
        let x: Vec<f64> = sampling::gaussian_vector(d, rng).iter().map(|v| v.tanh()).collect();
        Jet::new(x, rand::Rng::random_range(rng, -1.0..1.0), sampling::gaussian_vector(d, rng), h).unwrap()
    }

    #[test]
    fn reflection_involution_and_pucci() {
        let plus = pucci_operator(3, 1.0, 2.0, PucciSign::Plus).unwrap();
        let minus = pucci_operator(3, 1.0, 2.0, PucciSign::Minus).unwrap();
        let rr = reflect_operator(&reflect_operator(&plus));
        let r = reflect_operator(&plus);
        let lin = linear_trace_operator(linalg::diag(&[1.0, 2.0, 0.5])).unwrap();
        let rlin = reflect_operator(&lin);
        let mut rng = sampling::rng(3);
        for _ in 0..100 {
            let j = random_jet(3, &mut rng);
            assert_eq!(rr.eval(&j).unwrap(), plus.eval(&j).unwrap());
            assert!((r.eval(&j).unwrap() - minus.eval(&j).unwrap()).abs() < 1e-12);
            assert!((rlin.eval(&j).unwrap() - lin.eval(&j).unwrap()).abs() < 1e-12);
        }
        assert_eq!(rr.label, plus.label);
    }

    #[test]
    fn euclidean_family_is_identity() {
        let e = VectorFieldFamily::euclidean(2);
        let g = pucci_operator(2, 1.0, 3.0, PucciSign::Plus).unwrap();
        let f = euclideanize(&g, &e).unwrap();
        let mut rng = sampling::rng(9);
        for _ in 0..50 {
            let j = random_jet(2, &mut rng);
            assert_eq!(f.eval(&j).unwrap(), g.eval(&j).unwrap());
        }
    }

    #[test]
    fn grushin_sub_laplacian() {
        let fam = VectorFieldFamily::grushin();
        let g = linear_trace_operator(Matrix::identity(2, 2)).unwrap();
        let f = euclideanize(&g, &fam).unwrap();
        let x1 = 0.8;
        let h = linalg::matrix_from_rows(&[vec![1.5, 0.2], vec![0.2, -0.7]]).unwrap();
        let v = f.eval_parts(&[x1, 0.1], 0.0, &Vector::from_vec(vec![0.3, 0.9]), &h).unwrap();
        assert!((v + (1.5 + x1 * x1 * -0.7)).abs() < 1e-14);
    }

    #[test]
    fn dimension_mismatch() {
        let g = pucci_operator(3, 1.0, 3.0, PucciSign::Plus).unwrap();
        assert!(euclideanize(&g, &VectorFieldFamily::grushin()).is_err());
    }

    #[test]
    fn counterexample_bounds_and_limit() {
        let f = smooth_counterexample_operator(2, 0.25.into());
        let zero = Jet::new(vec![0.0, 0.0], 0.0, Vector::zeros(2), Matrix::zeros(2, 2)).unwrap();
        assert_eq!(f.eval(&zero).unwrap(), 0.25);
        let mut rng = sampling::rng(1);
        for _ in 0..100 {
            let j = random_jet(2, &mut rng);
            assert!(f.eval(&j).unwrap() > 0.25 - 1.0);
        }
        let p = Vector::from_vec(vec![0.6, 0.8]);
        let v = f.eval(&Jet::subunit_probe(&[0.0, 0.0], &p, 1e9)).unwrap();
        assert!((v - 1.25).abs() < 1e-8);
    }
}
