use proptest::prelude::*;
use svkit_core::fields::VectorFieldFamily;
use svkit_core::horizontal::{correction_term, horizontal_gradient, horizontal_hessian};
use svkit_core::linalg::{self, Matrix, Vector};
use svkit_core::poly::Polynomial;
use svkit_core::sampling;

#[test]
fn derived_examples() {
    let g = VectorFieldFamily::grushin();
    let h = VectorFieldFamily::heisenberg();
    let q = horizontal_gradient(&g, &[2.0, 0.0], &Vector::from_column_slice(&[1.0, 1.0])).unwrap();
    assert_eq!(q.as_slice(), &[1.0, 2.0]);
    let q = horizontal_gradient(&h, &[0.0; 3], &Vector::from_column_slice(&[3.0, -2.0, 7.0])).unwrap();
    assert_eq!(q.as_slice(), &[3.0, -2.0]);
    for (x, p) in [([0.5, 1.0], [1.0, 2.0]), ([-3.0, 0.0], [0.2, -4.0])] {
        let c = correction_term(&g, &x, &Vector::from_column_slice(&p)).unwrap();
        assert_eq!(c, Matrix::from_row_slice(2, 2, &[0.0, p[1] / 2.0, p[1] / 2.0, 0.0]));
    }
    let hh = horizontal_hessian(&h, &[0.0; 3], &Vector::from_column_slice(&[1.0, 2.0, 3.0]), &linalg::identity(3)).unwrap();
    assert_eq!(hh, linalg::identity(2));
}

/// `X_j u = Σ_k σ_kj ∂_k u` as a polynomial.
fn apply_field(fam: &VectorFieldFamily, j: usize, u: &Polynomial) -> Polynomial {
    let f = fam.fields()[j].as_poly().expect("polynomial field");
    (0..fam.dim()).fold(Polynomial::zero(fam.dim()), |acc, k| acc.add(&f.components[k].mul(&u.derivative(k))))
}

fn random_cubic(d: usize, rng: &mut sampling::SeededRng) -> Polynomial {
    let mut p = Polynomial::zero(d);
    let mut exps = vec![vec![0u32; d]];
    for _ in 0..3 {
        let mut next = Vec::new();
        for e in &exps {
            for i in 0..d {
                let mut f = e.clone();
                f[i] += 1;
                next.push(f);
            }
        }
        exps.extend(next);
    }
    exps.sort();
    exps.dedup();
    for e in exps {
        p = p.add(&Polynomial::monomial(e, rand::Rng::random_range(rng, -1.0..1.0)));
    }
    p
}

#[test]
fn consistency_with_symbolic_second_derivatives() {
    let mut rng = sampling::rng(21);
    for fam in [VectorFieldFamily::grushin(), VectorFieldFamily::heisenberg()] {
        let d = fam.dim();
        let m = fam.count();
        for _ in 0..5 {
            let u = random_cubic(d, &mut rng);
            let xu: Vec<Polynomial> = (0..m).map(|j| apply_field(&fam, j, &u)).collect();
            for _ in 0..20 {
                let x: Vec<f64> = (0..d).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect();
                let h = horizontal_hessian(&fam, &x, &u.gradient(&x), &u.hessian(&x)).unwrap();
                for i in 0..m {
                    for j in 0..m {
                        let sym = 0.5 * (apply_field(&fam, i, &xu[j]).eval(&x) + apply_field(&fam, j, &xu[i]).eval(&x));
                        assert!((h[(i, j)] - sym).abs() <= 1e-9 * (1.0 + sym.abs()), "{} {i}{j}", fam.name());
                    }
                }
            }
        }
    }
}

fn vec3() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, 3)
}

proptest! {
    #[test]
    fn hessian_linear_in_jet(
        x in vec3(), p1 in vec3(), p2 in vec3(),
        a in prop::collection::vec(-2.0f64..2.0, 9), b in prop::collection::vec(-2.0f64..2.0, 9),
        s in -3.0f64..3.0, t in -3.0f64..3.0,
    ) {
        let h = VectorFieldFamily::heisenberg();
        let (p1, p2) = (Vector::from_column_slice(&p1), Vector::from_column_slice(&p2));
        let a = linalg::symmetrize(&Matrix::from_row_slice(3, 3, &a));
        let b = linalg::symmetrize(&Matrix::from_row_slice(3, 3, &b));
        let lhs = horizontal_hessian(&h, &x, &(&p1 * s + &p2 * t), &(&a * s + &b * t)).unwrap();
        let rhs = horizontal_hessian(&h, &x, &p1, &a).unwrap() * s + horizontal_hessian(&h, &x, &p2, &b).unwrap() * t;
        prop_assert!((&lhs - &rhs).amax() <= 1e-12 * (1.0 + lhs.amax() + rhs.amax()));
    }

    #[test]
    fn correction_homogeneous(x in prop::collection::vec(-2.0f64..2.0, 2), p in prop::collection::vec(-2.0f64..2.0, 2), xi in 0.01f64..100.0) {
        let g = VectorFieldFamily::grushin();
        let p = Vector::from_column_slice(&p);
        let c1 = correction_term(&g, &x, &(&p * xi)).unwrap();
        let c2 = correction_term(&g, &x, &p).unwrap() * xi;
        prop_assert!((&c1 - &c2).amax() <= 1e-12 * (1.0 + c2.amax()));
    }
}
