use svkit_core::fields::{DomainBox, VectorFieldFamily};
use svkit_core::linalg;
use svkit_core::operators::{
    build_hjb, euclideanize, linear_trace_operator, HjbMode, LinearOperator, LinearOperatorFamily, MatrixMap,
    ScalarField, VectorMap,
};
use svkit_core::poly::Polynomial;
use svkit_core::sampling;
use svkit_core::verify::{
    barrier_eval, check_subsolution, propagation_test, strict_lift_check, Barrier, GridFunction, JetParams,
    LiftParams, PropagationParams, PropagationStatus, SmoothFunction, StrictLift, SubsolutionVerdict,
};

#[test]
fn barrier_shape() {
    let mut rng = sampling::rng(8);
    let b = Barrier::new(&[1.0, 0.0, 0.0], &[0.0, 0.0, 0.0], 2.0).unwrap();
    for _ in 0..1000 {
        let x: Vec<f64> = (0..3).map(|_| rand::Rng::random_range(&mut rng, -2.0..2.0)).collect();
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let (v, p, _) = barrier_eval(&b, &x);
        if (r - 1.0).abs() < 1e-9 {
            continue;
        }
        assert_eq!(v < 0.0, r < 1.0, "x = {x:?}");
        let radial: f64 = p.iter().zip(&x).map(|(a, c)| a * c).sum();
        assert!(radial >= 0.0);
    }
    assert!(barrier_eval(&b, &[1.0, 0.0, 0.0]).0.abs() < 1e-15);
    assert!(Barrier::new(&[0.0; 2], &[0.0; 2], 1.0).is_err());
    assert!(Barrier::new(&[1.0, 0.0], &[0.0; 2], 0.0).is_err());
}

fn p2(terms: &[([u32; 2], f64)]) -> Polynomial {
    terms
        .iter()
        .fold(Polynomial::zero(2), |acc, (e, c)| acc.add(&Polynomial::monomial(e.to_vec(), *c)))
}

/// Strictly subharmonic polynomials are never refuted for `−Tr X`, with or
/// without the exact jet; a concave one is.
#[test]
fn subsolution_soundness() {
    let f = linear_trace_operator(linalg::identity(2)).unwrap();
    let bounds = DomainBox::cube(2, 1.0);
    let mut rng = sampling::rng(17);
    let mut funcs = vec![p2(&[([2, 2], 1.0), ([2, 0], 1.0), ([0, 2], 1.0)])];
    while funcs.len() < 20 {
        let mut c = || -> f64 { rand::Rng::random_range(&mut rng, -1.0..1.0) };
        let a = 0.2 + c().abs();
        funcs.push(p2(&[
            ([2, 0], a),
            ([0, 2], a),
            ([1, 0], c()),
            ([0, 1], c()),
            ([2, 2], c().abs()),
            ([4, 0], c().abs()),
            ([1, 1], c()),
        ]));
    }
    for u in &funcs {
        let g = GridFunction::from_fn(bounds.clone(), vec![17, 17], |x| u.eval(x)).unwrap();
        let exact = SmoothFunction::Polynomial(u.clone());
        for ex in [None, Some(&exact)] {
            let rep = check_subsolution(&f, &g, &JetParams::default(), ex).unwrap();
            assert_eq!(rep.verdict, SubsolutionVerdict::ConsistentWithSubsolution, "{u:?}: {:?}", rep.violations.first());
        }
    }
    let cap = p2(&[([2, 0], -1.0), ([0, 2], -1.0)]);
    let g = GridFunction::from_fn(bounds, vec![17, 17], |x| cap.eval(x)).unwrap();
    let rep = check_subsolution(&f, &g, &JetParams::default(), None).unwrap();
    assert_eq!(rep.verdict, SubsolutionVerdict::Refuted);
    assert!(rep.violations.iter().all(|v| v.value > 0.0));
}

#[test]
fn propagation_pass_implies_endpoints_in_k() {
    let fam = VectorFieldFamily::heisenberg().with_domain(DomainBox::cube(3, 1.0)).unwrap();
    let f = euclideanize(&linear_trace_operator(linalg::identity(2)).unwrap(), &fam).unwrap();
    let bounds = DomainBox::cube(3, 1.0);
    let shape = vec![9, 9, 9];
    let cases: Vec<Box<dyn Fn(&[f64]) -> f64>> = vec![
        Box::new(|_| 0.25),
        Box::new(|x| x[0] * x[0] + x[1] * x[1]),
        Box::new(|x| -(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])),
        Box::new(|x| x[2]),
    ];
    let mut passes = 0;
    for (i, u) in cases.iter().enumerate() {
        let g = GridFunction::from_fn(bounds.clone(), shape.clone(), u).unwrap();
        let params = PropagationParams {
            n_traj: 16,
            seed: i as u64,
            ..PropagationParams::default()
        };
        let rep = propagation_test(&f, &fam, &g, &params).unwrap();
        if rep.status == PropagationStatus::Pass {
            passes += 1;
            assert!(rep.endpoints_in_k, "case {i}");
            assert!(rep.max_deviation <= rep.tol);
        }
        if i == 2 {
            assert_eq!(rep.status, PropagationStatus::Refused);
        }
    }
    assert!(passes >= 1);
}

fn heisenberg_hjb(fam: &VectorFieldFamily) -> LinearOperatorFamily {
    let member = |s: f64, b: [f64; 3]| {
        LinearOperator::new(
            MatrixMap::from_family(fam, s),
            VectorMap::Constant(linalg::Vector::from_column_slice(&b)),
            ScalarField::Constant(0.0),
            ScalarField::Constant(0.0),
        )
    };
    LinearOperatorFamily::new(3, vec![member(1.0, [0.1, 0.0, 0.0]), member(0.5, [0.0, -0.1, 0.0])]).unwrap()
}

#[test]
fn strict_lift_margin_nonpositive() {
    let fam = VectorFieldFamily::heisenberg().with_domain(DomainBox::cube(3, 1.0)).unwrap();
    let f = build_hjb(&heisenberg_hjb(&fam), HjbMode::Inf, true).unwrap();
    let bowl = SmoothFunction::Polynomial(p3_bowl());
    let mut rng = sampling::rng(31);
    for k in 0..6 {
        let center: Vec<f64> = (0..3).map(|_| rand::Rng::random_range(&mut rng, -0.3..0.3)).collect();
        for eps in [1e-3, 1e-2, 5e-2] {
            let params = LiftParams {
                epsilon: eps,
                seed: k,
                ..LiftParams::default()
            };
            let lift = StrictLift::build(&f, &fam, &center, &params).unwrap();
            let rep = strict_lift_check(&f, &fam, &bowl, &lift, 64, k, 1e-9).unwrap();
            if rep.preconditions_ok {
                assert!(rep.margin.unwrap() <= 0.0, "{center:?} eps {eps}: {:?}", rep.margin);
            }
        }
    }
    let bad = LiftParams {
        delta: 10.0,
        ..LiftParams::default()
    };
    assert!(StrictLift::build(&f, &fam, &[0.0; 3], &bad).is_err());
    let bad = LiftParams {
        delta: 0.0,
        ..LiftParams::default()
    };
    assert!(StrictLift::build(&f, &fam, &[0.0; 3], &bad).is_err());
}

fn p3_bowl() -> Polynomial {
    [[2, 0, 0], [0, 2, 0], [0, 0, 2]]
        .iter()
        .fold(Polynomial::zero(3), |acc, e| acc.add(&Polynomial::monomial(e.to_vec(), 0.5)))
}
