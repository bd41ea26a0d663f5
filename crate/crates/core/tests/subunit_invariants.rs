use proptest::prelude::*;
use svkit_core::linalg::{self, Matrix, Vector};
use svkit_core::operators::{build_hjb, linear_trace_operator, HjbMode, LinearOperator, LinearOperatorFamily, VectorMap};
use svkit_core::subunit::{
    certify_subunit, classical_subunit, family_subunit, kernel_witness, subunit_scaling_radius, FamilyInput,
    FamilyMode, SearchParams, SubunitMode, Verdict,
};

fn v(x: &[f64]) -> Vector {
    Vector::from_column_slice(x)
}

#[test]
fn derived_examples() {
    assert!(!classical_subunit(&linalg::diag(&[1.0, 0.0]), &v(&[0.0, 0.1]), 1e-12).unwrap());
    assert!(classical_subunit(&linalg::diag(&[1.0, 0.0]), &v(&[1.0, 0.0]), 1e-12).unwrap());
    assert_eq!(subunit_scaling_radius(&linalg::diag(&[4.0, 1.0]), &v(&[1.0, 0.0])).unwrap().r_max, 2.0);
    assert_eq!(subunit_scaling_radius(&linalg::diag(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap().r_max, 0.0);

    let f = linear_trace_operator(linalg::diag(&[1.0, 0.0])).unwrap();
    let params = SearchParams::default();
    let c = certify_subunit(&f, &[0.0, 0.0], &v(&[1.0, 0.0]), SubunitMode::Plus, &params).unwrap();
    assert_eq!(c.verdict, Verdict::Certified);
    let c = certify_subunit(&f, &[0.0, 0.0], &v(&[0.0, 1.0]), SubunitMode::Plus, &params).unwrap();
    assert_eq!(c.verdict, Verdict::Refuted);
    let w = c.witness_p.unwrap();
    assert_eq!(w[0], 0.0);
    assert!((c.witness_value.unwrap() + 1.0).abs() < 1e-12);
}

#[test]
fn hjb_family_modes() {
    let fam = LinearOperatorFamily::new(
        2,
        vec![
            LinearOperator::diffusion(linalg::diag(&[1.0, 0.0])),
            LinearOperator::diffusion(linalg::diag(&[0.0, 1.0])),
        ],
    )
    .unwrap();
    let z = v(&[1.0, 0.0]);
    let sup = family_subunit(FamilyInput::Hjb(&fam), &[0.0, 0.0], &z, FamilyMode::HjbSup, 1e-12).unwrap();
    assert!(sup.holds);
    assert_eq!(sup.decisive_index, Some(vec![0]));
    let inf = family_subunit(FamilyInput::Hjb(&fam), &[0.0, 0.0], &z, FamilyMode::HjbInf, 1e-12).unwrap();
    assert!(!inf.holds && !inf.holds_up_to_scaling);
}

/// With a drift the refuting direction is the kernel direction, signed so
/// that the drift term is negative.
#[test]
fn drift_refutation_direction() {
    let fam = LinearOperatorFamily::new(
        2,
        vec![
            LinearOperator::diffusion(linalg::diag(&[1.0, 0.0])).with_drift(VectorMap::Constant(v(&[0.0, 1.0]))),
            LinearOperator::diffusion(linalg::identity(2)),
        ],
    )
    .unwrap();
    let z = v(&[0.0, 1.0]);
    let fv = family_subunit(FamilyInput::Hjb(&fam), &[0.0, 0.0], &z, FamilyMode::HjbInf, 1e-12).unwrap();
    assert!(!fv.holds_up_to_scaling);
    let f = build_hjb(&fam, HjbMode::Inf, true).unwrap();
    let params = SearchParams {
        extra_directions: vec![kernel_witness(&linalg::diag(&[1.0, 0.0]), &z).unwrap().unwrap().iter().copied().collect()],
        ..SearchParams::default()
    };
    let c = certify_subunit(&f, &[0.0, 0.0], &z, SubunitMode::Plus, &params).unwrap();
    assert_eq!(c.verdict, Verdict::Refuted);
    let w = c.witness_p.unwrap();
    assert!(w[1] > 0.0, "{w:?}");
}

fn psd() -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-1.0f64..1.0, 9).prop_map(|b| {
        let b = Matrix::from_row_slice(3, 3, &b);
        &b * b.transpose() + linalg::identity(3) * 1e-3
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn classical_implies_generalized(
        a in psd(), dir in prop::collection::vec(-1.0f64..1.0, 3),
        shrink in 0.05f64..1.0, b in prop::collection::vec(-5.0f64..5.0, 3),
    ) {
        let d = v(&dir);
        prop_assume!(d.norm() > 1e-3);
        let r = subunit_scaling_radius(&a, &(&d / d.norm())).unwrap().r_max;
        let z = &d / d.norm() * (r * shrink);
        prop_assume!(z.norm() > 1e-9);
        prop_assert!(classical_subunit(&a, &z, 1e-12).unwrap());
        let fam = LinearOperatorFamily::new(3, vec![LinearOperator::diffusion(a.clone()).with_drift(VectorMap::Constant(v(&b)))]).unwrap();
        let f = build_hjb(&fam, HjbMode::Inf, true).unwrap();
        let c = certify_subunit(&f, &[0.0; 3], &z, SubunitMode::Plus, &SearchParams::default()).unwrap();
        prop_assert_eq!(c.verdict, Verdict::Certified);
    }
}
