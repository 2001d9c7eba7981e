//! Comparison bounds and finite-difference Laplacians of the distance.

use folcomp::bundled;
use folcomp::comparison::{
    bonnet_myers_audit, comparison_audit, coupled_bound, coupled_laplacian_distance, horizontal_laplacian_distance,
    model_bound, ComparisonProfile,
};
use folcomp::report::Verdict;
use folcomp::{Error, GroupPoint};
use proptest::prelude::*;

#[test]
fn bound_examples() {
    assert_eq!(model_bound(0.0, 2, 1.0).unwrap(), 2.0);
    let v = model_bound(-1.0, 2, 2f64.sqrt()).unwrap();
    assert!((v - 2f64.sqrt() * 1f64.cosh() / 1f64.sinh()).abs() < 1e-14);
    assert!((coupled_bound(-1.0, 2, 1.0).unwrap() - 4.0 * (1.0 / 8f64.sqrt()).tanh()).abs() < 1e-14);
    assert_eq!(coupled_bound(0.0, 2, 0.8).unwrap(), 0.0);
    for k in [-1.0, 0.0, 0.5] {
        assert!(coupled_bound(k, 2, 1e-12).unwrap().abs() < 1e-10);
    }
    assert!(matches!(model_bound(1.0, 2, 5.0), Err(Error::DomainError(_))));
    // K > 0 branch: √(nK)·cot(√(K/n) r)
    let v = model_bound(2.0, 2, 0.5).unwrap();
    assert!((v - 2.0 / 0.5f64.tan()).abs() < 1e-14);
}

#[test]
fn small_radius_universality() {
    for k in [-3.0, -1.0, 0.0, 0.7] {
        for r in [1e-3, 1e-4] {
            let v = model_bound(k, 3, r).unwrap() * r;
            assert!((v - 3.0).abs() < 1e-5, "K = {k}, r = {r}: {v}");
        }
    }
}

#[test]
fn profile_has_the_stated_values() {
    let p = ComparisonProfile::new(0.0, 2);
    assert_eq!(p.s(0.7), 0.7);
    let q = ComparisonProfile::new(-1.0, 2);
    assert_eq!(q.s(0.0), 0.0);
    assert!((q.c(1.0, 0.0) - 1.0).abs() < 1e-15);
}

#[test]
fn flat_laplacian_of_distance_is_one_over_r() {
    // H = span(e1, e2) contains the ray: the tangential direction gives 0 and
    // the orthogonal horizontal direction 1/r.
    let m = bundled::abelian3();
    let p = GroupPoint::Exp(vec![0.0; 3]);
    for r in [0.5, 1.0, 2.0] {
        let x = GroupPoint::Exp(vec![r, 0.0, 0.0]);
        let est = horizontal_laplacian_distance(&m, &p, &x, 1e-3).unwrap();
        assert!((est.value - 1.0 / r).abs() < 2e-3, "r = {r}: {}", est.value);
    }
}

#[test]
fn heisenberg_point_on_axis_respects_bound() {
    let m = bundled::heisenberg();
    let p = GroupPoint::Exp(vec![0.0; 3]);
    let x = GroupPoint::Exp(vec![1.0, 0.0, 0.0]);
    let est = horizontal_laplacian_distance(&m, &p, &x, 1e-3).unwrap();
    let bound = model_bound(-1.0, 2, est.r).unwrap();
    assert!((est.r - 1.0).abs() < 1e-8);
    assert!(est.value < bound, "{} vs {bound}", est.value);
    assert!(est.error <= 5e-3);
}

#[test]
fn coupled_laplacian_examples() {
    let a = bundled::abelian3();
    let p = GroupPoint::Exp(vec![0.0; 3]);
    let q = GroupPoint::Exp(vec![0.3, 0.4, 0.5]);
    assert!(coupled_laplacian_distance(&a, &p, &q, 1e-3).unwrap().value.abs() <= 1e-6);

    let h = bundled::heisenberg();
    let q = GroupPoint::Exp(vec![0.8, 0.3, 0.4]);
    let fwd = coupled_laplacian_distance(&h, &p, &q, 1e-3).unwrap();
    let back = coupled_laplacian_distance(&h, &q, &p, 1e-3).unwrap();
    assert!((fwd.value - back.value).abs() <= 5e-3, "{} {}", fwd.value, back.value);
    assert!(fwd.value <= coupled_bound(-1.0, 2, fwd.r).unwrap() + 5e-3);
}

#[test]
fn audits_on_small_sweeps() {
    let h = bundled::heisenberg();
    let rep = comparison_audit(&h, &[0.5, 1.0], 4).unwrap();
    assert_eq!(rep.verdict, Verdict::Pass);
    assert!(rep.rows.iter().all(|r| r.error <= 5e-3));
    let empty = comparison_audit(&h, &[], 4).unwrap();
    assert!(empty.rows.is_empty());
    assert_eq!(empty.verdict, Verdict::Pass);
}

#[test]
fn bonnet_myers_needs_positive_k() {
    assert!(matches!(bonnet_myers_audit(&bundled::heisenberg(), 5, 1), Err(Error::NonPositiveK(_))));
    assert!(matches!(bonnet_myers_audit(&bundled::abelian3(), 5, 1), Err(Error::NonPositiveK(_))));
    let rep = bonnet_myers_audit(&bundled::su2_berger(), 40, 3).unwrap();
    assert_eq!(rep.verdict, Verdict::Pass);
    let bound = std::f64::consts::PI * 2f64.sqrt();
    assert!(rep.summary_value("max_distance").unwrap() <= bound);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bounds_decrease_in_r(k in -4.0f64..4.0, n in 1usize..5, r in 0.01f64..3.0) {
        let p = ComparisonProfile::new(k, n);
        let r2 = r * 1.05;
        prop_assume!(k <= 0.0 || r2 < 0.999 * p.max_radius());
        prop_assert!(model_bound(k, n, r2).unwrap() < model_bound(k, n, r).unwrap());
    }

    #[test]
    fn bounds_are_continuous_in_k(n in 1usize..5, r in 0.1f64..2.0) {
        let at0 = model_bound(0.0, n, r).unwrap();
        for k in [1e-9, -1e-9] {
            prop_assert!((model_bound(k, n, r).unwrap() - at0).abs() < 1e-6);
            prop_assert!(coupled_bound(k, n, r).unwrap().abs() < 1e-6);
        }
    }
}
