//! Model validation, connections and the Ricci-like tensor against
//! independent oracles: linear-system adjoints, Koszul values computed by
//! hand, and recomputation in rotated frames.

use folcomp::bundled;
use folcomp::connection::{
    connection, curvature, frak_r, frak_r_decomposed, frak_r_matrix, frak_r_matrix_with_frame, frak_r_model_basis,
    gb_total_bound, j_map, k_lower_bound, levi_civita, riem_d_via_decomposition, torsion,
};
use folcomp::model::{ad_star, bracket, canonical_variation, split};
use folcomp::{AlgebraVector, ConnectionKind, Error, FoliatedModel};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn e(d: usize, i: usize) -> AlgebraVector {
    AlgebraVector::basis(d, i)
}

fn close(a: &AlgebraVector, b: &AlgebraVector, tol: f64) -> bool {
    (a.clone() - b.clone()).max_abs() <= tol
}

fn all_models() -> Vec<FoliatedModel> {
    vec![
        bundled::heisenberg(),
        bundled::engel(),
        bundled::su2_round(),
        bundled::su2_berger(),
        bundled::abelian3(),
    ]
}

/// Solves `<a, w> = <u, [x, w]>` for all basis `w` with the metric as a
/// linear system; independent of the library's adjoint.
fn adjoint_oracle(m: &FoliatedModel, x: &AlgebraVector, u: &AlgebraVector) -> AlgebraVector {
    let d = m.dim();
    let g = m.metric();
    let rhs = DVector::from_fn(d, |w, _| m.inner(u, &bracket(m, x, &e(d, w))));
    AlgebraVector(g.clone().lu().solve(&rhs).expect("metric is invertible"))
}

#[test]
fn bracket_examples() {
    let h = bundled::heisenberg();
    assert_eq!(bracket(&h, &e(3, 0), &e(3, 1)), e(3, 2));
    let s = bundled::su2_round();
    assert_eq!(bracket(&s, &e(3, 1), &e(3, 2)), 2.0 * e(3, 0));
}

#[test]
fn adjoint_examples() {
    let h = bundled::heisenberg();
    assert!(close(&ad_star(&h, &e(3, 0), &e(3, 2)), &e(3, 1), 1e-15));
    assert!(close(&ad_star(&h, &e(3, 1), &e(3, 2)), &-e(3, 0), 1e-15));
    let a = bundled::abelian3();
    assert_eq!(ad_star(&a, &e(3, 0), &e(3, 1)).max_abs(), 0.0);
}

#[test]
fn adjoint_matches_linear_system_on_all_models() {
    for m in all_models() {
        let d = m.dim();
        for x in 0..d {
            for u in 0..d {
                let lib = ad_star(&m, &e(d, x), &e(d, u));
                let oracle = adjoint_oracle(&m, &e(d, x), &e(d, u));
                assert!(close(&lib, &oracle, 1e-12), "{} x={x} u={u}", m.name());
            }
        }
    }
}

#[test]
fn bundled_certificates() {
    let h = bundled::heisenberg();
    assert!(h.certificates().totally_geodesic && h.certificates().carnot);
    let s = bundled::su2_round();
    assert!(s.certificates().totally_geodesic && !s.certificates().carnot);
    match folcomp::model::validate_model(bundled::spec("abelian3").unwrap()) {
        Err(Error::ValidationFailure { certificate, .. }) => {
            assert_eq!(certificate, folcomp::CertificateName::BracketGenerating)
        }
        other => panic!("abelian3 should fail bracket generation, got {other:?}"),
    }
}

#[test]
fn carnot_models_are_totally_geodesic_iff_step_two() {
    for m in [bundled::heisenberg(), bundled::engel()] {
        assert!(m.certificates().carnot);
        assert_eq!(m.certificates().totally_geodesic, m.step() == Some(2), "{}", m.name());
    }
}

#[test]
fn bundle_like_and_minimality_residuals() {
    for m in all_models() {
        let d = m.dim();
        let hs = &m.spec().horizontal_indices;
        let vs = &m.spec().vertical_indices;
        for &v in vs {
            for &x in hs {
                let (u, x) = (e(d, v - 1), e(d, x - 1));
                let lie = -2.0 * m.inner(&bracket(&m, &u, &x), &x);
                assert!(lie.abs() < 1e-12, "{} bundle-like", m.name());
            }
        }
        // Σ_i <D_{Z_i} Z_i, X> for an orthonormal vertical frame
        for &x in hs {
            let xv = e(d, x - 1);
            let mut s = 0.0;
            for &v in vs {
                let z = m.frame_vector(v - 1);
                s += m.inner(&levi_civita(&m, &z, &z), &xv);
            }
            assert!(s.abs() < 1e-12, "{} minimality", m.name());
        }
    }
}

#[test]
fn canonical_variation_basics() {
    let s = bundled::su2_round();
    let same = canonical_variation(&s, 1.0).unwrap();
    assert_eq!(same.metric(), s.metric());
    assert_eq!(same.certificates(), s.certificates());
    let b = canonical_variation(&s, 2.0).unwrap();
    assert!((b.metric()[(2, 2)] - 0.5).abs() < 1e-15);
    assert!((k_lower_bound(&b) - 1.0).abs() < 1e-10);
    assert!(matches!(canonical_variation(&s, 0.0), Err(Error::NonPositiveEpsilon(_))));
}

#[test]
fn canonical_variation_law_on_heisenberg() {
    // With |Z|² = 1/ε: 𝔯_ε = diag(-1/ε, -1/ε, 1/(2ε²)) in the model basis
    // (the horizontal entries come from the torsion pairing, the vertical one
    // from ¼(J,J)).
    let h = bundled::heisenberg();
    for eps in [0.5, 1.0, 2.0] {
        let r = frak_r_model_basis(&canonical_variation(&h, eps).unwrap());
        let expect = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0 / eps, -1.0 / eps, 0.5 / (eps * eps)]));
        assert!((r - expect).amax() < 1e-10, "eps = {eps}");
    }
}

#[test]
fn split_examples() {
    let h = bundled::heisenberg();
    let (a, b) = split(&h, &(e(3, 0) + e(3, 2)));
    assert_eq!((a, b), (e(3, 0), e(3, 2)));
    let (a, b) = split(&h, &AlgebraVector::zeros(3));
    assert_eq!(a.max_abs() + b.max_abs(), 0.0);
}

#[test]
fn heisenberg_connection_tables() {
    let h = bundled::heisenberg();
    assert!(close(&torsion(&h, &e(3, 0), &e(3, 1)), &-e(3, 2), 1e-15));
    assert_eq!(torsion(&h, &e(3, 2), &e(3, 2)).max_abs(), 0.0);
    assert!(close(&j_map(&h, &e(3, 2), &e(3, 0)), &-e(3, 1), 1e-15));
    assert!(close(&j_map(&h, &e(3, 2), &e(3, 1)), &e(3, 0), 1e-15));
    assert_eq!(j_map(&h, &e(3, 0), &e(3, 1)).max_abs(), 0.0);
}

#[test]
fn j_is_defined_by_torsion_pairing() {
    for m in all_models() {
        let d = m.dim();
        for z in 0..d {
            for x in 0..d {
                let jz = j_map(&m, &e(d, z), &e(d, x));
                for y in 0..d {
                    let lhs = m.inner(&jz, &e(d, y));
                    let rhs = m.inner(&e(d, z), &torsion(&m, &e(d, x), &e(d, y)));
                    assert!((lhs - rhs).abs() < 1e-12, "{}", m.name());
                }
            }
        }
    }
}

#[test]
fn connections_are_metric_and_levi_civita_is_torsion_free() {
    for m in all_models() {
        let d = m.dim();
        for x in 0..d {
            for y in 0..d {
                let (ex, ey) = (e(d, x), e(d, y));
                let tor = levi_civita(&m, &ex, &ey) - levi_civita(&m, &ey, &ex) - bracket(&m, &ex, &ey);
                assert!(tor.max_abs() < 1e-12);
                for kind in [ConnectionKind::LeviCivita, ConnectionKind::Adapted, ConnectionKind::Circ] {
                    for z in 0..d {
                        let ez = e(d, z);
                        let s = m.inner(&connection(&m, kind, &ex, &ey), &ez) + m.inner(&ey, &connection(&m, kind, &ex, &ez));
                        assert!(s.abs() < 1e-12, "{} {kind:?}", m.name());
                    }
                }
            }
        }
    }
}

#[test]
fn sectional_curvatures_by_hand() {
    let h = bundled::heisenberg();
    let (x1, x2) = (e(3, 0), e(3, 1));
    let k = h.inner(&curvature(&h, ConnectionKind::LeviCivita, &x1, &x2, &x2), &x1);
    assert!((k + 0.75).abs() < 1e-14);
    let s = bundled::su2_round();
    let k = s.inner(&curvature(&s, ConnectionKind::LeviCivita, &e(3, 0), &e(3, 1), &e(3, 1)), &e(3, 0));
    assert!((k - 1.0).abs() < 1e-14);
}

#[test]
fn decomposed_levi_civita_curvature_matches_direct() {
    for m in all_models() {
        let d = m.dim();
        for x in 0..d {
            for y in 0..d {
                for z in 0..d {
                    let a = riem_d_via_decomposition(&m, &e(d, x), &e(d, y), &e(d, z));
                    let b = curvature(&m, ConnectionKind::LeviCivita, &e(d, x), &e(d, y), &e(d, z));
                    assert!(close(&a, &b, 1e-10), "{}", m.name());
                }
            }
        }
    }
}

#[test]
fn named_tensor_values() {
    let h = frak_r_decomposed(&bundled::heisenberg());
    assert!((h.k + 1.0).abs() < 1e-12);
    assert!(h.symmetric && h.yang_mills_residual <= 1e-12);
    assert!((h.gb_total_bound.unwrap() + 1.0).abs() < 1e-12);
    let s = frak_r_matrix(&bundled::su2_round());
    let expect = DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 0.0, 2.0]));
    assert!((s - expect).amax() < 1e-10);
    assert!(k_lower_bound(&bundled::su2_round()).abs() < 1e-12);
    assert!((k_lower_bound(&bundled::su2_berger()) - 1.0).abs() < 1e-12);
    assert!(frak_r_matrix(&bundled::abelian3()).amax() == 0.0);
    assert!(gb_total_bound(&bundled::abelian3()).unwrap().abs() < 1e-15);
    assert!(matches!(gb_total_bound(&bundled::engel()), Err(Error::NotTotallyGeodesic)));
}

#[test]
fn decomposition_matches_definition_everywhere() {
    for m in all_models() {
        let r = frak_r_decomposed(&m);
        assert!(r.decomposition_residual <= 1e-10, "{}", m.name());
    }
}

#[test]
fn carnot_models_have_symmetric_tensor_and_nonpositive_k() {
    for m in [bundled::heisenberg(), bundled::engel()] {
        let r = frak_r_decomposed(&m);
        assert!(r.symmetric, "{}", m.name());
        assert!(r.k <= 1e-12, "{}", m.name());
    }
}

#[test]
fn totally_geodesic_models_have_no_mixed_entries() {
    for m in [bundled::heisenberg(), bundled::su2_round(), bundled::su2_berger()] {
        let d = m.dim();
        for &v in &m.spec().vertical_indices {
            for &x in &m.spec().horizontal_indices {
                let val = frak_r(&m, &m.frame_vector(v - 1), &m.frame_vector(x - 1));
                assert!(val.abs() < 1e-12, "{} {d}", m.name());
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bracket_is_antisymmetric_and_satisfies_jacobi(
        a in prop::collection::vec(-2.0f64..2.0, 4),
        b in prop::collection::vec(-2.0f64..2.0, 4),
        c in prop::collection::vec(-2.0f64..2.0, 4),
    ) {
        let m = bundled::engel();
        let (x, y, z) = (AlgebraVector::new(a), AlgebraVector::new(b), AlgebraVector::new(c));
        let s = bracket(&m, &x, &y) + bracket(&m, &y, &x);
        prop_assert!(s.max_abs() < 1e-12);
        let jac = bracket(&m, &bracket(&m, &x, &y), &z)
            + bracket(&m, &bracket(&m, &y, &z), &x)
            + bracket(&m, &bracket(&m, &z, &x), &y);
        prop_assert!(jac.max_abs() < 1e-11);
    }

    #[test]
    fn split_is_orthogonal(a in prop::collection::vec(-3.0f64..3.0, 3)) {
        let m = bundled::su2_berger();
        let u = AlgebraVector::new(a);
        let (h, v) = split(&m, &u);
        prop_assert!(m.inner(&h, &v).abs() < 1e-14);
        prop_assert!(close(&(h + v), &u, 1e-14));
    }

    #[test]
    fn j_is_skew(z in prop::collection::vec(-2.0f64..2.0, 4), x in prop::collection::vec(-2.0f64..2.0, 4)) {
        let m = bundled::engel();
        let (z, x) = (AlgebraVector::new(z), AlgebraVector::new(x));
        prop_assert!(m.inner(&j_map(&m, &z, &x), &x).abs() < 1e-12);
    }

    #[test]
    fn tensor_is_frame_independent(angle in 0.0f64..std::f64::consts::TAU) {
        for m in [bundled::heisenberg(), bundled::engel(), bundled::su2_berger()] {
            let g = m.ortho();
            let hs = g.horizontal_indices();
            let (s, c) = angle.sin_cos();
            let (a, b) = (g.basis(hs[0]), g.basis(hs[1]));
            let mut frame: Vec<Vec<f64>> = hs.iter().map(|&i| g.basis(i)).collect();
            frame[0] = a.iter().zip(&b).map(|(p, q)| c * p + s * q).collect();
            frame[1] = a.iter().zip(&b).map(|(p, q)| -s * p + c * q).collect();
            let diff = (frak_r_matrix_with_frame(&m, &frame) - frak_r_matrix(&m)).amax();
            prop_assert!(diff <= 1e-10, "{} {diff}", m.name());
        }
    }

    #[test]
    fn sym_ricci_identities(
        u in prop::collection::vec(-2.0f64..2.0, 4),
        v in prop::collection::vec(-2.0f64..2.0, 4),
    ) {
        let m = bundled::engel();
        let (u, v) = (AlgebraVector::new(u), AlgebraVector::new(v));
        let (uh, _) = split(&m, &u);
        let (vh, _) = split(&m, &v);
        for &x in &m.spec().horizontal_indices {
            let x = m.frame_vector(x - 1);
            let r = |p: &AlgebraVector, q: &AlgebraVector| m.inner(&curvature(&m, ConnectionKind::Adapted, p, &x, &x), q);
            let a = r(&u, &v);
            prop_assert!((a - r(&v, &u)).abs() < 1e-10);
            prop_assert!((a - r(&uh, &vh)).abs() < 1e-10);
        }
    }
}
