//! Geodesics, distances, transport and the index form. Oracles: straight
//! lines in flat models, one-parameter subgroups, reversed solves and
//! step refinement.

use folcomp::bundled;
use folcomp::geodesy::{
    cut_certificate, distance, exp_map, exp_map_steps, index_form, transport, CutCertificate, Geometry, IndexMode,
};
use folcomp::{AlgebraVector, GroupPoint, MinimalCertificate, TransportKind};
use proptest::prelude::*;

fn e(d: usize, i: usize) -> AlgebraVector {
    AlgebraVector::basis(d, i)
}

fn gap(a: &GroupPoint, b: &GroupPoint) -> f64 {
    a.coords().iter().zip(b.coords()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn flat_geodesics_are_lines() {
    let m = bundled::abelian3();
    let p = GroupPoint::Exp(vec![1.0, -2.0, 0.5]);
    let v = AlgebraVector::new(vec![0.6, 0.0, 0.8]);
    let rec = exp_map(&m, &p, &v, 2.0).unwrap();
    for s in &rec.samples {
        assert!((s.velocity.clone() - v.clone()).max_abs() < 1e-15);
        let expect = GroupPoint::Exp(vec![1.0 + 0.6 * s.t, -2.0, 0.5 + 0.8 * s.t]);
        assert!(gap(&s.point, &expect) < 1e-13);
    }
    assert_eq!(rec.samples[0].point, p);
}

#[test]
fn horizontal_geodesic_is_a_subgroup_on_heisenberg() {
    let m = bundled::heisenberg();
    let geo = Geometry::new(&m).unwrap();
    let rec = exp_map(&m, &geo.group().identity(), &e(3, 0), 1.7).unwrap();
    let expect = geo.group().exp(&[1.7, 0.0, 0.0]);
    assert!(gap(rec.endpoint(), &expect) < 1e-12);
}

#[test]
fn bi_invariant_geodesics_are_subgroups() {
    let m = bundled::su2_round();
    let geo = Geometry::new(&m).unwrap();
    let v = [0.3, -0.5, 0.7];
    let rec = exp_map(&m, &geo.group().identity(), &AlgebraVector::new(v.to_vec()), 1.0).unwrap();
    assert!(gap(rec.endpoint(), &geo.group().exp(&v)) < 1e-12);
}

#[test]
fn energy_is_conserved_over_long_runs() {
    for m in [bundled::heisenberg(), bundled::engel(), bundled::su2_berger()] {
        let d = m.dim();
        let v = AlgebraVector::new((0..d).map(|i| 0.3 + 0.2 * i as f64).collect());
        let geo = Geometry::new(&m).unwrap();
        let rec = exp_map(&m, &geo.group().identity(), &v, 5.0 / m.norm(&v)).unwrap();
        assert!(rec.energy_drift() <= 1e-9, "{} drift {}", m.name(), rec.energy_drift());
    }
}

#[test]
fn step_halving_converges_at_fourth_order() {
    let m = bundled::engel();
    let geo = Geometry::new(&m).unwrap();
    let v = AlgebraVector::new(vec![0.5, -0.4, 0.6, 0.3]);
    let id = geo.group().identity();
    let reference = exp_map_steps(&m, &id, &v, 2.0, 8192).unwrap();
    let coarse = exp_map_steps(&m, &id, &v, 2.0, 32).unwrap();
    let fine = exp_map_steps(&m, &id, &v, 2.0, 64).unwrap();
    let (e1, e2) = (gap(coarse.endpoint(), reference.endpoint()), gap(fine.endpoint(), reference.endpoint()));
    assert!(e1 / e2 > 12.0, "ratio {}", e1 / e2);
}

#[test]
fn distance_examples() {
    let a = bundled::abelian3();
    let p = GroupPoint::Exp(vec![0.0, 1.0, 0.0]);
    let q = GroupPoint::Exp(vec![3.0, 5.0, 0.0]);
    let rec = distance(&a, &p, &q).unwrap();
    assert!((rec.length - 5.0).abs() < 1e-12);
    assert_eq!(rec.minimal_certificate, MinimalCertificate::Certified);
    let same = distance(&a, &p, &p).unwrap();
    assert_eq!(same.length, 0.0);
}

#[test]
fn cut_certificates() {
    let a = bundled::abelian3();
    let id = GroupPoint::Exp(vec![0.0; 3]);
    assert_eq!(cut_certificate(&a, &id, &GroupPoint::Exp(vec![1.0, 2.0, 0.5])).unwrap(), CutCertificate::InC);

    let h = bundled::heisenberg();
    assert_eq!(cut_certificate(&h, &id, &GroupPoint::Exp(vec![0.2, -0.1, 0.1])).unwrap(), CutCertificate::InC);

    // the antipode of the round sphere is reached by a whole circle of
    // minimising geodesics
    let s = bundled::su2_round();
    let one = GroupPoint::Quat([1.0, 0.0, 0.0, 0.0]);
    let antipode = GroupPoint::Quat([-1.0, 0.0, 0.0, 0.0]);
    assert_eq!(cut_certificate(&s, &one, &antipode).unwrap(), CutCertificate::Uncertain);
}

#[test]
fn heisenberg_distance_is_symmetric() {
    let m = bundled::heisenberg();
    let geo = Geometry::new(&m).unwrap();
    let pts = [
        ([0.1, 0.2, -0.3], [0.9, -0.4, 0.2]),
        ([0.0, 0.0, 0.0], [0.5, 0.5, 0.5]),
        ([-0.7, 0.3, 0.1], [-0.2, 0.8, -0.6]),
        ([1.0, 1.0, 1.0], [0.2, 0.5, 1.4]),
    ];
    for (a, b) in pts {
        let (p, q) = (GroupPoint::Exp(a.to_vec()), GroupPoint::Exp(b.to_vec()));
        let (pq, _) = geo.distance(&p, &q).unwrap();
        let (qp, _) = geo.distance(&q, &p).unwrap();
        assert_eq!(pq.minimal_certificate, MinimalCertificate::Certified);
        assert!((pq.length - qp.length).abs() < 1e-6);
    }
}

#[test]
fn transport_examples() {
    let a = bundled::abelian3();
    let id = GroupPoint::Exp(vec![0.0; 3]);
    let rec = exp_map(&a, &id, &AlgebraVector::new(vec![0.6, 0.8, 0.0]), 1.5).unwrap();
    let x = AlgebraVector::new(vec![0.3, -0.7, 0.0]);
    assert_eq!(transport(&a, &rec, &x, TransportKind::Skewed).unwrap(), x);

    let h = bundled::heisenberg();
    let rec = exp_map(&h, &id, &AlgebraVector::new(vec![0.5, 0.3, 0.8]), 1.0).unwrap();
    let t1 = transport(&h, &rec, &e(3, 0), TransportKind::Skewed).unwrap();
    let t2 = transport(&h, &rec, &e(3, 1), TransportKind::Skewed).unwrap();
    assert!((h.inner(&t1, &t1) - 1.0).abs() < 1e-9);
    assert!((h.inner(&t2, &t2) - 1.0).abs() < 1e-9);
    assert!(h.inner(&t1, &t2).abs() < 1e-9);
    assert_eq!(t1.coefficients()[2], 0.0);

    let z = transport(&h, &rec, &e(3, 2), TransportKind::Circ).unwrap();
    assert!(z.coefficients()[0].abs() < 1e-9 && z.coefficients()[1].abs() < 1e-9);
    assert!(transport(&h, &rec, &e(3, 2), TransportKind::Skewed).is_err());
}

#[test]
fn circ_transport_converges_under_refinement() {
    let m = bundled::su2_berger();
    let geo = Geometry::new(&m).unwrap();
    let u = [0.6, 0.0, 0.8];
    let x0 = [0.2, 0.5, 0.3];
    let a = geo.transport_ortho(&u, 1.3, 256, &x0, TransportKind::Circ).unwrap();
    let b = geo.transport_ortho(&u, 1.3, 512, &x0, TransportKind::Circ).unwrap();
    let diff = a.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    assert!(diff < 1e-9, "{diff}");
}

#[test]
fn index_form_examples() {
    let a = bundled::abelian3();
    let id = GroupPoint::Exp(vec![0.0; 3]);
    let r = 1.5;
    let rec = exp_map_steps(&a, &id, &e(3, 0), r, 300).unwrap();
    let field = |t: f64| (t / r) * e(3, 1);
    for mode in [IndexMode::Riemannian, IndexMode::Horizontal] {
        let i = index_form(&a, &rec, &field, mode).unwrap();
        assert!((i - 1.0 / r).abs() < 1e-10, "{mode:?} {i}");
        let zero = index_form(&a, &rec, &|_| AlgebraVector::zeros(3), mode).unwrap();
        assert_eq!(zero, 0.0);
    }
    let h = bundled::heisenberg();
    let rec = exp_map_steps(&h, &id, &e(3, 0), 1.0, 100).unwrap();
    assert!(index_form(&h, &rec, &|_| e(3, 2), IndexMode::Horizontal).is_err());
}

#[test]
fn index_forms_agree_and_converge() {
    let m = bundled::heisenberg();
    let id = GroupPoint::Exp(vec![0.0; 3]);
    let v = AlgebraVector::new(vec![0.6, -0.48, 0.64]);
    let field = |t: f64| AlgebraVector::new(vec![(2.0 * t).sin(), 1.0 + t * t, 0.0]);
    let mut values = Vec::new();
    for steps in [500, 1000, 2000] {
        let rec = exp_map_steps(&m, &id, &v, 1.0, steps).unwrap();
        let ir = index_form(&m, &rec, &field, IndexMode::Riemannian).unwrap();
        let ih = index_form(&m, &rec, &field, IndexMode::Horizontal).unwrap();
        assert!((ir - ih).abs() < 1e-6);
        values.push(ir);
    }
    assert!((values[1] - values[2]).abs() < 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn exp_then_distance_round_trip(
        p in prop::collection::vec(-1.0f64..1.0, 3),
        v in prop::collection::vec(-1.0f64..1.0, 3),
        r in 0.1f64..1.0,
    ) {
        let m = bundled::heisenberg();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assume!(n > 0.1);
        let v = AlgebraVector::new(v.iter().map(|x| x / n).collect());
        let p = GroupPoint::Exp(p);
        let rec = exp_map(&m, &p, &v, r).unwrap();
        let back = distance(&m, &p, rec.endpoint()).unwrap();
        if back.minimal_certificate == MinimalCertificate::Certified {
            prop_assert!((back.length - r).abs() < 1e-6, "{} vs {r}", back.length);
        }
    }

    #[test]
    fn transport_is_isometric(
        u in prop::collection::vec(-1.0f64..1.0, 3),
        a in prop::collection::vec(-1.0f64..1.0, 3),
        b in prop::collection::vec(-1.0f64..1.0, 3),
        circ in any::<bool>(),
    ) {
        let m = bundled::su2_berger();
        let geo = Geometry::new(&m).unwrap();
        let n = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assume!(n > 0.1);
        let u: Vec<f64> = u.iter().map(|x| x / n).collect();
        let (kind, a, b) = if circ {
            (TransportKind::Circ, a, b)
        } else {
            (TransportKind::Skewed, vec![a[0], a[1], 0.0], vec![b[0], b[1], 0.0])
        };
        let ta = geo.transport_ortho(&u, 1.2, 200, &a, kind).unwrap();
        let tb = geo.transport_ortho(&u, 1.2, 200, &b, kind).unwrap();
        let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
        prop_assert!((dot(&ta, &tb) - dot(&a, &b)).abs() < 1e-9);
    }

    #[test]
    fn unit_speed_everywhere(v in prop::collection::vec(-1.0f64..1.0, 4)) {
        let m = bundled::engel();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assume!(n > 0.1);
        let rec = exp_map(&m, &GroupPoint::Exp(vec![0.0; 4]), &AlgebraVector::new(v), 3.0 / n).unwrap();
        prop_assert!(rec.energy_drift() <= 1e-9);
    }
}
