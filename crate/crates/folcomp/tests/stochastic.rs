//! Horizontal Brownian motion: exact laws, reproducibility and the audits on
//! small path counts.

use folcomp::bundled;
use folcomp::group::Group;
use folcomp::report::Verdict;
use folcomp::stochastic::{
    exit_tail, heat_diag_lower, hbm_path, mean_se, parallel_coupling_run, radial_comparison_run, semigroup_estimate,
    HorizontalBm, SimConfig,
};
use folcomp::{Error, GroupPoint};

fn within(mean: f64, se: f64, expected: f64) -> bool {
    (mean - expected).abs() <= 3.0 * se + 0.02 * expected.abs()
}

#[test]
fn flat_mean_square_displacement() {
    let m = bundled::flat3();
    let cfg = SimConfig::new(1e-2, 1.0, 2000, 3).unwrap();
    let bm = HorizontalBm::new(&m).unwrap();
    for t in [0.25, 1.0] {
        let sq: Vec<f64> = bm
            .increments(t, &cfg)
            .iter()
            .map(|x| x.coords().iter().map(|c| c * c).sum())
            .collect();
        let (mean, se) = mean_se(&sq);
        assert!(within(mean, se, 6.0 * t), "t = {t}: {mean} ± {se}");
    }
}

#[test]
fn heisenberg_coordinate_laws() {
    let m = bundled::heisenberg();
    let cfg = SimConfig::new(1e-2, 1.0, 2000, 5).unwrap();
    let bm = HorizontalBm::new(&m).unwrap();
    let xs = bm.increments(1.0, &cfg);
    let col = |i: usize| xs.iter().map(|p| p.coords()[i]).collect::<Vec<_>>();
    // x and the Lévy area are centred, x² + y² grows like 2·2t
    for i in [0, 2] {
        let (mean, se) = mean_se(&col(i));
        assert!(mean.abs() <= 3.0 * se, "coordinate {i}: {mean} ± {se}");
    }
    let r2: Vec<f64> = xs.iter().map(|p| p.coords()[0].powi(2) + p.coords()[1].powi(2)).collect();
    let (mean, se) = mean_se(&r2);
    assert!(within(mean, se, 4.0), "{mean} ± {se}");
}

#[test]
fn semigroup_of_constants_is_exact() {
    for m in [bundled::heisenberg(), bundled::su2_berger()] {
        let cfg = SimConfig::new(1e-2, 1.0, 50, 1).unwrap();
        let id = Group::new(&m).unwrap().identity();
        let est = semigroup_estimate(&m, &|_| 1.0, &id, 1.0, &cfg).unwrap();
        assert_eq!(est.value, 1.0);
        assert_eq!(est.std_error, 0.0);
    }
}

#[test]
fn paths_are_deterministic_across_thread_counts() {
    let m = bundled::heisenberg();
    let cfg = SimConfig::new(1e-2, 0.5, 64, 11).unwrap();
    let bm = HorizontalBm::new(&m).unwrap();
    let one = bm.increments(0.5, &cfg);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(2).build().unwrap();
    let two = pool.install(|| bm.increments(0.5, &cfg));
    assert_eq!(one, two);
    let other_seed = SimConfig { seed: 12, ..cfg };
    assert_ne!(one, bm.increments(0.5, &other_seed));
}

#[test]
fn left_translation_moves_paths() {
    let m = bundled::heisenberg();
    let grp = Group::new(&m).unwrap();
    let cfg = SimConfig::new(1e-2, 0.5, 1, 2).unwrap();
    let p = GroupPoint::Exp(vec![0.4, -0.3, 0.7]);
    let from_e = hbm_path(&m, &grp.identity(), &cfg, 0).unwrap();
    let from_p = hbm_path(&m, &p, &cfg, 0).unwrap();
    assert_eq!(from_e.points.len(), cfg.steps() + 1);
    assert!(!from_p.exploded);
    for (a, b) in from_e.points.iter().zip(&from_p.points) {
        let moved = grp.mul(&p, a).coords();
        for (x, y) in moved.iter().zip(b.coords()) {
            assert!((x - y).abs() < 1e-10);
        }
    }
}

#[test]
fn su2_paths_stay_on_the_group() {
    let m = bundled::su2_berger();
    let grp = Group::new(&m).unwrap();
    let cfg = SimConfig::new(1e-2, 1.0, 1, 4).unwrap();
    let rec = hbm_path(&m, &grp.identity(), &cfg, 0).unwrap();
    for p in &rec.points {
        let norm: f64 = p.coords().iter().map(|c| c * c).sum();
        assert!((norm - 1.0).abs() < 1e-12);
    }
}

#[test]
fn flat_coupling_keeps_distance() {
    let m = bundled::abelian3();
    let grp = Group::new(&m).unwrap();
    let cfg = SimConfig::new(1e-2, 1.0, 8, 6).unwrap();
    let q = GroupPoint::Exp(vec![0.3, -0.2, 0.4]);
    let rep = parallel_coupling_run(&m, &grp.identity(), &q, &cfg).unwrap();
    assert!(rep.summary_value("max_abs_change").unwrap() <= 1e-12);
    let d0 = rep.summary_value("d0").unwrap();
    assert!((d0 - (0.09f64 + 0.04 + 0.16).sqrt()).abs() < 1e-9);
}

#[test]
fn heat_diagonal_bound_is_nonnegative_and_below_exact() {
    let m = bundled::flat3();
    let id = Group::new(&m).unwrap().identity();
    let t = 0.25;
    let cfg = SimConfig::new(1e-2, t, 400, 8).unwrap();
    let hd = heat_diag_lower(&m, &id, t, 2.0, &cfg).unwrap();
    let exact = (8.0 * std::f64::consts::PI * t).powf(-1.5);
    assert!(hd.value >= 0.0);
    assert!(hd.value <= exact + 3.0 * hd.std_error, "{} vs {exact}", hd.value);
    assert!((0.0..=1.0).contains(&hd.exit_probability));
}

#[test]
fn flat_exit_tail_decays() {
    let m = bundled::flat3();
    let id = Group::new(&m).unwrap().identity();
    let cfg = SimConfig::new(1e-2, 1.0, 1000, 9).unwrap();
    let rep = exit_tail(&m, &id, &[1.0, 2.0, 3.0], 1.0, &cfg).unwrap();
    assert_eq!(rep.verdict, Verdict::Pass);
    let p: Vec<f64> = rep.rows.iter().filter(|r| r.label == "tail").map(|r| r.measured).collect();
    assert_eq!(p.len(), 3);
    assert!(p.windows(2).all(|w| w[1] <= w[0]), "{p:?}");
    assert!(rep.summary_value("slope").unwrap() < 0.0);
}

#[test]
fn radial_run_rejects_positive_k() {
    let cfg = SimConfig::new(1e-2, 1.0, 10, 1).unwrap();
    let m = bundled::su2_berger();
    let id = Group::new(&m).unwrap().identity();
    assert!(matches!(radial_comparison_run(&m, &id, &cfg), Err(Error::InapplicableK(_))));
}

#[test]
fn bad_configs_are_rejected() {
    assert!(matches!(SimConfig::new(0.0, 1.0, 10, 1), Err(Error::InvalidConfig(_))));
    assert!(matches!(SimConfig::new(1e-2, 1e-3, 10, 1), Err(Error::InvalidConfig(_))));
    assert!(matches!(SimConfig::new(1e-2, 1.0, 0, 1), Err(Error::InvalidConfig(_))));
}
