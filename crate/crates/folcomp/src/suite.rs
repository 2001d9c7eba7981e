//! The self-test suite behind `folcomp selftest`: eleven numbered checks on
//! the bundled models, each producing a verdict, a short deterministic
//! description and CSV tables.
//!
//! CSV content depends only on the seed and the suite profile, never on
//! timing or thread count.

use std::fmt::Write as _;
use std::time::Instant;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::algebra::{axpy, dot, norm};
use crate::bundled;
use crate::comparison::{bonnet_myers_audit, comparison_audit, coupled_audit, ComparisonConfig};
use crate::connection::{frak_r_decomposed, frak_r_matrix, frak_r_matrix_with_frame, k_lower_bound};
use crate::error::{Error, Result};
use crate::geodesy::{Geometry, IndexMode};
use crate::group::GroupPoint;
use crate::model::{canonical_variation, FoliatedModel};
use crate::report::{fmt_f64, AuditReport, Verdict};
use crate::stochastic::{
    clamped_distance, exit_tail, heat_diag_lower, lipschitz_audit, mean_se, mixed_gradient_audit,
    gradient_bound_audit, parallel_coupling_run, radial_comparison_run, semigroup_estimate, HorizontalBm,
    SimConfig, TestFunction,
};
use crate::ConnectionKind;

/// Sample sizes of a suite run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SuiteConfig {
    pub seed: u64,
    pub index_pairs: usize,
    pub bonnet_myers_pairs: usize,
    /// Paths for the flat laws, radial, exit (flat), gradient and mixed runs.
    pub paths: usize,
    /// Paths for the coupling, Lipschitz and curved exit runs, which solve a
    /// distance at many points of every path.
    pub solver_paths: usize,
    pub dt: f64,
}

impl SuiteConfig {
    pub fn full(seed: u64) -> Self {
        Self {
            seed,
            index_pairs: 50,
            bonnet_myers_pairs: 10_000,
            paths: 10_000,
            solver_paths: 2_000,
            dt: 1e-3,
        }
    }

    /// Reduced sizes for smoke tests; verdicts are less sharp.
    pub fn quick(seed: u64) -> Self {
        Self {
            seed,
            index_pairs: 4,
            bonnet_myers_pairs: 200,
            paths: 1_000,
            solver_paths: 100,
            dt: 1e-2,
        }
    }

    fn sim(&self, t_end: f64, n_paths: usize, salt: u64) -> Result<SimConfig> {
        SimConfig::new(self.dt, t_end, n_paths, self.seed.wrapping_add(salt))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CsvTable {
    pub file: String,
    #[serde(skip)]
    pub content: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionOutcome {
    pub id: usize,
    pub name: String,
    pub pass: bool,
    /// One line per sub-check, free of timings.
    pub details: Vec<String>,
    pub tables: Vec<CsvTable>,
    pub seconds: f64,
}

pub const CRITERIA: [(usize, &str); 11] = [
    (1, "tensor exactness"),
    (2, "named tensor values"),
    (3, "index form equality"),
    (4, "horizontal Laplacian comparison"),
    (5, "coupled Laplacian comparison"),
    (6, "Bonnet-Myers diameter"),
    (7, "stochastic completeness and flat laws"),
    (8, "radial quantile domination"),
    (9, "exit tails and heat-kernel diagonal"),
    (10, "coupling contraction"),
    (11, "Lipschitz and gradient bounds"),
];

/// Accumulates sub-checks of one criterion.
struct Check {
    pass: bool,
    details: Vec<String>,
    tables: Vec<CsvTable>,
}

impl Check {
    fn new() -> Self {
        Self {
            pass: true,
            details: Vec::new(),
            tables: Vec::new(),
        }
    }

    fn record(&mut self, ok: bool, line: String) {
        self.pass &= ok;
        self.details.push(format!("[{}] {line}", if ok { "ok" } else { "FAIL" }));
    }

    fn table(&mut self, file: impl Into<String>, content: String) {
        self.tables.push(CsvTable {
            file: file.into(),
            content,
        });
    }

    fn audit(&mut self, file: impl Into<String>, rep: &AuditReport, accept: &[Verdict], line: String) {
        let ok = accept.contains(&rep.verdict);
        self.record(ok, format!("{line} [{:?}, {} rows, {} skipped]", rep.verdict, rep.rows.len(), rep.skipped));
        self.table(file, rep.to_csv());
    }
}

pub fn run_criterion(id: usize, cfg: &SuiteConfig) -> Result<CriterionOutcome> {
    let name = CRITERIA
        .iter()
        .find(|c| c.0 == id)
        .map(|c| c.1)
        .ok_or_else(|| Error::InvalidConfig(format!("no criterion {id}")))?;
    let start = Instant::now();
    let mut c = Check::new();
    match id {
        1 => tensor_exactness(&mut c, cfg)?,
        2 => named_values(&mut c)?,
        3 => index_forms(&mut c, cfg)?,
        4 => laplacian(&mut c)?,
        5 => coupled(&mut c)?,
        6 => bonnet_myers(&mut c, cfg)?,
        7 => flat_laws(&mut c, cfg)?,
        8 => radial(&mut c, cfg)?,
        9 => exits(&mut c, cfg)?,
        10 => coupling(&mut c, cfg)?,
        _ => gradients(&mut c, cfg)?,
    }
    Ok(CriterionOutcome {
        id,
        name: name.to_string(),
        pass: c.pass,
        details: c.details,
        tables: c.tables,
        seconds: start.elapsed().as_secs_f64(),
    })
}

pub fn run_all(cfg: &SuiteConfig) -> Result<Vec<CriterionOutcome>> {
    CRITERIA.iter().map(|&(id, _)| run_criterion(id, cfg)).collect()
}

fn tensor_models() -> Vec<FoliatedModel> {
    vec![
        bundled::heisenberg(),
        bundled::engel(),
        bundled::su2_berger(),
        bundled::abelian3(),
    ]
}

fn e(x: f64) -> String {
    format!("{x:.3e}")
}

fn tensor_exactness(c: &mut Check, cfg: &SuiteConfig) -> Result<()> {
    let mut csv = String::from("model,check,max_residual,tolerance\n");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for m in tensor_models() {
        let g = m.ortho();
        let t = m.tables();
        let d = m.dim();
        let basis: Vec<Vec<f64>> = (0..d).map(|a| g.basis(a)).collect();

        let decomposition = frak_r_decomposed(&m).decomposition_residual;

        let mut riem: f64 = 0.0;
        for x in &basis {
            for y in &basis {
                for z in &basis {
                    let mut diff = t.riem_d_decomposed(x, y, z);
                    axpy(-1.0, &t.curvature(ConnectionKind::LeviCivita, x, y, z), &mut diff);
                    riem = riem.max(crate::algebra::max_abs(&diff));
                }
            }
        }

        // ∇_x y - D_x y - ½Tor(x,y) + ½J_x y + ½J_y x
        let mut relation: f64 = 0.0;
        for x in &basis {
            for y in &basis {
                let mut r = t.adapted.apply(x, y);
                axpy(-1.0, &t.levi_civita.apply(x, y), &mut r);
                axpy(-0.5, &t.torsion.apply(x, y), &mut r);
                axpy(0.5, &t.j.apply(x, y), &mut r);
                axpy(0.5, &t.j.apply(y, x), &mut r);
                relation = relation.max(crate::algebra::max_abs(&r));
            }
        }

        let mut sym: f64 = 0.0;
        for _ in 0..20 {
            let u: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let (uh, vh) = (g.project_h(&u), g.project_h(&v));
            for &a in g.horizontal_indices() {
                let x = &basis[a];
                let r = |p: &[f64], q: &[f64]| dot(&t.curvature(ConnectionKind::Adapted, p, x, x), q);
                let uv = r(&u, &v);
                sym = sym.max((uv - r(&v, &u)).abs()).max((uv - r(&uh, &vh)).abs());
            }
        }

        for (label, value, tol) in [
            ("decomposition", decomposition, 1e-10),
            ("levi_civita_curvature", riem, 1e-10),
            ("connection_relation", relation, 1e-12),
            ("sym_ricci", sym, 1e-10),
        ] {
            let _ = writeln!(csv, "{},{label},{},{}", m.name(), fmt_f64(value), fmt_f64(tol));
            c.record(value <= tol, format!("{} {label}: {} <= {}", m.name(), e(value), e(tol)));
        }
    }
    c.table("c01_tensors.csv", csv);
    Ok(())
}

fn named_values(c: &mut Check) -> Result<()> {
    let round = bundled::su2_round();
    let cases: Vec<(String, FoliatedModel, Option<[f64; 3]>, f64)> = vec![
        ("heisenberg".into(), bundled::heisenberg(), Some([-1.0, -1.0, 0.5]), -1.0),
        ("su2_round".into(), round.clone(), Some([0.0, 0.0, 2.0]), 0.0),
        ("su2_round_eps2".into(), canonical_variation(&round, 2.0)?, None, 1.0),
        ("su2_berger".into(), bundled::su2_berger(), None, 1.0),
    ];
    let mut csv = String::from("model,quantity,value,expected,deviation\n");
    for (name, m, diag, k_expected) in cases {
        let r = frak_r_matrix(&m);
        // frame independence: the same sum in a rotated horizontal frame
        let rotated = frak_r_matrix_with_frame(&m, &rotated_frame(&m, 0.7));
        let frame_dev = (&rotated - &r).amax();
        c.record(frame_dev <= 1e-10, format!("{name} frame independence: {}", e(frame_dev)));
        if let Some(diag) = diag {
            let expected = DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&diag));
            for a in 0..3 {
                for b in 0..3 {
                    let dev = (r[(a, b)] - expected[(a, b)]).abs();
                    let _ = writeln!(
                        csv,
                        "{name},r_{a}{b},{},{},{}",
                        fmt_f64(r[(a, b)]),
                        fmt_f64(expected[(a, b)]),
                        fmt_f64(dev)
                    );
                }
            }
            let dev = (&r - &expected).amax();
            c.record(dev <= 1e-10, format!("{name} 𝔯 = diag{diag:?}: deviation {}", e(dev)));
        }
        let k = k_lower_bound(&m);
        // independent eigenvalue route through the full spectrum
        let sym = (&r + r.transpose()) * 0.5;
        let k_oracle = SymmetricEigen::new(sym).eigenvalues.min();
        let dev = (k - k_expected).abs().max((k_oracle - k_expected).abs());
        let _ = writeln!(csv, "{name},K,{},{},{}", fmt_f64(k), fmt_f64(k_expected), fmt_f64(dev));
        c.record(dev <= 1e-10, format!("{name} K = {k_expected}: deviation {}", e(dev)));
    }
    c.table("c02_named_values.csv", csv);
    Ok(())
}

/// Horizontal frame rotated by `angle` in the first horizontal plane.
fn rotated_frame(m: &FoliatedModel, angle: f64) -> Vec<Vec<f64>> {
    let g = m.ortho();
    let hs = g.horizontal_indices();
    let mut frame: Vec<Vec<f64>> = hs.iter().map(|&a| g.basis(a)).collect();
    if hs.len() >= 2 {
        let (s, co) = angle.sin_cos();
        let (a, b) = (frame[0].clone(), frame[1].clone());
        frame[0] = a.iter().zip(&b).map(|(x, y)| co * x + s * y).collect();
        frame[1] = a.iter().zip(&b).map(|(x, y)| -s * x + co * y).collect();
    }
    frame
}

fn index_forms(c: &mut Check, cfg: &SuiteConfig) -> Result<()> {
    const NODES: usize = 2000;
    let mut csv = String::from("model,pair,length,riemannian,horizontal,difference\n");
    for (mi, m) in tensor_models().into_iter().enumerate() {
        let geo = Geometry::new(&m)?;
        let g = m.ortho();
        let hs = g.horizontal_indices().to_vec();
        let d = m.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1000 + mi as u64));
        let mut worst: f64 = 0.0;
        for pair in 0..cfg.index_pairs {
            let mut u: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let nu = norm(&u);
            u.iter_mut().for_each(|x| *x /= nu);
            let length = 0.5 + rng.random::<f64>();
            let rec = geo.record(&geo.group().identity(), &u, length, NODES)?;
            let coef: Vec<[f64; 3]> = hs
                .iter()
                .map(|_| std::array::from_fn(|_| rng.sample(StandardNormal)))
                .collect();
            let field = |s: f64| {
                let mut y = vec![0.0; d];
                for (k, &a) in hs.iter().enumerate() {
                    let [p, q, w] = coef[k];
                    y[a] = p + q * s + w * (std::f64::consts::PI * s / length).sin();
                }
                m.from_ortho(&y)
            };
            let ir = geo.index_form(&rec, &field, IndexMode::Riemannian)?;
            let ih = geo.index_form(&rec, &field, IndexMode::Horizontal)?;
            let diff = (ir - ih).abs();
            worst = worst.max(diff);
            let _ = writeln!(
                csv,
                "{},{pair},{},{},{},{}",
                m.name(),
                fmt_f64(length),
                fmt_f64(ir),
                fmt_f64(ih),
                fmt_f64(diff)
            );
        }
        c.record(
            worst <= 1e-6,
            format!("{}: max |I_riem - I_hor| over {} pairs = {} <= 1e-6", m.name(), cfg.index_pairs, e(worst)),
        );
    }
    c.table("c03_index_form.csv", csv);
    Ok(())
}

const LAPLACIAN_RADII: [f64; 5] = [0.25, 0.5, 1.0, 1.5, 2.0];

fn laplacian(c: &mut Check) -> Result<()> {
    let rep = comparison_audit(&bundled::heisenberg(), &LAPLACIAN_RADII, 16)?;
    let line = format!("heisenberg: every certified row <= √2·coth(r/√2) + 5e-3, min margin {:.4}", min_margin(&rep));
    c.audit("c04_heisenberg.csv", &rep, &[Verdict::Pass], line);
    let control = crate::comparison::comparison_audit_with(
        &bundled::abelian3(),
        &LAPLACIAN_RADII,
        8,
        ComparisonConfig { h: 1e-3, tol: 2e-3 },
    )?;
    let line = format!("abelian3: every row <= 2/r + 2e-3, min margin {:.4}", min_margin(&control));
    c.audit("c04_abelian3.csv", &control, &[Verdict::Pass], line);
    Ok(())
}

fn min_margin(rep: &AuditReport) -> f64 {
    rep.rows
        .iter()
        .filter(|r| r.certified)
        .map(|r| r.margin)
        .fold(f64::INFINITY, f64::min)
}

fn coupled(c: &mut Check) -> Result<()> {
    let radii = [0.5, 1.0, 1.5];
    let rep = coupled_audit(&bundled::heisenberg(), &radii, 8, ComparisonConfig::default())?;
    let line = format!("heisenberg: every certified row <= 4·tanh(r/(2√2)) + 5e-3, min margin {:.4}", min_margin(&rep));
    c.audit("c05_heisenberg.csv", &rep, &[Verdict::Pass], line);
    let control = coupled_audit(&bundled::abelian3(), &radii, 8, ComparisonConfig { h: 1e-3, tol: 1e-6 })?;
    let line = format!("abelian3: every row <= 1e-6, max |measured| {}", e(max_abs_measured(&control)));
    c.audit("c05_abelian3.csv", &control, &[Verdict::Pass], line);
    Ok(())
}

fn max_abs_measured(rep: &AuditReport) -> f64 {
    rep.rows.iter().map(|r| r.measured.abs()).fold(0.0, f64::max)
}

fn bonnet_myers(c: &mut Check, cfg: &SuiteConfig) -> Result<()> {
    let rep = bonnet_myers_audit(&bundled::su2_berger(), cfg.bonnet_myers_pairs, cfg.seed)?;
    let line = format!(
        "su2_berger: max certified distance {:.6} <= π√2·1.01 = {:.6} over {} certified of {} pairs",
        rep.summary_value("max_distance").unwrap_or(f64::NAN),
        std::f64::consts::PI * 2f64.sqrt() * 1.01,
        rep.summary_value("certified_pairs").unwrap_or(0.0),
        cfg.bonnet_myers_pairs,
    );
    let enough = rep.summary_value("certified_pairs").unwrap_or(0.0) >= 0.9 * cfg.bonnet_myers_pairs as f64;
    c.audit("c06_su2_berger.csv", &rep, &[Verdict::Pass], line);
    c.record(enough, "at least 90% of the sampled pairs certified".into());
    for m in [bundled::heisenberg(), bundled::abelian3()] {
        let res = bonnet_myers_audit(&m, 10, cfg.seed);
        let ok = matches!(res, Err(Error::NonPositiveK(_)));
        c.record(ok, format!("{}: inapplicable (K <= 0)", m.name()));
    }
    Ok(())
}

fn flat_laws(c: &mut Check, cfg: &SuiteConfig) -> Result<()> {
    let mut csv = String::from("model,quantity,t,estimate,std_error,expected\n");
    for m in [bundled::heisenberg(), bundled::su2_berger()] {
        let sim = cfg.sim(1.0, cfg.paths.min(1000), 7)?;
        let id = crate::group::Group::new(&m)?.identity();
        let est = semigroup_estimate(&m, &|_| 1.0, &id, 1.0, &sim)?;
        let _ = writeln!(
            csv,
            "{},P_t1,1,{},{},1",
            m.name(),
            fmt_f64(est.value),
            fmt_f64(est.std_error)
        );
        c.record(
            est.value == 1.0 && est.std_error == 0.0,
            format!("{}: P_t 1 = {} exactly", m.name(), est.value),
        );
    }
    for m in [bundled::flat3(), bundled::abelian3()] {
        let n = m.n() as f64;
        let sim = cfg.sim(1.0, cfg.paths, 7)?;
        let bm = HorizontalBm::new(&m)?;
        for t in [0.5, 1.0] {
            let sq: Vec<f64> = bm
                .increments(t, &sim)
                .iter()
                .map(|x| x.coords().iter().map(|c| c * c).sum())
                .collect();
            let (mean, se) = mean_se(&sq);
            let expected = 2.0 * n * t;
            let _ = writeln!(
                csv,
                "{},mean_square_displacement,{t},{},{},{}",
                m.name(),
                fmt_f64(mean),
                fmt_f64(se),
                fmt_f64(expected)
            );
            c.record(
                (mean - expected).abs() <= 3.0 * se,
                format!("{}: E|ξ_{t} - p|² = {mean:.4} ± {se:.4} vs 2nt = {expected}", m.name()),
            );
        }
    }
    c.table("c07_flat_laws.csv", csv);
    Ok(())
}

fn radial(c: &mut Check, cfg: &SuiteConfig) -> Result<()> {
    let m = bundled::heisenberg();
    let sim = cfg.sim(1.0, cfg.paths, 8)?;
    let id = crate::group::Group::new(&m)?.identity();
    let rep = radial_comparison_run(&m, &id, &sim)?;
    let worst = min_margin(&rep);
    let line = format!("heisenberg: quantiles 0.5/0.9/0.99 at t = 0.25/0.5/1 dominated, min margin {worst:.4}");
    c.audit("c08_radial.csv", &rep, &[Verdict::Pass], line);
    Ok(())
}

fn exits(c: &mut Check, cfg: &SuiteConfig) -> Result<()> {
    let flat = bundled::flat3();
    let id = crate::group::Group::new(&flat)?.identity();
    let sim = cfg.sim(1.0, cfg.paths, 9)?;
    let rep = exit_tail(&flat, &id, &[2.0, 2.5, 3.0, 3.5, 4.0], 1.0, &sim)?;
    let slope = rep.summary_value("slope").unwrap_or(f64::NAN);
    c.record(slope <= -0.125, format!("flat3: fitted slope of log P vs r² = {slope:.4} <= -1/8"));
    c.audit("c09_exit_flat3.csv", &rep, &[Verdict::Pass], "flat3: tail nonincreasing, slope < 0".into());

    let heis = bundled::heisenberg();
    let hid = crate::group::Group::new(&heis)?.identity();
    let sim = cfg.sim(1.0, cfg.solver_paths.min(1000), 9)?;
    let rep = exit_tail(&heis, &hid, &[1.0, 1.5, 2.0, 2.5, 3.0], 1.0, &sim)?;
    let slope = rep.summary_value("slope").unwrap_or(f64::NAN);
    let se = rep.summary_value("slope_se").unwrap_or(f64::NAN);
    let line = format!("heisenberg: slope {slope:.4} ± {se:.4} strictly negative (3 SE)");
    c.audit("c09_exit_heisenberg.csv", &rep, &[Verdict::Pass], line);

    let t = 0.25;
    let sim = cfg.sim(t, cfg.paths, 19)?;
    let hd = heat_diag_lower(&flat, &id, t, 2.0, &sim)?;
    let exact = (4.0 * std::f64::consts::PI * 2.0 * t).powf(-1.5);
    let mut csv = String::from("quantity,value,std_error\n");
    for (k, v, s) in [
        ("lower_bound", hd.value, hd.std_error),
        ("exit_probability", hd.exit_probability, hd.exit_std_error),
        ("ball_volume", hd.ball_volume, hd.ball_volume_std_error),
        ("exact_p_2t", exact, 0.0),
    ] {
        let _ = writeln!(csv, "{k},{},{}", fmt_f64(v), fmt_f64(s));
    }
    c.table("c09_heat_diagonal.csv", csv);
    c.record(
        hd.value >= 0.0 && hd.value <= exact + 3.0 * hd.std_error,
        format!(
            "flat3: p_{{2t}}(x,x) lower bound {:.5} ± {:.5} <= exact {exact:.5} (t = {t}, r = 2)",
            hd.value, hd.std_error
        ),
    );
    Ok(())
}

fn coupling(c: &mut Check, cfg: &SuiteConfig) -> Result<()> {
    // flat control with a transport refresh at every step
    let flat = bundled::abelian3();
    let grp = crate::group::Group::new(&flat)?;
    let q = GroupPoint::Exp(vec![0.3, -0.2, 0.4]);
    let mut sim = cfg.sim(1.0, 20, 10)?;
    sim.coupling_refresh = 1;
    let rep = parallel_coupling_run(&flat, &grp.identity(), &q, &sim)?;
    let change = rep.summary_value("max_abs_change").unwrap_or(f64::NAN);
    c.record(change <= 1e-12, format!("abelian3: pair distance constant, max change {}", e(change)));
    c.table("c10_abelian3.csv", rep.to_csv());

    for m in [bundled::heisenberg(), bundled::su2_berger()] {
        let geo = Geometry::new(&m)?;
        let id = geo.group().identity();
        let g = m.ortho();
        let mut u = vec![0.0; m.dim()];
        u[g.horizontal_indices()[0]] = 0.8;
        u[g.vertical_indices()[0]] = 0.6;
        let w: Vec<f64> = u.iter().map(|x| 0.5 * x).collect();
        let q = geo.flow(&id, &w, geo.shooting.steps);
        let mut sim = cfg.sim(1.0, cfg.solver_paths, 10)?;
        sim.coupling_refresh = 10;
        let rep = parallel_coupling_run(&m, &id, &q, &sim)?;
        let d0 = rep.summary_value("d0").unwrap_or(f64::NAN);
        let mean1 = rep.summary_value("mean_t1").unwrap_or(f64::NAN);
        let k = rep.summary_value("K").unwrap_or(f64::NAN);
        let line = format!(
            "{}: mean d(ξ_t, ξ̃_t) <= e^(-Kt)·d0·1.02 + 3 SE with K = {k:.3}, d0 = {d0:.4}, mean at t = 1 {mean1:.4}, dropped {:.3}",
            m.name(),
            rep.summary_value("dropped_fraction").unwrap_or(f64::NAN)
        );
        c.audit(format!("c10_{}.csv", m.name()), &rep, &[Verdict::Pass], line);
        if k > 0.0 {
            c.record(mean1 < d0, format!("{}: contraction observed, {mean1:.4} < {d0:.4}", m.name()));
        }
    }
    Ok(())
}

fn gradients(c: &mut Check, cfg: &SuiteConfig) -> Result<()> {
    let m = bundled::heisenberg();
    let grp = crate::group::Group::new(&m)?;
    let id = grp.identity();
    let t = 0.5;

    let f = clamped_distance(&m, 2.0)?;
    let pairs = vec![
        (id.clone(), GroupPoint::Exp(vec![0.4, 0.0, 0.0])),
        (GroupPoint::Exp(vec![0.5, 0.2, 0.1]), GroupPoint::Exp(vec![0.3, 0.6, -0.2])),
        (GroupPoint::Exp(vec![-0.7, 0.4, 0.3]), GroupPoint::Exp(vec![-0.4, 0.1, 0.8])),
    ];
    let sim = cfg.sim(t, cfg.solver_paths, 11)?;
    let rep = lipschitz_audit(&m, &f, 1.0, &pairs, t, &sim)?;
    let line = format!(
        "heisenberg: |P_t f(q) - P_t f(p)|/d(p,q) <= e^0.5·1.02 + 3 SE, max ratio {:.4}",
        rep.summary_value("max_ratio").unwrap_or(f64::NAN)
    );
    c.audit("c11_lipschitz.csv", &rep, &[Verdict::Pass], line);

    let sim = cfg.sim(t, cfg.paths, 12)?;
    let fx = TestFunction::with_fd_gradient(&m, "x_coordinate", |p: &GroupPoint| p.coords()[0])?;
    let rep = gradient_bound_audit(&m, &fx, &id, t, &sim)?;
    let line = format!(
        "heisenberg: |∇P_t f| = {:.4} <= e^(-Kt) P_t|∇f| with K = {} and P_t|∇f| = {:.4}",
        rep.summary_value("grad_P_t_f").unwrap_or(f64::NAN),
        rep.summary_value("K").unwrap_or(f64::NAN),
        rep.summary_value("P_t_grad_f").unwrap_or(f64::NAN)
    );
    c.audit("c11_gradient.csv", &rep, &[Verdict::Pass], line);

    let fs = TestFunction::with_fd_gradient(&m, "sin_x_plus_z", |p: &GroupPoint| {
        let c = p.coords();
        (c[0] + c[2]).sin()
    })?;
    let sim = cfg.sim(1.0, cfg.paths, 13)?;
    let rep = mixed_gradient_audit(&m, &fs, &id, &[0.1, 0.2, 0.5, 1.0], &sim)?;
    let line = format!(
        "heisenberg: mixed ratio bounded across t in {{0.1, 0.2, 0.5, 1}}, empirical C = {:.4}",
        rep.summary_value("C").unwrap_or(f64::NAN)
    );
    c.audit("c11_mixed.csv", &rep, &[Verdict::Pass], line);
    Ok(())
}
