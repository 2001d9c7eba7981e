//! Horizontal Brownian motion and the Monte Carlo audits built on it.
//!
//! The diffusion is generated by `Δ_H` itself (not `½Δ_H`): every step draws
//! `η ~ N(0, 2 dt I)` over the orthonormal horizontal frame and moves by
//! `x <- x exp(Σ η_i X_i + dt·drift)` with `drift = -Σ ∇_{X_i} X_i`.
//!
//! Path `i` of a run draws from ChaCha stream `i` of the run seed, so results
//! do not depend on scheduling. Paths run on the global rayon pool and are
//! collected in stream order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::norm;
use crate::connection::{gb_total_bound, k_lower_bound};
use crate::error::{Error, Result};
use crate::geodesy::{Geometry, MinimalCertificate, ShootingConfig, TransportKind};
use crate::group::GroupPoint;
use crate::model::{canonical_variation, FoliatedModel};
use crate::report::{AuditReport, AuditRow, Verdict};

/// Streams at and above this offset carry auxiliary noise (the comparison
/// diffusion of path `i` uses `AUX_STREAM + i`).
pub const AUX_STREAM: u64 = 1 << 40;

/// Multiplicative slack of every Monte Carlo assertion.
pub const MC_TOL: f64 = 0.02;

/// Coupled paths closer than this are merged.
pub const MEET_DISTANCE: f64 = 1e-4;

/// Largest dropped fraction for which a coupling run stays certified.
pub const MAX_DROPPED_FRACTION: f64 = 0.05;

/// Monitoring points per path for exit tails when distances need shooting.
pub const EXIT_MONITOR_POINTS: usize = 50;

const RADIAL_TIMES: [f64; 3] = [0.25, 0.5, 1.0];
const RADIAL_QUANTILES: [f64; 3] = [0.5, 0.9, 0.99];

/// `K` above this counts as positive.
const K_ZERO_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimConfig {
    pub dt: f64,
    pub t_end: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// Steps between refreshes of the coupling transport map.
    pub coupling_refresh: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_end: 1.0,
            n_paths: 10_000,
            seed: 42,
            coupling_refresh: 1,
        }
    }
}

impl SimConfig {
    pub fn new(dt: f64, t_end: f64, n_paths: usize, seed: u64) -> Result<Self> {
        let cfg = Self {
            dt,
            t_end,
            n_paths,
            seed,
            coupling_refresh: 1,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidConfig(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= self.dt) || !self.t_end.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "t_end = {} must be finite and at least dt = {}",
                self.t_end, self.dt
            )));
        }
        if self.n_paths == 0 {
            return Err(Error::InvalidConfig("n_paths must be at least 1".into()));
        }
        if self.coupling_refresh == 0 {
            return Err(Error::InvalidConfig("coupling_refresh must be at least 1".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        self.steps_to(self.t_end)
    }

    fn steps_to(&self, t: f64) -> usize {
        ((t / self.dt).round() as usize).max(1)
    }

    /// Grid times of `times` within `(0, t_end]` as `(t, step)`.
    fn marks(&self, times: &[f64]) -> Vec<(f64, usize)> {
        let mut out: Vec<(f64, usize)> = times
            .iter()
            .filter(|&&t| t > 0.0 && t <= self.t_end * (1.0 + 1e-12))
            .map(|&t| (t, self.steps_to(t)))
            .collect();
        if out.is_empty() {
            out.push((self.t_end, self.steps()));
        }
        out
    }
}

/// One simulated path on the grid `t_k = k dt`.
#[derive(Debug, Clone, Serialize)]
pub struct PathRecord {
    pub times: Vec<f64>,
    pub points: Vec<GroupPoint>,
    /// Horizontal increments `η` of each step.
    pub noise: Vec<Vec<f64>>,
    pub stream_id: u64,
    /// Lifetime marker; these models are complete so it is always false.
    pub exploded: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SemigroupEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_paths: usize,
}

/// Lower bound for `p_{2t}(x, x)` and its ingredients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeatDiagBound {
    pub value: f64,
    pub std_error: f64,
    pub exit_probability: f64,
    pub exit_std_error: f64,
    pub ball_volume: f64,
    pub ball_volume_std_error: f64,
}

/// Independent generator for `stream` of a run seeded with `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Shooting profile for the many distance evaluations of Monte Carlo runs.
pub fn mc_shooting() -> ShootingConfig {
    ShootingConfig {
        starts: 3,
        agree: 2,
        steps: 32,
        tol: 1e-10,
        max_iter: 40,
    }
}

/// Horizontal Brownian motion of a model.
#[derive(Debug, Clone)]
pub struct HorizontalBm {
    geo: Geometry,
    /// Orthonormal horizontal frame in model coordinates.
    frame: Vec<Vec<f64>>,
    /// `-Σ ∇_{X_i} X_i` in model coordinates.
    drift: Vec<f64>,
}

/// Scratch for [`HorizontalBm::step`].
struct StepBuf {
    eta: Vec<f64>,
    omega: Vec<f64>,
    scratch: Vec<f64>,
}

impl HorizontalBm {
    pub fn new(m: &FoliatedModel) -> Result<Self> {
        let geo = Geometry::new(m)?.with_shooting(mc_shooting());
        let g = m.ortho();
        let mut drift_o = vec![0.0; m.dim()];
        let mut frame = Vec::new();
        for &a in g.horizontal_indices() {
            let e = g.basis(a);
            let nab = m.tables().adapted.apply(&e, &e);
            drift_o.iter_mut().zip(&nab).for_each(|(d, v)| *d -= v);
            frame.push(m.from_ortho_slice(&e));
        }
        Ok(Self {
            drift: m.from_ortho_slice(&drift_o),
            frame,
            geo,
        })
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geo
    }

    pub fn model(&self) -> &FoliatedModel {
        self.geo.model()
    }

    pub fn drift(&self) -> &[f64] {
        &self.drift
    }

    fn buf(&self) -> StepBuf {
        let d = self.model().dim();
        StepBuf {
            eta: vec![0.0; self.frame.len()],
            omega: vec![0.0; d],
            scratch: vec![0.0; 3 * d],
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng, dt: f64, eta: &mut [f64]) {
        let s = (2.0 * dt).sqrt();
        for e in eta.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *e = s * z;
        }
    }

    /// `x <- x exp(Σ η_i frame_i + dt·drift)`.
    fn apply(&self, x: &mut GroupPoint, eta: &[f64], frame: &[Vec<f64>], dt: f64, buf: &mut StepBuf) {
        for (k, o) in buf.omega.iter_mut().enumerate() {
            *o = dt * self.drift[k] + frame.iter().zip(eta).map(|(f, e)| e * f[k]).sum::<f64>();
        }
        self.geo.group().right_mul_exp(x, &buf.omega, &mut buf.scratch);
    }

    fn step(&self, x: &mut GroupPoint, rng: &mut ChaCha8Rng, dt: f64, buf: &mut StepBuf) {
        let mut eta = std::mem::take(&mut buf.eta);
        self.draw(rng, dt, &mut eta);
        self.apply(x, &eta, &self.frame, dt, buf);
        buf.eta = eta;
    }

    /// Full path from `p` over `[0, cfg.t_end]`.
    pub fn path(&self, p: &GroupPoint, cfg: &SimConfig, stream: u64) -> PathRecord {
        let steps = cfg.steps();
        let mut rng = stream_rng(cfg.seed, stream);
        let mut buf = self.buf();
        let mut x = p.clone();
        let mut rec = PathRecord {
            times: vec![0.0],
            points: vec![x.clone()],
            noise: Vec::with_capacity(steps),
            stream_id: stream,
            exploded: false,
        };
        for k in 0..steps {
            self.step(&mut x, &mut rng, cfg.dt, &mut buf);
            rec.noise.push(buf.eta.clone());
            rec.times.push((k + 1) as f64 * cfg.dt);
            rec.points.push(x.clone());
        }
        rec
    }

    /// Endpoint at `t` of the path from the identity on `stream`.
    pub fn increment(&self, t: f64, cfg: &SimConfig, stream: u64) -> GroupPoint {
        let mut rng = stream_rng(cfg.seed, stream);
        let mut buf = self.buf();
        let mut x = self.geo.group().identity();
        for _ in 0..cfg.steps_to(t) {
            self.step(&mut x, &mut rng, cfg.dt, &mut buf);
        }
        x
    }

    /// Endpoints at `t` of `cfg.n_paths` paths from the identity. By left
    /// invariance `x·ω` is the endpoint of the path from `x`.
    pub fn increments(&self, t: f64, cfg: &SimConfig) -> Vec<GroupPoint> {
        per_path(cfg.n_paths, |i| self.increment(t, cfg, i))
    }
}

fn per_path<T: Send>(n: usize, f: impl Fn(u64) -> T + Sync + Send) -> Vec<T> {
    (0..n as u64).into_par_iter().map(f).collect()
}

/// Outcome of a Monte Carlo distance evaluation.
#[derive(Debug, Clone)]
enum Probe {
    Certified(f64, Vec<f64>),
    /// Length of a converged connecting geodesic: an upper bound for `d`.
    Upper(f64, Vec<f64>),
    Failed,
}

impl Probe {
    fn length(&self) -> Option<f64> {
        match self {
            Probe::Certified(l, _) | Probe::Upper(l, _) => Some(*l),
            Probe::Failed => None,
        }
    }

    fn w(&self) -> Option<&[f64]> {
        match self {
            Probe::Certified(_, w) | Probe::Upper(_, w) => Some(w),
            Probe::Failed => None,
        }
    }
}

fn probe(geo: &Geometry, target: &GroupPoint, seed: Option<&[f64]>) -> Probe {
    let cfg = geo.shooting;
    let first = match seed {
        Some(w) => geo.shoot_seeded(target, &cfg, w),
        None => geo.shoot_with(target, &cfg),
    };
    let shot = match first {
        Ok(s) => s,
        Err(_) => match geo.shoot_with(target, &ShootingConfig { steps: cfg.steps, ..ShootingConfig::fast() }) {
            Ok(s) => s,
            Err(_) => return Probe::Failed,
        },
    };
    if shot.certificate == MinimalCertificate::Certified {
        Probe::Certified(shot.length, shot.w)
    } else {
        Probe::Upper(shot.length, shot.w)
    }
}

/// Continuation from a nearby solution, falling back to a seeded multi-start.
fn track(geo: &Geometry, target: &GroupPoint, w: &[f64]) -> Probe {
    if let Ok(shot) = geo.shoot_warm(target, w) {
        if shot.certificate == MinimalCertificate::Certified {
            return Probe::Certified(shot.length, shot.w);
        }
    }
    probe(geo, target, Some(w))
}

/// Mean and standard error (sample standard deviation over `√N`).
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Empirical quantile with linear interpolation; `sorted` must be ascending.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Order-statistic standard error of the `q`-quantile.
pub fn quantile_se(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len() as f64;
    let s = (q * (1.0 - q) / n).sqrt();
    0.5 * (quantile(sorted, q + s) - quantile(sorted, q - s))
}

fn check_k_nonpositive(m: &FoliatedModel) -> Result<f64> {
    let k = k_lower_bound(m);
    if k > K_ZERO_TOL {
        return Err(Error::InapplicableK(k));
    }
    Ok(k.min(0.0))
}

/// `√(n|K|) coth(√(|K|/n) r) - n/r`, the bounded part of the comparison drift.
fn coth_correction(k: f64, n: usize, r: f64) -> f64 {
    if k == 0.0 || r == 0.0 {
        return 0.0;
    }
    let nf = n as f64;
    let c = (nf * k.abs()).sqrt();
    let x = (k.abs() / nf).sqrt() * r;
    if x < 1e-3 {
        c * (x / 3.0 - x * x * x / 45.0)
    } else {
        c / x.tanh() - nf / r
    }
}

/// Comparison radius from 0: the `n/r` part is stepped exactly as `√2` times
/// a Bessel process of dimension `n + 1`, the bounded remainder by Euler.
fn comparison_radius(k: f64, n: usize, dt: f64, marks: &[(f64, usize)], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let s = (2.0 * dt).sqrt();
    let last = marks.last().map_or(0, |m| m.1);
    let mut out = Vec::with_capacity(marks.len());
    let mut next = 0;
    let mut r: f64 = 0.0;
    for step in 1..=last {
        let z0: f64 = StandardNormal.sample(rng);
        let mut acc = (r + s * z0) * (r + s * z0);
        for _ in 0..n {
            let z: f64 = StandardNormal.sample(rng);
            acc += s * s * z * z;
        }
        r = acc.sqrt();
        r = (r + dt * coth_correction(k, n, r)).max(0.0);
        while next < marks.len() && marks[next].1 == step {
            out.push(r);
            next += 1;
        }
    }
    out
}

/// Single path from `p`.
pub fn hbm_path(m: &FoliatedModel, p: &GroupPoint, cfg: &SimConfig, stream: u64) -> Result<PathRecord> {
    cfg.validate()?;
    Ok(HorizontalBm::new(m)?.path(p, cfg, stream))
}

/// Quantile domination of `d(p, ξ_t)` by the comparison diffusion.
pub fn radial_comparison_run(m: &FoliatedModel, p: &GroupPoint, cfg: &SimConfig) -> Result<AuditReport> {
    cfg.validate()?;
    let k = check_k_nonpositive(m)?;
    let bm = HorizontalBm::new(m)?;
    let geo = bm.geometry();
    let grp = geo.group();
    let n = m.n();
    let marks = cfg.marks(&RADIAL_TIMES);
    let p_inv = grp.inverse(p);
    let per: Vec<(Vec<Probe>, Vec<f64>)> = per_path(cfg.n_paths, |i| {
        let mut rng = stream_rng(cfg.seed, i);
        let mut buf = bm.buf();
        let mut x = p.clone();
        let mut probes: Vec<Probe> = Vec::with_capacity(marks.len());
        let mut next = 0;
        let last = marks.last().map_or(0, |mk| mk.1);
        for step in 1..=last {
            bm.step(&mut x, &mut rng, cfg.dt, &mut buf);
            while next < marks.len() && marks[next].1 == step {
                let target = grp.mul(&p_inv, &x);
                let seed = probes.iter().rev().find_map(|pr| pr.w());
                probes.push(probe(geo, &target, seed));
                next += 1;
            }
        }
        let mut aux = stream_rng(cfg.seed, AUX_STREAM + i);
        (probes, comparison_radius(k, n, cfg.dt, &marks, &mut aux))
    });
    let mut report = AuditReport::new(format!("radial_comparison/{}", m.name()));
    report.summary.insert("K".into(), k);
    report.summary.insert("n".into(), n as f64);
    let mut upper_only = 0usize;
    for (j, &(t, _)) in marks.iter().enumerate() {
        let mut r: Vec<f64> = Vec::with_capacity(per.len());
        for (probes, _) in &per {
            match &probes[j] {
                Probe::Certified(l, _) => r.push(*l),
                Probe::Upper(l, _) => {
                    upper_only += 1;
                    r.push(*l);
                }
                Probe::Failed => report.skipped += 1,
            }
        }
        let mut rt: Vec<f64> = per.iter().map(|(_, c)| c[j]).collect();
        r.sort_by(f64::total_cmp);
        rt.sort_by(f64::total_cmp);
        for (qi, &q) in RADIAL_QUANTILES.iter().enumerate() {
            let se = quantile_se(&r, q).hypot(quantile_se(&rt, q));
            report.rows.push(
                AuditRow::new(format!("q{q}"), quantile(&r, q), quantile(&rt, q), 3.0 * se)
                    .at_t(t)
                    .direction(qi)
                    .with_error(se),
            );
        }
        report.summary.insert(format!("mean_r_t{t}"), mean_se(&r).0);
    }
    report.summary.insert("upper_bound_distances".into(), upper_only as f64);
    report.notes.push(
        "distribution-wise domination: the comparison diffusion is driven by independent noise".into(),
    );
    if upper_only > 0 {
        report.notes.push(
            "uncertified distances enter as lengths of converged connecting geodesics (upper bounds)".into(),
        );
    }
    Ok(report.finalize())
}

/// Running maxima of `d(p, ξ_s)` over `[0, t]`, one per path (`None` if no
/// monitoring point could be evaluated).
fn running_maxima(bm: &HorizontalBm, p: &GroupPoint, t: f64, cfg: &SimConfig) -> (Vec<Option<f64>>, usize) {
    let geo = bm.geometry();
    let grp = geo.group();
    let steps = cfg.steps_to(t);
    let exact = bm.model().ortho().is_abelian();
    let stride = if exact { 1 } else { (steps / EXIT_MONITOR_POINTS).max(1) };
    let p_inv = grp.inverse(p);
    let per: Vec<(Option<f64>, usize)> = per_path(cfg.n_paths, |i| {
        let mut rng = stream_rng(cfg.seed, i);
        let mut buf = bm.buf();
        let mut x = p.clone();
        let mut max: Option<f64> = None;
        let mut warm: Option<Vec<f64>> = None;
        let mut failed = 0usize;
        for step in 1..=steps {
            bm.step(&mut x, &mut rng, cfg.dt, &mut buf);
            if step % stride != 0 && step != steps {
                continue;
            }
            let target = grp.mul(&p_inv, &x);
            let pr = match &warm {
                Some(w) => track(geo, &target, w),
                None => probe(geo, &target, None),
            };
            match pr.length() {
                Some(l) => {
                    max = Some(max.map_or(l, |v: f64| v.max(l)));
                    warm = pr.w().map(<[f64]>::to_vec);
                }
                None => failed += 1,
            }
        }
        (max, failed)
    });
    let failed = per.iter().map(|x| x.1).sum();
    (per.into_iter().map(|x| x.0).collect(), failed)
}

/// Estimates `P(sup_{s ≤ t} d(p, ξ_s) ≥ r)` by the running maximum and fits
/// `log P` against `r²`. Passes when the estimates do not increase in `r`
/// and the fitted slope sits three standard errors below zero.
pub fn exit_tail(m: &FoliatedModel, p: &GroupPoint, r_grid: &[f64], t: f64, cfg: &SimConfig) -> Result<AuditReport> {
    cfg.validate()?;
    let k = check_k_nonpositive(m)?;
    let bm = HorizontalBm::new(m)?;
    let (maxima, failed) = running_maxima(&bm, p, t, cfg);
    let seen: Vec<f64> = maxima.iter().flatten().copied().collect();
    let n = seen.len() as f64;
    let mut report = AuditReport::new(format!("exit_tail/{}", m.name()));
    report.skipped = maxima.len() - seen.len();
    report.summary.insert("K".into(), k);
    report.summary.insert("failed_monitor_points".into(), failed as f64);
    let mut prev = 1.0;
    let mut fit: Vec<(f64, f64, f64)> = Vec::new();
    for (j, &r) in r_grid.iter().enumerate() {
        let hits = seen.iter().filter(|&&d| d >= r).count();
        let pr = hits as f64 / n;
        let se = (pr * (1.0 - pr) / n).sqrt();
        report.rows.push(
            AuditRow::new("tail", pr, prev, 0.0)
                .at_r(r)
                .at_t(t)
                .direction(j)
                .with_error(se),
        );
        prev = pr;
        if hits >= 5 && pr < 1.0 {
            // delta-method variance of log P
            fit.push((r * r, pr.ln(), n * pr / (1.0 - pr)));
        }
    }
    if fit.len() < 2 {
        report.notes.push("fewer than two tail rows with hits; slope not fitted".into());
        let mut report = report.finalize();
        if report.verdict == Verdict::Pass {
            report.verdict = Verdict::Uncertified;
        }
        return Ok(report);
    }
    let (slope, slope_se) = weighted_slope(&fit);
    report.summary.insert("slope".into(), slope);
    report.summary.insert("slope_se".into(), slope_se);
    report.summary.insert("c".into(), -slope);
    report
        .rows
        .push(AuditRow::new("slope", slope, -3.0 * slope_se, 0.0).at_t(t).with_error(slope_se));
    Ok(report.finalize())
}

/// Weighted least-squares slope of `y` on `x` with its standard error, for
/// points `(x, y, weight)`.
fn weighted_slope(pts: &[(f64, f64, f64)]) -> (f64, f64) {
    let sw: f64 = pts.iter().map(|p| p.2).sum();
    let mx = pts.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
    let my = pts.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
    let sxx: f64 = pts.iter().map(|p| p.2 * (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| p.2 * (p.0 - mx) * (p.1 - my)).sum();
    (sxy / sxx, (1.0 / sxx).sqrt())
}

/// Monte Carlo volume of `B(e, r)` with its standard error.
pub fn ball_volume(m: &FoliatedModel, r: f64, samples: usize, seed: u64) -> Result<(f64, f64)> {
    let geo = Geometry::new(m)?.with_shooting(mc_shooting());
    let grp = geo.group();
    let density = m.metric().determinant().sqrt();
    let inside = |y: &GroupPoint| -> bool {
        match probe(&geo, y, None) {
            Probe::Certified(l, _) => l <= r,
            // an upper bound below r still proves membership
            Probe::Upper(l, _) => l <= r,
            Probe::Failed => false,
        }
    };
    let (total, hits) = if grp.is_compact() {
        // SU(2) with e_a -> (c/2) q_a is the 3-sphere of radius 2/c.
        let c = su2_scale_of(&geo);
        let total = 16.0 * std::f64::consts::PI.powi(2) / c.powi(3) * density;
        let hits: Vec<bool> = per_path(samples, |i| {
            let mut rng = stream_rng(seed, i);
            inside(&crate::comparison::haar_quaternion(&mut rng))
        });
        (total, hits)
    } else {
        // The ball is the image of the velocity ball under the exponential
        // map; its coordinate extent bounds the sampling box.
        let d = m.dim();
        let id = grp.identity();
        let mut half = vec![0.0f64; d];
        let mut rng = stream_rng(seed, AUX_STREAM);
        for _ in 0..4000 {
            let mut w: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
            let s = r / norm(&w);
            w.iter_mut().for_each(|c| *c *= s);
            for (h, c) in half.iter_mut().zip(geo.flow(&id, &w, 64).coords()) {
                *h = h.max(c.abs());
            }
        }
        half.iter_mut().for_each(|h| *h = 1.25 * *h + 1e-9);
        let boxvol: f64 = half.iter().map(|h| 2.0 * h).product();
        let hits: Vec<bool> = per_path(samples, |i| {
            let mut rng = stream_rng(seed, i);
            let c: Vec<f64> = half
                .iter()
                .map(|h| {
                    let u: f64 = rand::Rng::random(&mut rng);
                    (2.0 * u - 1.0) * h
                })
                .collect();
            inside(&GroupPoint::Exp(c))
        });
        (boxvol * density, hits)
    };
    let f = hits.iter().filter(|&&b| b).count() as f64 / samples as f64;
    Ok((total * f, total * (f * (1.0 - f) / samples as f64).sqrt()))
}

fn su2_scale_of(geo: &Geometry) -> f64 {
    // exp(t e_1) returns to the identity at t = 4π/c
    let q = geo.group().exp(&[1.0, 0.0, 0.0]).coords();
    2.0 * q[1].atan2(q[0])
}

/// `(1 - P(exit before t)) / μ(B(x, r))`, a lower bound for `p_{2t}(x, x)`.
pub fn heat_diag_lower(m: &FoliatedModel, x: &GroupPoint, t: f64, r: f64, cfg: &SimConfig) -> Result<HeatDiagBound> {
    cfg.validate()?;
    check_k_nonpositive(m)?;
    let bm = HorizontalBm::new(m)?;
    let (maxima, _) = running_maxima(&bm, x, t, cfg);
    let seen: Vec<f64> = maxima.iter().flatten().copied().collect();
    let n = seen.len() as f64;
    let pe = seen.iter().filter(|&&d| d >= r).count() as f64 / n;
    let pe_se = (pe * (1.0 - pe) / n).sqrt();
    let (vol, vol_se) = ball_volume(m, r, cfg.n_paths, cfg.seed ^ 0x5eed_ba11)?;
    let stay = (1.0 - pe).max(0.0);
    let value = if vol > 0.0 { stay / vol } else { 0.0 };
    let std_error = if stay > 0.0 && vol > 0.0 {
        value * ((pe_se / stay).powi(2) + (vol_se / vol).powi(2)).sqrt()
    } else {
        0.0
    };
    Ok(HeatDiagBound {
        value,
        std_error,
        exit_probability: pe,
        exit_std_error: pe_se,
        ball_volume: vol,
        ball_volume_std_error: vol_se,
    })
}

/// State of one coupled pair.
struct Pair {
    x: GroupPoint,
    y: GroupPoint,
    w: Vec<f64>,
    /// Transported horizontal frame at `y`, model coordinates.
    frame: Vec<Vec<f64>>,
    met: bool,
}

fn refresh_pair(bm: &HorizontalBm, pair: &mut Pair) -> Option<f64> {
    let geo = bm.geometry();
    let grp = geo.group();
    let m = bm.model();
    let target = grp.between(&pair.x, &pair.y);
    let Probe::Certified(len, w) = track(geo, &target, &pair.w) else {
        return None;
    };
    if len < MEET_DISTANCE {
        pair.met = true;
        pair.y = pair.x.clone();
        return Some(0.0);
    }
    let u: Vec<f64> = w.iter().map(|c| c / len).collect();
    let g = m.ortho();
    let mut frame = Vec::with_capacity(g.n_horizontal());
    for &a in g.horizontal_indices() {
        let v = geo
            .transport_ortho(&u, len, 16, &g.basis(a), TransportKind::Skewed)
            .ok()?;
        frame.push(m.from_ortho_slice(&v));
    }
    pair.frame = frame;
    pair.w = w;
    Some(len)
}

/// Coupling by skewed parallel transport started at `(p, q)`.
///
/// Both paths use the same Gaussian increments; the second one moves along
/// the transported image of the horizontal frame, recomputed every
/// `cfg.coupling_refresh` steps from the connecting geodesic. Pairs whose
/// distance can no longer be certified are dropped.
pub fn parallel_coupling_run(m: &FoliatedModel, p: &GroupPoint, q: &GroupPoint, cfg: &SimConfig) -> Result<AuditReport> {
    cfg.validate()?;
    let bm = HorizontalBm::new(m)?;
    let geo = bm.geometry();
    let full = Geometry::new(m)?;
    let start = full.shoot(&geo.group().between(p, q))?;
    if start.cut != crate::geodesy::CutCertificate::InC {
        return Err(Error::UncertifiedDistance);
    }
    let d0 = start.length;
    let k = k_lower_bound(m);
    let marks = cfg.marks(&RADIAL_TIMES);
    let last = marks.last().map_or(0, |mk| mk.1);
    let per: Vec<Option<Vec<f64>>> = per_path(cfg.n_paths, |i| {
        let mut rng = stream_rng(cfg.seed, i);
        let mut buf = bm.buf();
        let mut pair = Pair {
            x: p.clone(),
            y: q.clone(),
            w: start.w.clone(),
            frame: Vec::new(),
            met: false,
        };
        refresh_pair(&bm, &mut pair)?;
        let mut out = Vec::with_capacity(marks.len());
        let mut next = 0;
        let mut eta = vec![0.0; m.n()];
        for step in 1..=last {
            if !pair.met && step > 1 && (step - 1) % cfg.coupling_refresh == 0 {
                refresh_pair(&bm, &mut pair)?;
            }
            bm.draw(&mut rng, cfg.dt, &mut eta);
            bm.apply(&mut pair.x, &eta, &bm.frame, cfg.dt, &mut buf);
            if pair.met {
                pair.y = pair.x.clone();
            } else {
                let frame = std::mem::take(&mut pair.frame);
                bm.apply(&mut pair.y, &eta, &frame, cfg.dt, &mut buf);
                pair.frame = frame;
            }
            while next < marks.len() && marks[next].1 == step {
                let d = if pair.met { 0.0 } else { refresh_pair(&bm, &mut pair)? };
                out.push(d);
                next += 1;
            }
        }
        Some(out)
    });
    let kept: Vec<&Vec<f64>> = per.iter().flatten().collect();
    let dropped = per.len() - kept.len();
    let mut report = AuditReport::new(format!("coupling/{}", m.name()));
    report.skipped = dropped;
    let dropped_fraction = dropped as f64 / per.len() as f64;
    report.summary.insert("K".into(), k);
    report.summary.insert("d0".into(), d0);
    report.summary.insert("dropped_fraction".into(), dropped_fraction);
    let mut max_change: f64 = 0.0;
    for (j, &(t, _)) in marks.iter().enumerate() {
        let ds: Vec<f64> = kept.iter().map(|v| v[j]).collect();
        max_change = ds.iter().fold(max_change, |a, d| a.max((d - d0).abs()));
        let (mean, se) = mean_se(&ds);
        let bound = (-k * t).exp() * d0;
        report.rows.push(
            AuditRow::new("mean_distance", mean, bound, MC_TOL * bound + 3.0 * se)
                .at_r(d0)
                .at_t(t)
                .direction(j)
                .with_error(se),
        );
        report.summary.insert(format!("mean_t{t}"), mean);
        let met = ds.iter().filter(|&&d| d == 0.0).count();
        report.summary.insert(format!("met_fraction_t{t}"), met as f64 / ds.len().max(1) as f64);
    }
    report.summary.insert("max_abs_change".into(), max_change);
    let mut report = report.finalize();
    if dropped_fraction > MAX_DROPPED_FRACTION && report.verdict == Verdict::Pass {
        report.verdict = Verdict::Uncertified;
        report.notes.push(format!("{:.1}% of pairs lost certification", 100.0 * dropped_fraction));
    }
    Ok(report)
}

/// Monte Carlo estimate of `P_t f(x)`.
pub fn semigroup_estimate(
    m: &FoliatedModel,
    f: &(dyn Fn(&GroupPoint) -> f64 + Sync),
    x: &GroupPoint,
    t: f64,
    cfg: &SimConfig,
) -> Result<SemigroupEstimate> {
    cfg.validate()?;
    let bm = HorizontalBm::new(m)?;
    let grp = bm.geometry().group();
    let vals = per_path(cfg.n_paths, |i| f(&grp.mul(x, &bm.increment(t, cfg, i))));
    let (value, std_error) = mean_se(&vals);
    Ok(SemigroupEstimate {
        value,
        std_error,
        n_paths: cfg.n_paths,
    })
}

type ValueFn<'a> = Box<dyn Fn(&GroupPoint) -> f64 + Send + Sync + 'a>;
type GradientFn<'a> = Box<dyn Fn(&GroupPoint) -> Vec<f64> + Send + Sync + 'a>;

/// Test function with its gradient in the orthonormal left-invariant frame,
/// `(X_a f)(x)` for every frame index `a`.
pub struct TestFunction<'a> {
    pub name: String,
    value: ValueFn<'a>,
    gradient: GradientFn<'a>,
}

impl<'a> TestFunction<'a> {
    pub fn new(
        name: impl Into<String>,
        value: impl Fn(&GroupPoint) -> f64 + Send + Sync + 'a,
        gradient: impl Fn(&GroupPoint) -> Vec<f64> + Send + Sync + 'a,
    ) -> Self {
        Self {
            name: name.into(),
            value: Box::new(value),
            gradient: Box::new(gradient),
        }
    }

    /// Gradient by central differences along `x exp(±h X_a)`.
    pub fn with_fd_gradient(
        m: &FoliatedModel,
        name: impl Into<String>,
        value: impl Fn(&GroupPoint) -> f64 + Send + Sync + Clone + 'a,
    ) -> Result<Self> {
        let grp = crate::group::Group::new(m)?;
        let m = m.clone();
        let v2 = value.clone();
        let h = 1e-5;
        Ok(Self::new(name, value, move |x| {
            (0..m.dim())
                .map(|a| {
                    let e = m.from_ortho_slice(&m.ortho().basis(a));
                    let step = |s: f64| grp.mul(x, &grp.exp(&e.iter().map(|c| s * c).collect::<Vec<_>>()));
                    (v2(&step(h)) - v2(&step(-h))) / (2.0 * h)
                })
                .collect()
        }))
    }

    pub fn value(&self, x: &GroupPoint) -> f64 {
        (self.value)(x)
    }

    pub fn gradient(&self, x: &GroupPoint) -> Vec<f64> {
        (self.gradient)(x)
    }
}

/// `x -> min(d(e, x), cap)`, Lipschitz with constant 1. Evaluations that do
/// not converge return NaN and are dropped by the audits.
pub fn clamped_distance(m: &FoliatedModel, cap: f64) -> Result<impl Fn(&GroupPoint) -> f64 + Send + Sync> {
    let geo = Geometry::new(m)?.with_shooting(mc_shooting());
    Ok(move |x: &GroupPoint| probe(&geo, x, None).length().map_or(f64::NAN, |l| l.min(cap)))
}

/// `|P_t f(q) - P_t f(p)| / d(p, q) <= e^{-Kt} Lip(f)` over `pairs`, with
/// both semigroups driven by common random numbers.
pub fn lipschitz_audit(
    m: &FoliatedModel,
    f: &(dyn Fn(&GroupPoint) -> f64 + Sync),
    lip: f64,
    pairs: &[(GroupPoint, GroupPoint)],
    t: f64,
    cfg: &SimConfig,
) -> Result<AuditReport> {
    cfg.validate()?;
    let bm = HorizontalBm::new(m)?;
    let full = Geometry::new(m)?;
    let grp = full.group();
    let k = k_lower_bound(m);
    let bound = (-k * t).exp() * lip;
    let omegas = bm.increments(t, cfg);
    let mut report = AuditReport::new(format!("lipschitz/{}", m.name()));
    report.summary.insert("K".into(), k);
    report.summary.insert("lip_f".into(), lip);
    let mut max_ratio: f64 = 0.0;
    for (j, (p, q)) in pairs.iter().enumerate() {
        let d = match full.shoot(&grp.between(p, q)) {
            Ok(s) if s.certificate == MinimalCertificate::Certified && s.length > 0.0 => s.length,
            _ => {
                report.skipped += 1;
                continue;
            }
        };
        let diffs: Vec<f64> = omegas
            .par_iter()
            .map(|w| f(&grp.mul(q, w)) - f(&grp.mul(p, w)))
            .collect::<Vec<_>>()
            .into_iter()
            .filter(|v| v.is_finite())
            .collect();
        let (mean, se) = mean_se(&diffs);
        let ratio = mean.abs() / d;
        max_ratio = max_ratio.max(ratio);
        report.rows.push(
            AuditRow::new("ratio", ratio, bound, MC_TOL * bound + 3.0 * se / d)
                .at_r(d)
                .at_t(t)
                .direction(j)
                .with_error(se / d),
        );
    }
    report.summary.insert("max_ratio".into(), max_ratio);
    Ok(report.finalize())
}

/// Frame components of `∇P_t f(x)` by central differences with common
/// random numbers, with standard errors, and per-path `∇f` at the endpoints.
struct GradientSample {
    mean: Vec<f64>,
    se: Vec<f64>,
    /// `∇f(x ω_k)` in frame components.
    endpoint_gradients: Vec<Vec<f64>>,
}

fn gradient_sample(bm: &HorizontalBm, f: &TestFunction, x: &GroupPoint, t: f64, cfg: &SimConfig) -> GradientSample {
    let m = bm.model();
    let grp = bm.geometry().group();
    let h = 1e-3;
    let d = m.dim();
    let shifted: Vec<(GroupPoint, GroupPoint)> = (0..d)
        .map(|a| {
            let e = m.from_ortho_slice(&m.ortho().basis(a));
            let at = |s: f64| grp.mul(x, &grp.exp(&e.iter().map(|c| s * c).collect::<Vec<_>>()));
            (at(h), at(-h))
        })
        .collect();
    let per: Vec<(Vec<f64>, Vec<f64>)> = per_path(cfg.n_paths, |i| {
        let w = bm.increment(t, cfg, i);
        let fd = shifted
            .iter()
            .map(|(a, b)| (f.value(&grp.mul(a, &w)) - f.value(&grp.mul(b, &w))) / (2.0 * h))
            .collect();
        (fd, f.gradient(&grp.mul(x, &w)))
    });
    let mut mean = Vec::with_capacity(d);
    let mut se = Vec::with_capacity(d);
    for a in 0..d {
        let col: Vec<f64> = per.iter().map(|p| p.0[a]).collect();
        let (mu, s) = mean_se(&col);
        mean.push(mu);
        se.push(s);
    }
    GradientSample {
        mean,
        se,
        endpoint_gradients: per.into_iter().map(|p| p.1).collect(),
    }
}

fn part_norm(g: &[f64], idx: &[usize]) -> f64 {
    idx.iter().map(|&a| g[a] * g[a]).sum::<f64>().sqrt()
}

/// Norm of the `idx` components of `g` with a delta-method standard error.
fn norm_with_se(g: &[f64], se: &[f64], idx: &[usize]) -> (f64, f64) {
    let n = part_norm(g, idx);
    let var = if n > 0.0 {
        idx.iter().map(|&a| (g[a] / n * se[a]).powi(2)).sum::<f64>()
    } else {
        idx.iter().map(|&a| se[a] * se[a]).sum::<f64>()
    };
    (n, var.sqrt())
}

/// `|∇P_t f|(x) <= e^{-Kt} P_t|∇f|(x)` with `K` the bound for `𝔯 - ¼(J,J)`.
pub fn gradient_bound_audit(m: &FoliatedModel, f: &TestFunction, x: &GroupPoint, t: f64, cfg: &SimConfig) -> Result<AuditReport> {
    cfg.validate()?;
    let k = gb_total_bound(m)?;
    let bm = HorizontalBm::new(m)?;
    let gs = gradient_sample(&bm, f, x, t, cfg);
    let all: Vec<usize> = (0..m.dim()).collect();
    let (lhs, lhs_se) = norm_with_se(&gs.mean, &gs.se, &all);
    let norms: Vec<f64> = gs.endpoint_gradients.iter().map(|g| norm(g)).collect();
    let (rhs, rhs_se) = mean_se(&norms);
    let factor = (-k * t).exp();
    let bound = factor * rhs;
    let se = lhs_se.hypot(factor * rhs_se);
    let mut report = AuditReport::new(format!("gradient_bound/{}", m.name()));
    report.summary.insert("K".into(), k);
    report.summary.insert("grad_P_t_f".into(), lhs);
    report.summary.insert("P_t_grad_f".into(), rhs);
    report
        .rows
        .push(AuditRow::new(f.name.clone(), lhs, bound, MC_TOL * bound + 3.0 * se).at_t(t).with_error(se));
    Ok(report.finalize())
}

/// Mixed-gradient ratio `(|∇_H P_t f| + t|∇_V P_t f|) / (P_t|∇_H f| + t P_t|∇_V f|)`
/// over `t_grid` on a step-2 Carnot model.
///
/// Each row is held against the constant obtained from the gradient bound
/// for the canonical variation `g_t`: `√2 e^{-K_t t} max(√t, 1/√t)`, where
/// `K_t` bounds `𝔯_t - ¼(J,J)_t`. The largest observed ratio is reported as
/// the empirical constant `C`.
pub fn mixed_gradient_audit(
    m: &FoliatedModel,
    f: &TestFunction,
    x: &GroupPoint,
    t_grid: &[f64],
    cfg: &SimConfig,
) -> Result<AuditReport> {
    cfg.validate()?;
    if m.step() != Some(2) {
        return Err(Error::InvalidConfig(format!(
            "mixed gradient mode needs a step-2 Carnot model, '{}' has step {:?}",
            m.name(),
            m.step()
        )));
    }
    gb_total_bound(m)?;
    let bm = HorizontalBm::new(m)?;
    let g = m.ortho();
    let hs = g.horizontal_indices();
    let vs = g.vertical_indices();
    let mut report = AuditReport::new(format!("mixed_gradient/{}", m.name()));
    let mut c_max: f64 = 0.0;
    for (j, &t) in t_grid.iter().enumerate() {
        let gs = gradient_sample(&bm, f, x, t, cfg);
        let (ah, ah_se) = norm_with_se(&gs.mean, &gs.se, hs);
        let (av, av_se) = norm_with_se(&gs.mean, &gs.se, vs);
        let num = ah + t * av;
        let num_se = ah_se.hypot(t * av_se);
        let den_paths: Vec<f64> = gs
            .endpoint_gradients
            .iter()
            .map(|gr| part_norm(gr, hs) + t * part_norm(gr, vs))
            .collect();
        let (den, den_se) = mean_se(&den_paths);
        let ratio = if den > 0.0 { num / den } else { 0.0 };
        let ratio_se = if num > 0.0 && den > 0.0 {
            ratio * ((num_se / num).powi(2) + (den_se / den).powi(2)).sqrt()
        } else {
            0.0
        };
        let kt = gb_total_bound(&canonical_variation(m, t)?)?;
        let cap = 2f64.sqrt() * (-kt * t).exp() * t.sqrt().max(1.0 / t.sqrt());
        c_max = c_max.max(ratio);
        report.summary.insert(format!("ratio_t{t}"), ratio);
        report.summary.insert(format!("cap_t{t}"), cap);
        report.rows.push(
            AuditRow::new("ratio", ratio, cap, MC_TOL * cap + 3.0 * ratio_se)
                .at_t(t)
                .direction(j)
                .with_error(ratio_se),
        );
    }
    report.summary.insert("C".into(), c_max);
    Ok(report.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;

    #[test]
    fn quantiles_interpolate() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&xs, 0.5), 3.0);
        assert_eq!(quantile(&xs, 0.0), 1.0);
        assert_eq!(quantile(&xs, 1.0), 5.0);
        assert!((quantile(&xs, 0.125) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn coth_correction_is_continuous_at_small_radius() {
        let a = coth_correction(-1.0, 2, 0.999e-3 * 2f64.sqrt());
        let b = coth_correction(-1.0, 2, 1.001e-3 * 2f64.sqrt());
        assert!((a - b).abs() < 1e-6, "{a} {b}");
        assert_eq!(coth_correction(0.0, 3, 1.0), 0.0);
    }

    #[test]
    fn paths_are_reproducible() {
        let m = bundled::heisenberg();
        let cfg = SimConfig::new(1e-2, 0.2, 1, 7).unwrap();
        let id = GroupPoint::Exp(vec![0.0; 3]);
        let a = hbm_path(&m, &id, &cfg, 3).unwrap();
        let b = hbm_path(&m, &id, &cfg, 3).unwrap();
        assert_eq!(a.points, b.points);
        let c = hbm_path(&m, &id, &cfg, 4).unwrap();
        assert_ne!(a.points, c.points);
        assert_eq!(a.points.len(), 21);
        assert!(!a.exploded);
    }

    #[test]
    fn config_validation() {
        assert!(SimConfig::new(0.0, 1.0, 10, 1).is_err());
        assert!(SimConfig::new(0.1, 0.05, 10, 1).is_err());
        assert!(SimConfig::new(0.1, 1.0, 0, 1).is_err());
        assert_eq!(SimConfig::new(1e-3, 1.0, 1, 1).unwrap().steps(), 1000);
    }
}
