//! Geodesics, Riemannian distance, parallel transports and index forms.
//!
//! Velocities are left-trivialised and expressed in the orthonormal frame of
//! the model, where the geodesic equation reduces to the Euler-Arnold flow
//! `v' = ad*_v v`. The curve is rebuilt on the group with a fourth-order
//! Magnus step, so points never leave the group.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::algebra::{axpy, dot, norm, sub, OrthoAlgebra};
use crate::connection::{ConnectionKind, ConnectionTables};
use crate::error::{Error, Result};
use crate::group::{Group, GroupPoint};
use crate::model::{AlgebraVector, FoliatedModel};

/// Largest step used by [`exp_map`]; keeps the energy drift below `1e-9`
/// over unit-speed runs of length 5.
pub const EXP_MAP_MAX_STEP: f64 = 2e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MinimalCertificate {
    Certified,
    Uncertified,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportKind {
    /// `∇_γ' X + ½ (J_γ' X)_H = 0`, horizontal inputs only.
    Skewed,
    /// `∇°`-parallel.
    Circ,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CutCertificate {
    InC,
    Uncertain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexMode {
    Riemannian,
    Horizontal,
}

#[derive(Debug, Clone, Serialize)]
pub struct GeodesicSample {
    pub t: f64,
    /// Left-trivialised velocity in the model basis.
    pub velocity: AlgebraVector,
    pub point: GroupPoint,
    #[serde(skip)]
    pub(crate) v_ortho: Vec<f64>,
}

impl Serialize for AlgebraVector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.coefficients().serialize(s)
    }
}

/// A unit-speed geodesic sampled on a uniform grid.
#[derive(Debug, Clone, Serialize)]
pub struct GeodesicRecord {
    pub start: GroupPoint,
    pub initial_velocity: AlgebraVector,
    pub length: f64,
    pub samples: Vec<GeodesicSample>,
    pub minimal_certificate: MinimalCertificate,
}

impl GeodesicRecord {
    pub fn endpoint(&self) -> &GroupPoint {
        &self.samples.last().expect("records have samples").point
    }

    /// Number of integration steps (samples minus one).
    pub fn steps(&self) -> usize {
        self.samples.len().saturating_sub(1)
    }

    /// Largest deviation of `|v(t)|` from 1.
    pub fn energy_drift(&self) -> f64 {
        if self.length == 0.0 {
            return 0.0;
        }
        self.samples
            .iter()
            .map(|s| (norm(&s.v_ortho) - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Multi-start shooting parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShootingConfig {
    pub starts: usize,
    /// Starts that must land on the shortest solution for certification.
    pub agree: usize,
    /// Magnus steps per solve (fixed, so the endpoint map is smooth).
    pub steps: usize,
    /// Residual at which a start counts as converged.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ShootingConfig {
    fn default() -> Self {
        Self {
            starts: 20,
            agree: 2,
            steps: 128,
            tol: 1e-10,
            max_iter: 80,
        }
    }
}

impl ShootingConfig {
    /// Cheaper profile for Monte Carlo runs that need many distances.
    pub fn fast() -> Self {
        Self {
            starts: 6,
            agree: 2,
            steps: 48,
            tol: 1e-10,
            max_iter: 60,
        }
    }
}

/// Result of a shooting solve from the identity to `target`.
#[derive(Debug, Clone)]
pub struct Shot {
    /// Initial velocity over unit time, orthonormal coordinates; `|w|` is the length.
    pub w: Vec<f64>,
    pub length: f64,
    pub residual: f64,
    pub certificate: MinimalCertificate,
    pub cut: CutCertificate,
    /// Smallest singular value of the shooting Jacobian.
    pub jacobian_min_sv: f64,
    pub converged_starts: usize,
}

/// Scratch buffers for [`Geometry::advance`].
struct Stepper {
    v: Vec<f64>,
    /// `ad*_v v` at the current velocity.
    f: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
    next: Vec<f64>,
    fnext: Vec<f64>,
    nodes: [Vec<f64>; 2],
    omega: Vec<f64>,
    model_omega: Vec<f64>,
    scratch: Vec<f64>,
}

/// Model together with its group law; reused across many solves.
#[derive(Debug, Clone)]
pub struct Geometry {
    model: FoliatedModel,
    group: Group,
    pub shooting: ShootingConfig,
}

const C1: f64 = 0.5 - 0.288_675_134_594_812_9; // 1/2 - sqrt(3)/6
const C2: f64 = 0.5 + 0.288_675_134_594_812_9;
const MAGNUS: f64 = 0.144_337_567_297_406_43; // sqrt(3)/12

impl Geometry {
    pub fn new(model: &FoliatedModel) -> Result<Self> {
        Ok(Self {
            group: Group::new(model)?,
            model: model.clone(),
            shooting: ShootingConfig::default(),
        })
    }

    pub fn with_shooting(mut self, cfg: ShootingConfig) -> Self {
        self.shooting = cfg;
        self
    }

    pub fn model(&self) -> &FoliatedModel {
        &self.model
    }

    pub fn group(&self) -> &Group {
        &self.group
    }

    fn algebra(&self) -> &OrthoAlgebra {
        self.model.ortho()
    }

    fn tables(&self) -> &ConnectionTables {
        self.model.tables()
    }

    fn euler_arnold(&self, v: &[f64]) -> Vec<f64> {
        self.algebra().ad_star(v, v)
    }

    fn stepper(&self, v0: &[f64]) -> Stepper {
        let d = v0.len();
        let z = || vec![0.0; d];
        let mut st = Stepper {
            v: v0.to_vec(),
            f: z(),
            k2: z(),
            k3: z(),
            k4: z(),
            tmp: z(),
            next: z(),
            fnext: z(),
            nodes: [z(), z()],
            omega: z(),
            model_omega: z(),
            scratch: vec![0.0; 3 * d],
        };
        self.algebra().ad_star_into(&st.v, &st.v, &mut st.f);
        st
    }

    /// One Magnus step of size `h`: `x <- x exp(Omega)` and the velocity
    /// advances by RK4. Velocities at the Gauss nodes come from the cubic
    /// Hermite interpolant of the step, which keeps the scheme fourth order
    /// at four Euler-Arnold evaluations per step.
    fn advance(&self, st: &mut Stepper, x: &mut GroupPoint, h: f64) {
        let g = self.algebra();
        let d = st.v.len();
        if g.is_abelian() {
            st.omega.iter_mut().zip(&st.v).for_each(|(o, v)| *o = h * v);
        } else {
            let ea = |v: &[f64], out: &mut [f64]| g.ad_star_into(v, v, out);
            for i in 0..d {
                st.tmp[i] = st.v[i] + 0.5 * h * st.f[i];
            }
            ea(&st.tmp, &mut st.k2);
            for i in 0..d {
                st.tmp[i] = st.v[i] + 0.5 * h * st.k2[i];
            }
            ea(&st.tmp, &mut st.k3);
            for i in 0..d {
                st.tmp[i] = st.v[i] + h * st.k3[i];
            }
            ea(&st.tmp, &mut st.k4);
            for i in 0..d {
                st.next[i] = st.v[i] + h / 6.0 * (st.f[i] + 2.0 * st.k2[i] + 2.0 * st.k3[i] + st.k4[i]);
            }
            ea(&st.next, &mut st.fnext);
            for (node, th) in st.nodes.iter_mut().zip([C1, C2]) {
                let (t2, t3) = (th * th, th * th * th);
                let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
                let h10 = (t3 - 2.0 * t2 + th) * h;
                let h01 = -2.0 * t3 + 3.0 * t2;
                let h11 = (t3 - t2) * h;
                for i in 0..d {
                    node[i] = h00 * st.v[i] + h10 * st.f[i] + h01 * st.next[i] + h11 * st.fnext[i];
                }
            }
            g.bracket_into(&st.nodes[0], &st.nodes[1], &mut st.tmp);
            for i in 0..d {
                st.omega[i] = 0.5 * h * (st.nodes[0][i] + st.nodes[1][i]) + MAGNUS * h * h * st.tmp[i];
            }
        }
        let frame = self.model.frame();
        for i in 0..d {
            st.model_omega[i] = (0..d).map(|b| frame[(i, b)] * st.omega[b]).sum();
        }
        self.group.right_mul_exp(x, &st.model_omega, &mut st.scratch);
        if !g.is_abelian() {
            std::mem::swap(&mut st.v, &mut st.next);
            std::mem::swap(&mut st.f, &mut st.fnext);
        }
    }

    /// Endpoint of the geodesic from `p` with orthonormal initial velocity
    /// `w` over unit time.
    pub fn flow(&self, p: &GroupPoint, w: &[f64], steps: usize) -> GroupPoint {
        if self.group.is_abelian() || self.algebra().is_abelian() {
            return self.group.mul(p, &self.group.exp(&self.model.from_ortho_slice(w)));
        }
        let h = 1.0 / steps as f64;
        let mut st = self.stepper(w);
        let mut x = p.clone();
        for _ in 0..steps {
            self.advance(&mut st, &mut x, h);
        }
        x
    }

    /// Unit-speed record from `p` in orthonormal direction `u` (normalised
    /// here) for length `length`, using `steps` uniform steps.
    pub fn record(&self, p: &GroupPoint, u: &[f64], length: f64, steps: usize) -> Result<GeodesicRecord> {
        let nu = norm(u);
        if !(nu > 0.0) || !nu.is_finite() {
            return Err(Error::IntegrationFailure("initial velocity must be nonzero".into()));
        }
        if !(length >= 0.0) || !length.is_finite() {
            return Err(Error::IntegrationFailure(format!("invalid length {length}")));
        }
        let steps = steps.max(1);
        let unit: Vec<f64> = u.iter().map(|x| x / nu).collect();
        let h = length / steps as f64;
        if length > 0.0 && h < 1e-14 * length.max(1.0) {
            return Err(Error::IntegrationFailure("step size underflow".into()));
        }
        let mut samples = Vec::with_capacity(steps + 1);
        let mut st = self.stepper(&unit);
        let mut x = p.clone();
        samples.push(self.sample(0.0, &st.v, &x));
        for k in 0..steps {
            self.advance(&mut st, &mut x, h);
            if st.v.iter().any(|c| !c.is_finite()) {
                return Err(Error::IntegrationFailure("non-finite velocity".into()));
            }
            samples.push(self.sample((k + 1) as f64 * h, &st.v, &x));
        }
        Ok(GeodesicRecord {
            start: p.clone(),
            initial_velocity: self.model.from_ortho(&unit),
            length,
            samples,
            minimal_certificate: MinimalCertificate::Uncertified,
        })
    }

    fn sample(&self, t: f64, v: &[f64], x: &GroupPoint) -> GeodesicSample {
        GeodesicSample {
            t,
            velocity: self.model.from_ortho(v),
            point: x.clone(),
            v_ortho: v.to_vec(),
        }
    }

    /// `log(flow(e, w)^{-1} target)` in orthonormal coordinates.
    fn residual(&self, target: &GroupPoint, w: &[f64], steps: usize) -> Vec<f64> {
        let end = self.flow(&self.group.identity(), w, steps);
        let gap = self.group.between(&end, target);
        self.model.to_ortho_slice(&self.group.log(&gap))
    }

    fn jacobian(&self, target: &GroupPoint, w: &[f64], f0: &[f64], steps: usize) -> DMatrix<f64> {
        let d = w.len();
        let delta = 1e-7 * norm(w).max(1.0);
        let mut jac = DMatrix::zeros(d, d);
        for j in 0..d {
            let mut wp = w.to_vec();
            wp[j] += delta;
            let fp = self.residual(target, &wp, steps);
            for i in 0..d {
                jac[(i, j)] = (fp[i] - f0[i]) / delta;
            }
        }
        jac
    }

    /// Levenberg-Marquardt from one start. Returns `(w, residual)`.
    fn solve_from(&self, target: &GroupPoint, w0: &[f64], cfg: &ShootingConfig) -> Option<(Vec<f64>, f64)> {
        // minimal solutions satisfy |w| <= |log target|; runaway starts are cut
        let cap = 2.0 * norm(&self.model.to_ortho_slice(&self.group.log(target))) + 1.0;
        let mut w = w0.to_vec();
        let mut f = self.residual(target, &w, cfg.steps);
        let mut nf = norm(&f);
        let mut lambda = 1e-3;
        for _ in 0..cfg.max_iter {
            if !nf.is_finite() {
                return None;
            }
            if nf < 1e-13 {
                break;
            }
            let jac = self.jacobian(target, &w, &f, cfg.steps);
            let jt = jac.transpose();
            let jtj = &jt * &jac;
            let g = &jt * DVector::from_column_slice(&f);
            let mut improved = false;
            while lambda < 1e10 {
                let mut a = jtj.clone();
                for i in 0..a.nrows() {
                    a[(i, i)] += lambda * (jtj[(i, i)] + 1e-12);
                }
                let Some(step) = a.lu().solve(&(-&g)) else {
                    lambda *= 10.0;
                    continue;
                };
                let trial: Vec<f64> = w.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
                let ft = self.residual(target, &trial, cfg.steps);
                let nt = norm(&ft);
                if nt < nf {
                    let small = step.norm() < 1e-15 * norm(&w).max(1.0);
                    w = trial;
                    f = ft;
                    nf = nt;
                    lambda = (lambda * 0.1).max(1e-12);
                    improved = !small;
                    break;
                }
                lambda *= 10.0;
            }
            if !improved {
                break;
            }
            if norm(&w) > cap {
                return None;
            }
        }
        (nf <= cfg.tol).then_some((w, nf))
    }

    fn start_points(&self, w0: &[f64], count: usize) -> Vec<Vec<f64>> {
        let d = w0.len();
        let scale = norm(w0).max(1e-3);
        let mut out = vec![w0.to_vec()];
        for j in 1..count {
            let u = quasi_random_direction(d, j);
            let w = if j % 2 == 1 {
                w0.iter().zip(&u).map(|(a, b)| a + 0.6 * scale * b).collect()
            } else {
                let s = if j % 4 == 0 { 0.8 } else { 1.3 };
                u.iter().map(|b| s * scale * b).collect()
            };
            out.push(w);
        }
        out
    }

    /// Shortest geodesic from the identity to `target`.
    pub fn shoot(&self, target: &GroupPoint) -> Result<Shot> {
        self.shoot_with(target, &self.shooting)
    }

    pub fn shoot_with(&self, target: &GroupPoint, cfg: &ShootingConfig) -> Result<Shot> {
        let w0 = self.model.to_ortho_slice(&self.group.log(target));
        if norm(&w0) == 0.0 && self.group.coordinate_gap(target, &self.group.identity()) == 0.0 {
            return Ok(self.trivial_shot());
        }
        if self.algebra().is_abelian() {
            return Ok(self.exact_shot(w0));
        }
        let mut solutions: Vec<(Vec<f64>, f64)> = Vec::new();
        for start in self.start_points(&w0, cfg.starts) {
            if let Some(sol) = self.solve_from(target, &start, cfg) {
                solutions.push(sol);
            }
        }
        self.classify(target, solutions, cfg)
    }

    /// Multi-start solve with `seed` as an extra first start.
    pub fn shoot_seeded(&self, target: &GroupPoint, cfg: &ShootingConfig, seed: &[f64]) -> Result<Shot> {
        let w0 = self.model.to_ortho_slice(&self.group.log(target));
        if self.algebra().is_abelian() {
            return Ok(self.exact_shot(w0));
        }
        let mut solutions: Vec<(Vec<f64>, f64)> = Vec::new();
        let starts = std::iter::once(seed.to_vec()).chain(self.start_points(&w0, cfg.starts));
        for start in starts {
            if let Some(sol) = self.solve_from(target, &start, cfg) {
                solutions.push(sol);
            }
        }
        self.classify(target, solutions, cfg)
    }

    /// Single warm-started solve continuing a nearby certified solution.
    pub fn shoot_warm(&self, target: &GroupPoint, guess: &[f64]) -> Result<Shot> {
        let cfg = self.shooting;
        if self.algebra().is_abelian() {
            return Ok(self.exact_shot(self.model.to_ortho_slice(&self.group.log(target))));
        }
        let sols: Vec<_> = self.solve_from(target, guess, &cfg).into_iter().collect();
        let mut shot = self.classify(target, sols, &ShootingConfig { agree: 1, ..cfg })?;
        if shot.certificate == MinimalCertificate::Certified && shot.cut == CutCertificate::Uncertain {
            shot.certificate = MinimalCertificate::Uncertified;
        }
        Ok(shot)
    }

    fn trivial_shot(&self) -> Shot {
        Shot {
            w: vec![0.0; self.model.dim()],
            length: 0.0,
            residual: 0.0,
            certificate: MinimalCertificate::Certified,
            cut: CutCertificate::Uncertain,
            jacobian_min_sv: 0.0,
            converged_starts: 1,
        }
    }

    fn exact_shot(&self, w: Vec<f64>) -> Shot {
        Shot {
            length: norm(&w),
            w,
            residual: 0.0,
            certificate: MinimalCertificate::Certified,
            cut: CutCertificate::InC,
            jacobian_min_sv: 1.0,
            converged_starts: 1,
        }
    }

    fn classify(&self, target: &GroupPoint, solutions: Vec<(Vec<f64>, f64)>, cfg: &ShootingConfig) -> Result<Shot> {
        let Some(best) = solutions
            .iter()
            .min_by(|a, b| norm(&a.0).total_cmp(&norm(&b.0)))
            .cloned()
        else {
            return Err(Error::NoConvergence { residual: f64::NAN });
        };
        let length = norm(&best.0);
        // exp(t log g) has length |log g|, so longer solutions are not minimal
        let cap = norm(&self.model.to_ortho_slice(&self.group.log(target)));
        let within = length <= cap * (1.0 + 1e-9) + 1e-12;
        let agree = solutions
            .iter()
            .filter(|(w, _)| norm(&sub(w, &best.0)) <= 1e-6 * length.max(1.0))
            .count();
        let tie = solutions.iter().any(|(w, _)| {
            (norm(w) - length).abs() <= 1e-6 * length.max(1.0)
                && norm(&sub(w, &best.0)) > 1e-4 * length.max(1.0)
        });
        let f0 = self.residual(target, &best.0, cfg.steps);
        let jac = self.jacobian(target, &best.0, &f0, cfg.steps);
        let svd = jac.svd(false, false);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        let nonsingular = smin > 1e-7 * smax.max(1.0);
        let certificate = if within && agree >= cfg.agree && !tie {
            MinimalCertificate::Certified
        } else {
            MinimalCertificate::Uncertified
        };
        let cut = if certificate == MinimalCertificate::Certified && nonsingular {
            CutCertificate::InC
        } else {
            CutCertificate::Uncertain
        };
        Ok(Shot {
            w: best.0,
            length,
            residual: best.1,
            certificate,
            cut,
            jacobian_min_sv: smin,
            converged_starts: solutions.len(),
        })
    }

    /// Minimising geodesic from `p` to `q`.
    pub fn distance(&self, p: &GroupPoint, q: &GroupPoint) -> Result<(GeodesicRecord, Shot)> {
        let rel = self.group.between(p, q);
        let shot = self.shoot(&rel)?;
        let rec = self.record_from_shot(p, &shot)?;
        Ok((rec, shot))
    }

    pub fn record_from_shot(&self, p: &GroupPoint, shot: &Shot) -> Result<GeodesicRecord> {
        if shot.length == 0.0 {
            return Ok(GeodesicRecord {
                start: p.clone(),
                initial_velocity: AlgebraVector::zeros(self.model.dim()),
                length: 0.0,
                samples: vec![self.sample(0.0, &vec![0.0; self.model.dim()], p)],
                minimal_certificate: shot.certificate,
            });
        }
        let mut rec = self.record(p, &shot.w, shot.length, self.shooting.steps)?;
        rec.minimal_certificate = shot.certificate;
        Ok(rec)
    }

    /// Transports `x0` (orthonormal coordinates) along the geodesic with unit
    /// initial velocity `u` over length `length`.
    pub fn transport_ortho(
        &self,
        u: &[f64],
        length: f64,
        steps: usize,
        x0: &[f64],
        kind: TransportKind,
    ) -> Result<Vec<f64>> {
        let g = self.algebra();
        if kind == TransportKind::Skewed && g.vertical_indices().iter().any(|&a| x0[a] != 0.0) {
            return Err(Error::NonHorizontalInput);
        }
        let t = self.tables();
        let rhs = |v: &[f64], x: &[f64]| -> Vec<f64> {
            let mut out = t.adapted.apply(v, x);
            out.iter_mut().for_each(|c| *c = -*c);
            let jx = t.j.apply(v, x);
            match kind {
                TransportKind::Skewed => axpy(-0.5, &g.project_h(&jx), &mut out),
                TransportKind::Circ => axpy(-1.0, &jx, &mut out),
            }
            out
        };
        let steps = steps.max(1);
        let h = length / steps as f64;
        let mut v = u.to_vec();
        let mut x = x0.to_vec();
        for _ in 0..steps {
            let kv1 = self.euler_arnold(&v);
            let kx1 = rhs(&v, &x);
            let v2: Vec<f64> = v.iter().zip(&kv1).map(|(a, b)| a + 0.5 * h * b).collect();
            let x2: Vec<f64> = x.iter().zip(&kx1).map(|(a, b)| a + 0.5 * h * b).collect();
            let kv2 = self.euler_arnold(&v2);
            let kx2 = rhs(&v2, &x2);
            let v3: Vec<f64> = v.iter().zip(&kv2).map(|(a, b)| a + 0.5 * h * b).collect();
            let x3: Vec<f64> = x.iter().zip(&kx2).map(|(a, b)| a + 0.5 * h * b).collect();
            let kv3 = self.euler_arnold(&v3);
            let kx3 = rhs(&v3, &x3);
            let v4: Vec<f64> = v.iter().zip(&kv3).map(|(a, b)| a + h * b).collect();
            let x4: Vec<f64> = x.iter().zip(&kx3).map(|(a, b)| a + h * b).collect();
            let kv4 = self.euler_arnold(&v4);
            let kx4 = rhs(&v4, &x4);
            for i in 0..v.len() {
                v[i] += h / 6.0 * (kv1[i] + 2.0 * kv2[i] + 2.0 * kv3[i] + kv4[i]);
                x[i] += h / 6.0 * (kx1[i] + 2.0 * kx2[i] + 2.0 * kx3[i] + kx4[i]);
            }
        }
        if kind == TransportKind::Skewed {
            // H is preserved by the flow; clear rounding noise in V.
            for &a in g.vertical_indices() {
                x[a] = 0.0;
            }
        }
        Ok(x)
    }

    pub fn transport(&self, rec: &GeodesicRecord, v0: &AlgebraVector, kind: TransportKind) -> Result<AlgebraVector> {
        let x0 = self.model.to_ortho(v0);
        if kind == TransportKind::Skewed {
            let (_, vpart) = crate::model::split(&self.model, v0);
            if vpart.max_abs() > 1e-12 * v0.max_abs().max(1.0) {
                return Err(Error::NonHorizontalInput);
            }
        }
        let mut x0 = x0;
        if kind == TransportKind::Skewed {
            for &a in self.algebra().vertical_indices() {
                x0[a] = 0.0;
            }
        }
        if rec.length == 0.0 {
            return Ok(self.model.from_ortho(&x0));
        }
        let u = &rec.samples[0].v_ortho;
        let x = self.transport_ortho(u, rec.length, rec.steps(), &x0, kind)?;
        Ok(self.model.from_ortho(&x))
    }

    /// Index form of `field` along `rec` by composite Simpson on the sample
    /// grid. The field is also evaluated slightly outside `[0, r]` to
    /// differentiate it.
    pub fn index_form(
        &self,
        rec: &GeodesicRecord,
        field: &dyn Fn(f64) -> AlgebraVector,
        mode: IndexMode,
    ) -> Result<f64> {
        if rec.length == 0.0 {
            return Ok(0.0);
        }
        let g = self.algebra();
        let t = self.tables();
        let hd = 1e-3 * rec.length.min(1.0);
        let eval = |s: f64| self.model.to_ortho(&field(s));
        let mut values = Vec::with_capacity(rec.samples.len());
        for smp in &rec.samples {
            let y = eval(smp.t);
            if mode == IndexMode::Horizontal {
                let vert = g.vertical_indices().iter().map(|&a| y[a].abs()).fold(0.0, f64::max);
                if vert > 1e-10 * norm(&y).max(1.0) {
                    return Err(Error::NonHorizontalField(vert));
                }
            }
            let (ym2, ym1, yp1, yp2) = (
                eval(smp.t - 2.0 * hd),
                eval(smp.t - hd),
                eval(smp.t + hd),
                eval(smp.t + 2.0 * hd),
            );
            let dy: Vec<f64> = (0..y.len())
                .map(|i| (ym2[i] - 8.0 * ym1[i] + 8.0 * yp1[i] - yp2[i]) / (12.0 * hd))
                .collect();
            let v = &smp.v_ortho;
            let value = match mode {
                IndexMode::Riemannian => {
                    let mut cov = dy.clone();
                    axpy(1.0, &t.levi_civita.apply(v, &y), &mut cov);
                    dot(&cov, &cov) - dot(&t.curvature(ConnectionKind::LeviCivita, v, &y, &y), v)
                }
                IndexMode::Horizontal => horizontal_integrand(g, t, v, &y, &dy),
            };
            values.push(value);
        }
        Ok(simpson(&values, rec.length / rec.steps() as f64))
    }
}

/// Six-term horizontal integrand at one instant.
pub(crate) fn horizontal_integrand(
    g: &OrthoAlgebra,
    t: &ConnectionTables,
    v: &[f64],
    y: &[f64],
    dy: &[f64],
) -> f64 {
    let tor = &t.torsion;
    let mut cov = dy.to_vec();
    axpy(1.0, &t.adapted.apply(v, y), &mut cov);
    let jvy = t.j.apply(v, y);
    axpy(0.5, &g.project_h(&jvy), &mut cov);
    let jh = g.project_h(&jvy);
    let vv = g.project_v(v);
    dot(&cov, &cov) - dot(&t.curvature(ConnectionKind::Adapted, v, y, y), v)
        + dot(&t.nabla_of(tor, y, y, v), &vv)
        - 0.25 * dot(&jh, &jh)
        + dot(&tor.apply(y, v), &tor.apply(y, v))
        + dot(&tor.apply(&tor.apply(v, y), y), v)
}

/// Composite Simpson; a trailing odd interval uses the 3/8 rule.
pub fn simpson(values: &[f64], h: f64) -> f64 {
    let n = values.len().saturating_sub(1);
    match n {
        0 => 0.0,
        1 => 0.5 * h * (values[0] + values[1]),
        2 => h / 3.0 * (values[0] + 4.0 * values[1] + values[2]),
        _ => {
            let (main, tail) = if n % 2 == 0 { (n, 0) } else { (n - 3, 3) };
            let mut s = 0.0;
            for k in (0..main).step_by(2) {
                s += values[k] + 4.0 * values[k + 1] + values[k + 2];
            }
            s *= h / 3.0;
            if tail == 3 {
                let v = &values[main..];
                s += 3.0 * h / 8.0 * (v[0] + 3.0 * v[1] + 3.0 * v[2] + v[3]);
            }
            s
        }
    }
}

/// Deterministic well-spread unit vectors (golden spiral in 3d, Halton-based
/// Gaussian directions otherwise).
pub fn quasi_random_direction(d: usize, j: usize) -> Vec<f64> {
    if d == 3 {
        let n = 24.0;
        let k = (j % 24) as f64 + 0.5;
        let z = 1.0 - 2.0 * k / n;
        let r = (1.0 - z * z).sqrt();
        let phi = std::f64::consts::PI * (3.0 - 5f64.sqrt()) * k + 0.37 * (j / 24) as f64;
        return vec![r * phi.cos(), r * phi.sin(), z];
    }
    const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];
    let mut v: Vec<f64> = (0..d)
        .map(|i| {
            let u = halton(j as u64 + 1, PRIMES[i % PRIMES.len()]).clamp(1e-9, 1.0 - 1e-9);
            let u2 = halton(j as u64 + 7, PRIMES[(i + 3) % PRIMES.len()]).clamp(1e-9, 1.0 - 1e-9);
            (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        })
        .collect();
    let n = norm(&v).max(1e-300);
    v.iter_mut().for_each(|x| *x /= n);
    v
}

fn halton(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Unit-speed geodesic from `p` with initial velocity `v` for time `t`
/// (length `t |v|`).
pub fn exp_map(m: &FoliatedModel, p: &GroupPoint, v: &AlgebraVector, t: f64) -> Result<GeodesicRecord> {
    let geo = Geometry::new(m)?;
    let nv = m.norm(v);
    let length = t * nv;
    let steps = ((length / EXP_MAP_MAX_STEP).ceil() as usize).max(8);
    geo.record(p, &m.to_ortho(v), length, steps)
}

/// As [`exp_map`] with an explicit step count.
pub fn exp_map_steps(
    m: &FoliatedModel,
    p: &GroupPoint,
    v: &AlgebraVector,
    t: f64,
    steps: usize,
) -> Result<GeodesicRecord> {
    let geo = Geometry::new(m)?;
    geo.record(p, &m.to_ortho(v), t * m.norm(v), steps)
}

/// Certified-or-not minimising geodesic from `p` to `q`.
pub fn distance(m: &FoliatedModel, p: &GroupPoint, q: &GroupPoint) -> Result<GeodesicRecord> {
    Ok(Geometry::new(m)?.distance(p, q)?.0)
}

pub fn transport(
    m: &FoliatedModel,
    gamma: &GeodesicRecord,
    v0: &AlgebraVector,
    kind: TransportKind,
) -> Result<AlgebraVector> {
    Geometry::new(m)?.transport(gamma, v0, kind)
}

pub fn index_form(
    m: &FoliatedModel,
    gamma: &GeodesicRecord,
    field: &dyn Fn(f64) -> AlgebraVector,
    mode: IndexMode,
) -> Result<f64> {
    Geometry::new(m)?.index_form(gamma, field, mode)
}

pub fn cut_certificate(m: &FoliatedModel, p: &GroupPoint, q: &GroupPoint) -> Result<CutCertificate> {
    let geo = Geometry::new(m)?;
    let rel = geo.group().between(p, q);
    Ok(match geo.shoot(&rel) {
        Ok(shot) if shot.length > 0.0 => shot.cut,
        _ => CutCertificate::Uncertain,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;

    #[test]
    fn magnus_step_is_fourth_order() {
        let m = bundled::engel();
        let geo = Geometry::new(&m).unwrap();
        let w = [0.7, -0.4, 0.5, 0.3];
        let reference = geo.flow(&geo.group().identity(), &w, 4096);
        let e1 = geo.group().coordinate_gap(&geo.flow(&geo.group().identity(), &w, 16), &reference);
        let e2 = geo.group().coordinate_gap(&geo.flow(&geo.group().identity(), &w, 32), &reference);
        let ratio = e1 / e2;
        assert!(ratio > 12.0 && ratio < 20.0, "ratio {ratio}, errors {e1:e} {e2:e}");
    }

    #[test]
    fn simpson_integrates_cubics_exactly() {
        for n in [2usize, 3, 5, 8] {
            let h = 1.0 / n as f64;
            let vals: Vec<f64> = (0..=n).map(|k| (k as f64 * h).powi(3)).collect();
            assert!((simpson(&vals, h) - 0.25).abs() < 1e-14, "n = {n}");
        }
    }

    #[test]
    fn heisenberg_shot_round_trip() {
        let m = bundled::heisenberg();
        let geo = Geometry::new(&m).unwrap();
        let w = [0.6, -0.3, 0.4];
        let target = geo.flow(&geo.group().identity(), &w, geo.shooting.steps);
        let shot = geo.shoot(&target).unwrap();
        assert_eq!(shot.certificate, MinimalCertificate::Certified);
        assert!((shot.length - norm(&w)).abs() < 1e-9, "{}", shot.length);
    }
}
