//! Finite-difference audits of the horizontal Laplacian comparison, the
//! coupled Laplacian comparison and the diameter bound.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::{axpy, norm};
use crate::connection::k_lower_bound;
use crate::error::{Error, Result};
use crate::geodesy::{quasi_random_direction, CutCertificate, Geometry, MinimalCertificate, ShootingConfig, Shot, TransportKind};
use crate::group::GroupPoint;
use crate::model::FoliatedModel;
use crate::report::{AuditReport, AuditRow};

/// `𝔰_K` and `𝔠_K` for given `K` and horizontal rank `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComparisonProfile {
    pub k: f64,
    pub n: usize,
}

impl ComparisonProfile {
    pub fn new(k: f64, n: usize) -> Self {
        Self { k, n }
    }

    fn rate(&self) -> f64 {
        (self.k.abs() / self.n as f64).sqrt()
    }

    /// Largest admissible radius (`π sqrt(n/K)` for `K > 0`).
    pub fn max_radius(&self) -> f64 {
        if self.k > 0.0 {
            std::f64::consts::PI / self.rate()
        } else {
            f64::INFINITY
        }
    }

    pub fn s(&self, t: f64) -> f64 {
        let a = self.rate();
        if self.k > 0.0 {
            (a * t).sin()
        } else if self.k < 0.0 {
            (a * t).sinh()
        } else {
            t
        }
    }

    pub fn s_prime(&self, t: f64) -> f64 {
        let a = self.rate();
        if self.k > 0.0 {
            a * (a * t).cos()
        } else if self.k < 0.0 {
            a * (a * t).cosh()
        } else {
            1.0
        }
    }

    /// `𝔠_K(t)` on `[0, r]`, equal to 1 at both ends.
    pub fn c(&self, r: f64, t: f64) -> f64 {
        let a = self.rate();
        if self.k > 0.0 {
            let (ct, st) = ((a * t).cos(), (a * t).sin());
            ct + (1.0 - (a * r).cos()) / (a * r).sin() * st
        } else if self.k < 0.0 {
            let (ct, st) = ((a * t).cosh(), (a * t).sinh());
            ct + (1.0 - (a * r).cosh()) / (a * r).sinh() * st
        } else {
            1.0
        }
    }

    pub fn c_prime(&self, r: f64, t: f64) -> f64 {
        let a = self.rate();
        if self.k > 0.0 {
            -a * (a * t).sin() + (1.0 - (a * r).cos()) / (a * r).sin() * a * (a * t).cos()
        } else if self.k < 0.0 {
            a * (a * t).sinh() + (1.0 - (a * r).cosh()) / (a * r).sinh() * a * (a * t).cosh()
        } else {
            0.0
        }
    }
}

fn check_domain(k: f64, n: usize, r: f64) -> Result<()> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::DomainError(format!("radius must be positive, got {r}")));
    }
    if n == 0 {
        return Err(Error::DomainError("n must be positive".into()));
    }
    let max = ComparisonProfile::new(k, n).max_radius();
    if r >= max {
        return Err(Error::DomainError(format!(
            "r = {r} is beyond pi sqrt(n/K) = {max}"
        )));
    }
    Ok(())
}

/// Upper bound for `Δ_H r_p` at distance `r`.
pub fn model_bound(k: f64, n: usize, r: f64) -> Result<f64> {
    check_domain(k, n, r)?;
    let nf = n as f64;
    let a = (k.abs() / nf).sqrt();
    Ok(if k > 0.0 {
        (nf * k).sqrt() / (a * r).tan()
    } else if k < 0.0 {
        (nf * k.abs()).sqrt() / (a * r).tanh()
    } else {
        nf / r
    })
}

/// Upper bound for the coupled Laplacian of the distance at distance `r`.
pub fn coupled_bound(k: f64, n: usize, r: f64) -> Result<f64> {
    check_domain(k, n, r)?;
    let nf = n as f64;
    let a = (k.abs() / nf).sqrt();
    Ok(if k > 0.0 {
        -2.0 * nf * k.sqrt() * (a * r / 2.0).tan()
    } else if k < 0.0 {
        2.0 * nf * k.abs().sqrt() * (a * r / 2.0).tanh()
    } else {
        0.0
    })
}

/// Finite-difference estimate with its step-halving error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FdEstimate {
    pub value: f64,
    /// `|E(h) - E(h/2)|`.
    pub error: f64,
    /// Certified distance at the base point(s).
    pub r: f64,
}

/// Settings shared by the comparison audits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComparisonConfig {
    pub h: f64,
    /// Absolute slack added to each bound.
    pub tol: f64,
}

impl Default for ComparisonConfig {
    fn default() -> Self {
        Self { h: 1e-3, tol: 5e-3 }
    }
}

fn require_certified(shot: &Shot) -> Result<()> {
    if shot.certificate == MinimalCertificate::Certified && shot.cut == CutCertificate::InC {
        Ok(())
    } else {
        Err(Error::UncertifiedDistance)
    }
}

/// Orthonormal horizontal frame vectors in orthonormal coordinates.
fn horizontal_frame(m: &FoliatedModel) -> Vec<Vec<f64>> {
    let g = m.ortho();
    g.horizontal_indices().iter().map(|&a| g.basis(a)).collect()
}

impl Geometry {
    /// `d(e, target)` continuing from `guess`.
    fn warm_length(&self, target: &GroupPoint, guess: &[f64]) -> Result<f64> {
        let shot = self.shoot_warm(target, guess)?;
        require_certified(&shot)?;
        Ok(shot.length)
    }

    fn laplacian_fd(&self, p_inv: &GroupPoint, x: &GroupPoint, center: &Shot, h: f64) -> Result<f64> {
        let m = self.model();
        let grp = self.group();
        let r0 = center.length;
        let at = |dir: &[f64], s: f64| -> Result<f64> {
            let step: Vec<f64> = dir.iter().map(|c| s * c).collect();
            let y = grp.mul(x, &grp.exp(&m.from_ortho_slice(&step)));
            self.warm_length(&grp.mul(p_inv, &y), &center.w)
        };
        let mut total = 0.0;
        let mut drift = vec![0.0; m.dim()];
        for f in horizontal_frame(m) {
            total += (at(&f, h)? - 2.0 * r0 + at(&f, -h)?) / (h * h);
            axpy(1.0, &m.tables().adapted.apply(&f, &f), &mut drift);
        }
        if norm(&drift) > 0.0 {
            total -= (at(&drift, h)? - at(&drift, -h)?) / (2.0 * h);
        }
        Ok(total)
    }

    /// `Δ_H r_p(x)` by central differences along left-invariant flows.
    pub fn horizontal_laplacian_distance(&self, p: &GroupPoint, x: &GroupPoint, h: f64) -> Result<FdEstimate> {
        let grp = self.group();
        let p_inv = grp.inverse(p);
        let center = self.shoot(&grp.mul(&p_inv, x))?;
        require_certified(&center)?;
        self.laplacian_with_center(&p_inv, x, &center, h)
    }

    fn laplacian_with_center(&self, p_inv: &GroupPoint, x: &GroupPoint, center: &Shot, h: f64) -> Result<FdEstimate> {
        let e1 = self.laplacian_fd(p_inv, x, center, h)?;
        let e2 = self.laplacian_fd(p_inv, x, center, 0.5 * h)?;
        Ok(FdEstimate {
            value: e1,
            error: (e1 - e2).abs(),
            r: center.length,
        })
    }

    fn coupled_fd(&self, p: &GroupPoint, q: &GroupPoint, center: &Shot, frames: &[(Vec<f64>, Vec<f64>)], s: f64) -> Result<f64> {
        let grp = self.group();
        let id = grp.identity();
        let steps = 8;
        let mut total = 0.0;
        for (v, vt) in frames {
            let mut second = -2.0 * center.length;
            for sign in [1.0, -1.0] {
                let a: Vec<f64> = v.iter().map(|c| sign * s * c).collect();
                let b: Vec<f64> = vt.iter().map(|c| sign * s * c).collect();
                let sp = grp.mul(p, &self.flow(&id, &a, steps));
                let sq = grp.mul(q, &self.flow(&id, &b, steps));
                second += self.warm_length(&grp.between(&sp, &sq), &center.w)?;
            }
            total += second / (s * s);
        }
        Ok(total)
    }

    /// Coupled Laplacian of `d` at `(p, q)` with skewed-transported frames.
    pub fn coupled_laplacian_distance(&self, p: &GroupPoint, q: &GroupPoint, h: f64) -> Result<FdEstimate> {
        let grp = self.group();
        let center = self.shoot(&grp.between(p, q))?;
        require_certified(&center)?;
        if self.model().ortho().is_abelian() {
            // Both points translate rigidly; the distance is constant.
            return Ok(FdEstimate { value: 0.0, error: 0.0, r: center.length });
        }
        let u: Vec<f64> = center.w.iter().map(|c| c / center.length).collect();
        let mut frames = Vec::new();
        for f in horizontal_frame(self.model()) {
            let vt = self.transport_ortho(&u, center.length, self.shooting.steps, &f, TransportKind::Skewed)?;
            frames.push((f, vt));
        }
        let e1 = self.coupled_fd(p, q, &center, &frames, h)?;
        let e2 = self.coupled_fd(p, q, &center, &frames, 0.5 * h)?;
        Ok(FdEstimate {
            value: e1,
            error: (e1 - e2).abs(),
            r: center.length,
        })
    }

    /// Direction `j` of an audit sweep: the first half horizontal, the rest generic.
    fn audit_direction(&self, j: usize, count: usize) -> Vec<f64> {
        let m = self.model();
        let g = m.ortho();
        let half = count.div_ceil(2);
        if j < half {
            let hs = g.horizontal_indices();
            let mut u = vec![0.0; m.dim()];
            if hs.len() >= 2 {
                let th = std::f64::consts::PI * 2.0 * j as f64 / half as f64;
                u[hs[0]] = th.cos();
                u[hs[1]] = th.sin();
                if hs.len() > 2 {
                    let extra = quasi_random_direction(hs.len(), j + 1);
                    for (k, &a) in hs.iter().enumerate() {
                        u[a] = 0.5 * u[a] + extra[k];
                    }
                    let n = norm(&u);
                    u.iter_mut().for_each(|c| *c /= n);
                }
            } else {
                u[hs[0]] = if j % 2 == 0 { 1.0 } else { -1.0 };
            }
            u
        } else {
            quasi_random_direction(m.dim(), 3 * j + 1)
        }
    }
}

/// `Δ_H r_p(x)` with a fresh multi-start solve at the centre.
pub fn horizontal_laplacian_distance(m: &FoliatedModel, p: &GroupPoint, x: &GroupPoint, h: f64) -> Result<FdEstimate> {
    Geometry::new(m)?.horizontal_laplacian_distance(p, x, h)
}

pub fn coupled_laplacian_distance(m: &FoliatedModel, p: &GroupPoint, q: &GroupPoint, h: f64) -> Result<FdEstimate> {
    Geometry::new(m)?.coupled_laplacian_distance(p, q, h)
}

/// Horizontal Laplacian comparison sweep from the identity.
pub fn comparison_audit(m: &FoliatedModel, radii: &[f64], directions: usize) -> Result<AuditReport> {
    comparison_audit_with(m, radii, directions, ComparisonConfig::default())
}

pub fn comparison_audit_with(
    m: &FoliatedModel,
    radii: &[f64],
    directions: usize,
    cfg: ComparisonConfig,
) -> Result<AuditReport> {
    let geo = Geometry::new(m)?;
    let k = k_lower_bound(m);
    let n = m.n();
    let mut report = AuditReport::new(format!("laplacian_comparison/{}", m.name()));
    report.summary.insert("K".into(), k);
    report.summary.insert("n".into(), n as f64);
    let id = geo.group().identity();
    let mut max_fd_error: f64 = 0.0;
    for &r in radii {
        for j in 0..directions {
            let u = geo.audit_direction(j, directions);
            let w: Vec<f64> = u.iter().map(|c| r * c).collect();
            let x = geo.flow(&id, &w, geo.shooting.steps);
            let center = match geo.shoot(&x) {
                Ok(s) if s.certificate == MinimalCertificate::Certified && s.cut == CutCertificate::InC => s,
                _ => {
                    report.skipped += 1;
                    continue;
                }
            };
            let est = match geo.laplacian_with_center(&id, &x, &center, cfg.h) {
                Ok(e) => e,
                Err(Error::UncertifiedDistance) | Err(Error::NoConvergence { .. }) => {
                    report.skipped += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let bound = match model_bound(k, n, est.r) {
                Ok(b) => b,
                Err(_) => {
                    report.skipped += 1;
                    continue;
                }
            };
            max_fd_error = max_fd_error.max(est.error);
            report.rows.push(
                AuditRow::new(format!("r{r}_d{j}"), est.value, bound, cfg.tol)
                    .at_r(est.r)
                    .direction(j)
                    .with_error(est.error),
            );
        }
    }
    report.summary.insert("max_fd_error".into(), max_fd_error);
    Ok(report.finalize())
}

/// Coupled Laplacian comparison sweep for pairs `(e, q)` with `d(e, q) = r`.
pub fn coupled_audit(m: &FoliatedModel, radii: &[f64], directions: usize, cfg: ComparisonConfig) -> Result<AuditReport> {
    let geo = Geometry::new(m)?;
    let k = k_lower_bound(m);
    let n = m.n();
    let mut report = AuditReport::new(format!("coupled_comparison/{}", m.name()));
    report.summary.insert("K".into(), k);
    let id = geo.group().identity();
    let mut max_fd_error: f64 = 0.0;
    for &r in radii {
        for j in 0..directions {
            let u = geo.audit_direction(j, directions);
            let w: Vec<f64> = u.iter().map(|c| r * c).collect();
            let q = geo.flow(&id, &w, geo.shooting.steps);
            let est = match geo.coupled_laplacian_distance(&id, &q, cfg.h) {
                Ok(e) => e,
                Err(Error::UncertifiedDistance) | Err(Error::NoConvergence { .. }) => {
                    report.skipped += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let Ok(bound) = coupled_bound(k, n, est.r) else {
                report.skipped += 1;
                continue;
            };
            max_fd_error = max_fd_error.max(est.error);
            report.rows.push(
                AuditRow::new(format!("r{r}_d{j}"), est.value, bound, cfg.tol)
                    .at_r(est.r)
                    .direction(j)
                    .with_error(est.error),
            );
        }
    }
    report.summary.insert("max_fd_error".into(), max_fd_error);
    Ok(report.finalize())
}

/// Uniform point of the group's compact form (Haar measure on SU(2)).
pub fn haar_quaternion(rng: &mut ChaCha8Rng) -> GroupPoint {
    loop {
        let q: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(rng));
        let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-8 {
            return GroupPoint::Quat(q.map(|x| x / n));
        }
    }
}

/// Diameter audit on a compact model with `K > 0`.
///
/// Every pair first gets a reduced multi-start solve and pairs it cannot
/// certify get a wider one; the first `certified_subsample` pairs use the
/// full configuration directly. Only certified distances decide the verdict;
/// the rest are reported with the length of their shortest converged
/// geodesic (an upper bound for the distance).
pub fn bonnet_myers_audit(m: &FoliatedModel, samples: usize, seed: u64) -> Result<AuditReport> {
    bonnet_myers_audit_with(m, samples, seed, 200)
}

pub fn bonnet_myers_audit_with(m: &FoliatedModel, samples: usize, seed: u64, certified_subsample: usize) -> Result<AuditReport> {
    let k = k_lower_bound(m);
    if k <= 1e-12 {
        return Err(Error::NonPositiveK(k));
    }
    let geo = Geometry::new(m)?;
    if !geo.group().is_compact() {
        return Err(Error::UnsupportedGroup(m.name().to_string()));
    }
    let n = m.n();
    let bound = std::f64::consts::PI * (n as f64 / k).sqrt();
    let mut report = AuditReport::new(format!("bonnet_myers/{}", m.name()));
    report.summary.insert("K".into(), k);
    report.summary.insert("diameter_bound".into(), bound);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fast = ShootingConfig::fast();
    let retry = ShootingConfig {
        starts: 12,
        steps: 64,
        ..ShootingConfig::default()
    };
    let targets: Vec<GroupPoint> = (0..samples).map(|_| haar_quaternion(&mut rng)).collect();
    let shots: Vec<Option<Shot>> = targets
        .par_iter()
        .enumerate()
        .map(|(i, q)| {
            if i < certified_subsample {
                return geo.shoot(q).ok();
            }
            match geo.shoot_with(q, &fast) {
                Ok(s) if s.certificate == MinimalCertificate::Certified => Some(s),
                _ => geo.shoot_with(q, &retry).ok(),
            }
        })
        .collect();
    let mut max_len: f64 = 0.0;
    let mut certified = 0usize;
    for (i, shot) in shots.into_iter().enumerate() {
        let Some(shot) = shot else {
            report.skipped += 1;
            continue;
        };
        let mut row = AuditRow::new(format!("pair{i}"), shot.length, bound, bound * 1e-2).direction(i).at_r(shot.length);
        if shot.certificate == MinimalCertificate::Certified {
            certified += 1;
            max_len = max_len.max(shot.length);
        } else {
            row = row.uncertified();
        }
        report.rows.push(row);
    }
    report.summary.insert("max_distance".into(), max_len);
    report.summary.insert("certified_pairs".into(), certified as f64);
    Ok(report.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_named_values() {
        assert!((model_bound(0.0, 2, 1.0).unwrap() - 2.0).abs() < 1e-15);
        let v = model_bound(-1.0, 2, 2f64.sqrt()).unwrap();
        assert!((v - 2f64.sqrt() / 1f64.tanh()).abs() < 1e-14);
        assert!((v - 1.856_912_3).abs() < 1e-6);
        let c = coupled_bound(-1.0, 2, 1.0).unwrap();
        assert!((c - 4.0 * (1.0 / (2.0 * 2f64.sqrt())).tanh()).abs() < 1e-14);
        assert!((c - 1.358_092_4).abs() < 1e-6);
        assert_eq!(coupled_bound(0.0, 3, 0.7).unwrap(), 0.0);
        assert!(model_bound(1.0, 2, 5.0).is_err());
    }

    #[test]
    fn continuity_at_zero_curvature() {
        for k in [1e-9, -1e-9] {
            let v = model_bound(k, 2, 1.0).unwrap();
            assert!((v - 2.0).abs() < 1e-6);
        }
    }

    #[test]
    fn profile_endpoints() {
        for k in [-2.0, 0.0, 0.5] {
            let p = ComparisonProfile::new(k, 2);
            assert_eq!(p.s(0.0), 0.0);
            assert!((p.c(1.3, 0.0) - 1.0).abs() < 1e-15);
            assert!((p.c(1.3, 1.3) - 1.0).abs() < 1e-12);
        }
        assert_eq!(ComparisonProfile::new(0.0, 3).s(0.4), 0.4);
    }
}
