//! Connections, torsion, curvature and the Ricci-like tensor on a validated
//! model. Tensors are constant in the left-invariant orthonormal frame, so
//! each connection is a bilinear table of Christoffel vectors.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::algebra::{axpy, dot, BilinearTable, OrthoAlgebra};
use crate::error::{Error, Result};
use crate::model::{AlgebraVector, Certificates, FoliatedModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConnectionKind {
    /// Riemannian connection `D`.
    LeviCivita,
    /// Bott-type adapted connection `∇`.
    Adapted,
    /// `∇° = ∇ + J`.
    Circ,
}

/// Christoffel tables for all three connections plus torsion, `J` and the
/// difference tensor `A = D - ∇`, all in the orthonormal frame.
#[derive(Debug, Clone)]
pub struct ConnectionTables {
    pub levi_civita: BilinearTable,
    pub adapted: BilinearTable,
    pub circ: BilinearTable,
    /// Torsion of `∇`.
    pub torsion: BilinearTable,
    /// `j.apply(z, x) = J_z x`.
    pub j: BilinearTable,
    pub a: BilinearTable,
    /// `c.apply(x, y) = C_x y`.
    pub c: BilinearTable,
    pub bracket: BilinearTable,
}

impl ConnectionTables {
    pub fn new(g: &OrthoAlgebra) -> Self {
        let d = g.dim();
        let lc_fn = |x: &[f64], y: &[f64]| -> Vec<f64> {
            let mut out = g.bracket(x, y);
            axpy(-1.0, &g.ad_star(x, y), &mut out);
            axpy(-1.0, &g.ad_star(y, x), &mut out);
            out.iter_mut().for_each(|v| *v *= 0.5);
            out
        };
        let levi_civita = BilinearTable::from_fn(d, lc_fn);
        let c_fn = |x: &[f64], y: &[f64]| -> Vec<f64> {
            let xh = g.project_h(x);
            let yv = g.project_v(y);
            let mut s = g.bracket(&xh, &yv);
            axpy(1.0, &g.ad_star(&xh, &yv), &mut s);
            g.project_v(&s).iter().map(|v| -0.5 * v).collect()
        };
        let c = BilinearTable::from_fn(d, c_fn);
        let adapted = BilinearTable::from_fn(d, |x, y| {
            let (xh, xv) = (g.project_h(x), g.project_v(x));
            let (yh, yv) = (g.project_h(y), g.project_v(y));
            let mut out = g.project_h(&levi_civita.apply(&xh, &yh));
            axpy(1.0, &g.project_h(&g.bracket(&xv, &yh)), &mut out);
            axpy(1.0, &g.project_v(&g.bracket(&xh, &yv)), &mut out);
            axpy(1.0, &c.apply(&xh, &yv), &mut out);
            axpy(1.0, &g.project_v(&levi_civita.apply(&xv, &yv)), &mut out);
            out
        });
        let torsion = BilinearTable::from_fn(d, |x, y| {
            let mut out = adapted.apply(x, y);
            axpy(-1.0, &adapted.apply(y, x), &mut out);
            axpy(-1.0, &g.bracket(x, y), &mut out);
            out
        });
        // (J_z x)_k = <z, Tor(x, f_k)>
        let j = BilinearTable::from_fn(d, |z, x| {
            (0..d)
                .map(|k| dot(z, &torsion.apply(x, &g.basis(k))))
                .collect()
        });
        let a = BilinearTable::from_fn(d, |x, y| {
            let mut out: Vec<f64> = torsion.apply(x, y).iter().map(|v| -0.5 * v).collect();
            axpy(0.5, &j.apply(x, y), &mut out);
            axpy(0.5, &j.apply(y, x), &mut out);
            out
        });
        let circ = BilinearTable::from_fn(d, |x, y| {
            let mut out = adapted.apply(x, y);
            axpy(1.0, &j.apply(x, y), &mut out);
            out
        });
        Self {
            levi_civita,
            adapted,
            circ,
            torsion,
            j,
            a,
            c,
            bracket: g.bracket_table().clone(),
        }
    }

    pub fn gamma(&self, kind: ConnectionKind) -> &BilinearTable {
        match kind {
            ConnectionKind::LeviCivita => &self.levi_civita,
            ConnectionKind::Adapted => &self.adapted,
            ConnectionKind::Circ => &self.circ,
        }
    }

    /// `R(x,y)z = Γ(x,Γ(y,z)) - Γ(y,Γ(x,z)) - Γ([x,y],z)` in frame coordinates.
    pub fn curvature(&self, kind: ConnectionKind, x: &[f64], y: &[f64], z: &[f64]) -> Vec<f64> {
        let g = self.gamma(kind);
        let mut out = g.apply(x, &g.apply(y, z));
        axpy(-1.0, &g.apply(y, &g.apply(x, z)), &mut out);
        axpy(-1.0, &g.apply(&self.bracket.apply(x, y), z), &mut out);
        out
    }

    /// `(∇_x T)(y, z)` for a constant tensor `T` and the adapted connection.
    pub fn nabla_of(&self, t: &BilinearTable, x: &[f64], y: &[f64], z: &[f64]) -> Vec<f64> {
        let nab = &self.adapted;
        let mut out = nab.apply(x, &t.apply(y, z));
        axpy(-1.0, &t.apply(&nab.apply(x, y), z), &mut out);
        axpy(-1.0, &t.apply(y, &nab.apply(x, z)), &mut out);
        out
    }

    /// Levi-Civita curvature assembled from `∇` and `A = D - ∇`.
    pub fn riem_d_decomposed(&self, x: &[f64], y: &[f64], z: &[f64]) -> Vec<f64> {
        let a = &self.a;
        let mut out = self.curvature(ConnectionKind::Adapted, x, y, z);
        axpy(1.0, &self.nabla_of(a, x, y, z), &mut out);
        axpy(-1.0, &self.nabla_of(a, y, x, z), &mut out);
        axpy(1.0, &a.apply(&self.torsion.apply(x, y), z), &mut out);
        axpy(1.0, &a.apply(x, &a.apply(y, z)), &mut out);
        axpy(-1.0, &a.apply(y, &a.apply(x, z)), &mut out);
        out
    }
}

fn conv2(m: &FoliatedModel, x: &AlgebraVector, y: &AlgebraVector) -> (Vec<f64>, Vec<f64>) {
    (m.to_ortho(x), m.to_ortho(y))
}

pub fn levi_civita(m: &FoliatedModel, x: &AlgebraVector, y: &AlgebraVector) -> AlgebraVector {
    let (a, b) = conv2(m, x, y);
    m.from_ortho(&m.tables().levi_civita.apply(&a, &b))
}

/// `<C_x y, z>`.
pub fn c_tensor(m: &FoliatedModel, x: &AlgebraVector, y: &AlgebraVector, z: &AlgebraVector) -> f64 {
    let (a, b) = conv2(m, x, y);
    dot(&m.tables().c.apply(&a, &b), &m.to_ortho(z))
}

pub fn adapted_connection(m: &FoliatedModel, x: &AlgebraVector, y: &AlgebraVector) -> AlgebraVector {
    let (a, b) = conv2(m, x, y);
    m.from_ortho(&m.tables().adapted.apply(&a, &b))
}

pub fn connection(
    m: &FoliatedModel,
    kind: ConnectionKind,
    x: &AlgebraVector,
    y: &AlgebraVector,
) -> AlgebraVector {
    let (a, b) = conv2(m, x, y);
    m.from_ortho(&m.tables().gamma(kind).apply(&a, &b))
}

pub fn torsion(m: &FoliatedModel, x: &AlgebraVector, y: &AlgebraVector) -> AlgebraVector {
    let (a, b) = conv2(m, x, y);
    m.from_ortho(&m.tables().torsion.apply(&a, &b))
}

/// `J_z x`.
pub fn j_map(m: &FoliatedModel, z: &AlgebraVector, x: &AlgebraVector) -> AlgebraVector {
    let (a, b) = conv2(m, z, x);
    m.from_ortho(&m.tables().j.apply(&a, &b))
}

pub fn curvature(
    m: &FoliatedModel,
    kind: ConnectionKind,
    x: &AlgebraVector,
    y: &AlgebraVector,
    z: &AlgebraVector,
) -> AlgebraVector {
    let (a, b) = conv2(m, x, y);
    m.from_ortho(&m.tables().curvature(kind, &a, &b, &m.to_ortho(z)))
}

pub fn riem_d_via_decomposition(
    m: &FoliatedModel,
    x: &AlgebraVector,
    y: &AlgebraVector,
    z: &AlgebraVector,
) -> AlgebraVector {
    let (a, b) = conv2(m, x, y);
    m.from_ortho(&m.tables().riem_d_decomposed(&a, &b, &m.to_ortho(z)))
}

/// One value of the definitional five-term sum, frame vectors and arguments
/// in orthonormal coordinates.
pub fn frak_r_sum(
    g: &OrthoAlgebra,
    t: &ConnectionTables,
    frame: &[Vec<f64>],
    u: &[f64],
    v: &[f64],
) -> f64 {
    let tor = &t.torsion;
    let mut total = 0.0;
    for x in frame {
        let ric = dot(&t.curvature(ConnectionKind::Adapted, u, x, x), v);
        let div = dot(&t.nabla_of(tor, x, x, u), v);
        let tt = dot(&tor.apply(&tor.apply(u, x), x), v);
        let jj = dot(&g.project_h(&t.j.apply(u, x)), &g.project_h(&t.j.apply(v, x)));
        let pair = dot(&tor.apply(x, u), &tor.apply(x, v));
        total += ric - div - tt + 0.25 * jj - pair;
    }
    total
}

/// `𝔯(u, v)` for model-basis vectors.
pub fn frak_r(m: &FoliatedModel, u: &AlgebraVector, v: &AlgebraVector) -> f64 {
    let g = m.ortho();
    let frame: Vec<Vec<f64>> = g.horizontal_indices().iter().map(|&a| g.basis(a)).collect();
    frak_r_sum(g, m.tables(), &frame, &m.to_ortho(u), &m.to_ortho(v))
}

/// Matrix of `𝔯` in the orthonormal frame using the given horizontal frame.
pub fn frak_r_matrix_with_frame(m: &FoliatedModel, frame: &[Vec<f64>]) -> DMatrix<f64> {
    let g = m.ortho();
    let d = m.dim();
    DMatrix::from_fn(d, d, |a, b| {
        frak_r_sum(g, m.tables(), frame, &g.basis(a), &g.basis(b))
    })
}

/// Matrix of `𝔯` in the orthonormal frame, from the definition.
pub fn frak_r_matrix(m: &FoliatedModel) -> DMatrix<f64> {
    let g = m.ortho();
    let frame: Vec<Vec<f64>> = g.horizontal_indices().iter().map(|&a| g.basis(a)).collect();
    frak_r_matrix_with_frame(m, &frame)
}

/// Matrix `𝔯(e_i, e_j)` in the model basis.
pub fn frak_r_model_basis(m: &FoliatedModel) -> DMatrix<f64> {
    let r = frak_r_matrix(m);
    let b = m.frame();
    // e_i = sum_a (B^-1)_{a i} f_a, so the model matrix is B^-T R B^-1.
    let binv = b.clone().try_inverse().expect("frame is invertible");
    binv.transpose() * r * binv
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

fn min_sym_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Serialize)]
pub struct TensorComponents {
    pub ric_h: Vec<Vec<f64>>,
    /// `<δTor(e_a), e_b>`.
    pub delta_tor: Vec<Vec<f64>>,
    pub tor_tor: Vec<Vec<f64>>,
    pub j_j: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TensorReport {
    pub model: String,
    /// `𝔯` in the orthonormal block-adapted frame.
    pub frak_r_matrix: Vec<Vec<f64>>,
    /// `𝔯` assembled from the four-case decomposition.
    pub frak_r_decomposed: Vec<Vec<f64>>,
    pub decomposition_residual: f64,
    pub components: TensorComponents,
    #[serde(rename = "K")]
    pub k: f64,
    pub yang_mills_residual: f64,
    pub symmetric: bool,
    /// `min eig sym(𝔯 - ¼(J,J))` when the foliation is totally geodesic.
    pub gb_total_bound: Option<f64>,
    /// Largest deviation of the closed-form Carnot entries (as printed,
    /// including the repeated term in the vertical block) from the
    /// definitional matrix. `None` for non-Carnot models.
    pub carnot_formula_deviation: Option<f64>,
    pub certificates: Certificates,
    pub step: Option<usize>,
}

/// Component matrices in the orthonormal frame.
pub fn components(m: &FoliatedModel) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let g = m.ortho();
    let t = m.tables();
    let d = m.dim();
    let frame: Vec<Vec<f64>> = g.horizontal_indices().iter().map(|&a| g.basis(a)).collect();
    let mut ric = DMatrix::zeros(d, d);
    let mut delta = DMatrix::zeros(d, d);
    let mut tt = DMatrix::zeros(d, d);
    let mut jj = DMatrix::zeros(d, d);
    for a in 0..d {
        let u = g.basis(a);
        let mut div = vec![0.0; d];
        for x in &frame {
            axpy(1.0, &t.nabla_of(&t.torsion, x, x, &u), &mut div);
        }
        for b in 0..d {
            let v = g.basis(b);
            delta[(a, b)] = div[b];
            for x in &frame {
                ric[(a, b)] += dot(&t.curvature(ConnectionKind::Adapted, &u, x, x), &v);
                tt[(a, b)] += dot(&t.torsion.apply(&u, x), &t.torsion.apply(&v, x));
                jj[(a, b)] += dot(
                    &g.project_h(&t.j.apply(&u, x)),
                    &g.project_h(&t.j.apply(&v, x)),
                );
            }
        }
    }
    (ric, delta, tt, jj)
}

/// Closed-form Carnot entries exactly as printed (vertical block with the
/// `-½ Σ<ad_{X_i}U, ad*_{X_i}V>` term appearing twice).
fn printed_carnot_matrix(m: &FoliatedModel, jj: &DMatrix<f64>) -> DMatrix<f64> {
    let g = m.ortho();
    let d = m.dim();
    let hs = g.horizontal_indices();
    let ad = |i: usize, u: &[f64]| g.bracket(&g.basis(i), u);
    let ads = |i: usize, u: &[f64]| g.ad_star(&g.basis(i), u);
    DMatrix::from_fn(d, d, |a, b| {
        let (u, v) = (g.basis(a), g.basis(b));
        match (g.is_horizontal(a), g.is_horizontal(b)) {
            (true, true) => -hs.iter().map(|&i| dot(&ad(i, &u), &ad(i, &v))).sum::<f64>(),
            (false, true) => -0.5 * hs.iter().map(|&i| dot(&ad(i, &v), &ads(i, &u))).sum::<f64>(),
            (true, false) => -0.5 * hs.iter().map(|&i| dot(&ad(i, &u), &ads(i, &v))).sum::<f64>(),
            (false, false) => {
                let s1: f64 = hs.iter().map(|&i| dot(&ad(i, &u), &ad(i, &v))).sum();
                let s2: f64 = hs.iter().map(|&i| dot(&ad(i, &u), &ads(i, &v))).sum();
                0.25 * jj[(a, b)] - s1 - 0.5 * s2 - 0.5 * s2
            }
        }
    })
}

pub fn frak_r_decomposed(m: &FoliatedModel) -> TensorReport {
    let g = m.ortho();
    let d = m.dim();
    let (ric, delta, tt, jj) = components(m);
    let mut assembled = DMatrix::zeros(d, d);
    let mut ym: f64 = 0.0;
    for a in 0..d {
        for b in 0..d {
            assembled[(a, b)] = match (g.is_horizontal(a), g.is_horizontal(b)) {
                (true, true) => ric[(a, b)] - tt[(a, b)],
                (false, true) => -tt[(a, b)],
                (true, false) => {
                    ym = ym.max((delta[(a, b)] + tt[(b, a)]).abs());
                    -delta[(a, b)] - 2.0 * tt[(b, a)]
                }
                (false, false) => -delta[(a, b)] + 0.25 * jj[(a, b)] - 2.0 * tt[(a, b)],
            };
        }
    }
    let definitional = frak_r_matrix(m);
    let residual = (&assembled - &definitional).amax();
    let k = min_sym_eigenvalue(&definitional);
    let certificates = m.certificates();
    let gb = certificates
        .totally_geodesic
        .then(|| min_sym_eigenvalue(&(&definitional - &jj * 0.25)));
    let carnot_dev = certificates
        .carnot
        .then(|| (printed_carnot_matrix(m, &jj) - &definitional).amax());
    TensorReport {
        model: m.name().to_string(),
        frak_r_matrix: to_rows(&definitional),
        frak_r_decomposed: to_rows(&assembled),
        decomposition_residual: residual,
        components: TensorComponents {
            ric_h: to_rows(&ric),
            delta_tor: to_rows(&delta),
            tor_tor: to_rows(&tt),
            j_j: to_rows(&jj),
        },
        k,
        yang_mills_residual: ym,
        symmetric: ym <= 1e-10,
        gb_total_bound: gb,
        carnot_formula_deviation: carnot_dev,
        certificates,
        step: m.step(),
    }
}

/// Lower bound `K` for `𝔯`.
pub fn k_lower_bound(m: &FoliatedModel) -> f64 {
    min_sym_eigenvalue(&frak_r_matrix(m))
}

pub fn gb_total_bound(m: &FoliatedModel) -> Result<f64> {
    if !m.certificates().totally_geodesic {
        return Err(Error::NotTotallyGeodesic);
    }
    let (_, _, _, jj) = components(m);
    Ok(min_sym_eigenvalue(&(frak_r_matrix(m) - jj * 0.25)))
}
