//! Ingestion and validation of homogeneous foliation models: a metric Lie
//! algebra with an orthogonal splitting `g = H (+) V`.

use std::ops::{Add, Mul, Neg, Sub};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::algebra::{dot, OrthoAlgebra};
use crate::connection::ConnectionTables;
use crate::error::{CertificateName, Error, Result};

/// Residual tolerance for every certificate predicate.
pub const CERT_TOL: f64 = 1e-12;
const RANK_TOL: f64 = 1e-9;

/// One structure constant `[e_i, e_j] += c e_k`, 1-based as in model files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructureConstant(pub usize, pub usize, pub usize, pub f64);

/// Model file contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    pub dim: usize,
    #[serde(default)]
    pub basis_labels: Vec<String>,
    #[serde(default)]
    pub structure_constants: Vec<StructureConstant>,
    pub horizontal_indices: Vec<usize>,
    #[serde(default)]
    pub vertical_indices: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grading: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

impl ModelSpec {
    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon.unwrap_or(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Certificates {
    pub antisymmetric: bool,
    pub jacobi: bool,
    pub vertical_subalgebra: bool,
    pub bundle_like: bool,
    pub bracket_generating: bool,
    pub minimal_leaves: bool,
    pub totally_geodesic: bool,
    pub carnot: bool,
}

impl Certificates {
    pub fn mandatory_hold(&self) -> bool {
        self.antisymmetric
            && self.jacobi
            && self.vertical_subalgebra
            && self.bundle_like
            && self.bracket_generating
            && self.minimal_leaves
    }
}

/// Coefficient vector in the model basis.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraVector(pub DVector<f64>);

impl AlgebraVector {
    pub fn new(coefficients: Vec<f64>) -> Self {
        Self(DVector::from_vec(coefficients))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(DVector::zeros(dim))
    }

    /// Basis vector `e_index` (0-based).
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut v = DVector::zeros(dim);
        v[index] = 1.0;
        Self(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coefficients(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.amax()
    }
}

impl Add for AlgebraVector {
    type Output = AlgebraVector;
    fn add(self, rhs: Self) -> Self {
        AlgebraVector(self.0 + rhs.0)
    }
}

impl Sub for AlgebraVector {
    type Output = AlgebraVector;
    fn sub(self, rhs: Self) -> Self {
        AlgebraVector(self.0 - rhs.0)
    }
}

impl Neg for AlgebraVector {
    type Output = AlgebraVector;
    fn neg(self) -> Self {
        AlgebraVector(-self.0)
    }
}

impl Mul<f64> for AlgebraVector {
    type Output = AlgebraVector;
    fn mul(self, rhs: f64) -> Self {
        AlgebraVector(self.0 * rhs)
    }
}

impl Mul<AlgebraVector> for f64 {
    type Output = AlgebraVector;
    fn mul(self, rhs: AlgebraVector) -> AlgebraVector {
        AlgebraVector(rhs.0 * self)
    }
}

/// A validated model. Immutable after construction.
#[derive(Debug, Clone)]
pub struct FoliatedModel {
    spec: ModelSpec,
    metric: DMatrix<f64>,
    /// `bracket_table[(i*d + j)*d + k]`: coefficient of `e_k` in `[e_i, e_j]`, model basis.
    bracket_table: Vec<f64>,
    certificates: Certificates,
    step: Option<usize>,
    generating_depth: Option<usize>,
    nilpotency_class: Option<usize>,
    /// Columns are the orthonormal frame vectors in model coordinates.
    frame: DMatrix<f64>,
    frame_inv: DMatrix<f64>,
    ortho: OrthoAlgebra,
    tables: ConnectionTables,
}

/// Strict validation: every mandatory certificate must hold.
pub fn validate_model(spec: ModelSpec) -> Result<FoliatedModel> {
    FoliatedModel::build(spec, true)
}

/// Builds a model recording, but not enforcing, the geometric certificates.
/// Antisymmetry and the Jacobi identity are still required. Used for flat
/// control models whose horizontal distribution does not generate.
pub fn validate_model_relaxed(spec: ModelSpec) -> Result<FoliatedModel> {
    FoliatedModel::build(spec, false)
}

pub fn bracket(m: &FoliatedModel, u: &AlgebraVector, v: &AlgebraVector) -> AlgebraVector {
    let d = m.dim();
    let mut out = vec![0.0; d];
    for i in 0..d {
        if u.0[i] == 0.0 {
            continue;
        }
        for j in 0..d {
            let w = u.0[i] * v.0[j];
            if w == 0.0 {
                continue;
            }
            for k in 0..d {
                out[k] += w * m.bracket_table[(i * d + j) * d + k];
            }
        }
    }
    AlgebraVector::new(out)
}

/// Metric adjoint of `ad_x`.
pub fn ad_star(m: &FoliatedModel, x: &AlgebraVector, u: &AlgebraVector) -> AlgebraVector {
    m.from_ortho(&m.ortho.ad_star(&m.to_ortho(x), &m.to_ortho(u)))
}

/// Scales the vertical metric block by `1/eps` and revalidates.
pub fn canonical_variation(m: &FoliatedModel, eps: f64) -> Result<FoliatedModel> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::NonPositiveEpsilon(eps));
    }
    let mut spec = m.spec.clone();
    let combined = spec.epsilon() * eps;
    spec.epsilon = if combined == 1.0 { None } else { Some(combined) };
    FoliatedModel::build(spec, m.certificates.mandatory_hold())
}

/// Orthogonal projections `(u_H, u_V)`.
pub fn split(m: &FoliatedModel, u: &AlgebraVector) -> (AlgebraVector, AlgebraVector) {
    let a = m.to_ortho(u);
    (
        m.from_ortho(&m.ortho.project_h(&a)),
        m.from_ortho(&m.ortho.project_v(&a)),
    )
}

impl FoliatedModel {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        validate_model(ModelSpec::from_path(path)?)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        validate_model(ModelSpec::from_json_str(s)?)
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn name(&self) -> &str {
        &self.spec.name
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    /// Rank of the horizontal distribution.
    pub fn n(&self) -> usize {
        self.ortho.n_horizontal()
    }

    pub fn m(&self) -> usize {
        self.dim() - self.n()
    }

    pub fn metric(&self) -> &DMatrix<f64> {
        &self.metric
    }

    pub fn bracket_table(&self) -> &[f64] {
        &self.bracket_table
    }

    pub fn certificates(&self) -> Certificates {
        self.certificates
    }

    /// Step of a Carnot model (depth of the stratification).
    pub fn step(&self) -> Option<usize> {
        self.step
    }

    /// Number of bracket levels needed for `H` to span the algebra.
    pub fn generating_depth(&self) -> Option<usize> {
        self.generating_depth
    }

    /// Nilpotency class, `None` when the algebra is not nilpotent.
    pub fn nilpotency_class(&self) -> Option<usize> {
        self.nilpotency_class
    }

    pub fn ortho(&self) -> &OrthoAlgebra {
        &self.ortho
    }

    pub fn tables(&self) -> &ConnectionTables {
        &self.tables
    }

    /// Orthonormal frame, one column per frame vector, in model coordinates.
    pub fn frame(&self) -> &DMatrix<f64> {
        &self.frame
    }

    pub fn inner(&self, u: &AlgebraVector, v: &AlgebraVector) -> f64 {
        u.0.dot(&(&self.metric * &v.0))
    }

    pub fn norm(&self, u: &AlgebraVector) -> f64 {
        self.inner(u, u).max(0.0).sqrt()
    }

    pub fn to_ortho(&self, u: &AlgebraVector) -> Vec<f64> {
        (&self.frame_inv * &u.0).as_slice().to_vec()
    }

    pub fn to_ortho_slice(&self, u: &[f64]) -> Vec<f64> {
        let d = self.dim();
        (0..d)
            .map(|a| (0..d).map(|i| self.frame_inv[(a, i)] * u[i]).sum())
            .collect()
    }

    pub fn from_ortho(&self, a: &[f64]) -> AlgebraVector {
        AlgebraVector::new(self.from_ortho_slice(a))
    }

    pub fn from_ortho_slice(&self, a: &[f64]) -> Vec<f64> {
        let d = self.dim();
        (0..d)
            .map(|i| (0..d).map(|b| self.frame[(i, b)] * a[b]).sum())
            .collect()
    }

    /// Orthonormal frame vector `a` in model coordinates.
    pub fn frame_vector(&self, a: usize) -> AlgebraVector {
        AlgebraVector(self.frame.column(a).into_owned())
    }

    fn build(spec: ModelSpec, strict: bool) -> Result<Self> {
        let d = spec.dim;
        check_well_formed(&spec)?;

        let mut horizontal = vec![false; d];
        for &i in &spec.horizontal_indices {
            horizontal[i - 1] = true;
        }

        let mut metric = match &spec.metric {
            Some(rows) => DMatrix::from_fn(d, d, |i, j| rows[i][j]),
            None => DMatrix::identity(d, d),
        };
        let eps = spec.epsilon();
        for i in 0..d {
            for j in 0..d {
                if !horizontal[i] && !horizontal[j] {
                    metric[(i, j)] /= eps;
                }
            }
        }

        let (bracket_table, antisym_witness) = assemble_brackets(&spec);
        if let Some(w) = antisym_witness {
            return Err(Error::ValidationFailure {
                certificate: CertificateName::Antisymmetric,
                witness: w,
            });
        }

        let frame = block_gram_schmidt(&metric, &spec)?;
        let frame_inv = frame
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Malformed("degenerate frame".into()))?;

        let mut ortho_c = vec![0.0; d * d * d];
        for a in 0..d {
            for b in 0..d {
                let mut model_vec = vec![0.0; d];
                for i in 0..d {
                    for j in 0..d {
                        let w = frame[(i, a)] * frame[(j, b)];
                        if w == 0.0 {
                            continue;
                        }
                        for k in 0..d {
                            model_vec[k] += w * bracket_table[(i * d + j) * d + k];
                        }
                    }
                }
                for c in 0..d {
                    ortho_c[(a * d + b) * d + c] =
                        (0..d).map(|k| frame_inv[(c, k)] * model_vec[k]).sum();
                }
            }
        }
        let ortho = OrthoAlgebra::new(d, horizontal.clone(), ortho_c);

        let mut failures: Vec<(CertificateName, [usize; 3])> = Vec::new();
        let jacobi = jacobi_witness(&ortho);
        if let Some(w) = jacobi {
            return Err(Error::ValidationFailure {
                certificate: CertificateName::Jacobi,
                witness: w,
            });
        }
        let vertical_subalgebra = vertical_subalgebra_witness(&ortho);
        if let Some(w) = vertical_subalgebra {
            failures.push((CertificateName::VerticalSubalgebra, w));
        }
        let bundle_like = bundle_like_witness(&ortho);
        if let Some(w) = bundle_like {
            failures.push((CertificateName::BundleLike, w));
        }
        let (generating_depth, generating_witness) = bracket_generating(&ortho);
        if let Some(w) = generating_witness {
            failures.push((CertificateName::BracketGenerating, w));
        }
        let minimal = minimal_leaves_witness(&ortho);
        if let Some(w) = minimal {
            failures.push((CertificateName::MinimalLeaves, w));
        }
        if strict {
            if let Some(&(certificate, witness)) = failures.first() {
                return Err(Error::ValidationFailure {
                    certificate,
                    witness,
                });
            }
        }

        let totally_geodesic = c_tensor_vanishes(&ortho);
        let carnot_step = spec
            .grading
            .as_ref()
            .and_then(|layers| carnot_step(&ortho, layers));

        let certificates = Certificates {
            antisymmetric: true,
            jacobi: true,
            vertical_subalgebra: vertical_subalgebra.is_none(),
            bundle_like: bundle_like.is_none(),
            bracket_generating: generating_witness.is_none(),
            minimal_leaves: minimal.is_none(),
            totally_geodesic,
            carnot: carnot_step.is_some(),
        };

        let nilpotency_class = nilpotency_class(&ortho);
        let tables = ConnectionTables::new(&ortho);
        Ok(Self {
            spec,
            metric,
            bracket_table,
            certificates,
            step: carnot_step,
            generating_depth,
            nilpotency_class,
            frame,
            frame_inv,
            ortho,
            tables,
        })
    }
}

fn check_well_formed(spec: &ModelSpec) -> Result<()> {
    let d = spec.dim;
    let bad = |msg: String| Err(Error::Malformed(msg));
    if d == 0 {
        return bad("dim must be positive".into());
    }
    if !spec.basis_labels.is_empty() && spec.basis_labels.len() != d {
        return bad(format!(
            "{} basis labels for dimension {d}",
            spec.basis_labels.len()
        ));
    }
    let mut seen = vec![0usize; d];
    for &i in spec.horizontal_indices.iter().chain(&spec.vertical_indices) {
        if i == 0 || i > d {
            return bad(format!("index {i} outside 1..={d}"));
        }
        seen[i - 1] += 1;
    }
    if let Some(pos) = seen.iter().position(|&c| c != 1) {
        return bad(format!(
            "horizontal and vertical indices must partition 1..={d} (index {} appears {} times)",
            pos + 1,
            seen[pos]
        ));
    }
    if spec.horizontal_indices.is_empty() {
        return bad("horizontal distribution is empty".into());
    }
    for sc in &spec.structure_constants {
        for idx in [sc.0, sc.1, sc.2] {
            if idx == 0 || idx > d {
                return bad(format!("structure constant index {idx} outside 1..={d}"));
            }
        }
        if !sc.3.is_finite() {
            return bad("non-finite structure constant".into());
        }
    }
    if let Some(eps) = spec.epsilon {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::NonPositiveEpsilon(eps));
        }
    }
    if let Some(rows) = &spec.metric {
        if rows.len() != d || rows.iter().any(|r| r.len() != d) {
            return bad(format!("metric must be {d}x{d}"));
        }
        let g = DMatrix::from_fn(d, d, |i, j| rows[i][j]);
        if (&g - g.transpose()).amax() > CERT_TOL {
            return bad("metric is not symmetric".into());
        }
        if g.clone().cholesky().is_none() {
            return bad("metric is not positive definite".into());
        }
        for &h in &spec.horizontal_indices {
            for &v in &spec.vertical_indices {
                if g[(h - 1, v - 1)].abs() > CERT_TOL {
                    return bad(format!(
                        "horizontal e{h} and vertical e{v} are not metric-orthogonal"
                    ));
                }
            }
        }
    }
    if let Some(layers) = &spec.grading {
        let mut seen = vec![0usize; d];
        for layer in layers {
            for &i in layer {
                if i == 0 || i > d {
                    return bad(format!("grading index {i} outside 1..={d}"));
                }
                seen[i - 1] += 1;
            }
        }
        if seen.iter().any(|&c| c != 1) {
            return bad("grading layers must partition the basis".into());
        }
        let mut first: Vec<usize> = layers.first().cloned().unwrap_or_default();
        let mut hor = spec.horizontal_indices.clone();
        first.sort_unstable();
        hor.sort_unstable();
        if first != hor {
            return bad("first grading layer must be the horizontal index set".into());
        }
        if let Some(rows) = &spec.metric {
            for (la, a) in layers.iter().enumerate() {
                for b in layers.iter().skip(la + 1) {
                    for &i in a {
                        for &j in b {
                            if rows[i - 1][j - 1].abs() > CERT_TOL {
                                return bad("grading layers are not metric-orthogonal".into());
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

/// Dense model-basis bracket table. Entries given for `(i, j)` imply the
/// `(j, i)` entry; an explicit `(j, i)` entry must agree with it.
fn assemble_brackets(spec: &ModelSpec) -> (Vec<f64>, Option<[usize; 3]>) {
    let d = spec.dim;
    let mut explicit = vec![None::<f64>; d * d * d];
    for sc in &spec.structure_constants {
        let idx = ((sc.0 - 1) * d + (sc.1 - 1)) * d + (sc.2 - 1);
        *explicit[idx].get_or_insert(0.0) += sc.3;
    }
    let mut table = vec![0.0; d * d * d];
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                let here = explicit[(i * d + j) * d + k];
                let mirror = explicit[(j * d + i) * d + k];
                let value = match (here, mirror) {
                    (Some(a), Some(b)) => {
                        if (a + b).abs() > CERT_TOL {
                            return (table, Some([i + 1, j + 1, k + 1]));
                        }
                        a
                    }
                    (Some(a), None) => a,
                    (None, Some(b)) => -b,
                    (None, None) => 0.0,
                };
                if i == j && value.abs() > CERT_TOL {
                    return (table, Some([i + 1, j + 1, k + 1]));
                }
                table[(i * d + j) * d + k] = value;
            }
        }
    }
    (table, None)
}

/// Gram-Schmidt inside the horizontal and vertical blocks; frame vector `a`
/// sits at the position of model basis vector `a`.
fn block_gram_schmidt(metric: &DMatrix<f64>, spec: &ModelSpec) -> Result<DMatrix<f64>> {
    let d = spec.dim;
    let mut frame = DMatrix::zeros(d, d);
    for block in [&spec.horizontal_indices, &spec.vertical_indices] {
        let mut done: Vec<DVector<f64>> = Vec::new();
        for &i in block {
            let mut v = DVector::zeros(d);
            v[i - 1] = 1.0;
            for u in &done {
                let c = u.dot(&(metric * &v));
                v -= u * c;
            }
            let nrm = v.dot(&(metric * &v)).sqrt();
            if !(nrm > 0.0) {
                return Err(Error::Malformed("degenerate metric block".into()));
            }
            v /= nrm;
            frame.set_column(i - 1, &v);
            done.push(v);
        }
    }
    Ok(frame)
}

fn jacobi_witness(g: &OrthoAlgebra) -> Option<[usize; 3]> {
    let d = g.dim();
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                let (ei, ej, ek) = (g.basis(i), g.basis(j), g.basis(k));
                let t1 = g.bracket(&g.bracket(&ei, &ej), &ek);
                let t2 = g.bracket(&g.bracket(&ej, &ek), &ei);
                let t3 = g.bracket(&g.bracket(&ek, &ei), &ej);
                let res = (0..d)
                    .map(|c| (t1[c] + t2[c] + t3[c]).abs())
                    .fold(0.0, f64::max);
                if res > CERT_TOL {
                    return Some([i + 1, j + 1, k + 1]);
                }
            }
        }
    }
    None
}

fn vertical_subalgebra_witness(g: &OrthoAlgebra) -> Option<[usize; 3]> {
    for &a in g.vertical_indices() {
        for &b in g.vertical_indices() {
            for &k in g.horizontal_indices() {
                if g.constant(a, b, k).abs() > CERT_TOL {
                    return Some([a + 1, b + 1, k + 1]);
                }
            }
        }
    }
    None
}

/// `(L_U g)(X, Y) = -<[U,X],Y> - <X,[U,Y]>` on left-invariant fields.
pub(crate) fn bundle_like_residual(g: &OrthoAlgebra, u: usize, x: usize, y: usize) -> f64 {
    -g.constant(u, x, y) - g.constant(u, y, x)
}

fn bundle_like_witness(g: &OrthoAlgebra) -> Option<[usize; 3]> {
    for &u in g.vertical_indices() {
        for &x in g.horizontal_indices() {
            for &y in g.horizontal_indices() {
                if bundle_like_residual(g, u, x, y).abs() > CERT_TOL {
                    return Some([u + 1, x + 1, y + 1]);
                }
            }
        }
    }
    None
}

/// `sum_i <D_{Z_i} Z_i, X> = -sum_i <[Z_i, X], Z_i>` for horizontal `X`.
pub(crate) fn minimality_residual(g: &OrthoAlgebra, x: usize) -> f64 {
    g.vertical_indices()
        .iter()
        .map(|&z| -g.constant(z, x, z))
        .sum()
}

fn minimal_leaves_witness(g: &OrthoAlgebra) -> Option<[usize; 3]> {
    for &x in g.horizontal_indices() {
        if minimality_residual(g, x).abs() > CERT_TOL {
            let z = g
                .vertical_indices()
                .iter()
                .copied()
                .find(|&z| g.constant(z, x, z).abs() > 0.0)
                .unwrap_or(x);
            return Some([x + 1, z + 1, z + 1]);
        }
    }
    None
}

fn rank(vectors: &[Vec<f64>], d: usize) -> usize {
    if vectors.is_empty() {
        return 0;
    }
    let m = DMatrix::from_fn(d, vectors.len(), |i, j| vectors[j][i]);
    m.svd(false, false).rank(RANK_TOL)
}

/// Orthonormal basis of the span (columns of U from an SVD).
fn span_basis(vectors: &[Vec<f64>], d: usize) -> Vec<Vec<f64>> {
    if vectors.is_empty() {
        return Vec::new();
    }
    let m = DMatrix::from_fn(d, vectors.len(), |i, j| vectors[j][i]);
    let svd = m.svd(true, false);
    let u = svd.u.expect("requested U");
    svd.singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > RANK_TOL)
        .map(|(c, _)| u.column(c).iter().copied().collect())
        .collect()
}

/// Returns the depth at which iterated brackets of `H` span the algebra, or a
/// witness `(h, h', k)` where `e_k` is the basis vector farthest from the span.
fn bracket_generating(g: &OrthoAlgebra) -> (Option<usize>, Option<[usize; 3]>) {
    let d = g.dim();
    let hor: Vec<Vec<f64>> = g.horizontal_indices().iter().map(|&a| g.basis(a)).collect();
    let mut span = span_basis(&hor, d);
    let mut depth = 1;
    while span.len() < d && depth <= d {
        let mut next = span.clone();
        for h in &hor {
            for s in &span {
                next.push(g.bracket(h, s));
            }
        }
        let grown = span_basis(&next, d);
        depth += 1;
        if grown.len() == span.len() {
            break;
        }
        span = grown;
    }
    if span.len() == d {
        return (Some(depth), None);
    }
    let (k, _) = (0..d)
        .map(|k| {
            let e = g.basis(k);
            let proj: f64 = span.iter().map(|s| dot(s, &e).powi(2)).sum();
            (k, 1.0 - proj)
        })
        .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
    let h = g.horizontal_indices();
    let h1 = h[0];
    let h2 = *h.get(1).unwrap_or(&h1);
    (None, Some([h1 + 1, h2 + 1, k + 1]))
}

/// `C` vanishes iff `<[X,Y],Z> + <Y,[X,Z]> = 0` for `X` horizontal, `Y,Z` vertical.
fn c_tensor_vanishes(g: &OrthoAlgebra) -> bool {
    for &x in g.horizontal_indices() {
        for &y in g.vertical_indices() {
            for &z in g.vertical_indices() {
                if (g.constant(x, y, z) + g.constant(x, z, y)).abs() > CERT_TOL {
                    return false;
                }
            }
        }
    }
    true
}

/// Checks `[V_1, V_j] = V_{j+1}` and `[V_1, V_s] = 0`; returns the step `s`.
fn carnot_step(g: &OrthoAlgebra, layers: &[Vec<usize>]) -> Option<usize> {
    let d = g.dim();
    let s = layers.len();
    let first: Vec<usize> = layers[0].iter().map(|i| i - 1).collect();
    for j in 0..s {
        let layer: Vec<usize> = layers[j].iter().map(|i| i - 1).collect();
        let mut images = Vec::new();
        for &a in &first {
            for &b in &layer {
                images.push(g.bracket(&g.basis(a), &g.basis(b)));
            }
        }
        if j + 1 == s {
            if images.iter().any(|v| crate::algebra::max_abs(v) > CERT_TOL) {
                return None;
            }
            continue;
        }
        let target: Vec<usize> = layers[j + 1].iter().map(|i| i - 1).collect();
        let outside = images.iter().any(|v| {
            (0..d)
                .filter(|k| !target.contains(k))
                .any(|k| v[k].abs() > CERT_TOL)
        });
        if outside || rank(&images, d) != target.len() {
            return None;
        }
    }
    Some(s)
}

/// Length of the lower central series, `None` if it stabilises above zero.
fn nilpotency_class(g: &OrthoAlgebra) -> Option<usize> {
    let d = g.dim();
    let all: Vec<Vec<f64>> = (0..d).map(|a| g.basis(a)).collect();
    let mut current = span_basis(&all, d);
    let mut class = 0;
    while !current.is_empty() {
        let mut next = Vec::new();
        for x in &all {
            for y in &current {
                next.push(g.bracket(x, y));
            }
        }
        let next = span_basis(&next, d);
        if next.len() == current.len() {
            return None;
        }
        class += 1;
        current = next;
    }
    Some(class)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;

    #[test]
    fn heisenberg_certificates() {
        let m = bundled::heisenberg();
        let c = m.certificates();
        assert!(c.mandatory_hold());
        assert!(c.totally_geodesic);
        assert!(c.carnot);
        assert_eq!(m.step(), Some(2));
        assert_eq!(m.nilpotency_class(), Some(2));
    }

    #[test]
    fn abelian_fails_bracket_generating() {
        let spec = bundled::spec("abelian3").unwrap();
        match validate_model(spec) {
            Err(Error::ValidationFailure { certificate, .. }) => {
                assert_eq!(certificate, CertificateName::BracketGenerating)
            }
            other => panic!("expected bracket_generating failure, got {other:?}"),
        }
    }

    #[test]
    fn su2_is_totally_geodesic_not_carnot() {
        let m = bundled::su2_round();
        let c = m.certificates();
        assert!(c.mandatory_hold());
        assert!(c.totally_geodesic);
        assert!(!c.carnot);
        assert_eq!(m.nilpotency_class(), None);
    }

    #[test]
    fn engel_is_step_three_and_not_totally_geodesic() {
        let m = bundled::engel();
        assert_eq!(m.step(), Some(3));
        assert!(!m.certificates().totally_geodesic);
        assert_eq!(m.generating_depth(), Some(3));
    }

    #[test]
    fn brackets_and_adjoints() {
        let h = bundled::heisenberg();
        let e = |i| AlgebraVector::basis(3, i);
        assert_eq!(bracket(&h, &e(0), &e(1)), e(2));
        let u = AlgebraVector::new(vec![0.3, -2.0, 1.5]);
        assert!(bracket(&h, &u, &u).max_abs() == 0.0);
        assert!((ad_star(&h, &e(0), &e(2)) - e(1)).max_abs() < 1e-15);
        assert!((ad_star(&h, &e(1), &e(2)) + e(0)).max_abs() < 1e-15);
        let s = bundled::su2_round();
        assert!((bracket(&s, &e(1), &e(2)) - 2.0 * e(0)).max_abs() < 1e-15);
    }

    #[test]
    fn split_projects_orthogonally() {
        let h = bundled::heisenberg();
        let (a, b) = split(&h, &AlgebraVector::new(vec![1.0, 0.0, 1.0]));
        assert_eq!(a, AlgebraVector::basis(3, 0));
        assert_eq!(b, AlgebraVector::basis(3, 2));
        let (z1, z2) = split(&h, &AlgebraVector::zeros(3));
        assert_eq!(z1.max_abs(), 0.0);
        assert_eq!(z2.max_abs(), 0.0);
    }

    #[test]
    fn canonical_variation_scales_vertical_block() {
        let h = bundled::heisenberg();
        assert!(matches!(
            canonical_variation(&h, 0.0),
            Err(Error::NonPositiveEpsilon(_))
        ));
        let same = canonical_variation(&h, 1.0).unwrap();
        assert_eq!(same.metric(), h.metric());
        assert_eq!(same.certificates(), h.certificates());
        let h2 = canonical_variation(&h, 2.0).unwrap();
        let z = AlgebraVector::basis(3, 2);
        assert!((h2.inner(&z, &z) - 0.5).abs() < 1e-15);
        assert!(h2.certificates().bundle_like && h2.certificates().minimal_leaves);
    }

    #[test]
    fn antisymmetry_violation_is_reported() {
        let spec = ModelSpec {
            name: "bad".into(),
            dim: 3,
            basis_labels: vec![],
            structure_constants: vec![
                StructureConstant(1, 2, 3, 1.0),
                StructureConstant(2, 1, 3, 1.0),
            ],
            horizontal_indices: vec![1, 2],
            vertical_indices: vec![3],
            metric: None,
            grading: None,
            epsilon: None,
        };
        match validate_model(spec) {
            Err(Error::ValidationFailure {
                certificate,
                witness,
            }) => {
                assert_eq!(certificate, CertificateName::Antisymmetric);
                assert_eq!(witness, [1, 2, 3]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn jacobi_violation_is_reported() {
        // [e1,e2]=e3, [e2,e3]=e1, [e1,e3]=e1 breaks Jacobi.
        let spec = ModelSpec {
            name: "bad".into(),
            dim: 3,
            basis_labels: vec![],
            structure_constants: vec![
                StructureConstant(1, 2, 3, 1.0),
                StructureConstant(2, 3, 1, 1.0),
                StructureConstant(1, 3, 1, 1.0),
            ],
            horizontal_indices: vec![1, 2],
            vertical_indices: vec![3],
            metric: None,
            grading: None,
            epsilon: None,
        };
        assert!(matches!(
            validate_model(spec),
            Err(Error::ValidationFailure {
                certificate: CertificateName::Jacobi,
                ..
            })
        ));
    }

    #[test]
    fn malformed_partition_is_rejected() {
        let mut spec = bundled::spec("heisenberg").unwrap();
        spec.vertical_indices = vec![2];
        assert!(matches!(validate_model(spec), Err(Error::Malformed(_))));
    }

    #[test]
    fn non_identity_metric_inside_block() {
        let mut spec = bundled::spec("heisenberg").unwrap();
        spec.metric = Some(vec![
            vec![2.0, 0.5, 0.0],
            vec![0.5, 1.0, 0.0],
            vec![0.0, 0.0, 3.0],
        ]);
        spec.grading = None;
        let m = validate_model(spec).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                let ip = m.inner(&m.frame_vector(a), &m.frame_vector(b));
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((ip - expect).abs() < 1e-14);
            }
        }
    }
}
