//! Structure constants of a metric Lie algebra expressed in an orthonormal,
//! block-adapted frame. Every geometric kernel in the crate works in these
//! coordinates, where the metric is the identity and the first `n` slots of
//! [`OrthoAlgebra::horizontal`] mark the horizontal frame vectors.

/// Bilinear map `(x, y) -> sum_{a,b} x_a y_b T[a][b]` stored densely as `d^3` reals.
#[derive(Debug, Clone, PartialEq)]
pub struct BilinearTable {
    dim: usize,
    data: Vec<f64>,
}

impl BilinearTable {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim * dim],
        }
    }

    /// Tabulates `f(e_a, e_b)` over the frame.
    pub fn from_fn(dim: usize, mut f: impl FnMut(&[f64], &[f64]) -> Vec<f64>) -> Self {
        let mut table = Self::zeros(dim);
        let mut ea = vec![0.0; dim];
        let mut eb = vec![0.0; dim];
        for a in 0..dim {
            ea.iter_mut().for_each(|v| *v = 0.0);
            ea[a] = 1.0;
            for b in 0..dim {
                eb.iter_mut().for_each(|v| *v = 0.0);
                eb[b] = 1.0;
                let out = f(&ea, &eb);
                table.data[(a * dim + b) * dim..(a * dim + b + 1) * dim].copy_from_slice(&out);
            }
        }
        table
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn entry(&self, a: usize, b: usize) -> &[f64] {
        let d = self.dim;
        &self.data[(a * d + b) * d..(a * d + b + 1) * d]
    }

    pub fn apply(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.apply_into(x, y, &mut out);
        out
    }

    pub fn apply_into(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        let d = self.dim;
        out.iter_mut().for_each(|v| *v = 0.0);
        for a in 0..d {
            if x[a] == 0.0 {
                continue;
            }
            for b in 0..d {
                let w = x[a] * y[b];
                if w == 0.0 {
                    continue;
                }
                let row = &self.data[(a * d + b) * d..(a * d + b + 1) * d];
                for (o, t) in out.iter_mut().zip(row) {
                    *o += w * t;
                }
            }
        }
    }

    /// Linear map `y -> T(x, y)` as a row-major `d x d` matrix (`out = M y`).
    pub fn left_matrix(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut m = vec![0.0; d * d];
        for a in 0..d {
            if x[a] == 0.0 {
                continue;
            }
            for b in 0..d {
                let row = &self.data[(a * d + b) * d..(a * d + b + 1) * d];
                for k in 0..d {
                    m[k * d + b] += x[a] * row[k];
                }
            }
        }
        m
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Lie algebra in an orthonormal frame adapted to `H (+) V`.
#[derive(Debug, Clone)]
pub struct OrthoAlgebra {
    dim: usize,
    horizontal: Vec<bool>,
    h_idx: Vec<usize>,
    v_idx: Vec<usize>,
    /// Nonzero structure constants `[f_a, f_b] = c f_k` as `(a, b, k, c)`.
    sparse: Vec<(usize, usize, usize, f64)>,
    table: BilinearTable,
}

impl OrthoAlgebra {
    /// `constants[(a*d + b)*d + k]` is the `f_k` coefficient of `[f_a, f_b]`.
    pub fn new(dim: usize, horizontal: Vec<bool>, constants: Vec<f64>) -> Self {
        assert_eq!(horizontal.len(), dim);
        assert_eq!(constants.len(), dim * dim * dim);
        let h_idx = (0..dim).filter(|&a| horizontal[a]).collect();
        let v_idx = (0..dim).filter(|&a| !horizontal[a]).collect();
        let mut sparse = Vec::new();
        for a in 0..dim {
            for b in 0..dim {
                for k in 0..dim {
                    let c = constants[(a * dim + b) * dim + k];
                    if c != 0.0 {
                        sparse.push((a, b, k, c));
                    }
                }
            }
        }
        Self {
            dim,
            horizontal,
            h_idx,
            v_idx,
            sparse,
            table: BilinearTable {
                dim,
                data: constants,
            },
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Rank `n` of the horizontal distribution.
    #[inline]
    pub fn n_horizontal(&self) -> usize {
        self.h_idx.len()
    }

    #[inline]
    pub fn is_horizontal(&self, a: usize) -> bool {
        self.horizontal[a]
    }

    pub fn horizontal_indices(&self) -> &[usize] {
        &self.h_idx
    }

    pub fn vertical_indices(&self) -> &[usize] {
        &self.v_idx
    }

    pub fn bracket_table(&self) -> &BilinearTable {
        &self.table
    }

    pub fn is_abelian(&self) -> bool {
        self.sparse.is_empty()
    }

    #[inline]
    pub fn constant(&self, a: usize, b: usize, k: usize) -> f64 {
        self.table.data[(a * self.dim + b) * self.dim + k]
    }

    pub fn bracket(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.bracket_into(x, y, &mut out);
        out
    }

    pub fn bracket_into(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for &(a, b, k, c) in &self.sparse {
            out[k] += c * x[a] * y[b];
        }
    }

    /// Metric adjoint of `ad_x`: `<ad*_x u, w> = <u, [x, w]>`.
    pub fn ad_star(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.ad_star_into(x, u, &mut out);
        out
    }

    pub fn ad_star_into(&self, x: &[f64], u: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for &(a, b, k, c) in &self.sparse {
            out[b] += c * x[a] * u[k];
        }
    }

    pub fn project_h(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.horizontal)
            .map(|(&v, &h)| if h { v } else { 0.0 })
            .collect()
    }

    pub fn project_v(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.horizontal)
            .map(|(&v, &h)| if h { 0.0 } else { v })
            .collect()
    }

    pub fn basis(&self, a: usize) -> Vec<f64> {
        let mut e = vec![0.0; self.dim];
        e[a] = 1.0;
        e
    }
}

#[inline]
pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

#[inline]
pub fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn add(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a + b).collect()
}

pub fn sub(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

pub fn scale(alpha: f64, x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| alpha * v).collect()
}

pub fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Row-major `d x d` matrix times vector.
pub fn mat_vec(m: &[f64], x: &[f64]) -> Vec<f64> {
    let d = x.len();
    (0..d).map(|i| dot(&m[i * d..(i + 1) * d], x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn heisenberg() -> OrthoAlgebra {
        let mut c = vec![0.0; 27];
        let at = |a: usize, b: usize, k: usize| (a * 3 + b) * 3 + k;
        c[at(0, 1, 2)] = 1.0;
        c[at(1, 0, 2)] = -1.0;
        OrthoAlgebra::new(3, vec![true, true, false], c)
    }

    #[test]
    fn ad_star_is_metric_adjoint() {
        let g = heisenberg();
        let x = [0.3, -1.2, 0.7];
        let u = [1.1, 0.4, -0.9];
        for b in 0..3 {
            let w = g.basis(b);
            let lhs = dot(&g.ad_star(&x, &u), &w);
            let rhs = dot(&u, &g.bracket(&x, &w));
            assert!((lhs - rhs).abs() < 1e-15);
        }
    }

    #[test]
    fn left_matrix_matches_apply() {
        let g = heisenberg();
        let t = g.bracket_table();
        let x = [0.5, 2.0, -1.0];
        let y = [-0.25, 1.0, 3.0];
        let m = t.left_matrix(&x);
        let lhs = mat_vec(&m, &y);
        let rhs = t.apply(&x, &y);
        for k in 0..3 {
            assert!((lhs[k] - rhs[k]).abs() < 1e-15);
        }
    }
}
