//! Exact group laws for the simply connected groups of the bundled models:
//! exponential coordinates with the (finite) Baker-Campbell-Hausdorff series
//! for nilpotent algebras and unit quaternions for `su(2)`.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::FoliatedModel;

/// A point of the group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum GroupPoint {
    /// Exponential coordinates in the model basis.
    Exp(Vec<f64>),
    /// Unit quaternion `(w, x, y, z)`.
    Quat([f64; 4]),
}

impl GroupPoint {
    /// Flat coordinate list used in CSV output.
    pub fn coords(&self) -> Vec<f64> {
        match self {
            GroupPoint::Exp(x) => x.clone(),
            GroupPoint::Quat(q) => q.to_vec(),
        }
    }
}

/// Right-nested bracket word `[w_1, [w_2, ... [w_{k-1}, w_k]]]` in letters
/// `0 = X`, `1 = Y`, with its merged coefficient.
#[derive(Debug, Clone)]
struct BchTerm {
    word: Vec<u8>,
    coefficient: f64,
}

#[derive(Debug, Clone)]
enum Law {
    Abelian,
    Nilpotent { terms: Vec<BchTerm> },
    /// `e_a -> (scale/2) q_a` for the imaginary quaternion units `q_a`.
    Su2 { scale: f64 },
}

/// Group law attached to a model.
#[derive(Debug, Clone)]
pub struct Group {
    dim: usize,
    law: Law,
    table: Vec<f64>,
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Dynkin's form of the BCH series truncated at total degree `class`.
fn dynkin_terms(class: usize) -> Vec<BchTerm> {
    let mut merged: BTreeMap<Vec<u8>, f64> = BTreeMap::new();
    // pairs (r, s) with r + s >= 1, total degree <= class
    fn recurse(
        class: usize,
        n_blocks: usize,
        blocks: &mut Vec<(usize, usize)>,
        degree: usize,
        merged: &mut BTreeMap<Vec<u8>, f64>,
    ) {
        if blocks.len() == n_blocks {
            let n = n_blocks as f64;
            let sign = if n_blocks % 2 == 1 { 1.0 } else { -1.0 };
            let denom: f64 = degree as f64
                * blocks
                    .iter()
                    .map(|&(r, s)| factorial(r) * factorial(s))
                    .product::<f64>();
            let mut word = Vec::with_capacity(degree);
            for &(r, s) in blocks.iter() {
                word.extend(std::iter::repeat_n(0u8, r));
                word.extend(std::iter::repeat_n(1u8, s));
            }
            *merged.entry(word).or_insert(0.0) += sign / (n * denom);
            return;
        }
        for r in 0..=(class - degree) {
            for s in 0..=(class - degree - r) {
                if r + s == 0 {
                    continue;
                }
                blocks.push((r, s));
                recurse(class, n_blocks, blocks, degree + r + s, merged);
                blocks.pop();
            }
        }
    }
    for n_blocks in 1..=class {
        recurse(class, n_blocks, &mut Vec::new(), 0, &mut merged);
    }
    merged
        .into_iter()
        .filter(|(w, c)| c.abs() > 1e-15 && !vanishes(w))
        .map(|(word, coefficient)| BchTerm { word, coefficient })
        .collect()
}

/// Right-nested words ending in a repeated letter are identically zero.
fn vanishes(word: &[u8]) -> bool {
    let k = word.len();
    k >= 2 && word[k - 1] == word[k - 2]
}

impl Group {
    pub fn new(m: &FoliatedModel) -> Result<Self> {
        let d = m.dim();
        let table = m.bracket_table().to_vec();
        let law = if table.iter().all(|&c| c == 0.0) {
            Law::Abelian
        } else if let Some(class) = m.nilpotency_class() {
            Law::Nilpotent {
                terms: dynkin_terms(class),
            }
        } else if let Some(scale) = su2_scale(&table, d) {
            Law::Su2 { scale }
        } else {
            return Err(Error::UnsupportedGroup(m.name().to_string()));
        };
        Ok(Self { dim: d, law, table })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_compact(&self) -> bool {
        matches!(self.law, Law::Su2 { .. })
    }

    pub fn is_abelian(&self) -> bool {
        matches!(self.law, Law::Abelian)
    }

    pub fn identity(&self) -> GroupPoint {
        match self.law {
            Law::Su2 { .. } => GroupPoint::Quat([1.0, 0.0, 0.0, 0.0]),
            _ => GroupPoint::Exp(vec![0.0; self.dim]),
        }
    }

    fn bracket(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut out = vec![0.0; d];
        for i in 0..d {
            if x[i] == 0.0 {
                continue;
            }
            for j in 0..d {
                let w = x[i] * y[j];
                if w == 0.0 {
                    continue;
                }
                let row = &self.table[(i * d + j) * d..(i * d + j + 1) * d];
                for k in 0..d {
                    out[k] += w * row[k];
                }
            }
        }
        out
    }

    fn bch(&self, x: &[f64], y: &[f64], terms: &[BchTerm]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for t in terms {
            let letter = |c: u8| if c == 0 { x } else { y };
            let k = t.word.len();
            let mut acc = letter(t.word[k - 1]).to_vec();
            for &c in t.word[..k - 1].iter().rev() {
                acc = self.bracket(letter(c), &acc);
            }
            for (o, a) in out.iter_mut().zip(&acc) {
                *o += t.coefficient * a;
            }
        }
        out
    }

    pub fn mul(&self, p: &GroupPoint, q: &GroupPoint) -> GroupPoint {
        match (&self.law, p, q) {
            (Law::Abelian, GroupPoint::Exp(a), GroupPoint::Exp(b)) => {
                GroupPoint::Exp(a.iter().zip(b).map(|(x, y)| x + y).collect())
            }
            (Law::Nilpotent { terms }, GroupPoint::Exp(a), GroupPoint::Exp(b)) => {
                GroupPoint::Exp(self.bch(a, b, terms))
            }
            (Law::Su2 { .. }, GroupPoint::Quat(a), GroupPoint::Quat(b)) => {
                GroupPoint::Quat(normalize(qmul(a, b)))
            }
            _ => panic!("group point representation does not match the group law"),
        }
    }

    /// `x <- x exp(omega)` without intermediate allocations; `scratch` must
    /// hold at least `3 * dim` entries.
    pub fn right_mul_exp(&self, x: &mut GroupPoint, omega: &[f64], scratch: &mut [f64]) {
        match (&self.law, x) {
            (Law::Abelian, GroupPoint::Exp(a)) => {
                a.iter_mut().zip(omega).for_each(|(p, q)| *p += q);
            }
            (Law::Nilpotent { terms }, GroupPoint::Exp(a)) => {
                let d = self.dim;
                let (out, rest) = scratch.split_at_mut(d);
                let (acc, tmp) = rest.split_at_mut(d);
                let tmp = &mut tmp[..d];
                out.iter_mut().for_each(|v| *v = 0.0);
                for t in terms {
                    let k = t.word.len();
                    let letter = |c: u8| if c == 0 { &a[..] } else { omega };
                    acc.copy_from_slice(letter(t.word[k - 1]));
                    for &c in t.word[..k - 1].iter().rev() {
                        self.bracket_into(letter(c), acc, tmp);
                        acc.copy_from_slice(tmp);
                    }
                    for (o, v) in out.iter_mut().zip(acc.iter()) {
                        *o += t.coefficient * v;
                    }
                }
                a.copy_from_slice(out);
            }
            (Law::Su2 { scale }, GroupPoint::Quat(q)) => {
                let e = su2_exp(*scale, omega);
                *q = normalize(qmul(q, &e));
            }
            _ => panic!("group point representation does not match the group law"),
        }
    }

    fn bracket_into(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        let d = self.dim;
        out.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..d {
            if x[i] == 0.0 {
                continue;
            }
            for j in 0..d {
                let w = x[i] * y[j];
                if w == 0.0 {
                    continue;
                }
                let row = &self.table[(i * d + j) * d..(i * d + j + 1) * d];
                for k in 0..d {
                    out[k] += w * row[k];
                }
            }
        }
    }

    pub fn inverse(&self, p: &GroupPoint) -> GroupPoint {
        match p {
            GroupPoint::Exp(a) => GroupPoint::Exp(a.iter().map(|v| -v).collect()),
            GroupPoint::Quat(q) => GroupPoint::Quat([q[0], -q[1], -q[2], -q[3]]),
        }
    }

    /// `p^{-1} q`.
    pub fn between(&self, p: &GroupPoint, q: &GroupPoint) -> GroupPoint {
        self.mul(&self.inverse(p), q)
    }

    /// Group exponential of a model-basis algebra element.
    pub fn exp(&self, v: &[f64]) -> GroupPoint {
        match self.law {
            Law::Su2 { scale } => GroupPoint::Quat(su2_exp(scale, v)),
            _ => GroupPoint::Exp(v.to_vec()),
        }
    }

    /// Principal logarithm in model coordinates.
    pub fn log(&self, p: &GroupPoint) -> Vec<f64> {
        match (&self.law, p) {
            (Law::Su2 { scale }, GroupPoint::Quat(q)) => {
                let s = (q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
                let th = s.atan2(q[0]);
                let f = if s < 1e-12 {
                    1.0 / q[0].abs().max(1e-300)
                } else {
                    th / s
                };
                [q[1], q[2], q[3]]
                    .iter()
                    .map(|c| 2.0 / scale * f * c)
                    .collect()
            }
            (_, GroupPoint::Exp(x)) => x.clone(),
            _ => panic!("group point representation does not match the group law"),
        }
    }

    /// Builds a point from flat coordinates (exponential coordinates, or a
    /// quaternion that is normalised here).
    pub fn point_from_coords(&self, c: &[f64]) -> Result<GroupPoint> {
        match self.law {
            Law::Su2 { .. } => {
                if c.len() != 4 {
                    return Err(Error::Dimension {
                        expected: 4,
                        actual: c.len(),
                    });
                }
                let n = c.iter().map(|x| x * x).sum::<f64>().sqrt();
                if !(n > 0.0) {
                    return Err(Error::DomainError("zero quaternion".into()));
                }
                Ok(GroupPoint::Quat([c[0] / n, c[1] / n, c[2] / n, c[3] / n]))
            }
            _ => {
                if c.len() != self.dim {
                    return Err(Error::Dimension {
                        expected: self.dim,
                        actual: c.len(),
                    });
                }
                Ok(GroupPoint::Exp(c.to_vec()))
            }
        }
    }

    /// Distance of two points in the ambient coordinate space, used only as
    /// a sanity measure (quaternions up to sign are not identified).
    pub fn coordinate_gap(&self, p: &GroupPoint, q: &GroupPoint) -> f64 {
        p.coords()
            .iter()
            .zip(q.coords())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Detects `[e_a, e_b] = c e_k` for cyclic `(a, b, k)` with one constant `c`.
fn su2_scale(table: &[f64], d: usize) -> Option<f64> {
    if d != 3 {
        return None;
    }
    let c = table[5]; // [e_0, e_1] along e_2
    if c == 0.0 {
        return None;
    }
    let mut expect = vec![0.0; 27];
    for (a, b, k) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
        expect[(a * 3 + b) * 3 + k] = c;
        expect[(b * 3 + a) * 3 + k] = -c;
    }
    let ok = table
        .iter()
        .zip(&expect)
        .all(|(x, y)| (x - y).abs() <= 1e-12 * c.abs());
    ok.then_some(c)
}

fn su2_exp(scale: f64, v: &[f64]) -> [f64; 4] {
    let w = [0.5 * scale * v[0], 0.5 * scale * v[1], 0.5 * scale * v[2]];
    let th = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
    // sin(th)/th with a series near zero
    let sc = if th < 1e-4 {
        1.0 - th * th / 6.0 + th.powi(4) / 120.0
    } else {
        th.sin() / th
    };
    normalize([th.cos(), sc * w[0], sc * w[1], sc * w[2]])
}

fn qmul(a: &[f64; 4], b: &[f64; 4]) -> [f64; 4] {
    [
        a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
        a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
        a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
        a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0],
    ]
}

fn normalize(q: [f64; 4]) -> [f64; 4] {
    let n = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
    [q[0] / n, q[1] / n, q[2] / n, q[3] / n]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;

    #[test]
    fn heisenberg_law_matches_closed_form() {
        let g = Group::new(&bundled::heisenberg()).unwrap();
        let p = GroupPoint::Exp(vec![0.3, -1.1, 0.7]);
        let q = GroupPoint::Exp(vec![-0.4, 0.2, 2.0]);
        let expect = [-0.1, -0.9, 2.7 + 0.5 * (0.3 * 0.2 - (-1.1) * (-0.4))];
        let GroupPoint::Exp(r) = g.mul(&p, &q) else { panic!() };
        for k in 0..3 {
            assert!((r[k] - expect[k]).abs() < 1e-14);
        }
    }

    #[test]
    fn engel_law_is_associative() {
        let g = Group::new(&bundled::engel()).unwrap();
        let a = GroupPoint::Exp(vec![0.3, -1.1, 0.7, 0.2]);
        let b = GroupPoint::Exp(vec![-0.4, 0.2, 2.0, -1.0]);
        let c = GroupPoint::Exp(vec![1.3, 0.5, -0.6, 0.9]);
        let l = g.mul(&g.mul(&a, &b), &c);
        let r = g.mul(&a, &g.mul(&b, &c));
        assert!(g.coordinate_gap(&l, &r) < 1e-13);
        let e = g.mul(&a, &g.inverse(&a));
        assert!(g.coordinate_gap(&e, &g.identity()) < 1e-15);
    }

    #[test]
    fn su2_exp_is_homomorphic_on_lines() {
        let g = Group::new(&bundled::su2_round()).unwrap();
        let v = [0.3, -0.2, 0.5];
        let a = g.exp(&v);
        let b = g.exp(&v.map(|x| 2.0 * x));
        let aa = g.mul(&a, &a);
        assert!(g.coordinate_gap(&aa, &b) < 1e-14);
        let back = g.log(&a);
        for k in 0..3 {
            assert!((back[k] - v[k]).abs() < 1e-14);
        }
    }

    #[test]
    fn su2_bracket_matches_quaternion_commutator() {
        // d/ds d/dt exp(s e1) exp(t e2) exp(-s e1) at 0 equals [e1, e2] = 2 e3
        let g = Group::new(&bundled::su2_round()).unwrap();
        let h = 1e-4;
        let conj = |s: f64, t: f64| {
            let a = g.exp(&[s, 0.0, 0.0]);
            g.mul(&g.mul(&a, &g.exp(&[0.0, t, 0.0])), &g.inverse(&a))
        };
        let l = |s: f64| g.log(&conj(s, h));
        let d: Vec<f64> = l(h)
            .iter()
            .zip(l(-h))
            .map(|(a, b)| (a - b) / (2.0 * h * h))
            .collect();
        assert!((d[2] - 2.0).abs() < 1e-4, "{d:?}");
    }
}
