//! Particle positions stored as a flat row-major `N × d` array.

use std::cmp::Ordering;

use crate::error::{check_finite, Error, Result};

/// `N` particles in `d` dimensions. All coordinates are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    n: usize,
    dim: usize,
    data: Vec<f64>,
}

/// Generic finite point set; same layout as an ensemble.
pub type PointSet = ParticleEnsemble;

impl ParticleEnsemble {
    pub fn new(n: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || dim == 0 {
            return Err(Error::InvalidParameter(format!(
                "ensemble needs N >= 1 and d >= 1 (got N = {n}, d = {dim})"
            )));
        }
        if data.len() != n * dim {
            return Err(Error::SizeMismatch {
                left: data.len(),
                right: n * dim,
            });
        }
        check_finite(&data, "particle coordinates")?;
        Ok(Self { n, dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(rows.len(), dim, data)
    }

    /// All particles at the same location.
    pub fn constant(n: usize, point: &[f64]) -> Result<Self> {
        let data = point
            .iter()
            .copied()
            .cycle()
            .take(n * point.len())
            .collect();
        Self::new(n, point.len(), data)
    }

    /// Caller guarantees finiteness and shape.
    pub(crate) fn from_raw(n: usize, dim: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), n * dim);
        Self { n, dim, data }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    /// Row `i` of the result is row `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::SizeMismatch {
                left: perm.len(),
                right: self.n,
            });
        }
        let mut seen = vec![false; self.n];
        let mut data = Vec::with_capacity(self.data.len());
        for &p in perm {
            if p >= self.n || std::mem::replace(&mut seen[p], true) {
                return Err(Error::InvalidParameter("not a permutation".into()));
            }
            data.extend_from_slice(self.row(p));
        }
        Ok(Self::from_raw(self.n, self.dim, data))
    }

    /// `N⁻¹ Σᵢ ‖xᵢ‖²`.
    pub fn second_moment(&self) -> f64 {
        let total: f64 = self
            .rows()
            .map(|r| r.iter().map(|v| v * v).sum::<f64>())
            .sum();
        total / self.n as f64
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for r in self.rows() {
            for (a, b) in m.iter_mut().zip(r) {
                *a += b;
            }
        }
        m.iter_mut().for_each(|v| *v /= self.n as f64);
        m
    }

    /// Largest absolute coordinate and the particle holding it.
    pub fn max_abs(&self) -> (usize, f64) {
        let mut best = (0, 0.0_f64);
        for (i, r) in self.rows().enumerate() {
            for v in r {
                if v.abs() > best.1 || v.is_nan() {
                    best = (i, v.abs());
                }
            }
        }
        best
    }

    /// Particle indices sorted lexicographically by position.
    ///
    /// Pairwise reductions run in this order, which depends only on the
    /// multiset of positions; relabeling particles leaves every sum bit-identical.
    pub fn canonical_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.n).collect();
        order.sort_by(|&a, &b| lex_cmp(self.row(a), self.row(b)).then(a.cmp(&b)));
        order
    }
}

pub(crate) fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    Ordering::Equal
}
