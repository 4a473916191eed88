//! Exact Wasserstein distances between equal-size uniform samples: rank
//! coupling in one dimension and optimal assignment in general dimension.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::ensemble::{ParticleEnsemble, PointSet};
use crate::error::{check_dim, check_finite, Error, Result};
use crate::stein::TimeAveragedSample;

/// Largest sample size accepted by [`wasserstein_assign`].
pub const ASSIGNMENT_SIZE_CAP: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingResult {
    pub distance: f64,
    pub order: u32,
    /// `assignment[i] = j` couples `A[i]` with `B[j]` (assignment mode only).
    pub assignment: Option<Vec<usize>>,
}

fn check_order(s: u32) -> Result<()> {
    if s == 1 || s == 2 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "transport order must be 1 or 2, got {s}"
        )))
    }
}

#[inline]
fn cost(a: &[f64], b: &[f64], s: u32) -> f64 {
    let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    if s == 2 {
        sq
    } else {
        sq.sqrt()
    }
}

fn finish(total: f64, n: usize, s: u32) -> f64 {
    let mean = total / n as f64;
    if s == 2 {
        mean.sqrt()
    } else {
        mean
    }
}

/// `W_s` between two equal-size samples on the line, pairing by rank.
pub fn wasserstein_1d(a: &[f64], b: &[f64], s: u32) -> Result<CouplingResult> {
    check_order(s)?;
    if a.len() != b.len() {
        return Err(Error::SizeMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::InvalidParameter("samples must be non-empty".into()));
    }
    check_finite(a, "transport sample")?;
    check_finite(b, "transport sample")?;
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(f64::total_cmp);
    sb.sort_by(f64::total_cmp);
    let total: f64 = sa
        .iter()
        .zip(&sb)
        .map(|(x, y)| cost(std::slice::from_ref(x), std::slice::from_ref(y), s))
        .sum();
    Ok(CouplingResult {
        distance: finish(total, a.len(), s),
        order: s,
        assignment: None,
    })
}

/// `W_s` between two equal-size point sets by exact optimal assignment.
pub fn wasserstein_assign(a: &PointSet, b: &PointSet, s: u32) -> Result<CouplingResult> {
    check_order(s)?;
    if a.len() != b.len() {
        return Err(Error::SizeMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    check_dim(a.dim(), b.dim())?;
    let n = a.len();
    if n > ASSIGNMENT_SIZE_CAP {
        return Err(Error::SizeCap {
            size: n,
            cap: ASSIGNMENT_SIZE_CAP,
        });
    }
    let mut costs = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            costs[i * n + j] = cost(a.row(i), b.row(j), s);
        }
    }
    let assignment = solve_assignment(&costs, n);
    let total: f64 = assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| costs[i * n + j])
        .sum();
    Ok(CouplingResult {
        distance: finish(total, n, s),
        order: s,
        assignment: Some(assignment),
    })
}

/// Minimum-cost perfect matching on a dense `n × n` cost matrix by the
/// shortest augmenting path method with row/column potentials, `O(n³)`.
/// Returns `row -> column`.
pub fn solve_assignment(costs: &[f64], n: usize) -> Vec<usize> {
    assert_eq!(costs.len(), n * n, "cost matrix must be n × n");
    // 1-based with a virtual column 0.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut col_owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut min_to = vec![0.0f64; n + 1];
    let mut used = vec![false; n + 1];
    for row in 1..=n {
        col_owner[0] = row;
        let mut j0 = 0usize;
        min_to.iter_mut().for_each(|m| *m = f64::INFINITY);
        used.iter_mut().for_each(|x| *x = false);
        loop {
            used[j0] = true;
            let i0 = col_owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            let crow = &costs[(i0 - 1) * n..i0 * n];
            for j in 1..=n {
                if !used[j] {
                    let cur = crow[j - 1] - u[i0] - v[j];
                    if cur < min_to[j] {
                        min_to[j] = cur;
                        way[j] = j0;
                    }
                    if min_to[j] < delta {
                        delta = min_to[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[col_owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_to[j] -= delta;
                }
            }
            j0 = j1;
            if col_owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            col_owner[j0] = col_owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        assignment[col_owner[j] - 1] = j - 1;
    }
    assignment
}

/// Uniform draw of `n` pooled points without replacement, kept in pool order.
pub fn subsample(sample: &TimeAveragedSample, n: usize, seed: u64) -> Result<PointSet> {
    let pool = sample.len();
    if n == 0 || n > pool {
        return Err(Error::InvalidParameter(format!(
            "subsample size {n} must lie in 1..={pool}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picks = index::sample(&mut rng, pool, n).into_vec();
    picks.sort_unstable();
    let d = sample.dim();
    let mut data = Vec::with_capacity(n * d);
    for i in picks {
        data.extend_from_slice(sample.points.row(i));
    }
    Ok(ParticleEnsemble::from_raw(n, d, data))
}
