//! Kernelized Stein discrepancy of empirical measures, the discretization
//! functional `C*`, time-averaged samples and the Wasserstein rate exponent.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{check_models, Trajectory};
use crate::ensemble::{ParticleEnsemble, PointSet};
use crate::error::{check_dim, check_finite, Error, Result};
use crate::kernel::{dot, KernelModel};
use crate::potential::PotentialModel;

/// Negative KSD² values above this are treated as rounding and clamped to 0.
pub const KSD_FLOOR: f64 = -1e-12;
/// Smallest probe budget accepted by [`c_star_sup`].
pub const MIN_PROBE_BUDGET: usize = 1000;

/// Stein kernel
/// `u(x, y) = ⟨∇V(x), ∇V(y)⟩ k - ⟨∇V(x), ∇₂k⟩ - ⟨∇V(y), ∇₁k⟩ + ∇₁·∇₂k`.
pub fn stein_kernel_u(
    kernel: &KernelModel,
    potential: &PotentialModel,
    x: &[f64],
    y: &[f64],
) -> Result<f64> {
    check_models(kernel, potential)?;
    let d = kernel.dim();
    check_dim(d, x.len())?;
    check_dim(d, y.len())?;
    check_finite(x, "Stein kernel argument")?;
    check_finite(y, "Stein kernel argument")?;
    let mut gx = vec![0.0; d];
    let mut gy = vec![0.0; d];
    potential.grad_into(x, &mut gx);
    potential.grad_into(y, &mut gy);
    let mut g12 = vec![0.0; d];
    let mut g21 = vec![0.0; d];
    let (k, div) = kernel.pair_div_into(x, y, &mut g12, &mut g21);
    Ok(dot(&gx, &gy) * k - dot(&gx, &g12) - dot(&gy, &g21) + div)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KsdReport {
    pub ksd2: f64,
    pub n: usize,
    pub kernel: String,
    pub potential: String,
    /// Always `"v_statistic"`: diagonal terms included.
    pub mode: &'static str,
}

/// `KSD²(μ^N ‖ π) = N⁻² Σᵢⱼ u(xᵢ, xⱼ)`.
pub fn ksd_squared(
    kernel: &KernelModel,
    potential: &PotentialModel,
    ensemble: &ParticleEnsemble,
) -> Result<KsdReport> {
    check_models(kernel, potential)?;
    check_dim(kernel.dim(), ensemble.dim())?;
    let ksd2 = ksd2_unchecked(kernel, potential, ensemble);
    if !ksd2.is_finite() {
        return Err(Error::NonFinite { what: "KSD²" });
    }
    Ok(KsdReport {
        ksd2,
        n: ensemble.len(),
        kernel: kernel.to_string(),
        potential: potential.to_string(),
        mode: "v_statistic",
    })
}

/// Each unordered pair is evaluated once; rows run in canonical order.
pub(crate) fn ksd2_unchecked(
    kernel: &KernelModel,
    potential: &PotentialModel,
    ensemble: &ParticleEnsemble,
) -> f64 {
    let (n, d) = (ensemble.len(), ensemble.dim());
    let order = ensemble.canonical_order();
    let mut pts = Vec::with_capacity(n * d);
    for &i in &order {
        pts.extend_from_slice(ensemble.row(i));
    }
    let mut grads = vec![0.0; n * d];
    for p in 0..n {
        potential.grad_into(&pts[p * d..(p + 1) * d], &mut grads[p * d..(p + 1) * d]);
    }
    let total = match d {
        1 => ksd_sum_fixed::<1>(kernel, &pts, &grads),
        2 => ksd_sum_fixed::<2>(kernel, &pts, &grads),
        3 => ksd_sum_fixed::<3>(kernel, &pts, &grads),
        4 => ksd_sum_fixed::<4>(kernel, &pts, &grads),
        _ => ksd_sum(kernel, &pts, &grads, d),
    };
    let v = total / (n as f64 * n as f64);
    if (KSD_FLOOR..0.0).contains(&v) {
        0.0
    } else {
        v
    }
}

/// `Σ_p [u_pp + 2 Σ_{q>p} u_pq]` over points already in canonical order.
fn ksd_sum(kernel: &KernelModel, pts: &[f64], grads: &[f64], d: usize) -> f64 {
    let n = pts.len() / d;
    let mut g12 = vec![0.0; d];
    let mut g21 = vec![0.0; d];
    let mut total = 0.0;
    for p in 0..n {
        let xp = &pts[p * d..(p + 1) * d];
        let gp = &grads[p * d..(p + 1) * d];
        kernel.grad2_diag_into(xp, &mut g12);
        let kpp = kernel.eval_diag_unchecked(xp);
        let diag = dot(gp, gp) * kpp - 2.0 * dot(gp, &g12) + kernel.div12_unchecked(xp, xp);
        let mut off = 0.0;
        for q in p + 1..n {
            let xq = &pts[q * d..(q + 1) * d];
            let gq = &grads[q * d..(q + 1) * d];
            let (k, div) = kernel.pair_div_into(xp, xq, &mut g12, &mut g21);
            off += dot(gp, gq) * k - dot(gp, &g12) - dot(gq, &g21) + div;
        }
        total += diag + 2.0 * off;
    }
    total
}

#[inline(always)]
fn dot_fixed<const D: usize>(a: &[f64; D], b: &[f64; D]) -> f64 {
    let mut s = 0.0;
    for l in 0..D {
        s += a[l] * b[l];
    }
    s
}

fn ksd_sum_fixed<const D: usize>(kernel: &KernelModel, pts: &[f64], grads: &[f64]) -> f64 {
    let (xs, _) = pts.as_chunks::<D>();
    let (gs, _) = grads.as_chunks::<D>();
    let mut g12 = [0.0; D];
    let mut g21 = [0.0; D];
    let mut total = 0.0;
    for p in 0..xs.len() {
        let (xp, gp) = (&xs[p], &gs[p]);
        kernel.grad2_diag_into(xp, &mut g12);
        let kpp = kernel.eval_diag_unchecked(xp);
        let diag =
            dot_fixed(gp, gp) * kpp - 2.0 * dot_fixed(gp, &g12) + kernel.div12_unchecked(xp, xp);
        let mut off = 0.0;
        for q in p + 1..xs.len() {
            let gq = &gs[q];
            let (k, div) = kernel.pair_div_fixed(xp, &xs[q], &mut g12, &mut g21);
            off += dot_fixed(gp, gq) * k - dot_fixed(gp, &g12) - dot_fixed(gq, &g21) + div;
        }
        total += diag + 2.0 * off;
    }
    total
}

/// `C*(z) = ∇₂k(z, z)·∇V(z) + k(z, z) ΔV(z) - Δ₂k(z, z)`.
pub fn c_star(kernel: &KernelModel, potential: &PotentialModel, z: &[f64]) -> Result<f64> {
    check_models(kernel, potential)?;
    check_dim(kernel.dim(), z.len())?;
    check_finite(z, "C* argument")?;
    Ok(c_star_unchecked(kernel, potential, z))
}

fn c_star_unchecked(kernel: &KernelModel, potential: &PotentialModel, z: &[f64]) -> f64 {
    let d = kernel.dim();
    let mut gk = vec![0.0; d];
    let mut gv = vec![0.0; d];
    kernel.grad2_diag_into(z, &mut gk);
    let first = if kernel.is_translation_invariant() {
        0.0
    } else {
        potential.grad_into(z, &mut gv);
        dot(&gk, &gv)
    };
    first + kernel.eval_diag_unchecked(z) * potential.laplacian_unchecked(z)
        - kernel.laplacian2_diag_unchecked()
}

/// Result of [`c_star_sup`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CStarSup {
    /// Closed form `Ψ(0) ΔV - ΔΨ(0)` for a constant Laplacian.
    Exact(f64),
    /// Largest value over the probe set; a lower estimate of the supremum.
    Estimate { value: f64, probes: usize },
    /// `C*` grows quadratically for the bilinear composite kernel.
    Unbounded,
}

impl CStarSup {
    pub fn value(&self) -> Option<f64> {
        match *self {
            Self::Exact(v) | Self::Estimate { value: v, .. } => Some(v),
            Self::Unbounded => None,
        }
    }
}

/// `sup_z C*(z)` over a deterministic probe set.
pub fn c_star_sup(
    kernel: &KernelModel,
    potential: &PotentialModel,
    probe_budget: usize,
    seed: u64,
) -> Result<CStarSup> {
    c_star_sup_with_states(kernel, potential, probe_budget, seed, &[])
}

/// As [`c_star_sup`], additionally probing every particle of `visited`.
pub fn c_star_sup_with_states(
    kernel: &KernelModel,
    potential: &PotentialModel,
    probe_budget: usize,
    seed: u64,
    visited: &[&ParticleEnsemble],
) -> Result<CStarSup> {
    check_models(kernel, potential)?;
    if probe_budget < MIN_PROBE_BUDGET {
        return Err(Error::InvalidParameter(format!(
            "probe budget must be at least {MIN_PROBE_BUDGET}, got {probe_budget}"
        )));
    }
    if !kernel.is_translation_invariant() {
        return Ok(CStarSup::Unbounded);
    }
    let d = kernel.dim();
    if potential.has_constant_laplacian() {
        let z = vec![0.0; d];
        return Ok(CStarSup::Exact(c_star_unchecked(kernel, potential, &z)));
    }
    for e in visited {
        check_dim(d, e.dim())?;
    }

    // Lattice on [-R, R]^d with half the budget.
    const RADIUS: f64 = 8.0;
    let grid_budget = probe_budget / 2;
    let per_axis = ((grid_budget as f64).powf(1.0 / d as f64).floor() as usize).max(2);
    let cells = per_axis.checked_pow(d as u32).unwrap_or(usize::MAX);
    let use_grid = cells <= grid_budget;
    let remaining = probe_budget - if use_grid { cells } else { 0 };

    let mut best = f64::NEG_INFINITY;
    let mut probes = 0usize;
    let mut probe = |z: &[f64]| {
        best = best.max(c_star_unchecked(kernel, potential, z));
        probes += 1;
    };
    let mut z = vec![0.0; d];
    if use_grid {
        let step = 2.0 * RADIUS / (per_axis - 1) as f64;
        let mut idx = vec![0usize; d];
        loop {
            for l in 0..d {
                z[l] = -RADIUS + step * idx[l] as f64;
            }
            probe(&z);
            let mut l = 0;
            while l < d {
                idx[l] += 1;
                if idx[l] < per_axis {
                    break;
                }
                idx[l] = 0;
                l += 1;
            }
            if l == d {
                break;
            }
        }
    }
    // Random probes with scales spread over two decades.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..remaining {
        let scale = 0.1 * 100f64.powf(i as f64 / remaining.max(1) as f64);
        for v in z.iter_mut() {
            *v = scale * rand::Rng::sample::<f64, _>(&mut rng, rand_distr::StandardNormal);
        }
        probe(&z);
    }
    for e in visited {
        for row in e.rows() {
            probe(row);
        }
    }
    Ok(CStarSup::Estimate {
        value: best,
        probes,
    })
}

/// Uniform-weight pool of points drawn from recorded snapshots.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeAveragedSample {
    pub points: PointSet,
    pub weights: Vec<f64>,
    pub trajectory: Option<String>,
    pub t_lo: f64,
    pub t_hi: f64,
    pub stride: usize,
    pub snapshots: usize,
    /// `Some(k)` for pooled `k`-particle marginals; points then live in `ℝ^{kd}`.
    pub arity: Option<usize>,
}

impl TimeAveragedSample {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }
}

fn window_snapshots(
    trajectory: &Trajectory,
    t_lo: f64,
    t_hi: f64,
) -> Result<Vec<&crate::dynamics::Snapshot>> {
    let snaps: Vec<_> = if t_lo <= t_hi {
        trajectory.window(t_lo, t_hi).collect()
    } else {
        Vec::new()
    };
    if snaps.is_empty() {
        return Err(Error::EmptyWindow { lo: t_lo, hi: t_hi });
    }
    Ok(snaps)
}

/// Pools every particle of every snapshot with time in `[t_lo, t_hi]`.
pub fn time_average(trajectory: &Trajectory, t_lo: f64, t_hi: f64) -> Result<TimeAveragedSample> {
    let snaps = window_snapshots(trajectory, t_lo, t_hi)?;
    let d = snaps[0].ensemble.dim();
    let mut data = Vec::with_capacity(snaps.len() * snaps[0].ensemble.as_slice().len());
    for s in &snaps {
        data.extend_from_slice(s.ensemble.as_slice());
    }
    let total = data.len() / d;
    Ok(TimeAveragedSample {
        points: ParticleEnsemble::from_raw(total, d, data),
        weights: vec![1.0 / total as f64; total],
        trajectory: trajectory.label.clone(),
        t_lo,
        t_hi,
        stride: trajectory.stride,
        snapshots: snaps.len(),
        arity: None,
    })
}

/// Pools `(xᵢ, xⱼ) ∈ ℝ^{2d}`, `i ≠ j`, drawn without replacement from the
/// `N(N-1)` ordered pairs of each snapshot in the window. At most
/// `pairs_per_snapshot` pairs are taken per snapshot.
pub fn pair_pool(
    trajectory: &Trajectory,
    t_lo: f64,
    t_hi: f64,
    pairs_per_snapshot: usize,
    seed: u64,
) -> Result<TimeAveragedSample> {
    let snaps = window_snapshots(trajectory, t_lo, t_hi)?;
    let (n, d) = (snaps[0].ensemble.len(), snaps[0].ensemble.dim());
    if n < 2 || pairs_per_snapshot == 0 {
        return Err(Error::InvalidParameter(
            "pair pooling needs N >= 2 and at least one pair per snapshot".into(),
        ));
    }
    let all = n * (n - 1);
    let take = pairs_per_snapshot.min(all);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(snaps.len() * take * 2 * d);
    for s in &snaps {
        let mut picks = index::sample(&mut rng, all, take).into_vec();
        picks.sort_unstable();
        for code in picks {
            let i = code / (n - 1);
            let r = code % (n - 1);
            let j = if r >= i { r + 1 } else { r };
            data.extend_from_slice(s.ensemble.row(i));
            data.extend_from_slice(s.ensemble.row(j));
        }
    }
    let total = data.len() / (2 * d);
    Ok(TimeAveragedSample {
        points: ParticleEnsemble::from_raw(total, 2 * d, data),
        weights: vec![1.0 / total as f64; total],
        trajectory: trajectory.label.clone(),
        t_lo,
        t_hi,
        stride: trajectory.stride,
        snapshots: snaps.len(),
        arity: Some(2),
    })
}

/// Fills `ksd2` on every snapshot.
pub fn annotate_ksd(
    kernel: &KernelModel,
    potential: &PotentialModel,
    trajectory: &mut Trajectory,
) -> Result<()> {
    check_models(kernel, potential)?;
    for s in trajectory.snapshots.iter_mut() {
        check_dim(kernel.dim(), s.ensemble.dim())?;
        s.ksd2 = Some(ksd2_unchecked(kernel, potential, &s.ensemble));
    }
    Ok(())
}

/// Uniform average of snapshot KSD² over `[t_lo, t_hi]`; computes missing
/// values on the fly.
pub fn time_averaged_ksd2(
    kernel: &KernelModel,
    potential: &PotentialModel,
    trajectory: &Trajectory,
    t_lo: f64,
    t_hi: f64,
) -> Result<f64> {
    check_models(kernel, potential)?;
    let snaps = window_snapshots(trajectory, t_lo, t_hi)?;
    let mut total = 0.0;
    for s in &snaps {
        total += match s.ksd2 {
            Some(v) => v,
            None => ksd2_unchecked(kernel, potential, &s.ensemble),
        };
    }
    Ok(total / snaps.len() as f64)
}

/// `r(d) = [3(4d+1)/d]⁻¹ [3d/2 + 17/6 + ((d+1)/d + 5/3) ν]⁻¹`.
/// Returns NaN unless `d ≥ 1` and `ν > 0`.
pub fn w2_rate_exponent(d: usize, nu: f64) -> f64 {
    if d == 0 || nu.is_nan() || nu <= 0.0 {
        return f64::NAN;
    }
    let d = d as f64;
    let first = 3.0 * (4.0 * d + 1.0) / d;
    let second = 1.5 * d + 17.0 / 6.0 + ((d + 1.0) / d + 5.0 / 3.0) * nu;
    1.0 / (first * second)
}
