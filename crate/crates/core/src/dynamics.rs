//! Finite-particle SVGD: the drift map `𝐓`, the discrete update
//! `x̲ ← x̲ - η𝐓(x̲)`, the continuous flow `ẋᵢ = -𝐓ᵢ(x̲)` under fixed-step
//! integration, the step-size schedule, restricted initialization and the
//! a-priori bound trackers.
//!
//! `𝐓ᵢ(x̲) = N⁻¹ Σⱼ [k(xᵢ, xⱼ) ∇V(xⱼ) - ∇₂k(xᵢ, xⱼ)] = -N⁻¹ Σⱼ Φ(xᵢ, xⱼ)`.
//!
//! Every `Σⱼ` runs in the ensemble's canonical (lexicographic position) order
//! with a single accumulator, so results do not depend on particle labels or
//! on how replicates are scheduled across threads.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::ensemble::ParticleEnsemble;
use crate::error::{check_dim, check_finite, Error, Result};
use crate::kernel::KernelModel;
use crate::potential::PotentialModel;

/// Coordinates beyond this magnitude abort integration.
pub const BLOWUP_THRESHOLD: f64 = 1e12;
pub const DEFAULT_DT: f64 = 0.05;
pub const DEFAULT_REJECTION_BUDGET: usize = 1000;
/// Target number of recorded snapshots per run.
pub const SNAPSHOT_TARGET: usize = 512;

/// `Φ(z, w) = -k(z, w) ∇V(w) + ∇₂k(z, w)`.
pub fn drift_phi(
    kernel: &KernelModel,
    potential: &PotentialModel,
    z: &[f64],
    w: &[f64],
) -> Result<Vec<f64>> {
    check_models(kernel, potential)?;
    let d = kernel.dim();
    check_dim(d, z.len())?;
    check_dim(d, w.len())?;
    check_finite(z, "drift argument")?;
    check_finite(w, "drift argument")?;
    let mut g12 = vec![0.0; d];
    let mut g21 = vec![0.0; d];
    let k = kernel.pair_into(z, w, &mut g12, &mut g21);
    let mut gv = vec![0.0; d];
    potential.grad_into(w, &mut gv);
    Ok(g12.iter().zip(&gv).map(|(g, v)| -k * v + g).collect())
}

pub(crate) fn check_models(kernel: &KernelModel, potential: &PotentialModel) -> Result<()> {
    check_dim(kernel.dim(), potential.dim())
}

/// Reusable buffers for repeated drift evaluations.
#[derive(Debug, Default, Clone)]
pub struct DriftWorkspace {
    order: Vec<usize>,
    sorted: Vec<f64>,
    grad_v: Vec<f64>,
    acc: Vec<f64>,
    g12: Vec<f64>,
    g21: Vec<f64>,
}

impl DriftWorkspace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Writes `𝐓(x̲)` for the flat `n × d` positions into `out`.
    pub(crate) fn drift_into(
        &mut self,
        kernel: &KernelModel,
        potential: &PotentialModel,
        positions: &[f64],
        n: usize,
        out: &mut [f64],
    ) -> Result<()> {
        let d = kernel.dim();
        debug_assert_eq!(positions.len(), n * d);
        let row = |i: usize| &positions[i * d..(i + 1) * d];

        self.order.clear();
        self.order.extend(0..n);
        self.order
            .sort_by(|&a, &b| crate::ensemble::lex_cmp(row(a), row(b)).then(a.cmp(&b)));

        self.sorted.resize(n * d, 0.0);
        self.grad_v.resize(n * d, 0.0);
        for (p, &i) in self.order.iter().enumerate() {
            let dst = &mut self.sorted[p * d..(p + 1) * d];
            dst.copy_from_slice(row(i));
            potential.grad_into(dst, &mut self.grad_v[p * d..(p + 1) * d]);
        }

        self.acc.clear();
        self.acc.resize(n * d, 0.0);
        match d {
            1 => self.accumulate_fixed::<1>(kernel, n),
            2 => self.accumulate_fixed::<2>(kernel, n),
            3 => self.accumulate_fixed::<3>(kernel, n),
            4 => self.accumulate_fixed::<4>(kernel, n),
            _ => self.accumulate(kernel, n, d),
        }

        let nf = n as f64;
        for p in 0..n {
            let i = self.order[p];
            let dst = &mut out[i * d..(i + 1) * d];
            for (o, a) in dst.iter_mut().zip(&self.acc[p * d..(p + 1) * d]) {
                *o = a / nf;
            }
            if !dst.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFiniteDrift { particle: i });
            }
        }
        Ok(())
    }
}

impl DriftWorkspace {
    // Row p collects q < p while visiting earlier rows, then q = p, then
    // q > p, so every row is summed in ascending canonical order.
    fn accumulate(&mut self, kernel: &KernelModel, n: usize, d: usize) {
        self.g12.resize(d, 0.0);
        self.g21.resize(d, 0.0);
        for p in 0..n {
            let xp = &self.sorted[p * d..(p + 1) * d];
            let gvp = &self.grad_v[p * d..(p + 1) * d];
            let kpp = kernel.eval_diag_unchecked(xp);
            kernel.grad2_diag_into(xp, &mut self.g12);
            let (head, tail) = self.acc.split_at_mut((p + 1) * d);
            let accp = &mut head[p * d..];
            for l in 0..d {
                accp[l] += kpp * gvp[l] - self.g12[l];
            }
            for q in p + 1..n {
                let xq = &self.sorted[q * d..(q + 1) * d];
                let gvq = &self.grad_v[q * d..(q + 1) * d];
                let k = kernel.pair_into(xp, xq, &mut self.g12, &mut self.g21);
                let accq = &mut tail[(q - p - 1) * d..(q - p) * d];
                for l in 0..d {
                    accp[l] += k * gvq[l] - self.g12[l];
                    accq[l] += k * gvp[l] - self.g21[l];
                }
            }
        }
    }

    fn accumulate_fixed<const D: usize>(&mut self, kernel: &KernelModel, n: usize) {
        let (xs, _) = self.sorted.as_chunks::<D>();
        let (gv, _) = self.grad_v.as_chunks::<D>();
        let (acc, _) = self.acc.as_chunks_mut::<D>();
        let mut g12 = [0.0; D];
        let mut g21 = [0.0; D];
        for p in 0..n {
            let xp = &xs[p];
            let gvp = &gv[p];
            let kpp = kernel.eval_diag_unchecked(xp);
            kernel.grad2_diag_into(xp, &mut g12);
            let (head, tail) = acc.split_at_mut(p + 1);
            let mut accp = head[p];
            for l in 0..D {
                accp[l] += kpp * gvp[l] - g12[l];
            }
            for (off, accq) in tail.iter_mut().enumerate() {
                let q = p + 1 + off;
                let k = kernel.pair_fixed(xp, &xs[q], &mut g12, &mut g21);
                let gvq = &gv[q];
                for l in 0..D {
                    accp[l] += k * gvq[l] - g12[l];
                    accq[l] += k * gvp[l] - g21[l];
                }
            }
            head[p] = accp;
        }
    }
}

/// `𝐓(x̲)` as a flat `N × d` array in the ensemble's particle order.
pub fn svgd_map_t(
    kernel: &KernelModel,
    potential: &PotentialModel,
    ensemble: &ParticleEnsemble,
) -> Result<Vec<f64>> {
    check_models(kernel, potential)?;
    check_dim(kernel.dim(), ensemble.dim())?;
    let mut out = vec![0.0; ensemble.as_slice().len()];
    DriftWorkspace::new().drift_into(
        kernel,
        potential,
        ensemble.as_slice(),
        ensemble.len(),
        &mut out,
    )?;
    Ok(out)
}

/// One SVGD iteration `x̲′ = x̲ - η𝐓(x̲)`.
pub fn discrete_step(
    kernel: &KernelModel,
    potential: &PotentialModel,
    ensemble: &ParticleEnsemble,
    eta: f64,
) -> Result<ParticleEnsemble> {
    check_step_size(eta)?;
    let drift = svgd_map_t(kernel, potential, ensemble)?;
    let data = ensemble
        .as_slice()
        .iter()
        .zip(&drift)
        .map(|(x, t)| x - eta * t)
        .collect();
    ParticleEnsemble::new(ensemble.len(), ensemble.dim(), data)
}

fn check_step_size(eta: f64) -> Result<()> {
    if !(eta.is_finite() && eta >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "step size must be non-negative, got {eta}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    Euler,
    Rk4,
}

impl std::str::FromStr for Integrator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler" => Ok(Self::Euler),
            "rk4" => Ok(Self::Rk4),
            other => Err(Error::Config(format!("unknown integrator `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousOptions {
    pub t_end: f64,
    pub dt: f64,
    pub method: Integrator,
    /// Steps between recorded snapshots; defaults to `max(1, ⌊steps/512⌋)`.
    pub stride: Option<usize>,
    /// When set, integration stops once `max |𝐓ᵢₗ| < tol`; the remaining
    /// snapshots repeat the stationary ensemble.
    pub stationary_tol: Option<f64>,
}

impl ContinuousOptions {
    pub fn new(t_end: f64) -> Self {
        Self {
            t_end,
            dt: DEFAULT_DT,
            method: Integrator::Rk4,
            stride: None,
            stationary_tol: None,
        }
    }

    pub fn steps(&self) -> usize {
        if self.t_end <= 0.0 {
            0
        } else {
            (self.t_end / self.dt - 1e-9).ceil() as usize
        }
    }
}

pub fn default_stride(steps: usize) -> usize {
    (steps / SNAPSHOT_TARGET).max(1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub index: usize,
    pub time: f64,
    pub ensemble: ParticleEnsemble,
    /// `f = N⁻¹ Σᵢ V(xᵢ)`.
    pub mean_potential: f64,
    pub second_moment: f64,
    pub ksd2: Option<f64>,
}

/// Snapshots of one run at a fixed stride of step indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Free-form identifier carried into pooled samples.
    pub label: Option<String>,
    pub stride: usize,
    pub snapshots: Vec<Snapshot>,
    /// First step index from which the ensemble was found stationary.
    pub stationary_from: Option<usize>,
}

impl Trajectory {
    pub fn first(&self) -> &Snapshot {
        &self.snapshots[0]
    }

    pub fn last(&self) -> &Snapshot {
        self.snapshots
            .last()
            .expect("trajectory always holds the initial snapshot")
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn window(&self, t_lo: f64, t_hi: f64) -> impl Iterator<Item = &Snapshot> + '_ {
        self.snapshots
            .iter()
            .filter(move |s| s.time >= t_lo && s.time <= t_hi)
    }

    fn record(&mut self, potential: &PotentialModel, index: usize, time: f64, e: ParticleEnsemble) {
        let mean_potential = lyapunov_unchecked(potential, &e);
        let second_moment = e.second_moment();
        self.snapshots.push(Snapshot {
            index,
            time,
            ensemble: e,
            mean_potential,
            second_moment,
            ksd2: None,
        });
    }
}

fn check_blowup(positions: &[f64], d: usize, step: usize) -> Result<()> {
    for (i, row) in positions.chunks_exact(d).enumerate() {
        for v in row {
            if v.is_nan() || v.abs() > BLOWUP_THRESHOLD {
                return Err(Error::BlowUp {
                    step,
                    particle: i,
                    magnitude: v.abs(),
                });
            }
        }
    }
    Ok(())
}

/// Fixed-step integration of `ẋᵢ = -𝐓ᵢ(x̲)` on `[0, t_end]`.
pub fn integrate_continuous(
    kernel: &KernelModel,
    potential: &PotentialModel,
    initial: &ParticleEnsemble,
    options: &ContinuousOptions,
) -> Result<Trajectory> {
    check_models(kernel, potential)?;
    check_dim(kernel.dim(), initial.dim())?;
    if !(options.t_end.is_finite() && options.t_end >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "t_end must be non-negative, got {}",
            options.t_end
        )));
    }
    if !(options.dt.is_finite() && options.dt > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "dt must be positive, got {}",
            options.dt
        )));
    }
    let steps = options.steps();
    let stride = options
        .stride
        .unwrap_or_else(|| default_stride(steps))
        .max(1);
    let (n, d) = (initial.len(), initial.dim());
    let len = n * d;
    let dt = options.dt;

    let mut traj = Trajectory {
        label: None,
        stride,
        snapshots: Vec::with_capacity(steps / stride + 1),
        stationary_from: None,
    };
    traj.record(potential, 0, 0.0, initial.clone());

    let mut ws = DriftWorkspace::new();
    let mut x = initial.as_slice().to_vec();
    let mut k1 = vec![0.0; len];
    let (mut k2, mut k3, mut k4, mut stage) = match options.method {
        Integrator::Rk4 => (
            vec![0.0; len],
            vec![0.0; len],
            vec![0.0; len],
            vec![0.0; len],
        ),
        Integrator::Euler => Default::default(),
    };

    for step in 0..steps {
        ws.drift_into(kernel, potential, &x, n, &mut k1)?;
        if let Some(tol) = options.stationary_tol {
            if k1.iter().all(|v| v.abs() < tol) {
                traj.stationary_from = Some(step);
                let frozen = ParticleEnsemble::from_raw(n, d, x.clone());
                let first = (step / stride + 1) * stride;
                for index in (first..=steps).step_by(stride) {
                    traj.record(potential, index, index as f64 * dt, frozen.clone());
                }
                return Ok(traj);
            }
        }
        match options.method {
            Integrator::Euler => {
                for (xi, ki) in x.iter_mut().zip(&k1) {
                    *xi -= dt * ki;
                }
            }
            Integrator::Rk4 => {
                // the vector field is -𝐓, hence the signs
                for i in 0..len {
                    stage[i] = x[i] - 0.5 * dt * k1[i];
                }
                ws.drift_into(kernel, potential, &stage, n, &mut k2)?;
                for i in 0..len {
                    stage[i] = x[i] - 0.5 * dt * k2[i];
                }
                ws.drift_into(kernel, potential, &stage, n, &mut k3)?;
                for i in 0..len {
                    stage[i] = x[i] - dt * k3[i];
                }
                ws.drift_into(kernel, potential, &stage, n, &mut k4)?;
                for i in 0..len {
                    x[i] -= dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
            }
        }
        check_blowup(&x, d, step + 1)?;
        let index = step + 1;
        if index % stride == 0 {
            traj.record(
                potential,
                index,
                index as f64 * dt,
                ParticleEnsemble::from_raw(n, d, x.clone()),
            );
        }
    }
    Ok(traj)
}

/// Runs `iterations` discrete steps, calling `observer(n, x̲(n))` for every
/// `n` in `0..=iterations`.
pub fn run_discrete_observed<F>(
    kernel: &KernelModel,
    potential: &PotentialModel,
    initial: &ParticleEnsemble,
    eta: f64,
    iterations: usize,
    mut observer: F,
) -> Result<ParticleEnsemble>
where
    F: FnMut(usize, &ParticleEnsemble) -> Result<()>,
{
    check_models(kernel, potential)?;
    check_dim(kernel.dim(), initial.dim())?;
    check_step_size(eta)?;
    let (n, d) = (initial.len(), initial.dim());
    let mut ws = DriftWorkspace::new();
    let mut current = initial.clone();
    let mut drift = vec![0.0; n * d];
    observer(0, &current)?;
    for it in 0..iterations {
        ws.drift_into(kernel, potential, current.as_slice(), n, &mut drift)?;
        let next: Vec<f64> = current
            .as_slice()
            .iter()
            .zip(&drift)
            .map(|(x, t)| x - eta * t)
            .collect();
        check_blowup(&next, d, it + 1)?;
        current = ParticleEnsemble::from_raw(n, d, next);
        observer(it + 1, &current)?;
    }
    Ok(current)
}

/// Discrete iterations recorded at `stride` (time of snapshot `n` is `n`).
pub fn run_discrete(
    kernel: &KernelModel,
    potential: &PotentialModel,
    initial: &ParticleEnsemble,
    eta: f64,
    iterations: usize,
    stride: Option<usize>,
) -> Result<Trajectory> {
    let stride = stride.unwrap_or_else(|| default_stride(iterations)).max(1);
    let mut traj = Trajectory {
        label: None,
        stride,
        snapshots: Vec::with_capacity(iterations / stride + 1),
        stationary_from: None,
    };
    run_discrete_observed(kernel, potential, initial, eta, iterations, |it, e| {
        if it % stride == 0 {
            traj.record(potential, it, it as f64, e.clone());
        }
        Ok(())
    })?;
    Ok(traj)
}

/// Step size and iteration count of the finite-particle schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchedulePlan {
    pub step_size: f64,
    pub iterations: usize,
    pub scale: f64,
    pub alpha: f64,
    pub level: f64,
    pub n: usize,
    pub dim: usize,
}

/// `η = a (d^{(1+α)/(2(1-α))} + √d K^α + d)⁻¹ N^{-(1+α)/(1-α)}`,
/// `T = ⌈N^{2/(1-α)}⌉`.
pub fn schedule(a: f64, alpha: f64, level: f64, dim: usize, n: usize) -> Result<SchedulePlan> {
    if !(0.0..=0.5).contains(&alpha) {
        return Err(Error::InvalidParameter(format!(
            "growth exponent must lie in [0, 1/2], got {alpha}"
        )));
    }
    if !(a.is_finite() && a > 0.0) || level.is_nan() || level <= 0.0 || dim == 0 || n == 0 {
        return Err(Error::InvalidParameter(
            "schedule needs a > 0, K > 0, d >= 1, N >= 1".into(),
        ));
    }
    let d = dim as f64;
    let nf = n as f64;
    let denom = d.powf((1.0 + alpha) / (2.0 * (1.0 - alpha))) + d.sqrt() * level.powf(alpha) + d;
    let step_size = a / denom * nf.powf(-(1.0 + alpha) / (1.0 - alpha));
    let raw = nf.powf(2.0 / (1.0 - alpha));
    let nearest = raw.round();
    let iterations = if (raw - nearest).abs() <= 1e-9 * raw {
        nearest
    } else {
        raw.ceil()
    } as usize;
    Ok(SchedulePlan {
        step_size,
        iterations,
        scale: a,
        alpha,
        level,
        n,
        dim,
    })
}

/// Base distribution of initial particle positions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitSampler {
    /// Product Gaussian `N(0, s² I)`.
    Gaussian { scale: f64 },
    /// i.i.d. draws from the target.
    Target,
}

impl Default for InitSampler {
    fn default() -> Self {
        Self::Gaussian { scale: 2.0 }
    }
}

impl InitSampler {
    pub fn sample<R: Rng + ?Sized>(
        &self,
        potential: &PotentialModel,
        n: usize,
        rng: &mut R,
    ) -> Result<ParticleEnsemble> {
        match *self {
            Self::Gaussian { scale } => {
                if !(scale.is_finite() && scale > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "init scale must be positive, got {scale}"
                    )));
                }
                let d = potential.dim();
                let data = (0..n * d)
                    .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                ParticleEnsemble::new(n, d, data)
            }
            Self::Target => potential.sample_ensemble(n, rng),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestrictedInit {
    pub ensemble: ParticleEnsemble,
    /// Whole-ensemble draws made, including the accepted one.
    pub attempts: usize,
}

/// Rejection-samples whole ensembles from `base` until `N⁻¹ Σ V(xᵢ) ≤ K`.
pub fn restricted_init(
    potential: &PotentialModel,
    base: &InitSampler,
    level: f64,
    n: usize,
    seed: u64,
) -> Result<RestrictedInit> {
    restricted_init_with_budget(potential, base, level, n, seed, DEFAULT_REJECTION_BUDGET)
}

pub fn restricted_init_with_budget(
    potential: &PotentialModel,
    base: &InitSampler,
    level: f64,
    n: usize,
    seed: u64,
    budget: usize,
) -> Result<RestrictedInit> {
    if level.is_nan() {
        return Err(Error::InvalidParameter("restriction level is NaN".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for attempt in 1..=budget.max(1) {
        let ensemble = base.sample(potential, n, &mut rng)?;
        if lyapunov_unchecked(potential, &ensemble) <= level {
            return Ok(RestrictedInit {
                ensemble,
                attempts: attempt,
            });
        }
    }
    Err(Error::RejectionBudgetExceeded {
        attempts: budget.max(1),
        level,
    })
}

/// `f = N⁻¹ Σᵢ V(xᵢ)`.
pub fn lyapunov_f(potential: &PotentialModel, ensemble: &ParticleEnsemble) -> Result<f64> {
    potential.mean_value(ensemble)
}

fn lyapunov_unchecked(potential: &PotentialModel, ensemble: &ParticleEnsemble) -> f64 {
    let total: f64 = ensemble.rows().map(|r| potential.value_unchecked(r)).sum();
    total / ensemble.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCheck {
    pub observed: f64,
    pub bound: f64,
}

impl BoundCheck {
    pub fn holds(&self, rel_slack: f64) -> bool {
        self.observed <= self.bound * (1.0 + rel_slack)
    }
}

fn bounded_constants(kernel: &KernelModel, potential: &PotentialModel) -> Result<(f64, f64, f64)> {
    let b = kernel.derivative_bound().value().ok_or_else(|| {
        Error::Unsupported(format!("kernel {kernel} has no uniform derivative bound"))
    })?;
    let g = potential.growth();
    Ok((b, g.a, g.alpha))
}

/// `‖𝐓(x̲)‖²` against `2A²B²N f^{2α} + 2NB²d`.
pub fn drift_norm_bound(
    kernel: &KernelModel,
    potential: &PotentialModel,
    ensemble: &ParticleEnsemble,
) -> Result<BoundCheck> {
    let (b, a, alpha) = bounded_constants(kernel, potential)?;
    let drift = svgd_map_t(kernel, potential, ensemble)?;
    let observed = drift.iter().map(|v| v * v).sum();
    let f = lyapunov_unchecked(potential, ensemble);
    let n = ensemble.len() as f64;
    let d = ensemble.dim() as f64;
    let bound = 2.0 * a * a * b * b * n * f.powf(2.0 * alpha) + 2.0 * n * b * b * d;
    Ok(BoundCheck { observed, bound })
}

/// Largest `N·d` accepted by [`jacobian_hs_bound`].
pub const JACOBIAN_SIZE_LIMIT: usize = 256;

/// Finite-difference `‖J𝐓(x̲)‖²_HS` against
/// `4[2A²B²d(N+2) f^{2α} + 2B²d²(N+3) + 2B²dC_V²]`.
pub fn jacobian_hs_bound(
    kernel: &KernelModel,
    potential: &PotentialModel,
    ensemble: &ParticleEnsemble,
    fd_step: f64,
) -> Result<BoundCheck> {
    let (b, a, alpha) = bounded_constants(kernel, potential)?;
    check_models(kernel, potential)?;
    check_dim(kernel.dim(), ensemble.dim())?;
    let (n, d) = (ensemble.len(), ensemble.dim());
    let len = n * d;
    if len > JACOBIAN_SIZE_LIMIT {
        return Err(Error::SizeCap {
            size: len,
            cap: JACOBIAN_SIZE_LIMIT,
        });
    }
    if !(fd_step.is_finite() && fd_step > 0.0) {
        return Err(Error::InvalidParameter(
            "finite-difference step must be positive".into(),
        ));
    }
    let mut ws = DriftWorkspace::new();
    let mut plus = vec![0.0; len];
    let mut minus = vec![0.0; len];
    let mut x = ensemble.as_slice().to_vec();
    let mut observed = 0.0;
    for c in 0..len {
        let orig = x[c];
        x[c] = orig + fd_step;
        ws.drift_into(kernel, potential, &x, n, &mut plus)?;
        x[c] = orig - fd_step;
        ws.drift_into(kernel, potential, &x, n, &mut minus)?;
        x[c] = orig;
        observed += plus
            .iter()
            .zip(&minus)
            .map(|(p, m)| {
                let col = (p - m) / (2.0 * fd_step);
                col * col
            })
            .sum::<f64>();
    }
    let f = lyapunov_unchecked(potential, ensemble);
    let (nf, df) = (n as f64, d as f64);
    let cv = potential.hessian_bound();
    let bound = 4.0
        * (2.0 * a * a * b * b * df * (nf + 2.0) * f.powf(2.0 * alpha)
            + 2.0 * b * b * df * df * (nf + 3.0)
            + 2.0 * b * b * df * cv * cv);
    Ok(BoundCheck { observed, bound })
}
