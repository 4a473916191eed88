//! N-sweeps over independent replicates.
//!
//! Replicate seeds come from [`replicate_seed`]; replicates run on a rayon
//! pool of `workers` threads and are aggregated in `(N, replicate)` order, so
//! every output byte is independent of the worker count.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dynamics::{
    integrate_continuous, restricted_init, run_discrete, run_discrete_observed, schedule,
    ContinuousOptions, Trajectory,
};
use crate::ensemble::ParticleEnsemble;
use crate::error::{Error, Result};
use crate::harness::config::{
    Bandwidth, Criterion, DynamicsMode, ExperimentConfig, ExperimentKind, KernelSpec,
};
use crate::harness::fit::{fit_loglog, level_stats, RateFit};
use crate::harness::io::{
    content_version, metrics_jsonl, read_metrics_jsonl, read_summary, write_bytes, write_summary,
    FitSummary, MetricRecord, RejectionStats, SeedEntry, Summary,
};
use crate::kernel::KernelModel;
use crate::potential::PotentialModel;
use crate::stein::{
    c_star_sup, ksd2_unchecked, pair_pool, time_average, time_averaged_ksd2, CStarSup,
};
use crate::transport::{subsample, wasserstein_assign};

pub const METRICS_FILE: &str = "metrics.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `s = splitmix(splitmix(splitmix(master) ⊕ N) ⊕ replicate)`.
pub fn replicate_seed(master: u64, n: usize, replicate: usize) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ n as u64) ^ replicate as u64)
}

/// Seed of the target reference sample of one replicate. It does not depend
/// on `N`, so every grid level is compared against the same reference.
pub fn reference_seed(master: u64, replicate: usize) -> u64 {
    splitmix64(splitmix64(master ^ 0xA5A5_5EED_F00D) ^ replicate as u64)
}

const fn derive(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0xD6E8_FEB8_6659_FD93);
    z = (z ^ (z >> 32)).wrapping_mul(0xD6E8_FEB8_6659_FD93);
    z ^ (z >> 32)
}

const STREAM_SUBSAMPLE: u64 = 1;
const STREAM_PAIRS: u64 = 2;
const STREAM_PRODUCT: u64 = 3;

/// Result of one `(N, replicate)` task for one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateResult {
    pub n: usize,
    pub replicate: usize,
    pub seed: u64,
    pub value: Option<f64>,
    pub blowup: bool,
    pub wall_time_s: f64,
    pub init_attempts: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub summary: Summary,
    pub records: Vec<MetricRecord>,
    pub fit: Option<RateFit>,
    /// True when existing outputs with a matching config hash were reused.
    pub resumed: bool,
}

impl ExperimentOutcome {
    /// 0 pass, 2 criterion failed, 4 failure quota exceeded.
    pub fn exit_code(&self) -> i32 {
        if self.summary.quota_exceeded {
            4
        } else if self.summary.pass {
            0
        } else {
            2
        }
    }
}

/// Runs one experiment; see [`run_experiments`].
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let mut out = run_experiments(std::slice::from_ref(config))?;
    Ok(out.pop().expect("one outcome per config"))
}

/// Runs several experiments, simulating once per `(N, replicate)` for
/// experiments whose simulations coincide.
pub fn run_experiments(configs: &[ExperimentConfig]) -> Result<Vec<ExperimentOutcome>> {
    for c in configs {
        check_mode(c)?;
    }
    let mut dirs: Vec<&Path> = configs
        .iter()
        .filter_map(|c| c.output_dir.as_deref())
        .collect();
    dirs.sort();
    if dirs.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Config(
            "experiments must not share an output directory".into(),
        ));
    }

    let mut outcomes: Vec<Option<ExperimentOutcome>> = vec![None; configs.len()];
    let mut pending = Vec::new();
    for (i, c) in configs.iter().enumerate() {
        match try_resume(c)? {
            Some(o) => outcomes[i] = Some(o),
            None => pending.push(i),
        }
    }

    while let Some(&first) = pending.first() {
        let key = simulation_key(&configs[first]);
        let (group, rest): (Vec<usize>, Vec<usize>) = pending
            .iter()
            .partition(|&&i| simulation_key(&configs[i]) == key);
        pending = rest;
        let group_cfgs: Vec<&ExperimentConfig> = group.iter().map(|&i| &configs[i]).collect();
        let results = run_group(&group_cfgs)?;
        for (slot, (cfg, res)) in group.iter().zip(group_cfgs.iter().zip(results)) {
            outcomes[*slot] = Some(finish(cfg, res)?);
        }
    }
    Ok(outcomes
        .into_iter()
        .map(|o| o.expect("every config handled"))
        .collect())
}

fn check_mode(c: &ExperimentConfig) -> Result<()> {
    let want = match c.kind {
        ExperimentKind::KsdRateDt => DynamicsMode::Discrete,
        ExperimentKind::IidBaseline => return Ok(()),
        _ => DynamicsMode::Continuous,
    };
    if c.dynamics.mode != want {
        return Err(Error::Config(format!(
            "experiment {} needs dynamics.mode = {}",
            c.kind,
            if want == DynamicsMode::Discrete {
                "discrete"
            } else {
                "continuous"
            }
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SimClass {
    Iid,
    FixedN,
    Horizon,
    Discrete,
}

fn sim_class(kind: ExperimentKind) -> SimClass {
    match kind {
        ExperimentKind::IidBaseline => SimClass::Iid,
        ExperimentKind::KsdRateCt | ExperimentKind::MomentBound => SimClass::FixedN,
        ExperimentKind::W2Trend | ExperimentKind::PocTrend => SimClass::Horizon,
        ExperimentKind::KsdRateDt => SimClass::Discrete,
    }
}

/// Everything that determines the simulated ensembles of a sweep.
fn simulation_key(c: &ExperimentConfig) -> String {
    let class = sim_class(c.kind);
    let horizon = if class == SimClass::Horizon {
        c.horizon_eta
    } else {
        0.0
    };
    format!(
        "{class:?}|{:?}|{:?}|{:?}|{:?}|{}|{:?}|{}|{horizon}",
        c.kernel, c.potential, c.dynamics, c.init, c.seed, c.grid, c.replicates
    )
}

fn try_resume(c: &ExperimentConfig) -> Result<Option<ExperimentOutcome>> {
    let Some(dir) = &c.output_dir else {
        return Ok(None);
    };
    let (sp, mp) = (dir.join(SUMMARY_FILE), dir.join(METRICS_FILE));
    if !sp.exists() || !mp.exists() {
        return Ok(None);
    }
    let Ok(summary) = read_summary(&sp) else {
        return Ok(None);
    };
    let bytes = std::fs::read(&mp).map_err(|e| Error::io(&mp, e))?;
    if summary.config_hash != c.hash() || summary.content_version != content_version(&bytes) {
        return Ok(None);
    }
    let records = read_metrics_jsonl(&mp)?;
    let points = successful_points(&records);
    Ok(Some(ExperimentOutcome {
        fit: fit_loglog(&points).ok(),
        summary,
        records,
        resumed: true,
    }))
}

fn successful_points(records: &[MetricRecord]) -> Vec<(usize, f64)> {
    records
        .iter()
        .filter_map(|r| r.value.map(|v| (r.n, v)))
        .collect()
}

fn run_group(cfgs: &[&ExperimentConfig]) -> Result<Vec<Vec<ReplicateResult>>> {
    let lead = cfgs[0];
    let tasks: Vec<(usize, usize)> = lead
        .grid
        .iter()
        .flat_map(|&n| (0..lead.replicates).map(move |r| (n, r)))
        .collect();
    let workers = cfgs.iter().map(|c| c.workers).max().unwrap_or(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let per_task: Vec<Vec<ReplicateResult>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(n, r)| run_task(cfgs, n, r))
            .collect::<Result<Vec<_>>>()
    })?;
    let mut per_cfg: Vec<Vec<ReplicateResult>> = vec![Vec::with_capacity(tasks.len()); cfgs.len()];
    for task in per_task {
        for (slot, res) in per_cfg.iter_mut().zip(task) {
            slot.push(res);
        }
    }
    Ok(per_cfg)
}

fn is_run_failure(e: &Error) -> bool {
    matches!(
        e,
        Error::BlowUp { .. } | Error::NonFiniteDrift { .. } | Error::RejectionBudgetExceeded { .. }
    )
}

/// Simulates one `(N, replicate)` and evaluates every experiment's metric.
fn run_task(
    cfgs: &[&ExperimentConfig],
    n: usize,
    replicate: usize,
) -> Result<Vec<ReplicateResult>> {
    let lead = cfgs[0];
    let seed = replicate_seed(lead.seed, n, replicate);
    let start = Instant::now();
    let mut init_attempts = None;
    let values: Result<Vec<f64>> = (|| {
        let potential = lead.potential.build()?;
        match sim_class(lead.kind) {
            SimClass::Iid => {
                let sample = potential.reference_sampler(n, seed)?;
                let kernel = lead.kernel.build(potential.dim(), Some(&sample))?;
                let v = ksd2_unchecked(&kernel, &potential, &sample);
                Ok(vec![v; cfgs.len()])
            }
            SimClass::FixedN => {
                let t_end = lead.dynamics.t_end.unwrap_or(n as f64);
                let (kernel, traj) = simulate_continuous(lead, &potential, n, t_end, seed)?;
                cfgs.iter()
                    .map(|c| match c.kind {
                        ExperimentKind::KsdRateCt => {
                            time_averaged_ksd2(&kernel, &potential, &traj, 0.0, t_end)
                        }
                        _ => Ok(mean_second_moment(&traj, t_end)),
                    })
                    .collect()
            }
            SimClass::Horizon => {
                let m = lead.horizon_particles(n);
                let t_end = lead.dynamics.t_end.unwrap_or(m as f64);
                let (_, traj) = simulate_continuous(lead, &potential, m, t_end, seed)?;
                let reference = reference_seed(lead.seed, replicate);
                cfgs.iter()
                    .map(|c| horizon_metric(c, &potential, &traj, t_end, seed, reference))
                    .collect()
            }
            SimClass::Discrete => {
                let (v, attempts) = discrete_metric(lead, &potential, n, seed)?;
                init_attempts = Some(attempts);
                Ok(vec![v; cfgs.len()])
            }
        }
    })();
    let elapsed = start.elapsed().as_secs_f64();
    let values: Vec<Option<f64>> = match values {
        Ok(v) => v.into_iter().map(Some).collect(),
        Err(e) if is_run_failure(&e) => vec![None; cfgs.len()],
        Err(e) => return Err(e),
    };
    Ok(cfgs
        .iter()
        .zip(values)
        .map(|(c, value)| ReplicateResult {
            n,
            replicate,
            seed,
            blowup: value.is_none(),
            value,
            wall_time_s: if c.record_wall_time { elapsed } else { 0.0 },
            init_attempts,
        })
        .collect())
}

/// Initial ensemble of `particles` points and its continuous-time trajectory.
pub fn simulate_continuous(
    config: &ExperimentConfig,
    potential: &PotentialModel,
    particles: usize,
    t_end: f64,
    seed: u64,
) -> Result<(KernelModel, Trajectory)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = config.init.sample(potential, particles, &mut rng)?;
    let kernel = config.kernel.build(potential.dim(), Some(&init))?;
    let options = ContinuousOptions {
        t_end,
        dt: config.dynamics.dt,
        method: config.dynamics.method,
        stride: config.dynamics.stride,
        stationary_tol: config.dynamics.stationary_tol,
    };
    let traj = integrate_continuous(&kernel, potential, &init, &options)?;
    Ok((kernel, traj))
}

fn mean_second_moment(traj: &Trajectory, t_end: f64) -> f64 {
    let snaps: Vec<_> = traj.window(0.0, t_end).collect();
    snaps.iter().map(|s| s.second_moment).sum::<f64>() / snaps.len() as f64
}

fn horizon_metric(
    c: &ExperimentConfig,
    potential: &PotentialModel,
    traj: &Trajectory,
    t_end: f64,
    seed: u64,
    reference: u64,
) -> Result<f64> {
    let nt = c.transport_n;
    match c.kind {
        ExperimentKind::W2Trend => {
            let pool = time_average(traj, 0.0, t_end)?;
            let sub = subsample(&pool, nt, derive(seed, STREAM_SUBSAMPLE))?;
            let target = potential.reference_sampler(nt, reference)?;
            Ok(wasserstein_assign(&sub, &target, 2)?.distance)
        }
        _ => {
            let pool = pair_pool(
                traj,
                0.0,
                t_end,
                c.pairs_per_snapshot,
                derive(seed, STREAM_PAIRS),
            )?;
            let sub = subsample(&pool, nt, derive(seed, STREAM_SUBSAMPLE))?;
            let target = product_reference(potential, nt, reference)?;
            Ok(wasserstein_assign(&sub, &target, 1)?.distance)
        }
    }
}

/// `n` draws from `π ⊗ π` as points of `ℝ^{2d}`.
pub fn product_reference(
    potential: &PotentialModel,
    n: usize,
    seed: u64,
) -> Result<ParticleEnsemble> {
    let a = potential.reference_sampler(n, seed)?;
    let b = potential.reference_sampler(n, derive(seed, STREAM_PRODUCT))?;
    let mut data = Vec::with_capacity(2 * a.as_slice().len());
    for (x, y) in a.rows().zip(b.rows()) {
        data.extend_from_slice(x);
        data.extend_from_slice(y);
    }
    ParticleEnsemble::new(n, 2 * potential.dim(), data)
}

/// Iteration-averaged KSD² `T⁻¹ Σ_{n<T} KSD²(μ_n)` along the schedule.
fn discrete_metric(
    c: &ExperimentConfig,
    potential: &PotentialModel,
    n: usize,
    seed: u64,
) -> Result<(f64, usize)> {
    let level = c.level();
    let plan = schedule(c.dynamics.a, c.dynamics.alpha, level, potential.dim(), n)?;
    let eta = c.dynamics.eta.unwrap_or(plan.step_size);
    let iterations = c.dynamics.iterations.unwrap_or(plan.iterations).max(1);
    let init = restricted_init(potential, &c.init, level, n, seed)?;
    let kernel = c.kernel.build(potential.dim(), Some(&init.ensemble))?;
    let mut total = 0.0;
    run_discrete_observed(
        &kernel,
        potential,
        &init.ensemble,
        eta,
        iterations - 1,
        |_, e| {
            total += ksd2_unchecked(&kernel, potential, e);
            Ok(())
        },
    )?;
    Ok((total / iterations as f64, init.attempts))
}

fn finish(c: &ExperimentConfig, results: Vec<ReplicateResult>) -> Result<ExperimentOutcome> {
    let records: Vec<MetricRecord> = results
        .iter()
        .map(|r| MetricRecord {
            experiment: c.kind.as_str().to_string(),
            n: r.n,
            replicate: r.replicate,
            seed: r.seed,
            metric_name: c.kind.metric_name().to_string(),
            value: r.value,
            wall_time_s: r.wall_time_s,
            blowup: r.blowup,
        })
        .collect();
    let points = successful_points(&records);
    let per_n = level_stats(&points);
    let (fit, fit_error) = match fit_loglog(&points) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let failures = records.iter().filter(|r| r.value.is_none()).count();
    let quota_exceeded = failures as f64 > c.failure_quota * records.len() as f64;
    let criterion_met = match c.criterion {
        Criterion::Slope { min, max, r2_min } => fit.as_ref().is_some_and(|f| {
            f.slope >= min && f.slope <= max && r2_min.is_none_or(|r| f.r_squared >= r)
        }),
        Criterion::Decreasing => {
            per_n.len() == c.grid.len() && per_n.windows(2).all(|w| w[1].median < w[0].median)
        }
    };
    let (c_star, c_star_status) = c_star_report(c)?;
    let restricted = (sim_class(c.kind) == SimClass::Discrete).then(|| {
        let attempts: usize = results.iter().filter_map(|r| r.init_attempts).sum();
        let accepted = results.iter().filter(|r| r.init_attempts.is_some()).count();
        RejectionStats {
            attempts,
            accepted,
            rejection_rate: if attempts == 0 {
                0.0
            } else {
                1.0 - accepted as f64 / attempts as f64
            },
        }
    });
    let bytes = metrics_jsonl(&records)?;
    let summary = Summary {
        experiment: c.kind.as_str().to_string(),
        config_hash: c.hash(),
        content_version: content_version(&bytes),
        fit: fit.as_ref().map(|f| FitSummary {
            slope: f.slope,
            intercept: f.intercept,
            r_squared: f.r_squared,
        }),
        fit_error,
        per_n,
        pass: criterion_met && !quota_exceeded,
        criterion: c.criterion.to_string(),
        failures,
        quota_exceeded,
        seeds: records
            .iter()
            .map(|r| SeedEntry {
                n: r.n,
                replicate: r.replicate,
                seed: r.seed,
            })
            .collect(),
        c_star,
        c_star_status,
        restricted_init: restricted,
    };
    if let Some(dir) = &c.output_dir {
        write_bytes(&dir.join(METRICS_FILE), &bytes)?;
        write_summary(&dir.join(SUMMARY_FILE), &summary)?;
    }
    Ok(ExperimentOutcome {
        summary,
        records,
        fit,
        resumed: false,
    })
}

const C_STAR_PROBES: usize = 10_000;

fn c_star_report(c: &ExperimentConfig) -> Result<(Option<f64>, String)> {
    if matches!(
        c.kernel,
        KernelSpec::Gaussian {
            h: Bandwidth::Median
        }
    ) {
        return Ok((None, "per_run_bandwidth".into()));
    }
    let potential = c.potential.build()?;
    let kernel = c.kernel.build(potential.dim(), None)?;
    Ok(
        match c_star_sup(&kernel, &potential, C_STAR_PROBES, c.seed)? {
            CStarSup::Exact(v) => (Some(v), "exact".into()),
            CStarSup::Estimate { value, .. } => (Some(value), "estimate".into()),
            CStarSup::Unbounded => (None, "unbounded".into()),
        },
    )
}

/// A single simulation for the `run` command.
#[derive(Debug, Clone)]
pub struct SingleRun {
    pub kernel: KernelModel,
    pub potential: PotentialModel,
    pub trajectory: Trajectory,
}

/// Simulates `run.n` particles with the configured dynamics and annotates
/// every snapshot with KSD².
pub fn run_single(config: &ExperimentConfig) -> Result<SingleRun> {
    let potential = config.potential.build()?;
    let n = config.run_n;
    let seed = replicate_seed(config.seed, n, 0);
    let (kernel, mut trajectory) = match config.dynamics.mode {
        DynamicsMode::Continuous => {
            let t_end = config.dynamics.t_end.unwrap_or(n as f64);
            simulate_continuous(config, &potential, n, t_end, seed)?
        }
        DynamicsMode::Discrete => {
            let level = config.level();
            let plan = schedule(
                config.dynamics.a,
                config.dynamics.alpha,
                level,
                potential.dim(),
                n,
            )?;
            let eta = config.dynamics.eta.unwrap_or(plan.step_size);
            let iterations = config.dynamics.iterations.unwrap_or(plan.iterations);
            let init = restricted_init(&potential, &config.init, level, n, seed)?;
            let kernel = config.kernel.build(potential.dim(), Some(&init.ensemble))?;
            let traj = run_discrete(
                &kernel,
                &potential,
                &init.ensemble,
                eta,
                iterations,
                config.dynamics.stride,
            )?;
            (kernel, traj)
        }
    };
    crate::stein::annotate_ksd(&kernel, &potential, &mut trajectory)?;
    Ok(SingleRun {
        kernel,
        potential,
        trajectory,
    })
}

/// Directory used when a config names none.
pub fn default_output_dir(config: &ExperimentConfig) -> PathBuf {
    PathBuf::from("runs").join(format!("{}-{}", config.kind, &config.hash()[..12]))
}
