//! Flat `key = value` configuration files.
//!
//! One assignment per line, `#` starts a comment, keys are case-sensitive and
//! may appear at most once. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::dynamics::{InitSampler, Integrator, DEFAULT_DT};
use crate::ensemble::ParticleEnsemble;
use crate::error::{Error, Result};
use crate::kernel::{median_heuristic_bandwidth, KernelModel, MaternOrder};
use crate::potential::{PotentialModel, DEFAULT_VALUE_OFFSET};

const KNOWN_KEYS: &[&str] = &[
    "experiment",
    "kernel.kind",
    "kernel.h",
    "kernel.nu",
    "kernel.sigma_diag",
    "potential.kind",
    "potential.d",
    "potential.c0",
    "potential.mixture_mu",
    "potential.variances",
    "dynamics.mode",
    "dynamics.method",
    "dynamics.dt",
    "dynamics.t_end",
    "dynamics.eta",
    "dynamics.iterations",
    "dynamics.alpha",
    "dynamics.K",
    "dynamics.a",
    "dynamics.stride",
    "dynamics.stationary_tol",
    "init.kind",
    "init.scale",
    "seed",
    "grid.n",
    "replicates",
    "horizon.eta",
    "transport.n",
    "poc.pairs_per_snapshot",
    "criterion.kind",
    "criterion.slope_min",
    "criterion.slope_max",
    "criterion.r2_min",
    "failure_quota",
    "run.n",
    "output.dir",
    "output.record_wall_time",
    "workers",
];

/// Keys that do not influence any computed value; excluded from the hash.
const UNHASHED_KEYS: &[&str] = &["output.dir", "workers"];

/// Parsed `key = value` pairs in key order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", lineno + 1)));
            }
            if !KNOWN_KEYS.contains(&key) {
                return Err(Error::Config(format!(
                    "line {}: unknown key `{key}`",
                    lineno + 1
                )));
            }
            if entries.insert(key.to_string(), value.to_string()).is_some() {
                return Err(Error::Config(format!(
                    "line {}: duplicate key `{key}`",
                    lineno + 1
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        if !KNOWN_KEYS.contains(&key) {
            return Err(Error::Config(format!("unknown key `{key}`")));
        }
        self.entries.insert(key.to_string(), value.into());
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Sorted `key = value` lines, one per entry.
    pub fn canonical_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    /// SHA-256 of the canonical text without output-only keys.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        for (k, v) in &self.entries {
            if UNHASHED_KEYS.contains(&k.as_str()) {
                continue;
            }
            hasher.update(k.as_bytes());
            hasher.update(b" = ");
            hasher.update(v.as_bytes());
            hasher.update(b"\n");
        }
        hex::encode(hasher.finalize())
    }

    fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("invalid value `{v}` for `{key}`"))),
        }
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse()
                        .map_err(|_| Error::Config(format!("invalid entry `{s}` in `{key}`")))
                })
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentKind {
    KsdRateCt,
    KsdRateDt,
    IidBaseline,
    W2Trend,
    PocTrend,
    MomentBound,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::KsdRateCt => "ksd_rate_ct",
            Self::KsdRateDt => "ksd_rate_dt",
            Self::IidBaseline => "iid_baseline",
            Self::W2Trend => "w2_trend",
            Self::PocTrend => "poc_trend",
            Self::MomentBound => "moment_bound",
        }
    }

    pub fn metric_name(self) -> &'static str {
        match self {
            Self::KsdRateCt => "time_avg_ksd2",
            Self::KsdRateDt => "iter_avg_ksd2",
            Self::IidBaseline => "ksd2",
            Self::W2Trend => "w2",
            Self::PocTrend => "w1_pair",
            Self::MomentBound => "time_avg_second_moment",
        }
    }

    pub fn default_criterion(self) -> Criterion {
        match self {
            Self::KsdRateCt => Criterion::Slope {
                min: -1.35,
                max: -0.65,
                r2_min: Some(0.9),
            },
            Self::IidBaseline => Criterion::Slope {
                min: -1.25,
                max: -0.75,
                r2_min: None,
            },
            Self::MomentBound => Criterion::Slope {
                min: -0.2,
                max: 0.2,
                r2_min: None,
            },
            Self::KsdRateDt | Self::W2Trend | Self::PocTrend => Criterion::Decreasing,
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "ksd_rate_ct" => Self::KsdRateCt,
            "ksd_rate_dt" => Self::KsdRateDt,
            "iid_baseline" => Self::IidBaseline,
            "w2_trend" => Self::W2Trend,
            "poc_trend" => Self::PocTrend,
            "moment_bound" => Self::MomentBound,
            other => return Err(Error::Config(format!("unknown experiment `{other}`"))),
        })
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Pass rule applied to per-N medians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Criterion {
    /// Fitted log-log slope in `[min, max]`, optionally with `r² ≥ r2_min`.
    Slope {
        min: f64,
        max: f64,
        r2_min: Option<f64>,
    },
    /// Medians strictly decreasing across the whole grid.
    Decreasing,
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Slope { min, max, r2_min } => {
                write!(f, "slope in [{min}, {max}]")?;
                if let Some(r) = r2_min {
                    write!(f, ", r^2 >= {r}")?;
                }
                Ok(())
            }
            Self::Decreasing => f.write_str("medians strictly decreasing in N"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    Fixed(f64),
    /// Median heuristic on the initial ensemble of each run.
    Median,
}

#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec {
    Gaussian {
        h: Bandwidth,
    },
    Matern {
        order: MaternOrder,
        sigma_diag: Option<Vec<f64>>,
    },
    BilinearPlusMatern {
        order: MaternOrder,
        sigma_diag: Option<Vec<f64>>,
    },
}

impl KernelSpec {
    /// `sample` feeds the median heuristic; ignored otherwise.
    pub fn build(&self, dim: usize, sample: Option<&ParticleEnsemble>) -> Result<KernelModel> {
        match self {
            Self::Gaussian {
                h: Bandwidth::Fixed(h),
            } => KernelModel::gaussian(dim, *h),
            Self::Gaussian {
                h: Bandwidth::Median,
            } => {
                let h = sample.map_or(1.0, median_heuristic_bandwidth);
                KernelModel::gaussian(dim, h)
            }
            Self::Matern { order, sigma_diag } => {
                KernelModel::matern(dim, *order, sigma_diag.clone())
            }
            Self::BilinearPlusMatern { order, sigma_diag } => {
                KernelModel::bilinear_plus_matern(dim, *order, sigma_diag.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialSpec {
    IsotropicGaussian { d: usize, c0: f64 },
    DiagonalGaussian { variances: Vec<f64>, c0: f64 },
    GaussianMixture { d: usize, mu: f64, c0: f64 },
}

impl PotentialSpec {
    pub fn dim(&self) -> usize {
        match self {
            Self::IsotropicGaussian { d, .. } | Self::GaussianMixture { d, .. } => *d,
            Self::DiagonalGaussian { variances, .. } => variances.len(),
        }
    }

    pub fn c0(&self) -> f64 {
        match self {
            Self::IsotropicGaussian { c0, .. }
            | Self::DiagonalGaussian { c0, .. }
            | Self::GaussianMixture { c0, .. } => *c0,
        }
    }

    pub fn build(&self) -> Result<PotentialModel> {
        match self {
            Self::IsotropicGaussian { d, c0 } => PotentialModel::isotropic_gaussian(*d, *c0),
            Self::DiagonalGaussian { variances, c0 } => {
                PotentialModel::diagonal_gaussian(variances.clone(), *c0)
            }
            Self::GaussianMixture { d, mu, c0 } => PotentialModel::gaussian_mixture(*d, *mu, *c0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DynamicsMode {
    Continuous,
    Discrete,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsSpec {
    pub mode: DynamicsMode,
    pub method: Integrator,
    pub dt: f64,
    /// Horizon override; each experiment otherwise picks its own.
    pub t_end: Option<f64>,
    /// Manual step size; replaces the schedule.
    pub eta: Option<f64>,
    /// Manual iteration count; replaces the schedule.
    pub iterations: Option<usize>,
    pub alpha: f64,
    /// Restriction level; defaults to `d/2 + c₀ + 1`.
    pub level: Option<f64>,
    pub a: f64,
    pub stride: Option<usize>,
    pub stationary_tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub raw: RawConfig,
    pub kind: ExperimentKind,
    pub kernel: KernelSpec,
    pub potential: PotentialSpec,
    pub dynamics: DynamicsSpec,
    pub init: InitSampler,
    pub seed: u64,
    pub grid: Vec<usize>,
    pub replicates: usize,
    pub horizon_eta: f64,
    pub transport_n: usize,
    pub pairs_per_snapshot: usize,
    pub criterion: Criterion,
    pub failure_quota: f64,
    pub run_n: usize,
    pub output_dir: Option<PathBuf>,
    pub record_wall_time: bool,
    pub workers: usize,
}

pub const DEFAULT_TRANSPORT_N: usize = 512;
pub const DEFAULT_PAIRS_PER_SNAPSHOT: usize = 8;
pub const DEFAULT_FAILURE_QUOTA: f64 = 0.2;

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Self::from_raw(RawConfig::parse(text)?)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_raw(RawConfig::from_path(path)?)
    }

    pub fn from_raw(raw: RawConfig) -> Result<Self> {
        let kind: ExperimentKind = raw
            .parsed("experiment")?
            .unwrap_or(ExperimentKind::KsdRateCt);

        let d: usize = raw.parsed("potential.d")?.unwrap_or(2);
        let c0: f64 = raw.parsed("potential.c0")?.unwrap_or(DEFAULT_VALUE_OFFSET);
        let potential = match raw.get("potential.kind").unwrap_or("isotropic_gaussian") {
            "isotropic_gaussian" => PotentialSpec::IsotropicGaussian { d, c0 },
            "diagonal_gaussian" => {
                let variances = raw
                    .list("potential.variances")?
                    .unwrap_or_else(|| vec![1.0; d]);
                if variances.len() != d {
                    return Err(Error::Config(format!(
                        "potential.variances has {} entries, expected {d}",
                        variances.len()
                    )));
                }
                PotentialSpec::DiagonalGaussian { variances, c0 }
            }
            "gaussian_mixture" => PotentialSpec::GaussianMixture {
                d,
                mu: raw.parsed("potential.mixture_mu")?.unwrap_or(2.0),
                c0,
            },
            other => return Err(Error::Config(format!("unknown potential `{other}`"))),
        };

        let order = match raw.parsed::<f64>("kernel.nu")? {
            None => MaternOrder::FiveHalves,
            Some(nu) => MaternOrder::from_nu(nu).map_err(|e| Error::Config(e.to_string()))?,
        };
        let sigma_diag = raw.list("kernel.sigma_diag")?;
        let kernel = match raw.get("kernel.kind").unwrap_or("gaussian") {
            "gaussian" => KernelSpec::Gaussian {
                h: match raw.get("kernel.h") {
                    None => Bandwidth::Fixed(1.0),
                    Some("median") => Bandwidth::Median,
                    Some(_) => Bandwidth::Fixed(raw.parsed("kernel.h")?.unwrap_or(1.0)),
                },
            },
            "matern" => KernelSpec::Matern { order, sigma_diag },
            "bilinear_plus_matern" => KernelSpec::BilinearPlusMatern { order, sigma_diag },
            other => return Err(Error::Config(format!("unknown kernel `{other}`"))),
        };

        let mode = match raw.get("dynamics.mode") {
            None => {
                if kind == ExperimentKind::KsdRateDt {
                    DynamicsMode::Discrete
                } else {
                    DynamicsMode::Continuous
                }
            }
            Some("continuous") => DynamicsMode::Continuous,
            Some("discrete") => DynamicsMode::Discrete,
            Some(other) => return Err(Error::Config(format!("unknown dynamics mode `{other}`"))),
        };
        let dynamics = DynamicsSpec {
            mode,
            method: raw.parsed("dynamics.method")?.unwrap_or(Integrator::Rk4),
            dt: raw.parsed("dynamics.dt")?.unwrap_or(DEFAULT_DT),
            t_end: raw.parsed("dynamics.t_end")?,
            eta: raw.parsed("dynamics.eta")?,
            iterations: raw.parsed("dynamics.iterations")?,
            alpha: raw.parsed("dynamics.alpha")?.unwrap_or(0.5),
            level: raw.parsed("dynamics.K")?,
            a: raw.parsed("dynamics.a")?.unwrap_or(1.0),
            stride: raw.parsed("dynamics.stride")?,
            stationary_tol: raw.parsed("dynamics.stationary_tol")?,
        };

        let init = match raw.get("init.kind").unwrap_or("gaussian") {
            "gaussian" => InitSampler::Gaussian {
                scale: raw.parsed("init.scale")?.unwrap_or(2.0),
            },
            "target" => InitSampler::Target,
            other => return Err(Error::Config(format!("unknown init `{other}`"))),
        };

        let criterion = match raw.get("criterion.kind") {
            None if raw.get("criterion.slope_min").is_none()
                && raw.get("criterion.slope_max").is_none()
                && raw.get("criterion.r2_min").is_none() =>
            {
                kind.default_criterion()
            }
            Some("decreasing") => Criterion::Decreasing,
            None | Some("slope") => {
                let (dmin, dmax, dr2) = match kind.default_criterion() {
                    Criterion::Slope { min, max, r2_min } => (min, max, r2_min),
                    Criterion::Decreasing => (f64::NEG_INFINITY, f64::INFINITY, None),
                };
                Criterion::Slope {
                    min: raw.parsed("criterion.slope_min")?.unwrap_or(dmin),
                    max: raw.parsed("criterion.slope_max")?.unwrap_or(dmax),
                    r2_min: raw.parsed("criterion.r2_min")?.or(dr2),
                }
            }
            Some(other) => return Err(Error::Config(format!("unknown criterion `{other}`"))),
        };

        let config = Self {
            kind,
            kernel,
            potential,
            dynamics,
            init,
            seed: raw.parsed("seed")?.unwrap_or(0),
            grid: raw
                .list("grid.n")?
                .unwrap_or_else(|| vec![16, 32, 64, 128, 256]),
            replicates: raw.parsed("replicates")?.unwrap_or(10),
            horizon_eta: raw.parsed("horizon.eta")?.unwrap_or(0.1),
            transport_n: raw.parsed("transport.n")?.unwrap_or(DEFAULT_TRANSPORT_N),
            pairs_per_snapshot: raw
                .parsed("poc.pairs_per_snapshot")?
                .unwrap_or(DEFAULT_PAIRS_PER_SNAPSHOT),
            criterion,
            failure_quota: raw
                .parsed("failure_quota")?
                .unwrap_or(DEFAULT_FAILURE_QUOTA),
            run_n: raw.parsed("run.n")?.unwrap_or(64),
            output_dir: raw.get("output.dir").map(PathBuf::from),
            record_wall_time: raw.parsed("output.record_wall_time")?.unwrap_or(false),
            workers: raw.parsed("workers")?.unwrap_or(1),
            raw,
        };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.grid.is_empty() || self.grid[0] == 0 {
            return bad("grid.n must hold positive integers".into());
        }
        if self.grid.windows(2).any(|w| w[0] >= w[1]) {
            return bad("grid.n must be strictly ascending".into());
        }
        let min_levels = match self.criterion {
            Criterion::Slope { .. } => 3,
            Criterion::Decreasing => 2,
        };
        if self.grid.len() < min_levels {
            return bad(format!(
                "grid.n needs at least {min_levels} levels for this criterion"
            ));
        }
        if self.replicates < 3 {
            return bad("replicates must be at least 3".into());
        }
        if !(self.horizon_eta > 0.0 && self.horizon_eta.is_finite()) {
            return bad("horizon.eta must be positive".into());
        }
        if !(self.dynamics.dt > 0.0 && self.dynamics.dt.is_finite()) {
            return bad("dynamics.dt must be positive".into());
        }
        if !(0.0..=0.5).contains(&self.dynamics.alpha) {
            return bad("dynamics.alpha must lie in [0, 1/2]".into());
        }
        if !(0.0..=1.0).contains(&self.failure_quota) {
            return bad("failure_quota must lie in [0, 1]".into());
        }
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        if self.transport_n == 0 || self.pairs_per_snapshot == 0 {
            return bad("transport.n and poc.pairs_per_snapshot must be positive".into());
        }
        // Surface model errors (bad bandwidth, |mu| too large, ...) as config errors.
        let potential = self
            .potential
            .build()
            .map_err(|e| Error::Config(e.to_string()))?;
        self.kernel
            .build(potential.dim(), None)
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    pub fn hash(&self) -> String {
        self.raw.hash()
    }

    /// Restriction level `K` for the discrete schedule.
    pub fn level(&self) -> f64 {
        self.dynamics
            .level
            .unwrap_or(self.potential.dim() as f64 / 2.0 + self.potential.c0() + 1.0)
    }

    /// `M(N) = ⌈N^{2+η_hor}⌉`.
    pub fn horizon_particles(&self, n: usize) -> usize {
        ceil_pow(n as f64, 2.0 + self.horizon_eta)
    }
}

/// `⌈x^p⌉`, snapping to the nearest integer when within rounding distance.
pub(crate) fn ceil_pow(x: f64, p: f64) -> usize {
    let v = x.powf(p);
    let r = v.round();
    if (v - r).abs() <= 1e-9 * v.max(1.0) {
        r as usize
    } else {
        v.ceil() as usize
    }
}
