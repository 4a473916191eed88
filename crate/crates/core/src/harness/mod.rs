//! Configuration-driven N-sweeps with fitted rate exponents.

pub mod config;
pub mod fit;
pub mod io;
pub mod runner;

pub use config::{
    Bandwidth, Criterion, DynamicsMode, DynamicsSpec, ExperimentConfig, ExperimentKind, KernelSpec,
    PotentialSpec, RawConfig,
};
pub use fit::{fit_loglog, level_stats, LevelStats, RateFit};
pub use io::{
    content_version, metrics_jsonl, read_metrics_jsonl, read_samples_csv, read_summary,
    trajectory_jsonl, write_samples_csv, write_summary, MetricRecord, Summary,
};
pub use runner::{
    product_reference, reference_seed, replicate_seed, run_experiment, run_experiments, run_single,
    simulate_continuous, ExperimentOutcome, ReplicateResult, SingleRun, METRICS_FILE, SUMMARY_FILE,
};
