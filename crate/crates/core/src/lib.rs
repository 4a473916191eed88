//! Finite-particle Stein variational gradient descent: kernels and target
//! potentials with analytic derivatives, the SVGD drift in discrete and
//! continuous time, kernelized Stein discrepancy diagnostics, exact
//! small-sample Wasserstein distances, and a reproducible N-sweep harness.

pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod harness;
pub mod kernel;
pub mod potential;
pub mod stein;
pub mod transport;

pub use dynamics::{
    discrete_step, drift_norm_bound, drift_phi, integrate_continuous, jacobian_hs_bound,
    lyapunov_f, restricted_init, run_discrete, schedule, svgd_map_t, BoundCheck, ContinuousOptions,
    InitSampler, Integrator, SchedulePlan, Snapshot, Trajectory,
};
pub use ensemble::{ParticleEnsemble, PointSet};
pub use error::{Error, Result};
pub use kernel::{DerivativeBound, KernelKind, KernelModel, MaternOrder};
pub use potential::{PotentialKind, PotentialModel};
pub use stein::{
    c_star, c_star_sup, ksd_squared, pair_pool, stein_kernel_u, time_average, w2_rate_exponent,
    CStarSup, KsdReport, TimeAveragedSample,
};
pub use transport::{subsample, wasserstein_1d, wasserstein_assign, CouplingResult};
