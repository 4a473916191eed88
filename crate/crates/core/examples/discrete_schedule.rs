//! Discrete-time SVGD on the step-size schedule from a restricted start.
//!
//! `cargo run --release --example discrete_schedule`

use svgd_lab::{
    ksd_squared, lyapunov_f, restricted_init, run_discrete, schedule, InitSampler, KernelModel,
    PotentialModel, Result,
};

/// Returns `(N, iteration-averaged KSD²)` for a few particle counts.
pub fn run_example() -> Result<Vec<(usize, f64)>> {
    let kernel = KernelModel::gaussian(2, 1.0)?;
    let target = PotentialModel::isotropic_gaussian(2, 1.0)?;
    let level = 3.0;
    let mut out = Vec::new();
    for n in [4, 6, 8] {
        let plan = schedule(1.0, 0.5, level, 2, n)?;
        let init = restricted_init(&target, &InitSampler::Target, level, n, 11)?;
        let traj = run_discrete(
            &kernel,
            &target,
            &init.ensemble,
            plan.step_size,
            plan.iterations,
            Some(1),
        )?;
        let mut total = 0.0;
        for s in &traj.snapshots[..plan.iterations] {
            total += ksd_squared(&kernel, &target, &s.ensemble)?.ksd2;
        }
        let avg = total / plan.iterations as f64;
        println!(
            "N = {n:>2}: eta = {:.3e}, T = {:>5}, f(0) = {:.3}, f(T) = {:.3}, mean KSD² = {avg:.4}",
            plan.step_size,
            plan.iterations,
            lyapunov_f(&target, &init.ensemble)?,
            traj.last().mean_potential,
        );
        out.push((n, avg));
    }
    Ok(out)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example().map(|_| ())
}
