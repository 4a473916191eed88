//! Exact Wasserstein distances between samples and a time-averaged flow.
//!
//! `cargo run --release --example transport`

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use svgd_lab::{
    integrate_continuous, subsample, time_average, wasserstein_1d, wasserstein_assign,
    ContinuousOptions, InitSampler, KernelModel, PotentialModel, Result,
};

/// Returns `(W₂ initial ensemble vs target, W₂ time average vs target)`.
pub fn run_example() -> Result<(f64, f64)> {
    let w = wasserstein_1d(&[0.0, 2.0], &[1.0, 3.0], 2)?;
    println!("W2({{0, 2}}, {{1, 3}}) = {}", w.distance);

    let kernel = KernelModel::gaussian(2, 1.0)?;
    let target = PotentialModel::isotropic_gaussian(2, 1.0)?;
    let m = 64;
    let init = InitSampler::default().sample(&target, m, &mut ChaCha8Rng::seed_from_u64(5))?;
    let traj = integrate_continuous(&kernel, &target, &init, &ContinuousOptions::new(m as f64))?;
    let pooled = time_average(&traj, 0.0, m as f64)?;
    let n = 256;
    let sample = subsample(&pooled, n, 6)?;
    let reference = target.reference_sampler(n, 7)?;
    let before = wasserstein_assign(&init, &target.reference_sampler(m, 9)?, 2)?.distance;
    let after = wasserstein_assign(&sample, &reference, 2)?.distance;
    println!("W2(initial ensemble, target sample) = {before:.4}");
    println!(
        "W2(time average over {} snapshots, target sample) = {after:.4}",
        pooled.snapshots
    );
    println!(
        "W1 of the same pair = {:.4}",
        wasserstein_assign(&sample, &reference, 1)?.distance
    );
    Ok((before, after))
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example().map(|_| ())
}
