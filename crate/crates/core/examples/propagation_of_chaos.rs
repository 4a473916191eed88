//! Pooled pair marginals of a flow against the product target.
//!
//! `cargo run --release --example propagation_of_chaos`

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use svgd_lab::harness::product_reference;
use svgd_lab::{
    integrate_continuous, pair_pool, subsample, wasserstein_assign, ContinuousOptions, InitSampler,
    KernelModel, MaternOrder, PotentialModel, Result,
};

/// Returns `(M, W₁)` for a few ensemble sizes.
pub fn run_example() -> Result<Vec<(usize, f64)>> {
    let kernel = KernelModel::bilinear_plus_matern(2, MaternOrder::FiveHalves, None)?;
    let target = PotentialModel::isotropic_gaussian(2, 1.0)?;
    let n = 128;
    let mut out = Vec::new();
    for m in [4, 16] {
        let init =
            InitSampler::default().sample(&target, m, &mut ChaCha8Rng::seed_from_u64(m as u64))?;
        let mut options = ContinuousOptions::new(m as f64);
        options.dt = 0.25;
        let traj = integrate_continuous(&kernel, &target, &init, &options)?;
        let pairs = pair_pool(&traj, 0.0, m as f64, 8, 1)?;
        let sample = subsample(&pairs, n, 2)?;
        let reference = product_reference(&target, n, 3)?;
        let w1 = wasserstein_assign(&sample, &reference, 1)?.distance;
        println!(
            "M = {m:>3}: {} pooled pairs, W1 to the product target = {w1:.4}",
            pairs.len()
        );
        out.push((m, w1));
    }
    Ok(out)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example().map(|_| ())
}
