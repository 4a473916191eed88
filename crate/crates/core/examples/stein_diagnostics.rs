//! KSD² of i.i.d. and perturbed samples, and the discretization functional C*.
//!
//! `cargo run --example stein_diagnostics`

use svgd_lab::{c_star, c_star_sup, ksd_squared, KernelModel, MaternOrder, PotentialModel, Result};

/// Returns `(KSD² of a target sample, KSD² of a shifted sample)`.
pub fn run_example() -> Result<(f64, f64)> {
    let kernel = KernelModel::gaussian(2, 1.0)?;
    let target = PotentialModel::isotropic_gaussian(2, 1.0)?;
    let good = target.reference_sampler(200, 1)?;
    let shifted =
        svgd_lab::ParticleEnsemble::new(200, 2, good.as_slice().iter().map(|x| x + 0.5).collect())?;
    let a = ksd_squared(&kernel, &target, &good)?;
    let b = ksd_squared(&kernel, &target, &shifted)?;
    println!("KSD² of a target sample:  {:.5}", a.ksd2);
    println!("KSD² of a shifted sample: {:.5}", b.ksd2);

    println!(
        "C*(z) for the Gaussian pair: {}",
        c_star(&kernel, &target, &[3.0, -1.0])?
    );
    let mixture = PotentialModel::gaussian_mixture(2, 2.0, 1.0)?;
    println!(
        "sup C* for the mixture: {:?}",
        c_star_sup(&kernel, &mixture, 5000, 0)?
    );
    let composite = KernelModel::bilinear_plus_matern(2, MaternOrder::FiveHalves, None)?;
    for r in [0.0, 1.0, 10.0] {
        println!(
            "composite C*({r}, 0) = {:.4}",
            c_star(&composite, &target, &[r, 0.0])?
        );
    }
    println!(
        "composite sup C*: {:?}",
        c_star_sup(&composite, &target, 5000, 0)?
    );
    Ok((a.ksd2, b.ksd2))
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example().map(|_| ())
}
