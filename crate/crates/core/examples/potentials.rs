//! Target potentials, their certified constants and exact samplers.
//!
//! `cargo run --example potentials`

use svgd_lab::{PotentialModel, Result};

pub fn run_example() -> Result<Vec<f64>> {
    let targets = [
        PotentialModel::isotropic_gaussian(2, 1.0)?,
        PotentialModel::diagonal_gaussian(vec![0.5, 2.0], 1.0)?,
        PotentialModel::gaussian_mixture(2, 2.0, 1.0)?,
    ];
    let mut moments = Vec::new();
    for p in &targets {
        let g = p.growth();
        let dis = p.dissipativity();
        println!("{p}");
        println!(
            "  V(0) = {:.4}, grad V(1,1) = {:?}",
            p.value(&[0.0, 0.0])?,
            p.grad(&[1.0, 1.0])?
        );
        println!("  growth A = {:.4}, alpha = {}", g.a, g.alpha);
        println!(
            "  dissipativity alpha = {}, beta1 = {:.4}, beta0 = {:.4}",
            dis.alpha, dis.beta1, dis.beta0
        );
        println!(
            "  Hessian bound {:.4}, sup Laplacian {:?}",
            p.hessian_bound(),
            p.laplacian_sup()
        );
        let sample = p.reference_sampler(20_000, 7)?;
        let m = sample.second_moment();
        println!("  sample mean {:?}, second moment {m:.4}", sample.mean());
        moments.push(m);
    }
    Ok(moments)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example().map(|_| ())
}
