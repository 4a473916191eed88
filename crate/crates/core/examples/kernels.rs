//! Kernel values and derivatives for the three kernel families.
//!
//! `cargo run --example kernels`

use svgd_lab::{KernelModel, MaternOrder, Result};

pub fn run_example() -> Result<Vec<(String, f64, f64)>> {
    let kernels = [
        KernelModel::gaussian(2, 1.0)?,
        KernelModel::matern(2, MaternOrder::FiveHalves, None)?,
        KernelModel::bilinear_plus_matern(2, MaternOrder::FiveHalves, None)?,
    ];
    let (x, y) = ([1.0, 0.0], [0.0, 0.0]);
    let mut rows = Vec::new();
    println!(
        "{:<40} {:>10} {:>10} {:>22} {:>10}",
        "kernel", "k(x,y)", "k(z,z)", "grad2 k(x,y)", "div12"
    );
    for k in &kernels {
        let g = k.grad2(&x, &y)?;
        println!(
            "{:<40} {:>10.6} {:>10.6} {:>10.6},{:>10.6} {:>10.6}",
            k.to_string(),
            k.eval(&x, &y)?,
            k.eval_diag(&y)?,
            g[0],
            g[1],
            k.div12(&x, &y)?
        );
        rows.push((k.to_string(), k.eval(&x, &y)?, k.laplacian2_diag(&y)?));
    }
    for k in &kernels {
        match k.derivative_bound().value() {
            Some(b) => println!("{k}: derivatives bounded by B = {b:.4}"),
            None => println!("{k}: no uniform derivative bound"),
        }
    }
    Ok(rows)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example().map(|_| ())
}
