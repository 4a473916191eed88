//! An N-sweep driven by a config, with the fitted log-log slope.
//!
//! `cargo run --release --example rate_sweep`

use svgd_lab::harness::{run_experiment, ExperimentConfig};
use svgd_lab::Result;

const CONFIG: &str = "
experiment = iid_baseline
kernel.kind = gaussian
kernel.h = 1
potential.kind = isotropic_gaussian
potential.d = 2
grid.n = 16, 32, 64, 128, 256
replicates = 10
seed = 42
";

/// Returns the fitted slope.
pub fn run_example() -> Result<f64> {
    let cfg = ExperimentConfig::parse(CONFIG)?;
    let outcome = run_experiment(&cfg)?;
    for level in &outcome.summary.per_n {
        println!(
            "N = {:>4}: median {:.5} (IQR {:.5} .. {:.5})",
            level.n, level.median, level.q25, level.q75
        );
    }
    let fit = outcome.fit.expect("five successful levels");
    println!(
        "slope {:.3}, r² {:.3}, {} ({})",
        fit.slope,
        fit.r_squared,
        if outcome.summary.pass { "pass" } else { "fail" },
        outcome.summary.criterion
    );
    Ok(fit.slope)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example().map(|_| ())
}
