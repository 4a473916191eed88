use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use svgd_lab::harness::runner::default_output_dir;
use svgd_lab::harness::{
    read_samples_csv, run_experiments, run_single, trajectory_jsonl, write_samples_csv,
    ExperimentConfig,
};
use svgd_lab::{c_star_sup, ksd_squared, w2_rate_exponent, wasserstein_assign, CStarSup, Error};

#[derive(Parser)]
#[command(name = "svgd-lab", version, about = "Finite-particle SVGD experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one ensemble of `run.n` particles.
    Run { config: PathBuf },
    /// Run N-sweeps and fit rates; configs with a common simulation share it.
    Sweep {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
    },
    /// KSD² of a sample against the configured kernel and potential.
    Ksd {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        config: PathBuf,
    },
    /// Exact Wasserstein distance between two equal-size samples.
    W2 {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u32).range(1..=2))]
        s: u32,
    },
    /// W₂ rate exponent r(d) for Matérn smoothness ν.
    RateExponent {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        nu: f64,
    },
}

const C_STAR_PROBES: usize = 10_000;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if matches!(e, Error::Config(_)) { 3 } else { 1 })
        }
    }
}

fn load(path: &Path) -> svgd_lab::Result<ExperimentConfig> {
    ExperimentConfig::from_path(path).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => Error::Config(other.to_string()),
    })
}

fn dispatch(command: Command) -> svgd_lab::Result<u8> {
    match command {
        Command::Run { config } => {
            let cfg = load(&config)?;
            let dir = cfg
                .output_dir
                .clone()
                .unwrap_or_else(|| default_output_dir(&cfg));
            let run = run_single(&cfg)?;
            let (first, last) = (run.trajectory.first(), run.trajectory.last());
            write_samples_csv(&dir.join("initial.csv"), &first.ensemble)?;
            write_samples_csv(&dir.join("final.csv"), &last.ensemble)?;
            svgd_lab::harness::io::write_bytes(
                &dir.join("trajectory.jsonl"),
                &trajectory_jsonl(&run.trajectory)?,
            )?;
            println!(
                "{}",
                json!({
                    "output_dir": dir,
                    "config_hash": cfg.hash(),
                    "snapshots": run.trajectory.len(),
                    "final_time": last.time,
                    "final_ksd2": last.ksd2,
                    "final_second_moment": last.second_moment,
                })
            );
            Ok(0)
        }
        Command::Sweep { configs } => {
            let mut cfgs = configs
                .iter()
                .map(|p| load(p))
                .collect::<svgd_lab::Result<Vec<_>>>()?;
            for c in &mut cfgs {
                if c.output_dir.is_none() {
                    c.output_dir = Some(default_output_dir(c));
                }
            }
            let mut code = 0;
            for (path, outcome) in configs.iter().zip(run_experiments(&cfgs)?) {
                let s = &outcome.summary;
                println!(
                    "{}",
                    json!({
                        "config": path,
                        "experiment": s.experiment,
                        "pass": s.pass,
                        "criterion": s.criterion,
                        "fit": s.fit,
                        "medians": s.per_n.iter().map(|l| (l.n, l.median)).collect::<Vec<_>>(),
                        "failures": s.failures,
                        "resumed": outcome.resumed,
                    })
                );
                code = code.max(outcome.exit_code() as u8);
            }
            Ok(code)
        }
        Command::Ksd { samples, config } => {
            let cfg = load(&config)?;
            let sample = read_samples_csv(&samples)?;
            let potential = cfg.potential.build()?;
            let kernel = cfg.kernel.build(potential.dim(), Some(&sample))?;
            let report = ksd_squared(&kernel, &potential, &sample)?;
            let (status, value) = match c_star_sup(&kernel, &potential, C_STAR_PROBES, cfg.seed)? {
                CStarSup::Exact(v) => ("exact", Some(v)),
                CStarSup::Estimate { value, .. } => ("estimate", Some(value)),
                CStarSup::Unbounded => ("unbounded", None),
            };
            println!(
                "{}",
                json!({
                    "ksd2": report.ksd2,
                    "n": report.n,
                    "mode": report.mode,
                    "kernel": report.kernel,
                    "potential": report.potential,
                    "c_star": value,
                    "c_star_status": status,
                })
            );
            Ok(0)
        }
        Command::W2 { a, b, s } => {
            let (a, b) = (read_samples_csv(&a)?, read_samples_csv(&b)?);
            let result = wasserstein_assign(&a, &b, s)?;
            println!(
                "{}",
                json!({ "distance": result.distance, "s": s, "n": a.len() })
            );
            Ok(0)
        }
        Command::RateExponent { d, nu } => {
            let r = w2_rate_exponent(d, nu);
            if !r.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "rate exponent needs d >= 1 and nu > 0, got d = {d}, nu = {nu}"
                )));
            }
            println!("{}", json!({ "d": d, "nu": nu, "r": r }));
            Ok(0)
        }
    }
}
