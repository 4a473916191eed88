//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.
//!
//! The long-running sweeps load their configs from the workspace `configs/`
//! directory, so `svgd-lab sweep configs/<name>.cfg` reproduces each of them.

mod common;

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use common::*;
use rand::Rng;
use svgd_lab::harness::{
    run_experiment, run_experiments, ExperimentConfig, ExperimentOutcome, METRICS_FILE,
    SUMMARY_FILE,
};
use svgd_lab::{
    c_star, c_star_sup, drift_norm_bound, jacobian_hs_bound, ksd_squared, stein_kernel_u,
    w2_rate_exponent, wasserstein_1d, wasserstein_assign, KernelModel, ParticleEnsemble,
    PotentialModel,
};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn config(name: &str, dir: &Path, workers: usize) -> ExperimentConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name);
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let mut cfg = ExperimentConfig::parse(&text).unwrap();
    cfg.output_dir = Some(dir.join(name.trim_end_matches(".cfg")));
    cfg.workers = workers;
    cfg
}

fn describe(outcome: &ExperimentOutcome) -> String {
    let s = &outcome.summary;
    let medians: Vec<String> = s
        .per_n
        .iter()
        .map(|l| format!("{}:{:.4}", l.n, l.median))
        .collect();
    let fit = match &s.fit {
        Some(f) => format!("slope {:.3}, r² {:.3}", f.slope, f.r_squared),
        None => format!("no fit ({})", s.fit_error.as_deref().unwrap_or("-")),
    };
    format!(
        "{fit}; medians [{}]; failures {}; criterion {}",
        medians.join(", "),
        s.failures,
        s.criterion
    )
}

fn sweep(name: &str, dir: &Path) -> Outcome {
    let outcome = run_experiment(&config(name, dir, 1)).unwrap();
    Outcome::new(outcome.summary.pass, describe(&outcome))
}

fn c_star_closed_form() -> Outcome {
    let k = KernelModel::gaussian(2, 1.0).unwrap();
    let p = PotentialModel::isotropic_gaussian(2, 1.0).unwrap();
    let mut r = rng(400);
    let worst = (0..100)
        .map(|_| (c_star(&k, &p, &normal_vec(&mut r, 2, 3.0)).unwrap() - 4.0).abs())
        .fold(0.0, f64::max);
    let mix = PotentialModel::gaussian_mixture(2, 2.0, 1.0).unwrap();
    let small = c_star_sup(&k, &mix, 1_000, 401)
        .unwrap()
        .value()
        .unwrap_or(f64::NAN);
    let large = c_star_sup(&k, &mix, 10_000, 402)
        .unwrap()
        .value()
        .unwrap_or(f64::NAN);
    let drift = (small - large).abs() / large.abs();
    Outcome::new(
        worst <= 1e-12 && drift <= 0.01,
        format!(
            "max |C* - 4| = {worst:.1e}; mixture sup {small:.6} vs {large:.6} (rel {drift:.1e})"
        ),
    )
}

fn ksd_oracle() -> Outcome {
    let mut r = rng(500);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let (n, d) = (r.random_range(1..=16), r.random_range(1..=4));
        let e = normal_ensemble(&mut r, n, d, 1.5);
        for k in all_kernels(d) {
            for p in all_potentials(d) {
                let got = ksd_squared(&k, &p, &e).unwrap().ksd2;
                worst = worst.max(rel_err(got, naive_ksd2(&k, &p, &e)));
            }
        }
    }
    let k = KernelModel::gaussian(2, 1.0).unwrap();
    let p = PotentialModel::isotropic_gaussian(2, 1.0).unwrap();
    let u = stein_kernel_u(&k, &p, &[0.0, 0.0], &[0.0, 0.0]).unwrap();
    let two = ParticleEnsemble::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
    let v = ksd_squared(&k, &p, &two).unwrap().ksd2;
    let hand = (u - 2.0).abs().max((v - 1.25).abs());
    Outcome::new(
        worst <= 1e-4 && hand <= 1e-12,
        format!("max rel err {worst:.1e} over 50 ensembles; hand values u = {u}, KSD² = {v}"),
    )
}

fn derivative_suite() -> Outcome {
    let mut r = rng(600);
    let (mut first, mut second) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let d = r.random_range(1..=4);
        let x = normal_vec(&mut r, d, 2.0);
        let y = normal_vec(&mut r, d, 2.0);
        for k in all_kernels(d) {
            let f1 = fd_grad(|z| k.eval(z, &y).unwrap(), &x, FD_STEP);
            let f2 = fd_grad(|z| k.eval(&x, z).unwrap(), &y, FD_STEP);
            let fdiag = fd_grad(|z| k.eval(&x, z).unwrap(), &x, FD_STEP);
            first = first
                .max(max_rel_err(&k.grad1(&x, &y).unwrap(), &f1))
                .max(max_rel_err(&k.grad2(&x, &y).unwrap(), &f2))
                .max(max_rel_err(&k.grad2_diag(&x).unwrap(), &fdiag));
            // k(x, ·) carries a 1 + xᵀy term of size ‖x‖², so a 1e-4 step is rounding-bound.
            let lap = fd_laplacian(|z| k.eval(&x, z).unwrap(), &x, 1e-3);
            second = second
                .max(rel_err(
                    k.div12(&x, &y).unwrap(),
                    fd_div12(&k, &x, &y, 1e-4),
                ))
                .max(rel_err(k.laplacian2_diag(&x).unwrap(), lap));
        }
        for p in all_potentials(d) {
            let v = |z: &[f64]| p.value(z).unwrap();
            first = first.max(max_rel_err(&p.grad(&x).unwrap(), &fd_grad(v, &x, FD_STEP)));
            let h = p.hessian(&x).unwrap();
            for l in 0..d {
                let col = fd_grad(|z| p.grad(z).unwrap()[l], &x, FD_STEP);
                first = first.max(max_rel_err(&h[l * d..(l + 1) * d], &col));
            }
            second = second.max(rel_err(p.laplacian(&x).unwrap(), fd_laplacian(v, &x, 1e-4)));
        }
    }
    Outcome::new(
        first <= 1e-5 && second <= 1e-4,
        format!("first order max rel err {first:.1e}; div12/laplacian max rel err {second:.1e}"),
    )
}

fn transport_exactness() -> Outcome {
    let mut r = rng(700);
    let mut brute = 0.0f64;
    for _ in 0..200 {
        let (n, d) = (r.random_range(1..=7), r.random_range(1..=3));
        let a = normal_ensemble(&mut r, n, d, 2.0);
        let b = normal_ensemble(&mut r, n, d, 2.0);
        for s in [1, 2] {
            let want = brute_force_w(&a, &b, s);
            let got = wasserstein_assign(&a, &b, s).unwrap().distance;
            brute = brute.max((got - want).abs() / want.max(1.0));
        }
    }
    let mut line = 0.0f64;
    for _ in 0..100 {
        let n = r.random_range(1..=60);
        let a = normal_vec(&mut r, n, 2.0);
        let b = normal_vec(&mut r, n, 2.0);
        let (ea, eb) = (
            ParticleEnsemble::new(n, 1, a.clone()).unwrap(),
            ParticleEnsemble::new(n, 1, b.clone()).unwrap(),
        );
        for s in [1, 2] {
            let q = wasserstein_1d(&a, &b, s).unwrap().distance;
            let g = wasserstein_assign(&ea, &eb, s).unwrap().distance;
            line = line.max((q - g).abs() / q.max(1.0));
        }
    }
    let mut violations = 0;
    for _ in 0..100 {
        let (n, d) = (r.random_range(1..=10), r.random_range(1..=3));
        let [a, b, c] = [0, 1, 2].map(|_| normal_ensemble(&mut r, n, d, 2.0));
        for s in [1, 2] {
            let w = |x: &ParticleEnsemble, y: &ParticleEnsemble| {
                wasserstein_assign(x, y, s).unwrap().distance
            };
            let (ab, ba, bc, ac) = (w(&a, &b), w(&b, &a), w(&b, &c), w(&a, &c));
            if (ab - ba).abs() > 1e-12 * ab.max(1.0) || ac > ab + bc + 1e-9 {
                violations += 1;
            }
        }
        let w1 = wasserstein_assign(&a, &b, 1).unwrap().distance;
        let w2 = wasserstein_assign(&a, &b, 2).unwrap().distance;
        if w1 > w2 + 1e-12 {
            violations += 1;
        }
    }
    Outcome::new(
        brute <= 1e-9 && line <= 1e-12 && violations == 0,
        format!("brute force gap {brute:.1e}; 1-D gap {line:.1e}; axiom violations {violations}"),
    )
}

fn drift_bounds() -> Outcome {
    let mut r = rng(800);
    let (mut drift_bad, mut jac_bad, mut drift_n, mut jac_n) = (0, 0, 0, 0);
    let mut checks = |max_n: usize, count: usize, jac: bool, bad: &mut usize, total: &mut usize| {
        for _ in 0..count {
            let (n, d) = (r.random_range(1..=max_n), r.random_range(1..=4));
            let e = normal_ensemble(&mut r, n, d, 2.5);
            for k in all_kernels(d)
                .into_iter()
                .filter(|k| k.derivative_bound().value().is_some())
            {
                for p in all_potentials(d) {
                    let check = if jac {
                        jacobian_hs_bound(&k, &p, &e, 1e-5).unwrap()
                    } else {
                        drift_norm_bound(&k, &p, &e).unwrap()
                    };
                    *total += 1;
                    if !check.holds(0.0) {
                        *bad += 1;
                    }
                }
            }
        }
    };
    checks(32, 1000, false, &mut drift_bad, &mut drift_n);
    checks(6, 100, true, &mut jac_bad, &mut jac_n);
    Outcome::new(
        drift_bad == 0 && jac_bad == 0,
        format!("drift violations {drift_bad}/{drift_n}; Jacobian violations {jac_bad}/{jac_n}"),
    )
}

fn horizon_trends(dir: &Path) -> (Outcome, Outcome) {
    let cfgs = [
        config("w2_trend.cfg", dir, 1),
        config("poc_trend.cfg", dir, 1),
    ];
    let outcomes = run_experiments(&cfgs).unwrap();
    let w2 = Outcome::new(outcomes[0].summary.pass, describe(&outcomes[0]));
    let poc = Outcome::new(outcomes[1].summary.pass, describe(&outcomes[1]));
    (w2, poc)
}

fn rate_exponent() -> Outcome {
    let (r2, r1) = (w2_rate_exponent(2, 2.5), w2_rate_exponent(1, 2.5));
    let big = 18.0 * 1000.0 * w2_rate_exponent(1000, 2.5);
    Outcome::new(
        (r2 - 1.0 / 185.625).abs() <= 1e-12
            && (r1 - 1.0 / 202.5).abs() <= 1e-12
            && (big - 1.0).abs() <= 0.05,
        format!("r(2) = {r2:.12}, r(1) = {r1:.12}, 18d·r(d) at d=1000 = {big:.4}"),
    )
}

fn determinism(dir: &Path, reference: &Path) -> Outcome {
    let cfg = config("ksd_rate_ct.cfg", &dir.join("workers2"), 2);
    run_experiment(&cfg).unwrap();
    let out = cfg.output_dir.unwrap();
    let same =
        |f: &str| std::fs::read(reference.join(f)).unwrap() == std::fs::read(out.join(f)).unwrap();
    let (m, s) = (same(METRICS_FILE), same(SUMMARY_FILE));
    Outcome::new(
        m && s,
        format!("workers 1 vs 2: metrics identical {m}, summary identical {s}"),
    )
}

fn report(id: u32, name: &str, start: Instant, outcome: Outcome, failed: &mut Vec<u32>) {
    let verdict = if outcome.pass { "PASS" } else { "FAIL" };
    println!(
        "criterion {id:>2} {verdict} {name} ({:.1}s): {}",
        start.elapsed().as_secs_f64(),
        outcome.detail
    );
    if !outcome.pass {
        failed.push(id);
    }
}

fn main() -> ExitCode {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let mut failed = Vec::new();

    let t = Instant::now();
    report(
        1,
        "continuous-time KSD rate",
        t,
        sweep("ksd_rate_ct.cfg", dir),
        &mut failed,
    );
    let t = Instant::now();
    report(
        2,
        "i.i.d. baseline",
        t,
        sweep("iid_baseline.cfg", dir),
        &mut failed,
    );
    let t = Instant::now();
    report(
        3,
        "discrete-time schedule",
        t,
        sweep("ksd_rate_dt.cfg", dir),
        &mut failed,
    );
    let t = Instant::now();
    report(4, "C* closed form", t, c_star_closed_form(), &mut failed);
    let t = Instant::now();
    report(5, "KSD oracle equivalence", t, ksd_oracle(), &mut failed);
    let t = Instant::now();
    report(6, "derivative suite", t, derivative_suite(), &mut failed);
    let t = Instant::now();
    report(
        7,
        "transport exactness",
        t,
        transport_exactness(),
        &mut failed,
    );
    let t = Instant::now();
    report(
        8,
        "drift and Jacobian bounds",
        t,
        drift_bounds(),
        &mut failed,
    );
    let t = Instant::now();
    report(
        9,
        "moment boundedness",
        t,
        sweep("moment_bound.cfg", dir),
        &mut failed,
    );
    let t = Instant::now();
    let (w2, poc) = horizon_trends(dir);
    report(10, "W2 trend", t, w2, &mut failed);
    report(11, "propagation of chaos", t, poc, &mut failed);
    let t = Instant::now();
    report(12, "rate exponent", t, rate_exponent(), &mut failed);
    let t = Instant::now();
    report(
        13,
        "determinism",
        t,
        determinism(dir, &dir.join("ksd_rate_ct")),
        &mut failed,
    );

    if failed.is_empty() {
        println!("acceptance: all 13 criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
