mod common;

use std::path::Path;
use std::process::Command;

use common::*;
use rand::Rng;
use rand_distr::StandardNormal;
use svgd_lab::harness::{
    content_version, fit_loglog, read_metrics_jsonl, read_samples_csv, read_summary,
    replicate_seed, run_experiment, run_experiments, write_samples_csv, ExperimentConfig,
    METRICS_FILE, SUMMARY_FILE,
};
use svgd_lab::{ksd_squared, KernelModel, PotentialModel};

fn config(text: &str, dir: &Path) -> ExperimentConfig {
    ExperimentConfig::parse(&format!("{text}\noutput.dir = {}\n", dir.display())).unwrap()
}

const SMALL_CT: &str = "experiment = ksd_rate_ct\ngrid.n = 4, 8, 16\nreplicates = 3\nseed = 5\n\
                        criterion.slope_min = -10\ncriterion.slope_max = 10\ncriterion.r2_min = 0";

#[test]
fn fit_recovers_noisy_square_root_law() {
    for seed in 0..100 {
        let mut r = rng(seed);
        let points: Vec<(usize, f64)> = [16usize, 32, 64, 128, 256]
            .iter()
            .flat_map(|&n| (0..10).map(move |_| n))
            .map(|n| {
                let noise = 1.0 + 0.01 * r.sample::<f64, _>(StandardNormal);
                (n, 3.0 * (n as f64).powf(-0.5) * noise)
            })
            .collect();
        let fit = fit_loglog(&points).unwrap();
        assert!(
            (fit.slope + 0.5).abs() <= 0.05,
            "seed {seed}: {}",
            fit.slope
        );
        assert!((0.0..=1.0).contains(&fit.r_squared));
    }
}

#[test]
fn metrics_are_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let a = config(&format!("{SMALL_CT}\nworkers = 1"), &dir.path().join("a"));
    let b = config(&format!("{SMALL_CT}\nworkers = 3"), &dir.path().join("b"));
    assert_eq!(a.hash(), b.hash());
    let oa = run_experiment(&a).unwrap();
    let ob = run_experiment(&b).unwrap();
    assert_eq!(oa.records, ob.records);
    let read = |p: &Path| std::fs::read(p).unwrap();
    let (ma, mb) = (
        dir.path().join("a").join(METRICS_FILE),
        dir.path().join("b").join(METRICS_FILE),
    );
    assert_eq!(read(&ma), read(&mb));
    assert_eq!(
        read(&dir.path().join("a").join(SUMMARY_FILE)),
        read(&dir.path().join("b").join(SUMMARY_FILE))
    );
}

#[test]
fn outputs_carry_rows_seeds_and_content_version() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(SMALL_CT, dir.path());
    let out = run_experiment(&cfg).unwrap();
    let records = read_metrics_jsonl(&dir.path().join(METRICS_FILE)).unwrap();
    assert_eq!(records.len(), 3 * 3);
    assert_eq!(records, out.records);
    let keys: Vec<(usize, usize)> = records.iter().map(|r| (r.n, r.replicate)).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    for r in &records {
        assert_eq!(r.seed, replicate_seed(5, r.n, r.replicate));
        assert_eq!(r.metric_name, "time_avg_ksd2");
        assert!(!r.blowup && r.value.unwrap() > 0.0);
    }
    let summary = read_summary(&dir.path().join(SUMMARY_FILE)).unwrap();
    let bytes = std::fs::read(dir.path().join(METRICS_FILE)).unwrap();
    assert_eq!(summary.content_version, content_version(&bytes));
    assert_eq!(summary.config_hash, cfg.hash());
    assert_eq!(summary.seeds.len(), 9);
    assert_eq!(summary.per_n.len(), 3);
    assert_eq!(summary.c_star, Some(4.0));
    assert_eq!(summary.c_star_status, "exact");
    assert!(summary.pass);
}

#[test]
fn rerun_with_matching_hash_is_a_no_op() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(SMALL_CT, dir.path());
    let first = run_experiment(&cfg).unwrap();
    assert!(!first.resumed);
    let path = dir.path().join(METRICS_FILE);
    let stamp = std::fs::metadata(&path).unwrap().modified().unwrap();
    let again = run_experiment(&cfg).unwrap();
    assert!(again.resumed);
    assert_eq!(again.summary, first.summary);
    assert_eq!(std::fs::metadata(&path).unwrap().modified().unwrap(), stamp);

    let changed = config(&SMALL_CT.replace("seed = 5", "seed = 6"), dir.path());
    assert!(!run_experiment(&changed).unwrap().resumed);
}

#[test]
fn shared_simulations_match_separate_runs() {
    let base = "grid.n = 2, 3, 4\nreplicates = 3\nseed = 9\ntransport.n = 8\ndynamics.dt = 0.25";
    let dir = tempfile::tempdir().unwrap();
    let w2 = config(
        &format!("experiment = w2_trend\n{base}"),
        &dir.path().join("w2"),
    );
    let poc = config(
        &format!("experiment = poc_trend\n{base}"),
        &dir.path().join("poc"),
    );
    let together = run_experiments(&[w2.clone(), poc.clone()]).unwrap();
    let dir2 = tempfile::tempdir().unwrap();
    let alone_w2 = run_experiment(&config(
        &format!("experiment = w2_trend\n{base}"),
        dir2.path(),
    ))
    .unwrap();
    assert_eq!(together[0].records, alone_w2.records);
    let dir3 = tempfile::tempdir().unwrap();
    let alone_poc = run_experiment(&config(
        &format!("experiment = poc_trend\n{base}"),
        dir3.path(),
    ))
    .unwrap();
    assert_eq!(together[1].records, alone_poc.records);
    assert!(together[1]
        .records
        .iter()
        .all(|r| r.metric_name == "w1_pair"));
}

#[test]
fn blow_ups_are_recorded_and_trip_the_quota() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        "experiment = ksd_rate_dt\ngrid.n = 2, 3\nreplicates = 3\ndynamics.eta = 1e9\ninit.kind = target\ndynamics.K = 1e9",
        dir.path(),
    );
    let out = run_experiment(&cfg).unwrap();
    assert!(out.records.iter().all(|r| r.blowup && r.value.is_none()));
    assert!(out.summary.quota_exceeded && !out.summary.pass);
    assert_eq!(out.exit_code(), 4);
    assert!(out.summary.fit_error.is_some());
    let line = std::fs::read_to_string(dir.path().join(METRICS_FILE)).unwrap();
    assert!(line.contains("\"value\":null") && line.contains("\"blowup\":true"));
}

#[test]
fn discrete_sweeps_report_rejection_statistics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        "experiment = ksd_rate_dt\ngrid.n = 2, 3\nreplicates = 3\ninit.kind = target\ndynamics.K = 3",
        dir.path(),
    );
    let out = run_experiment(&cfg).unwrap();
    let stats = out.summary.restricted_init.unwrap();
    assert_eq!(stats.accepted, 6);
    assert!(stats.attempts >= 6);
    assert!((0.0..1.0).contains(&stats.rejection_rate));
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_svgd-lab"))
}

fn json_of(out: &std::process::Output) -> serde_json::Value {
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    serde_json::from_str(text.lines().next().unwrap()).unwrap()
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, text: &str| {
        let p = dir.path().join(name);
        std::fs::write(
            &p,
            format!(
                "{text}\noutput.dir = {}\n",
                dir.path().join(name).with_extension("out").display()
            ),
        )
        .unwrap();
        p
    };
    let iid = "experiment = iid_baseline\ngrid.n = 16, 64, 256\nreplicates = 5\nseed = 2";
    let pass = write("pass.cfg", iid);
    let fail = write(
        "fail.cfg",
        &format!("{iid}\ncriterion.slope_min = 0\ncriterion.slope_max = 1"),
    );
    let bad = write("bad.cfg", "experiment = iid_baseline\ncolour = blue");
    let quota = write(
        "quota.cfg",
        "experiment = ksd_rate_dt\ngrid.n = 2, 3\nreplicates = 3\ndynamics.eta = 1e9\ninit.kind = target\ndynamics.K = 1e9",
    );
    let code = |args: &[&Path]| {
        cli()
            .arg("sweep")
            .args(args)
            .output()
            .unwrap()
            .status
            .code()
    };
    assert_eq!(code(&[&pass]), Some(0));
    assert_eq!(code(&[&fail]), Some(2));
    assert_eq!(code(&[&bad]), Some(3));
    assert_eq!(code(&[&quota]), Some(4));
    assert_eq!(code(&[&pass, &fail]), Some(2));
    assert_eq!(code(&[&dir.path().join("missing.cfg")]), Some(3));

    let out = cli().arg("sweep").arg(&pass).output().unwrap();
    let v = json_of(&out);
    assert_eq!(v["pass"], true);
    assert_eq!(v["resumed"], true);
    let fresh = read_summary(&dir.path().join("pass.out").join(SUMMARY_FILE)).unwrap();
    let records = read_metrics_jsonl(&dir.path().join("pass.out").join(METRICS_FILE)).unwrap();
    let points: Vec<(usize, f64)> = records.iter().map(|r| (r.n, r.value.unwrap())).collect();
    assert_eq!(fit_loglog(&points).unwrap().per_n, fresh.per_n);
}

#[test]
fn cli_ksd_w2_and_rate_exponent() {
    let dir = tempfile::tempdir().unwrap();
    let p = PotentialModel::isotropic_gaussian(2, 1.0).unwrap();
    let a = p.reference_sampler(40, 1).unwrap();
    let b = p.reference_sampler(40, 2).unwrap();
    let (pa, pb) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    write_samples_csv(&pa, &a).unwrap();
    write_samples_csv(&pb, &b).unwrap();
    let cfg = dir.path().join("k.cfg");
    std::fs::write(
        &cfg,
        "kernel.kind = gaussian\nkernel.h = 1\npotential.d = 2\n",
    )
    .unwrap();

    let out = cli()
        .args(["ksd", "--samples"])
        .arg(&pa)
        .arg("--config")
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(out.status.success());
    let v = json_of(&out);
    let k = KernelModel::gaussian(2, 1.0).unwrap();
    assert_eq!(
        v["ksd2"].as_f64().unwrap(),
        ksd_squared(&k, &p, &a).unwrap().ksd2
    );
    assert_eq!(v["c_star"].as_f64().unwrap(), 4.0);
    assert_eq!(v["c_star_status"], "exact");

    let out = cli()
        .args(["w2", "--a"])
        .arg(&pa)
        .arg("--b")
        .arg(&pb)
        .output()
        .unwrap();
    let v = json_of(&out);
    let want = svgd_lab::wasserstein_assign(&a, &b, 2).unwrap().distance;
    assert_eq!(v["distance"].as_f64().unwrap(), want);
    assert_eq!((v["s"].as_u64(), v["n"].as_u64()), (Some(2), Some(40)));
    let out = cli()
        .args(["w2", "--s", "1", "--a"])
        .arg(&pa)
        .arg("--b")
        .arg(&pb)
        .output()
        .unwrap();
    assert_eq!(json_of(&out)["s"].as_u64(), Some(1));
    assert!(!cli()
        .args(["w2", "--s", "3", "--a"])
        .arg(&pa)
        .arg("--b")
        .arg(&pb)
        .output()
        .unwrap()
        .status
        .success());

    let out = cli()
        .args(["rate-exponent", "--d", "2", "--nu", "2.5"])
        .output()
        .unwrap();
    assert!((json_of(&out)["r"].as_f64().unwrap() - 1.0 / 185.625).abs() < 1e-15);
    assert!(!cli()
        .args(["rate-exponent", "--d", "0", "--nu", "2.5"])
        .output()
        .unwrap()
        .status
        .success());
}

#[test]
fn cli_run_writes_samples_and_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        format!(
            "run.n = 12\ndynamics.t_end = 2\nseed = 4\noutput.dir = {}\n",
            out_dir.display()
        ),
    )
    .unwrap();
    let out = cli().arg("run").arg(&cfg).output().unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let initial = read_samples_csv(&out_dir.join("initial.csv")).unwrap();
    let last = read_samples_csv(&out_dir.join("final.csv")).unwrap();
    assert_eq!((initial.len(), initial.dim()), (12, 2));
    assert!(last.second_moment() < initial.second_moment());
    let lines = std::fs::read_to_string(out_dir.join("trajectory.jsonl")).unwrap();
    let rows: Vec<serde_json::Value> = lines
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(rows.len(), 41);
    assert_eq!(rows[40]["time"].as_f64().unwrap(), 2.0);
    assert!(rows.iter().all(|r| r["ksd2"].as_f64().unwrap() >= 0.0));
}
