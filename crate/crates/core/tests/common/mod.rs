//! Independent oracles shared by the integration tests.
//!
//! Everything here uses only values (`eval`, `value`) and finite differences,
//! never the analytic derivatives under test.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use svgd_lab::{KernelModel, MaternOrder, ParticleEnsemble, PotentialModel};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_vec<R: Rng>(rng: &mut R, d: usize, scale: f64) -> Vec<f64> {
    (0..d)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

pub fn normal_ensemble<R: Rng>(rng: &mut R, n: usize, d: usize, scale: f64) -> ParticleEnsemble {
    let data = (0..n * d)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect();
    ParticleEnsemble::new(n, d, data).unwrap()
}

/// Every kernel family the crate offers in dimension `d`.
pub fn all_kernels(d: usize) -> Vec<KernelModel> {
    let sigma: Vec<f64> = (0..d).map(|l| 0.7 + 0.3 * l as f64).collect();
    vec![
        KernelModel::gaussian(d, 1.0).unwrap(),
        KernelModel::gaussian(d, 0.5).unwrap(),
        KernelModel::gaussian(d, 3.0).unwrap(),
        KernelModel::matern(d, MaternOrder::FiveHalves, None).unwrap(),
        KernelModel::matern(d, MaternOrder::SevenHalves, Some(sigma.clone())).unwrap(),
        KernelModel::bilinear_plus_matern(d, MaternOrder::FiveHalves, None).unwrap(),
        KernelModel::bilinear_plus_matern(d, MaternOrder::SevenHalves, Some(sigma)).unwrap(),
    ]
}

pub fn all_potentials(d: usize) -> Vec<PotentialModel> {
    let variances: Vec<f64> = (0..d).map(|l| 0.5 + 0.75 * l as f64).collect();
    vec![
        PotentialModel::isotropic_gaussian(d, 1.0).unwrap(),
        PotentialModel::diagonal_gaussian(variances, 1.5).unwrap(),
        PotentialModel::gaussian_mixture(d, 1.5, 1.0).unwrap(),
    ]
}

pub const FD_STEP: f64 = 1e-5;

/// Central-difference gradient of `f` at `x`.
pub fn fd_grad(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|l| {
            p[l] = x[l] + h;
            let up = f(&p);
            p[l] = x[l] - h;
            let down = f(&p);
            p[l] = x[l];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Trace of the central-difference Hessian of `f`.
pub fn fd_laplacian(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> f64 {
    let f0 = f(x);
    let mut p = x.to_vec();
    (0..x.len())
        .map(|l| {
            p[l] = x[l] + h;
            let up = f(&p);
            p[l] = x[l] - h;
            let down = f(&p);
            p[l] = x[l];
            (up - 2.0 * f0 + down) / (h * h)
        })
        .sum()
}

/// `Σ_l ∂²k/∂x_l∂y_l` by the four-point mixed difference.
pub fn fd_div12(kernel: &KernelModel, x: &[f64], y: &[f64], h: f64) -> f64 {
    let (mut xp, mut yp) = (x.to_vec(), y.to_vec());
    let mut total = 0.0;
    for l in 0..x.len() {
        let mut k = |sx: f64, sy: f64| {
            xp[l] = x[l] + sx * h;
            yp[l] = y[l] + sy * h;
            let v = kernel.eval(&xp, &yp).unwrap();
            xp[l] = x[l];
            yp[l] = y[l];
            v
        };
        total += (k(1.0, 1.0) - k(1.0, -1.0) - k(-1.0, 1.0) + k(-1.0, -1.0)) / (4.0 * h * h);
    }
    total
}

/// Stein kernel with every derivative replaced by finite differences.
pub fn naive_u(kernel: &KernelModel, potential: &PotentialModel, x: &[f64], y: &[f64]) -> f64 {
    let v = |z: &[f64]| potential.value(z).unwrap();
    let gx = fd_grad(v, x, FD_STEP);
    let gy = fd_grad(v, y, FD_STEP);
    let g1 = fd_grad(|z| kernel.eval(z, y).unwrap(), x, FD_STEP);
    let g2 = fd_grad(|z| kernel.eval(x, z).unwrap(), y, FD_STEP);
    let k = kernel.eval(x, y).unwrap();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
    dot(&gx, &gy) * k - dot(&gx, &g2) - dot(&gy, &g1) + fd_div12(kernel, x, y, 1e-4)
}

/// `N⁻² Σᵢ Σⱼ u(xᵢ, xⱼ)` over the full square in index order.
pub fn naive_ksd2(kernel: &KernelModel, potential: &PotentialModel, e: &ParticleEnsemble) -> f64 {
    let n = e.len();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            total += naive_u(kernel, potential, e.row(i), e.row(j));
        }
    }
    total / (n * n) as f64
}

/// `|got - want| / max(|want|, 10⁻³)`.
pub fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(1e-3)
}

pub fn max_rel_err(got: &[f64], want: &[f64]) -> f64 {
    let scale = want.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-3);
    got.iter()
        .zip(want)
        .fold(0.0f64, |m, (g, w)| m.max((g - w).abs() / scale))
}

/// All permutations of `0..n` (Heap's algorithm).
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn heap(k: usize, a: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k <= 1 {
            out.push(a.clone());
            return;
        }
        for i in 0..k - 1 {
            heap(k - 1, a, out);
            if k.is_multiple_of(2) {
                a.swap(i, k - 1);
            } else {
                a.swap(0, k - 1);
            }
        }
        heap(k - 1, a, out);
    }
    let mut a: Vec<usize> = (0..n).collect();
    let mut out = Vec::new();
    heap(n, &mut a, &mut out);
    out
}

/// `(min over permutations of mean ‖aᵢ − b_σ(i)‖^s)^{1/s}`.
pub fn brute_force_w(a: &ParticleEnsemble, b: &ParticleEnsemble, s: u32) -> f64 {
    let n = a.len();
    let cost = |i: usize, j: usize| {
        let d2: f64 = a
            .row(i)
            .iter()
            .zip(b.row(j))
            .map(|(p, q)| (p - q) * (p - q))
            .sum();
        if s == 1 {
            d2.sqrt()
        } else {
            d2
        }
    };
    let best = permutations(n)
        .iter()
        .map(|p| p.iter().enumerate().map(|(i, &j)| cost(i, j)).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    let mean = best / n as f64;
    if s == 1 {
        mean
    } else {
        mean.sqrt()
    }
}
