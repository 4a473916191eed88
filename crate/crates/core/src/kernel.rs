//! Positive-definite kernels and every derivative quantity the particle
//! dynamics and the Stein diagnostics consume.
//!
//! Three families are provided:
//!
//! * Gaussian, `k(x, y) = exp(-‖x - y‖² / (2h))`, with `h` a squared length scale;
//! * Matérn with half-integer order `ν ∈ {5/2, 7/2}` and diagonal scaling `Σ`,
//!   `Ψ(z) = 2^{1-(d/2+ν)} / Γ(d/2+ν) · ‖Σz‖^ν K_ν(‖Σz‖)`;
//! * the composite `1 + ⟨x, y⟩ + Ψ(x - y)` with a Matérn `Ψ`.
//!
//! For half-integer orders `r^ν K_ν(r) = √(π/2) e^{-r} P(r)` with an elementary
//! polynomial `P`, so all derivatives are closed form. Writing `g(r)` for the
//! radial profile, `G(r) = g'(r)/r` and `H(r) = G'(r)/r` are again of the form
//! `c e^{-r} · poly(r)` and are smooth at `r = 0`, which is what makes the
//! diagonal quantities exact without any limit-taking.

use std::fmt;

use crate::error::{check_dim, check_finite, Error, Result};

/// Half-integer Matérn orders with elementary closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaternOrder {
    FiveHalves,
    SevenHalves,
}

impl MaternOrder {
    pub fn from_nu(nu: f64) -> Result<Self> {
        if nu == 2.5 {
            Ok(Self::FiveHalves)
        } else if nu == 3.5 {
            Ok(Self::SevenHalves)
        } else {
            Err(Error::Unsupported(format!(
                "Matérn order {nu}; only 5/2 and 7/2 are implemented"
            )))
        }
    }

    pub fn nu(self) -> f64 {
        match self {
            Self::FiveHalves => 2.5,
            Self::SevenHalves => 3.5,
        }
    }
}

/// Uniform bound on `|k|` and all partial derivatives up to order two.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DerivativeBound {
    Bounded(f64),
    Unbounded,
}

impl DerivativeBound {
    pub fn value(self) -> Option<f64> {
        match self {
            Self::Bounded(b) => Some(b),
            Self::Unbounded => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum KernelKind {
    Gaussian {
        h: f64,
    },
    Matern {
        order: MaternOrder,
        sigma_diag: Vec<f64>,
    },
    BilinearPlusMatern {
        order: MaternOrder,
        sigma_diag: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
struct MaternPsi {
    order: MaternOrder,
    sigma: Vec<f64>,
    sigma_sq: Vec<f64>,
    sigma_sq_sum: f64,
    /// `2^{1-(d/2+ν)} / Γ(d/2+ν) · √(π/2)`.
    scale: f64,
}

impl MaternPsi {
    fn new(dim: usize, order: MaternOrder, sigma: Vec<f64>) -> Result<Self> {
        check_dim(dim, sigma.len())?;
        if sigma.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::InvalidParameter(
                "Matérn scale entries must be positive and finite".into(),
            ));
        }
        let shape = dim as f64 / 2.0 + order.nu();
        let scale = 2f64.powf(1.0 - shape) / gamma_half_integer(shape)
            * (std::f64::consts::PI / 2.0).sqrt();
        let sigma_sq: Vec<f64> = sigma.iter().map(|s| s * s).collect();
        let sigma_sq_sum = sigma_sq.iter().sum();
        Ok(Self {
            order,
            sigma,
            sigma_sq,
            sigma_sq_sum,
            scale,
        })
    }

    fn radius_sq(&self, z: &[f64]) -> f64 {
        z.iter().zip(&self.sigma_sq).map(|(v, s)| s * v * v).sum()
    }

    /// `g(r)`, `G(r) = g'(r)/r`, `H(r) = G'(r)/r`.
    #[inline]
    fn profile(&self, r: f64) -> (f64, f64, f64) {
        let e = self.scale * (-r).exp();
        match self.order {
            MaternOrder::FiveHalves => {
                let p = (r + 3.0) * r + 3.0;
                (e * p, -e * (r + 1.0), e)
            }
            MaternOrder::SevenHalves => {
                let p = ((r + 6.0) * r + 15.0) * r + 15.0;
                let q = (r + 3.0) * r + 3.0;
                (e * p, -e * q, e * (r + 1.0))
            }
        }
    }

    fn value_at_zero(&self) -> f64 {
        self.profile(0.0).0
    }

    fn laplacian_at_zero(&self) -> f64 {
        self.profile(0.0).1 * self.sigma_sq_sum
    }

    /// `Ψ(z)`; writes `∇Ψ(z)` into `grad`.
    #[inline]
    fn value_grad(&self, z: &[f64], grad: &mut [f64]) -> f64 {
        let r = self.radius_sq(z).sqrt();
        let (g, big_g, _) = self.profile(r);
        for ((o, v), s) in grad.iter_mut().zip(z).zip(&self.sigma_sq) {
            *o = big_g * s * v;
        }
        g
    }

    fn laplacian(&self, z: &[f64]) -> f64 {
        let r = self.radius_sq(z).sqrt();
        let (_, big_g, big_h) = self.profile(r);
        let w_sq: f64 = z
            .iter()
            .zip(&self.sigma_sq)
            .map(|(v, s)| (s * v) * (s * v))
            .sum();
        big_g * self.sigma_sq_sum + big_h * w_sq
    }

    fn derivative_bound(&self) -> f64 {
        // sup over r of the radial envelopes of |Ψ|, |∂Ψ| and |∂²Ψ|:
        //   |∂ₗΨ| ≤ s_max · r|G(r)|,  |∂ₗ∂ₘΨ| ≤ s_max² (|G(r)| + r²|H(r)|).
        // Each envelope is c e^{-r} · poly(r), unimodal on [0, ∞); a fine grid
        // plus a small relative margin gives a certified constant.
        let s_max = self.sigma.iter().copied().fold(0.0, f64::max);
        let mut first = 0.0_f64;
        let mut second = 0.0_f64;
        for step in 0..=80_000 {
            let r = step as f64 * 1e-3;
            let (_, big_g, big_h) = self.profile(r);
            first = first.max(r * big_g.abs());
            second = second.max(big_g.abs() + r * r * big_h.abs());
        }
        let bound = self
            .value_at_zero()
            .max(s_max * first)
            .max(s_max * s_max * second);
        bound * (1.0 + 1e-4)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Stationary {
    Gaussian { h: f64, inv_h: f64 },
    Matern(MaternPsi),
}

impl Stationary {
    /// `Ψ(z)`; writes `∇Ψ(z)`.
    #[inline]
    fn value_grad(&self, z: &[f64], grad: &mut [f64]) -> f64 {
        match self {
            Self::Gaussian { inv_h, .. } => {
                let sq: f64 = z.iter().map(|v| v * v).sum();
                let k = (-0.5 * sq * inv_h).exp();
                for (o, v) in grad.iter_mut().zip(z) {
                    *o = -v * inv_h * k;
                }
                k
            }
            Self::Matern(m) => m.value_grad(z, grad),
        }
    }

    fn value(&self, z: &[f64]) -> f64 {
        match self {
            Self::Gaussian { inv_h, .. } => {
                let sq: f64 = z.iter().map(|v| v * v).sum();
                (-0.5 * sq * inv_h).exp()
            }
            Self::Matern(m) => m.profile(m.radius_sq(z).sqrt()).0,
        }
    }

    fn laplacian(&self, z: &[f64]) -> f64 {
        match self {
            Self::Gaussian { inv_h, .. } => {
                let sq: f64 = z.iter().map(|v| v * v).sum();
                let k = (-0.5 * sq * inv_h).exp();
                k * (sq * inv_h * inv_h - z.len() as f64 * inv_h)
            }
            Self::Matern(m) => m.laplacian(z),
        }
    }

    fn value_at_zero(&self) -> f64 {
        match self {
            Self::Gaussian { .. } => 1.0,
            Self::Matern(m) => m.value_at_zero(),
        }
    }

    fn laplacian_at_zero(&self, dim: usize) -> f64 {
        match self {
            Self::Gaussian { inv_h, .. } => -(dim as f64) * inv_h,
            Self::Matern(m) => m.laplacian_at_zero(),
        }
    }
}

/// A symmetric positive-definite kernel on `ℝ^d`. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelModel {
    dim: usize,
    stationary: Stationary,
    bilinear: bool,
    bound: DerivativeBound,
}

impl KernelModel {
    pub fn gaussian(dim: usize, h: f64) -> Result<Self> {
        check_positive_dim(dim)?;
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "Gaussian bandwidth must be positive, got {h}"
            )));
        }
        // |k| ≤ 1, |∂k| ≤ e^{-1/2}/√h, |∂²k| ≤ 1/h.
        Ok(Self {
            dim,
            stationary: Stationary::Gaussian { h, inv_h: 1.0 / h },
            bilinear: false,
            bound: DerivativeBound::Bounded(1f64.max(1.0 / h)),
        })
    }

    pub fn matern(dim: usize, order: MaternOrder, sigma_diag: Option<Vec<f64>>) -> Result<Self> {
        check_positive_dim(dim)?;
        let psi = MaternPsi::new(dim, order, sigma_diag.unwrap_or_else(|| vec![1.0; dim]))?;
        let bound = DerivativeBound::Bounded(psi.derivative_bound());
        Ok(Self {
            dim,
            stationary: Stationary::Matern(psi),
            bilinear: false,
            bound,
        })
    }

    pub fn bilinear_plus_matern(
        dim: usize,
        order: MaternOrder,
        sigma_diag: Option<Vec<f64>>,
    ) -> Result<Self> {
        let mut kernel = Self::matern(dim, order, sigma_diag)?;
        kernel.bilinear = true;
        kernel.bound = DerivativeBound::Unbounded;
        Ok(kernel)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> KernelKind {
        match (&self.stationary, self.bilinear) {
            (Stationary::Gaussian { h, .. }, _) => KernelKind::Gaussian { h: *h },
            (Stationary::Matern(m), false) => KernelKind::Matern {
                order: m.order,
                sigma_diag: m.sigma.clone(),
            },
            (Stationary::Matern(m), true) => KernelKind::BilinearPlusMatern {
                order: m.order,
                sigma_diag: m.sigma.clone(),
            },
        }
    }

    pub fn derivative_bound(&self) -> DerivativeBound {
        self.bound
    }

    pub fn is_translation_invariant(&self) -> bool {
        !self.bilinear
    }

    /// `Ψ(0)` of the translation-invariant part.
    pub fn psi_at_zero(&self) -> f64 {
        self.stationary.value_at_zero()
    }

    /// `ΔΨ(0)` of the translation-invariant part.
    pub fn psi_laplacian_at_zero(&self) -> f64 {
        self.stationary.laplacian_at_zero(self.dim)
    }

    fn check_pair(&self, x: &[f64], y: &[f64]) -> Result<()> {
        check_dim(self.dim, x.len())?;
        check_dim(self.dim, y.len())?;
        check_finite(x, "kernel argument")?;
        check_finite(y, "kernel argument")
    }

    fn check_point(&self, z: &[f64]) -> Result<()> {
        check_dim(self.dim, z.len())?;
        check_finite(z, "kernel argument")
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check_pair(x, y)?;
        Ok(self.eval_unchecked(x, y))
    }

    /// `∇₁k(x, y)`.
    pub fn grad1(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        self.check_pair(x, y)?;
        let mut g12 = vec![0.0; self.dim];
        let mut g21 = vec![0.0; self.dim];
        self.pair_into(x, y, &mut g12, &mut g21);
        Ok(g21)
    }

    /// `∇₂k(x, y)`: the gradient of `k(x, ·)` at `y`.
    pub fn grad2(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        self.check_pair(x, y)?;
        let mut g12 = vec![0.0; self.dim];
        let mut g21 = vec![0.0; self.dim];
        self.pair_into(x, y, &mut g12, &mut g21);
        Ok(g12)
    }

    /// `∇₁·∇₂k(x, y) = Σₗ ∂²k / ∂xₗ∂yₗ`.
    pub fn div12(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check_pair(x, y)?;
        Ok(self.div12_unchecked(x, y))
    }

    /// `Δ₂k(z, z)`: Laplacian of `k(z, ·)` evaluated at `z`.
    pub fn laplacian2_diag(&self, z: &[f64]) -> Result<f64> {
        self.check_point(z)?;
        Ok(self.laplacian2_diag_unchecked())
    }

    /// `∇₂k(z, z)`.
    pub fn grad2_diag(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_point(z)?;
        let mut out = vec![0.0; self.dim];
        self.grad2_diag_into(z, &mut out);
        Ok(out)
    }

    /// `k(z, z)`.
    pub fn eval_diag(&self, z: &[f64]) -> Result<f64> {
        self.check_point(z)?;
        Ok(self.eval_diag_unchecked(z))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        let z: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        let mut k = self.stationary.value(&z);
        if self.bilinear {
            k += 1.0 + dot(x, y);
        }
        k
    }

    pub(crate) fn eval_diag_unchecked(&self, z: &[f64]) -> f64 {
        let mut k = self.stationary.value_at_zero();
        if self.bilinear {
            k += 1.0 + dot(z, z);
        }
        k
    }

    pub(crate) fn grad2_diag_into(&self, z: &[f64], out: &mut [f64]) {
        if self.bilinear {
            out.copy_from_slice(z);
        } else {
            out.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    pub(crate) fn laplacian2_diag_unchecked(&self) -> f64 {
        // the bilinear part is linear in the second argument
        self.stationary.laplacian_at_zero(self.dim)
    }

    pub(crate) fn div12_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        let z: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        let mut v = -self.stationary.laplacian(&z);
        if self.bilinear {
            v += self.dim as f64;
        }
        v
    }

    /// Returns `k(x, y)`; writes `∇₂k(x, y)` into `grad2_xy` and `∇₂k(y, x)`
    /// (equivalently `∇₁k(x, y)`) into `grad2_yx`. Swapping `x` and `y`
    /// yields bit-identical values with the two outputs exchanged.
    #[inline]
    pub(crate) fn pair_into(
        &self,
        x: &[f64],
        y: &[f64],
        grad2_xy: &mut [f64],
        grad2_yx: &mut [f64],
    ) -> f64 {
        let d = self.dim;
        let mut zbuf = [0.0; 8];
        let mut gbuf = [0.0; 8];
        let mut zvec;
        let mut gvec;
        let (z, grad_psi): (&mut [f64], &mut [f64]) = if d <= 8 {
            (&mut zbuf[..d], &mut gbuf[..d])
        } else {
            zvec = vec![0.0; d];
            gvec = vec![0.0; d];
            (&mut zvec[..], &mut gvec[..])
        };
        for ((o, a), b) in z.iter_mut().zip(x).zip(y) {
            *o = a - b;
        }
        let mut k = self.stationary.value_grad(z, grad_psi);
        // ∇₂Ψ(x - y) = -∇Ψ(z), and ∇₂Ψ(y - x) = ∇Ψ(z) since ∇Ψ is odd.
        if self.bilinear {
            k += 1.0 + dot(x, y);
            for l in 0..d {
                grad2_xy[l] = x[l] - grad_psi[l];
                grad2_yx[l] = y[l] + grad_psi[l];
            }
        } else {
            for l in 0..d {
                grad2_xy[l] = -grad_psi[l];
                grad2_yx[l] = grad_psi[l];
            }
        }
        k
    }

    /// [`Self::pair_into`] for a compile-time dimension; same values bit for bit.
    #[inline(always)]
    pub(crate) fn pair_fixed<const D: usize>(
        &self,
        x: &[f64; D],
        y: &[f64; D],
        grad2_xy: &mut [f64; D],
        grad2_yx: &mut [f64; D],
    ) -> f64 {
        let mut z = [0.0; D];
        for l in 0..D {
            z[l] = x[l] - y[l];
        }
        let mut grad_psi = [0.0; D];
        let mut k = match &self.stationary {
            Stationary::Gaussian { inv_h, .. } => {
                let mut sq = 0.0;
                for v in &z {
                    sq += v * v;
                }
                let k = (-0.5 * sq * inv_h).exp();
                for l in 0..D {
                    grad_psi[l] = -z[l] * inv_h * k;
                }
                k
            }
            Stationary::Matern(m) => {
                let s: &[f64; D] = m.sigma_sq[..].try_into().expect("dimension checked");
                let mut sq = 0.0;
                for l in 0..D {
                    sq += s[l] * z[l] * z[l];
                }
                let (g, big_g, _) = m.profile(sq.sqrt());
                for l in 0..D {
                    grad_psi[l] = big_g * s[l] * z[l];
                }
                g
            }
        };
        if self.bilinear {
            let mut xy = 0.0;
            for l in 0..D {
                xy += x[l] * y[l];
            }
            k += 1.0 + xy;
            for l in 0..D {
                grad2_xy[l] = x[l] - grad_psi[l];
                grad2_yx[l] = y[l] + grad_psi[l];
            }
        } else {
            for l in 0..D {
                grad2_xy[l] = -grad_psi[l];
                grad2_yx[l] = grad_psi[l];
            }
        }
        k
    }

    /// [`Self::pair_div_into`] for a compile-time dimension; same values bit for bit.
    #[inline(always)]
    pub(crate) fn pair_div_fixed<const D: usize>(
        &self,
        x: &[f64; D],
        y: &[f64; D],
        grad2_xy: &mut [f64; D],
        grad2_yx: &mut [f64; D],
    ) -> (f64, f64) {
        let mut z = [0.0; D];
        for l in 0..D {
            z[l] = x[l] - y[l];
        }
        let mut grad_psi = [0.0; D];
        let (mut k, lap) = match &self.stationary {
            Stationary::Gaussian { inv_h, .. } => {
                let mut sq = 0.0;
                for v in &z {
                    sq += v * v;
                }
                let k = (-0.5 * sq * inv_h).exp();
                for l in 0..D {
                    grad_psi[l] = -z[l] * inv_h * k;
                }
                (k, k * (sq * inv_h * inv_h - D as f64 * inv_h))
            }
            Stationary::Matern(m) => {
                let s: &[f64; D] = m.sigma_sq[..].try_into().expect("dimension checked");
                let mut sq = 0.0;
                let mut w_sq = 0.0;
                for l in 0..D {
                    sq += s[l] * z[l] * z[l];
                    w_sq += (s[l] * z[l]) * (s[l] * z[l]);
                }
                let (g, big_g, big_h) = m.profile(sq.sqrt());
                for l in 0..D {
                    grad_psi[l] = big_g * s[l] * z[l];
                }
                (g, big_g * m.sigma_sq_sum + big_h * w_sq)
            }
        };
        let mut div = -lap;
        if self.bilinear {
            let mut xy = 0.0;
            for l in 0..D {
                xy += x[l] * y[l];
            }
            k += 1.0 + xy;
            div += D as f64;
            for l in 0..D {
                grad2_xy[l] = x[l] - grad_psi[l];
                grad2_yx[l] = y[l] + grad_psi[l];
            }
        } else {
            for l in 0..D {
                grad2_xy[l] = -grad_psi[l];
                grad2_yx[l] = grad_psi[l];
            }
        }
        (k, div)
    }

    /// [`Self::pair_into`] plus `∇₁·∇₂k(x, y)` as the second return value.
    pub(crate) fn pair_div_into(
        &self,
        x: &[f64],
        y: &[f64],
        grad2_xy: &mut [f64],
        grad2_yx: &mut [f64],
    ) -> (f64, f64) {
        let k = self.pair_into(x, y, grad2_xy, grad2_yx);
        let d = self.dim;
        let mut zbuf = [0.0; 8];
        let zvec;
        let z: &[f64] = if d <= 8 {
            for l in 0..d {
                zbuf[l] = x[l] - y[l];
            }
            &zbuf[..d]
        } else {
            zvec = x.iter().zip(y).map(|(a, b)| a - b).collect::<Vec<_>>();
            &zvec
        };
        let mut div = -self.stationary.laplacian(z);
        if self.bilinear {
            div += d as f64;
        }
        (k, div)
    }
}

impl fmt::Display for KernelModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind() {
            KernelKind::Gaussian { h } => write!(f, "gaussian(h={h})"),
            KernelKind::Matern { order, .. } => write!(f, "matern(nu={})", order.nu()),
            KernelKind::BilinearPlusMatern { order, .. } => {
                write!(f, "bilinear_plus_matern(nu={})", order.nu())
            }
        }
    }
}

/// Median heuristic bandwidth for the Gaussian convention used here:
/// `h = med² / (2 log N)` where `med` is the median pairwise distance.
pub fn median_heuristic_bandwidth(points: &crate::ParticleEnsemble) -> f64 {
    let n = points.len();
    if n < 2 {
        return 1.0;
    }
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let sq: f64 = points
                .row(i)
                .iter()
                .zip(points.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            dists.push(sq.sqrt());
        }
    }
    dists.sort_by(f64::total_cmp);
    let med = dists[dists.len() / 2];
    let h = med * med / (2.0 * (n as f64).ln().max(f64::MIN_POSITIVE));
    if h.is_finite() && h > 0.0 {
        h
    } else {
        1.0
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_positive_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        return Err(Error::InvalidParameter(
            "kernel dimension must be >= 1".into(),
        ));
    }
    Ok(())
}

/// Γ(x) for positive integers and half-integers, by exact recursion.
pub(crate) fn gamma_half_integer(x: f64) -> f64 {
    let twice = (2.0 * x).round();
    debug_assert!((2.0 * x - twice).abs() < 1e-12 && twice >= 1.0);
    let (mut acc, mut t) = if (twice as u64).is_multiple_of(2) {
        (1.0, 1.0)
    } else {
        (std::f64::consts::PI.sqrt(), 0.5)
    };
    while t < x - 0.25 {
        acc *= t;
        t += 1.0;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_grad2(k: &KernelModel, x: &[f64], y: &[f64], h: f64) -> Vec<f64> {
        (0..y.len())
            .map(|l| {
                let mut yp = y.to_vec();
                let mut ym = y.to_vec();
                yp[l] += h;
                ym[l] -= h;
                (k.eval(x, &yp).unwrap() - k.eval(x, &ym).unwrap()) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn gamma_values() {
        assert_eq!(gamma_half_integer(1.0), 1.0);
        assert_eq!(gamma_half_integer(4.0), 6.0);
        let g35 = gamma_half_integer(3.5);
        assert!((g35 - 15.0 * std::f64::consts::PI.sqrt() / 8.0).abs() < 1e-14);
    }

    #[test]
    fn gaussian_reference_values() {
        let k = KernelModel::gaussian(2, 1.0).unwrap();
        assert_eq!(k.eval(&[0.0, 0.0], &[0.0, 0.0]).unwrap(), 1.0);
        let e = (-0.5f64).exp();
        assert!((k.eval(&[1.0, 0.0], &[0.0, 0.0]).unwrap() - e).abs() < 1e-15);
        let g = k.grad2(&[1.0, 0.0], &[0.0, 0.0]).unwrap();
        assert!((g[0] - e).abs() < 1e-15 && g[1] == 0.0);
        assert_eq!(k.div12(&[0.3, 0.3], &[0.3, 0.3]).unwrap(), 2.0);
        assert!((k.div12(&[1.0, 0.0], &[0.0, 0.0]).unwrap() - e).abs() < 1e-15);
        assert_eq!(k.laplacian2_diag(&[5.0, -1.0]).unwrap(), -2.0);
        assert_eq!(k.grad2_diag(&[5.0, -1.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(k.derivative_bound(), DerivativeBound::Bounded(1.0));
    }

    #[test]
    fn matern_value_at_diagonal() {
        // Ψ(0) = 2^{-d/2} Γ(ν) / Γ(d/2 + ν) = 0.5 · Γ(2.5)/Γ(3.5) = 0.2
        let k = KernelModel::matern(2, MaternOrder::FiveHalves, None).unwrap();
        let v = k.eval(&[0.4, -1.0], &[0.4, -1.0]).unwrap();
        assert!((v - 0.2).abs() < 1e-15, "{v}");
        // same limit for ν = 7/2, d = 3: 2^{-3/2} Γ(3.5) / Γ(5)
        let k = KernelModel::matern(3, MaternOrder::SevenHalves, None).unwrap();
        let expected = 2f64.powf(-1.5) * gamma_half_integer(3.5) / 24.0;
        assert!((k.psi_at_zero() - expected).abs() < 1e-15);
    }

    #[test]
    fn composite_gradient_sum_rule() {
        let k = KernelModel::bilinear_plus_matern(2, MaternOrder::FiveHalves, None).unwrap();
        let x = [1.0, 0.0];
        let y = [0.0, 0.0];
        let g = k.grad2(&x, &y).unwrap();
        let fd = fd_grad2(&k, &x, &y, 1e-5);
        for l in 0..2 {
            assert!((g[l] - fd[l]).abs() < 1e-8, "{g:?} vs {fd:?}");
        }
        let m = KernelModel::matern(2, MaternOrder::FiveHalves, None).unwrap();
        let gm = m.grad2(&x, &y).unwrap();
        assert!((g[0] - (1.0 + gm[0])).abs() < 1e-15 && (g[1] - gm[1]).abs() < 1e-15);
        assert_eq!(k.grad2_diag(&[0.5, -2.0]).unwrap(), vec![0.5, -2.0]);
        assert_eq!(k.derivative_bound(), DerivativeBound::Unbounded);
    }

    #[test]
    fn bilinear_part_contributes_trace() {
        let comp = KernelModel::bilinear_plus_matern(3, MaternOrder::FiveHalves, None).unwrap();
        let m = KernelModel::matern(3, MaternOrder::FiveHalves, None).unwrap();
        let x = [0.2, -0.1, 0.7];
        let y = [1.0, 0.3, -0.4];
        let diff = comp.div12(&x, &y).unwrap() - m.div12(&x, &y).unwrap();
        assert!((diff - 3.0).abs() < 1e-14);
    }

    #[test]
    fn translation_invariant_diagonal_gradient_vanishes() {
        for k in [
            KernelModel::gaussian(3, 0.7).unwrap(),
            KernelModel::matern(3, MaternOrder::SevenHalves, Some(vec![1.0, 2.0, 0.5])).unwrap(),
        ] {
            let z = [0.3, -2.0, 1.0];
            assert_eq!(k.grad2(&z, &z).unwrap(), vec![0.0; 3]);
        }
    }

    #[test]
    fn errors() {
        let k = KernelModel::gaussian(2, 1.0).unwrap();
        assert!(matches!(
            k.eval(&[0.0], &[0.0, 0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            k.eval(&[0.0, f64::INFINITY], &[0.0, 0.0]),
            Err(Error::NonFinite { .. })
        ));
        assert!(KernelModel::gaussian(2, 0.0).is_err());
        assert!(MaternOrder::from_nu(1.5).is_err());
        assert!(KernelModel::matern(2, MaternOrder::FiveHalves, Some(vec![1.0, -1.0])).is_err());
        assert!(KernelModel::matern(2, MaternOrder::FiveHalves, Some(vec![1.0])).is_err());
    }

    #[test]
    fn matern_bound_dominates_envelopes() {
        let k = KernelModel::matern(2, MaternOrder::FiveHalves, None).unwrap();
        let b = k.derivative_bound().value().unwrap();
        // ν = 5/2, Σ = I: sup (|G| + r²|H|) = c · sup e^{-r}(1 + r + r²) = 3c/e at r = 1
        let c = k.psi_at_zero() / 3.0;
        let expected = (3.0 * c / std::f64::consts::E).max(0.2);
        assert!(b >= expected && b <= expected * 1.001, "{b} vs {expected}");
    }
}
