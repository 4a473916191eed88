//! Target potentials `V` with `π ∝ exp(-V)`, their derivatives, certified
//! regularity constants and exact samplers.
//!
//! Constants carried by every potential (derivations in the constructors):
//!
//! * growth: `‖∇V(x)‖ ≤ A · V(x)^α`, with `inf V ≥ c₀ > 0`;
//! * Hessian bound: `sup ‖H_V‖_op = C_V`;
//! * dissipativity: `-⟨x, ∇V(x)⟩ ≤ -α_dis ‖x‖² + β₁ ‖x‖ + (β₀ - d)`;
//! * `sup ΔV`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::ensemble::ParticleEnsemble;
use crate::error::{check_dim, check_finite, Error, Result};
use crate::kernel::dot;

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialKind {
    /// `V(x) = ‖x‖²/2 + c₀`.
    IsotropicGaussian,
    /// `V(x) = Σ xₗ² / (2σₗ²) + c₀`.
    DiagonalGaussian { variances: Vec<f64> },
    /// Equal-weight, unit-covariance mixture at `±μ e₁`:
    /// `V(x) = (‖x‖² + μ²)/2 - log cosh(μ x₁) + c₀`.
    GaussianMixture { mu: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Growth {
    pub a: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dissipativity {
    pub alpha: f64,
    pub beta1: f64,
    pub beta0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialModel {
    dim: usize,
    kind: PotentialKind,
    c0: f64,
    growth: Growth,
    hessian_bound: f64,
    dissipativity: Dissipativity,
    laplacian_sup: Option<f64>,
}

pub const DEFAULT_VALUE_OFFSET: f64 = 1.0;
pub const MAX_MIXTURE_MU: f64 = 2.0;

impl PotentialModel {
    pub fn isotropic_gaussian(dim: usize, c0: f64) -> Result<Self> {
        check_setup(dim, c0)?;
        let d = dim as f64;
        // ‖x‖² ≤ 2(‖x‖²/2 + c₀) gives A = √2, α = 1/2.
        Ok(Self {
            dim,
            kind: PotentialKind::IsotropicGaussian,
            c0,
            growth: Growth {
                a: 2f64.sqrt(),
                alpha: 0.5,
            },
            hessian_bound: 1.0,
            dissipativity: Dissipativity {
                alpha: 1.0,
                beta1: 0.0,
                beta0: d,
            },
            laplacian_sup: Some(d),
        })
    }

    pub fn diagonal_gaussian(variances: Vec<f64>, c0: f64) -> Result<Self> {
        let dim = variances.len();
        check_setup(dim, c0)?;
        if variances.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidParameter(
                "variances must be positive and finite".into(),
            ));
        }
        let min = variances.iter().copied().fold(f64::INFINITY, f64::min);
        let max = variances.iter().copied().fold(0.0, f64::max);
        // ‖∇V‖² = Σ xₗ²/σₗ⁴ ≤ (2/σ_min²)(V - c₀), so A = √2/σ_min.
        // -⟨x, ∇V⟩ = -Σ xₗ²/σₗ² ≤ -‖x‖²/σ_max².
        let lap: f64 = variances.iter().map(|v| 1.0 / v).sum();
        Ok(Self {
            dim,
            kind: PotentialKind::DiagonalGaussian { variances },
            c0,
            growth: Growth {
                a: 2f64.sqrt() / min.sqrt(),
                alpha: 0.5,
            },
            hessian_bound: 1.0 / min,
            dissipativity: Dissipativity {
                alpha: 1.0 / max,
                beta1: 0.0,
                beta0: dim as f64,
            },
            laplacian_sup: Some(lap),
        })
    }

    pub fn gaussian_mixture(dim: usize, mu: f64, c0: f64) -> Result<Self> {
        check_setup(dim, c0)?;
        if !(mu.is_finite() && mu.abs() <= MAX_MIXTURE_MU) {
            return Err(Error::InvalidParameter(format!(
                "mixture offset must satisfy |mu| <= {MAX_MIXTURE_MU}, got {mu}"
            )));
        }
        let m = mu.abs();
        // log cosh t ≤ |t| gives V ≥ (‖x‖ - m)²/2 + c₀ and ‖∇V‖ ≤ ‖x‖ + m.
        // sup_r (r + m)² / ((r - m)²/2 + c₀) is attained at r = m + c₀/m and
        // tends to 2 as r → ∞.
        let a_sq = if m > 0.0 {
            let r = m + c0 / m;
            let peak = (r + m) * (r + m) / ((r - m) * (r - m) / 2.0 + c0);
            peak.max(2.0)
        } else {
            2.0
        };
        // H_V = I - μμᵀ sech²(μx₁) has eigenvalues in [1 - m², 1].
        let hessian_bound = 1f64.max(m * m - 1.0);
        Ok(Self {
            dim,
            kind: PotentialKind::GaussianMixture { mu },
            c0,
            growth: Growth {
                a: a_sq.sqrt(),
                alpha: 0.5,
            },
            hessian_bound,
            dissipativity: Dissipativity {
                alpha: 1.0,
                beta1: m,
                beta0: dim as f64,
            },
            // ΔV = d - m² sech²(m x₁) → d as |x₁| → ∞
            laplacian_sup: Some(dim as f64),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    pub fn value_offset(&self) -> f64 {
        self.c0
    }

    pub fn growth(&self) -> Growth {
        self.growth
    }

    pub fn hessian_bound(&self) -> f64 {
        self.hessian_bound
    }

    pub fn dissipativity(&self) -> Dissipativity {
        self.dissipativity
    }

    pub fn laplacian_sup(&self) -> Option<f64> {
        self.laplacian_sup
    }

    /// True when `ΔV` is constant, so `C*` is constant for translation-invariant kernels.
    pub fn has_constant_laplacian(&self) -> bool {
        !matches!(self.kind, PotentialKind::GaussianMixture { mu } if mu != 0.0)
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        check_dim(self.dim, x.len())?;
        check_finite(x, "potential argument")
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        Ok(self.value_unchecked(x))
    }

    pub fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        let mut out = vec![0.0; self.dim];
        self.grad_into(x, &mut out);
        Ok(out)
    }

    pub fn laplacian(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        Ok(self.laplacian_unchecked(x))
    }

    /// Dense Hessian, row-major `d × d`.
    pub fn hessian(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        let d = self.dim;
        let mut h = vec![0.0; d * d];
        match &self.kind {
            PotentialKind::IsotropicGaussian => {
                (0..d).for_each(|l| h[l * d + l] = 1.0);
            }
            PotentialKind::DiagonalGaussian { variances } => {
                (0..d).for_each(|l| h[l * d + l] = 1.0 / variances[l]);
            }
            PotentialKind::GaussianMixture { mu } => {
                (0..d).for_each(|l| h[l * d + l] = 1.0);
                h[0] -= mu * mu * sech_sq(mu * x[0]);
            }
        }
        Ok(h)
    }

    pub(crate) fn value_unchecked(&self, x: &[f64]) -> f64 {
        match &self.kind {
            PotentialKind::IsotropicGaussian => 0.5 * dot(x, x) + self.c0,
            PotentialKind::DiagonalGaussian { variances } => {
                let q: f64 = x.iter().zip(variances).map(|(v, s)| v * v / s).sum();
                0.5 * q + self.c0
            }
            PotentialKind::GaussianMixture { mu } => {
                0.5 * (dot(x, x) + mu * mu) - log_cosh(mu * x[0]) + self.c0
            }
        }
    }

    #[inline]
    pub(crate) fn grad_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.kind {
            PotentialKind::IsotropicGaussian => out.copy_from_slice(x),
            PotentialKind::DiagonalGaussian { variances } => {
                for ((o, v), s) in out.iter_mut().zip(x).zip(variances) {
                    *o = v / s;
                }
            }
            PotentialKind::GaussianMixture { mu } => {
                out.copy_from_slice(x);
                out[0] -= mu * (mu * x[0]).tanh();
            }
        }
    }

    pub(crate) fn laplacian_unchecked(&self, x: &[f64]) -> f64 {
        match &self.kind {
            PotentialKind::IsotropicGaussian => self.dim as f64,
            PotentialKind::DiagonalGaussian { variances } => {
                variances.iter().map(|v| 1.0 / v).sum()
            }
            PotentialKind::GaussianMixture { mu } => self.dim as f64 - mu * mu * sech_sq(mu * x[0]),
        }
    }

    /// Writes one exact draw from `π` into `out`.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for v in out.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        match &self.kind {
            PotentialKind::IsotropicGaussian => {}
            PotentialKind::DiagonalGaussian { variances } => {
                for (v, s) in out.iter_mut().zip(variances) {
                    *v *= s.sqrt();
                }
            }
            PotentialKind::GaussianMixture { mu } => {
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                out[0] += sign * mu;
            }
        }
    }

    /// `n` i.i.d. draws from `π`, deterministic given `seed`.
    pub fn reference_sampler(&self, n: usize, seed: u64) -> Result<ParticleEnsemble> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_ensemble(n, &mut rng)
    }

    pub fn sample_ensemble<R: Rng + ?Sized>(
        &self,
        n: usize,
        rng: &mut R,
    ) -> Result<ParticleEnsemble> {
        if n == 0 {
            return Err(Error::InvalidParameter("sample size must be >= 1".into()));
        }
        let mut data = vec![0.0; n * self.dim];
        for row in data.chunks_exact_mut(self.dim) {
            self.sample_into(rng, row);
        }
        Ok(ParticleEnsemble::from_raw(n, self.dim, data))
    }

    /// `N⁻¹ Σᵢ V(xᵢ)`.
    pub fn mean_value(&self, ensemble: &ParticleEnsemble) -> Result<f64> {
        check_dim(self.dim, ensemble.dim())?;
        let total: f64 = ensemble.rows().map(|r| self.value_unchecked(r)).sum();
        Ok(total / ensemble.len() as f64)
    }
}

impl std::fmt::Display for PotentialModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.kind {
            PotentialKind::IsotropicGaussian => write!(f, "isotropic_gaussian(d={})", self.dim),
            PotentialKind::DiagonalGaussian { .. } => {
                write!(f, "diagonal_gaussian(d={})", self.dim)
            }
            PotentialKind::GaussianMixture { mu } => {
                write!(f, "gaussian_mixture(d={}, mu={mu})", self.dim)
            }
        }
    }
}

fn check_setup(dim: usize, c0: f64) -> Result<()> {
    if dim == 0 {
        return Err(Error::InvalidParameter(
            "potential dimension must be >= 1".into(),
        ));
    }
    if !(c0.is_finite() && c0 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "value offset c0 must be positive, got {c0}"
        )));
    }
    Ok(())
}

/// Overflow-free `log cosh t = |t| + log(1 + e^{-2|t|}) - log 2`.
fn log_cosh(t: f64) -> f64 {
    let a = t.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

fn sech_sq(t: f64) -> f64 {
    let th = t.tanh();
    1.0 - th * th
}
