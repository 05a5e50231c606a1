//! Second moments of the invariant law: `C = E[B̃ C B̃ᵀ] + G_ξ`.
//!
//! Vectorization is column-major, `vec(B C Bᵀ) = (B ⊗ B) vec(C)`. The
//! random part of `B̃` is the rank-one `γ⁻¹ W δr eᵀ` with
//! `W = (0; U) diag(f)`, which gives
//! `E[B̃ C B̃ᵀ] = Ē C Ēᵀ + γ⁻² (eᵀ C e) W Σ_r Wᵀ`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{expected_companion, invariant_mean_state};
use crate::config::ModelConfig;
use crate::drivers::{
    build_joint_covariance, stationary_joint_covariance, step_drivers, DriverState,
};
use crate::error::{LadderError, Result};
use crate::sre::stacked_issue_vector;

/// Largest state dimension `2M` solved by the explicit Kronecker system.
pub const KRONECKER_LIMIT: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GxiBackend {
    /// Gaussian moment identities on the stationary law of `(r, D̃)`.
    Exact,
    /// Sample moments along a long driver chain.
    Sampled { samples: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvariantCovariance {
    pub covariance: DMatrix<f64>,
    pub innovation_cov: DMatrix<f64>,
    /// Spectral radius of `E[B̃ ⊗ B̃]`.
    pub kronecker_radius: f64,
}

/// Pieces shared by every second-moment computation.
struct Moments {
    mean_companion: DMatrix<f64>,
    /// `W Σ_r Wᵀ`.
    rate_term: DMatrix<f64>,
    selector: DVector<f64>,
    gamma: f64,
}

/// `W = (0; U) diag(f)` as a dense `2M × M` matrix.
fn coupon_loading(allocation: &[f64]) -> DMatrix<f64> {
    let m = allocation.len();
    DMatrix::from_fn(2 * m, m, |i, j| {
        if i >= m && i - m <= j {
            allocation[j]
        } else {
            0.0
        }
    })
}

/// Stationary `(Var D̃, Σ_r, c)` embedded over all `M` tenors.
fn driver_second_moments(config: &ModelConfig) -> Result<(f64, DMatrix<f64>, DVector<f64>)> {
    let joint = build_joint_covariance(config)?;
    let s = stationary_joint_covariance(config, &joint);
    let m = config.max_maturity();
    let mut sigma_r = DMatrix::zeros(m, m);
    let mut c = DVector::zeros(m);
    for (a, &j) in joint.issued.iter().enumerate() {
        c[j] = s[(0, a + 1)];
        for (b, &k) in joint.issued.iter().enumerate() {
            sigma_r[(j, k)] = s[(a + 1, b + 1)];
        }
    }
    Ok((s[(0, 0)], sigma_r, c))
}

fn moments(config: &ModelConfig) -> Result<Moments> {
    let (eb, _) = expected_companion(config)?;
    let (_, sigma_r, _) = driver_second_moments(config)?;
    let w = coupon_loading(config.allocation());
    let m = config.max_maturity();
    let mut selector = DVector::zeros(2 * m);
    selector[0] = 1.0;
    selector[m] = 1.0;
    Ok(Moments {
        mean_companion: eb,
        rate_term: &w * sigma_r * w.transpose(),
        selector,
        gamma: config.growth_factor(),
    })
}

impl Moments {
    /// `X ↦ Ē X Ēᵀ + γ⁻² (eᵀXe) W Σ_r Wᵀ`.
    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let ese = (x * &self.selector).dot(&self.selector);
        &self.mean_companion * x * self.mean_companion.transpose()
            + &self.rate_term * (ese / (self.gamma * self.gamma))
    }
}

/// Explicit `E[B̃ ⊗ B̃] = Ē ⊗ Ē + γ⁻² vec(W Σ_r Wᵀ) vec(e eᵀ)ᵀ`.
pub fn kronecker_operator(config: &ModelConfig) -> Result<DMatrix<f64>> {
    let mo = moments(config)?;
    Ok(explicit_operator(&mo))
}

fn explicit_operator(mo: &Moments) -> DMatrix<f64> {
    let n = mo.mean_companion.nrows();
    let vec_v = DVector::from_column_slice(mo.rate_term.as_slice());
    let ee = &mo.selector * mo.selector.transpose();
    let vec_ee = DVector::from_column_slice(ee.as_slice());
    let mut k = mo.mean_companion.kronecker(&mo.mean_companion);
    k += vec_v * vec_ee.transpose() / (mo.gamma * mo.gamma);
    debug_assert_eq!(k.nrows(), n * n);
    k
}

/// Perron root of the cone-preserving map `X ↦ E[B̃ X B̃ᵀ]`, by power
/// iteration on `X ↦ L(X) + X` from the identity.
fn operator_radius(mo: &Moments) -> Result<f64> {
    let n = mo.mean_companion.nrows();
    let mut x = DMatrix::identity(n, n) / n as f64;
    let mut lambda = 0.0;
    for _ in 0..100_000 {
        let y = mo.apply(&x) + &x;
        let tr = y.trace();
        if tr == 0.0 {
            return Ok(0.0);
        }
        let next = y / tr;
        let change = (&next - &x).amax();
        let est = tr - 1.0;
        let settled = (est - lambda).abs() <= 1e-12 * est.abs().max(1e-300);
        lambda = est;
        x = next;
        if settled && change <= 1e-12 {
            return Ok(lambda.max(0.0));
        }
    }
    Err(LadderError::Internal(
        "power iteration for E[B̃ ⊗ B̃] did not settle".into(),
    ))
}

/// `G_ξ` from Isserlis identities. With `a = R′(r̄) f`, `κ = D̄₀ + γ⁻¹ eᵀE(Ỹ)`:
/// `Var(D) a aᵀ + κ² W Σ_r Wᵀ + κ(a cᵀWᵀ + W c aᵀ) + W(Var(D) Σ_r + c cᵀ)Wᵀ`.
fn exact_innovation_cov(config: &ModelConfig, mean: &DVector<f64>) -> Result<DMatrix<f64>> {
    let (var_d, sigma_r, c) = driver_second_moments(config)?;
    let m = config.max_maturity();
    let w = coupon_loading(config.allocation());
    let a = stacked_issue_vector(config.mean_rates(), config.allocation());
    let n_bar = mean[0] + mean[m];
    let kappa = config.deficit_mean() + n_bar / config.growth_factor();
    let wc = &w * &c;
    let mut g = &a * a.transpose() * var_d;
    g += &w * &sigma_r * w.transpose() * (kappa * kappa);
    g += (&a * wc.transpose() + &wc * a.transpose()) * kappa;
    g += &w * (&sigma_r * var_d + &c * c.transpose()) * w.transpose();
    Ok(g)
}

/// Sample covariance of `ξ_t = (B̃_t − Ē)E(Ỹ) + d̃_t` along a driver chain
/// started at its means and run `2000` periods before sampling.
fn sampled_innovation_cov(
    config: &ModelConfig,
    mean: &DVector<f64>,
    samples: usize,
    seed: u64,
) -> Result<DMatrix<f64>> {
    if samples < 2 {
        return Err(LadderError::config("samples", "need at least 2 samples"));
    }
    let joint = build_joint_covariance(config)?;
    let m = config.max_maturity();
    let n = 2 * m;
    let f = config.allocation();
    let inv = config.growth_factor().recip();
    let n_bar = mean[0] + mean[m];
    let a_bar = stacked_issue_vector(config.mean_rates(), f);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = DriverState::at_means(config);
    let mut z = vec![0.0; joint.dimension()];
    let mut sum = DVector::zeros(n);
    let mut outer = DMatrix::zeros(n, n);
    for t in 0..samples + 2000 {
        for v in z.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        state = step_drivers(config, &joint, &state, &z);
        if t < 2000 {
            continue;
        }
        let a_t = stacked_issue_vector(&state.rates, f);
        let xi = (&a_t - &a_bar) * (inv * n_bar) + a_t * state.deficit;
        sum += &xi;
        outer.ger(1.0, &xi, &xi, 1.0);
    }
    let k = samples as f64;
    let mu = sum / k;
    Ok(outer / k - &mu * mu.transpose())
}

fn solve_stein(mo: &Moments, g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = g.nrows();
    if n <= KRONECKER_LIMIT {
        let k = explicit_operator(mo);
        let lhs = DMatrix::identity(n * n, n * n) - k;
        let rhs = DVector::from_column_slice(g.as_slice());
        let sol = lhs
            .lu()
            .solve(&rhs)
            .ok_or_else(|| LadderError::Internal("I − E[B̃ ⊗ B̃] is singular".into()))?;
        return Ok(DMatrix::from_column_slice(n, n, sol.as_slice()));
    }
    structured_fixed_point(mo, g)
}

/// `C ← L(C) + G` until the update is negligible.
fn structured_fixed_point(mo: &Moments, g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut c = g.clone();
    for _ in 0..1_000_000 {
        let next = mo.apply(&c) + g;
        let change = (&next - &c).amax();
        c = next;
        if change <= 1e-15 * c.amax().max(f64::MIN_POSITIVE) {
            return Ok(c);
        }
    }
    Err(LadderError::Internal("Stein iteration did not settle".into()))
}

pub fn invariant_covariance(config: &ModelConfig) -> Result<InvariantCovariance> {
    invariant_covariance_with(config, GxiBackend::Exact)
}

pub fn invariant_covariance_with(
    config: &ModelConfig,
    backend: GxiBackend,
) -> Result<InvariantCovariance> {
    let mean = invariant_mean_state(config)?;
    let mo = moments(config)?;
    let radius = operator_radius(&mo)?;
    if radius >= 1.0 {
        return Err(LadderError::SecondMomentUnavailable { radius });
    }
    let g = match backend {
        GxiBackend::Exact => exact_innovation_cov(config, &mean)?,
        GxiBackend::Sampled { samples, seed } => sampled_innovation_cov(config, &mean, samples, seed)?,
    };
    let c = solve_stein(&mo, &g)?;
    let c = (&c + c.transpose()) * 0.5;
    let scale = c.amax().max(1.0);
    let min_eig = c.clone().symmetric_eigen().eigenvalues.min();
    if min_eig < -1e-10 * scale {
        return Err(LadderError::Internal(format!(
            "invariant covariance has eigenvalue {min_eig:e}"
        )));
    }
    Ok(InvariantCovariance {
        covariance: c,
        innovation_cov: g,
        kronecker_radius: radius,
    })
}
