//! Correlated AR(1) drivers: maturity-specific coupon rates and the
//! normalized deficit.
//!
//! Only issued tenors (`f_j > 0`) carry random rates; all others sit at
//! their mean forever since they never reach the dynamics.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::config::{CorrelationMode, ModelConfig};
use crate::error::{LadderError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriverState {
    pub rates: Vec<f64>,
    pub deficit: f64,
}

impl DriverState {
    /// Drivers sitting at their stationary means.
    pub fn at_means(config: &ModelConfig) -> Self {
        DriverState {
            rates: config.mean_rates().to_vec(),
            deficit: config.deficit_mean(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryMoments {
    pub rate_means: Vec<f64>,
    /// `σ_j / √(1 − φ_j²)`.
    pub rate_stationary_sd: Vec<f64>,
    pub deficit_mean: f64,
    pub deficit_stationary_sd: f64,
    /// Stationary `Cov(r_j, D̃) = ρςσ_j / (1 − φ_j ψ)`.
    pub cross_cov: Vec<f64>,
    /// `r*_j = E|r_j|` under the stationary Gaussian law.
    pub abs_rate_means: Vec<f64>,
    /// Innovation covariance `Σ_j = ρςσ_j`.
    pub innovation_cov: Vec<f64>,
}

/// `E|X|` for `X ~ N(μ, s²)`.
pub fn folded_normal_mean(mu: f64, s: f64) -> f64 {
    if s == 0.0 {
        return mu.abs();
    }
    let n = Normal::standard();
    mu * (1.0 - 2.0 * n.cdf(-mu / s)) + 2.0 * s * n.pdf(mu / s)
}

pub fn stationary_moments(config: &ModelConfig) -> StationaryMoments {
    let psi = config.deficit_persistence();
    let sigma = config.rate_vol();
    let phi = config.rate_persistence();
    let rate_stationary_sd: Vec<f64> = sigma
        .iter()
        .zip(phi)
        .map(|(s, p)| s / (1.0 - p * p).sqrt())
        .collect();
    let innovation_cov = config.innovation_cross_cov();
    let cross_cov = innovation_cov
        .iter()
        .zip(phi)
        .map(|(c, p)| c / (1.0 - p * psi))
        .collect();
    let abs_rate_means = config
        .mean_rates()
        .iter()
        .zip(&rate_stationary_sd)
        .map(|(&m, &s)| folded_normal_mean(m, s))
        .collect();
    StationaryMoments {
        rate_means: config.mean_rates().to_vec(),
        rate_stationary_sd,
        deficit_mean: config.deficit_mean(),
        deficit_stationary_sd: config.deficit_vol() / (1.0 - psi * psi).sqrt(),
        cross_cov,
        abs_rate_means,
        innovation_cov,
    }
}

/// Covariance of `(η, ε_{j₁}, …, ε_{j_K})` over the issued tenors and a
/// lower-triangular factor `L` with `L Lᵀ = covariance`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointCovariance {
    /// 0-based indices of the issued tenors, in the order used above.
    pub issued: Vec<usize>,
    pub covariance: DMatrix<f64>,
    pub factor: DMatrix<f64>,
}

impl JointCovariance {
    /// Number of standard normals consumed per step.
    pub fn dimension(&self) -> usize {
        self.issued.len() + 1
    }
}

/// Cholesky factorization that accepts positive semidefinite input by
/// zeroing columns whose pivot vanishes.
pub fn semidefinite_cholesky(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let scale = a.diagonal().iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    let tol = 1e-12 * scale;
    let mut l = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut pivot = a[(j, j)];
        for k in 0..j {
            pivot -= l[(j, k)] * l[(j, k)];
        }
        if pivot < -tol {
            return None;
        }
        if pivot <= tol {
            for i in j + 1..n {
                let mut resid = a[(i, j)];
                for k in 0..j {
                    resid -= l[(i, k)] * l[(j, k)];
                }
                if resid.abs() > 1e-9 * scale.sqrt() * a[(i, i)].abs().sqrt().max(tol) {
                    return None;
                }
            }
            continue;
        }
        let d = pivot.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Some(l)
}

pub fn build_joint_covariance(config: &ModelConfig) -> Result<JointCovariance> {
    let issued = config.issued_indices();
    let k = issued.len();
    let rho = config.correlation();
    let vs = config.deficit_vol();
    let sigma = config.rate_vol();
    let mode = config.correlation_mode();

    if mode == CorrelationMode::Independent && vs > 0.0 {
        let active = issued.iter().filter(|&&j| sigma[j] > 0.0).count();
        let load = active as f64 * rho * rho;
        if load > 1.0 + 1e-12 {
            return Err(LadderError::NotPositiveSemidefinite(format!(
                "independent rates each correlated ρ = {rho} with the deficit need K·ρ² ≤ 1, \
                 got K = {active}, K·ρ² = {load:.6}"
            )));
        }
    }

    let mut cov = DMatrix::zeros(k + 1, k + 1);
    cov[(0, 0)] = vs * vs;
    for (a, &j) in issued.iter().enumerate() {
        cov[(0, a + 1)] = rho * vs * sigma[j];
        cov[(a + 1, 0)] = rho * vs * sigma[j];
        cov[(a + 1, a + 1)] = sigma[j] * sigma[j];
        if mode == CorrelationMode::OneFactor {
            for (b, &i) in issued.iter().enumerate() {
                if a != b {
                    cov[(a + 1, b + 1)] = rho * rho * sigma[j] * sigma[i];
                }
            }
        }
    }
    let factor = semidefinite_cholesky(&cov).ok_or_else(|| {
        LadderError::NotPositiveSemidefinite(format!(
            "joint innovation covariance has a negative pivot (ρ = {rho}, K = {k})"
        ))
    })?;
    Ok(JointCovariance {
        issued,
        covariance: cov,
        factor,
    })
}

/// Stationary covariance of `(D̃, r_{j₁}, …, r_{j_K})`, in the same order as
/// [`JointCovariance`]: `Ω_ab / (1 − p_a p_b)` with `p = (ψ, φ_{j₁}, …)`.
pub fn stationary_joint_covariance(
    config: &ModelConfig,
    joint: &JointCovariance,
) -> DMatrix<f64> {
    let phi = config.rate_persistence();
    let p: Vec<f64> = std::iter::once(config.deficit_persistence())
        .chain(joint.issued.iter().map(|&j| phi[j]))
        .collect();
    DMatrix::from_fn(p.len(), p.len(), |a, b| {
        joint.covariance[(a, b)] / (1.0 - p[a] * p[b])
    })
}

/// One AR(1) step. `gaussians` holds `K + 1` independent standard normals;
/// the first drives the deficit block of the factor.
pub fn step_drivers(
    config: &ModelConfig,
    joint: &JointCovariance,
    state: &DriverState,
    gaussians: &[f64],
) -> DriverState {
    debug_assert_eq!(gaussians.len(), joint.dimension());
    let z = DVector::from_column_slice(gaussians);
    let shocks = &joint.factor * z;
    let mut rates = state.rates.clone();
    let means = config.mean_rates();
    let phi = config.rate_persistence();
    for (a, &j) in joint.issued.iter().enumerate() {
        rates[j] = means[j] + phi[j] * (state.rates[j] - means[j]) + shocks[a + 1];
    }
    let d0 = config.deficit_mean();
    DriverState {
        rates,
        deficit: d0 + config.deficit_persistence() * (state.deficit - d0) + shocks[0],
    }
}
