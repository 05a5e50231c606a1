//! Invariant-distribution moments of the cashflow recurrence and the
//! ergodicity certificate.

mod covariance;

pub use covariance::{
    invariant_covariance, invariant_covariance_with, kronecker_operator, GxiBackend,
    InvariantCovariance,
};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::baseline::{feedback_phi_raw, steady_shares, steady_wac, NEAR_CRITICAL_BAND};
use crate::config::ModelConfig;
use crate::drivers::stationary_moments;
use crate::error::{LadderError, Result};
use crate::operators::build_operators;
use crate::sre::stacked_issue_vector;

/// Relative tolerance for the closed-form / direct-solve cross-check.
pub const SOLVE_AGREEMENT: f64 = 1e-10;

/// `(E(B̃), E(d̃))` with `E(B̃) = γ⁻¹(S′ + R̄′ f eᵀ)` and
/// `E(d̃) = D̄₀ R̄′_Σ f`, where the coupon block uses `r̄ + Σ/D̄₀`.
pub fn expected_companion(config: &ModelConfig) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let ops = build_operators(config.growth_factor(), config.max_maturity())?;
    let issue = stacked_issue_vector(config.mean_rates(), config.allocation());
    let companion = (&ops.doubled_shift + issue * ops.selector.transpose()) / ops.growth_factor;
    let forcing = stacked_issue_vector(&adjusted_rates(config), config.allocation())
        * config.deficit_mean();
    Ok((companion, forcing))
}

/// `r̄_Σ = r̄ + Σ/D̄₀`.
pub fn adjusted_rates(config: &ModelConfig) -> Vec<f64> {
    let d0 = config.deficit_mean();
    config
        .mean_rates()
        .iter()
        .zip(config.innovation_cross_cov())
        .map(|(r, s)| r + s / d0)
        .collect()
}

/// `(I − E(B̃))⁻¹ = T′ (I + (1/(1−Φ)) R̄′ f γ⁻¹ eᵀT′)`.
pub fn sherman_morrison_inverse(config: &ModelConfig) -> Result<DMatrix<f64>> {
    let phi = feedback_phi_raw(config.growth_factor(), config.mean_rates(), config.allocation());
    if phi >= 1.0 {
        return Err(LadderError::ClosedFormInapplicable { phi_mean: phi });
    }
    let ops = build_operators(config.growth_factor(), config.max_maturity())?;
    let n = 2 * config.max_maturity();
    let issue = stacked_issue_vector(config.mean_rates(), config.allocation());
    let h2 = ops.doubled_toeplitz.transpose() * &ops.selector;
    let inner = DMatrix::identity(n, n) + issue * h2.transpose() / (ops.growth_factor * (1.0 - phi));
    Ok(&ops.doubled_toeplitz * inner)
}

/// Rank-one closed form
/// `E(Ỹ) = D̄₀/(1−Φ(r̄)) · T′((1−Φ(r̄)) R̄′_Σ + Φ(r̄_Σ) R̄′) f`.
pub fn invariant_mean_closed_form(config: &ModelConfig) -> Result<DVector<f64>> {
    let gamma = config.growth_factor();
    let f = config.allocation();
    let phi = feedback_phi_raw(gamma, config.mean_rates(), f);
    if phi >= 1.0 {
        return Err(LadderError::ClosedFormInapplicable { phi_mean: phi });
    }
    let r_sigma = adjusted_rates(config);
    let phi_sigma = feedback_phi_raw(gamma, &r_sigma, f);
    let ops = build_operators(gamma, config.max_maturity())?;
    let mixed = stacked_issue_vector(&r_sigma, f) * (1.0 - phi)
        + stacked_issue_vector(config.mean_rates(), f) * phi_sigma;
    Ok(&ops.doubled_toeplitz * mixed * (config.deficit_mean() / (1.0 - phi)))
}

/// Dense LU solve of `(I − E(B̃)) x = E(d̃)`.
pub fn invariant_mean_solve(config: &ModelConfig) -> Result<DVector<f64>> {
    let (eb, ed) = expected_companion(config)?;
    let n = eb.nrows();
    (DMatrix::identity(n, n) - eb)
        .lu()
        .solve(&ed)
        .ok_or_else(|| LadderError::Internal("I − E(B̃) is singular".into()))
}

fn max_relative_diff(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let scale = a.amax().max(b.amax()).max(f64::MIN_POSITIVE);
    (a - b).amax() / scale
}

/// Invariant mean state, from the closed form after checking it against
/// the direct solve and the ergodicity certificate.
pub fn invariant_mean_state(config: &ModelConfig) -> Result<DVector<f64>> {
    let cert = ergodicity_certificate(config);
    if cert.phi_abs >= 1.0 {
        return Err(LadderError::NotErgodic {
            phi_abs: cert.phi_abs,
        });
    }
    let closed = invariant_mean_closed_form(config)?;
    let solved = invariant_mean_solve(config)?;
    let diff = max_relative_diff(&closed, &solved);
    if diff > SOLVE_AGREEMENT {
        return Err(LadderError::Internal(format!(
            "closed-form invariant mean differs from direct solve by {diff:e}"
        )));
    }
    Ok(closed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicityCertificate {
    /// Φ(γ, r*, f) with `r* = E|r|`.
    pub phi_abs: f64,
    /// ρ(E|B̃|) by power iteration; absent if the iteration stalled.
    pub spectral_radius: Option<f64>,
    pub iterations: usize,
    /// `None` when the two tests cannot be decided or disagree.
    pub ergodic: Option<bool>,
    pub diagnostic: Option<String>,
}

pub const POWER_TOLERANCE: f64 = 1e-12;
pub const POWER_MAX_ITER: usize = 100_000;

/// Perron root of the nonnegative matrix `γ⁻¹(S′ + u eᵀ)` with `u = R′(r*) f`,
/// by power iteration on `A + I` (the shift removes periodicity).
/// Returns `(radius, iterations, converged)`.
pub fn companion_spectral_radius(gamma: f64, abs_rates: &[f64], allocation: &[f64]) -> (f64, usize, bool) {
    let m = allocation.len();
    let u = stacked_issue_vector(abs_rates, allocation);
    let inv = gamma.recip();
    let apply = |x: &[f64], out: &mut [f64]| {
        let head = x[0] + x[m];
        for i in 0..m {
            let p = if i + 1 < m { x[i + 1] } else { 0.0 };
            let c = if i + 1 < m { x[m + i + 1] } else { 0.0 };
            out[i] = inv * (p + u[i] * head) + x[i];
            out[m + i] = inv * (c + u[m + i] * head) + x[m + i];
        }
    };
    let mut x = vec![1.0 / (2 * m) as f64; 2 * m];
    let mut y = vec![0.0; 2 * m];
    let mut lambda = 0.0;
    for it in 1..=POWER_MAX_ITER {
        apply(&x, &mut y);
        let norm: f64 = y.iter().sum();
        if norm == 0.0 {
            return (0.0, it, true);
        }
        let mut change = 0.0f64;
        for (xi, yi) in x.iter_mut().zip(&y) {
            let v = yi / norm;
            change = change.max((v - *xi).abs());
            *xi = v;
        }
        // x was 1-normalized, so ‖(A+I)x‖₁ estimates ρ(A) + 1.
        let next = norm - 1.0;
        let settled = (next - lambda).abs() <= POWER_TOLERANCE * next.abs().max(1e-300);
        lambda = next;
        if settled && change <= POWER_TOLERANCE {
            return (lambda.max(0.0), it, true);
        }
    }
    (lambda.max(0.0), POWER_MAX_ITER, false)
}

pub fn ergodicity_certificate(config: &ModelConfig) -> ErgodicityCertificate {
    let moments = stationary_moments(config);
    let gamma = config.growth_factor();
    let f = config.allocation();
    let phi_abs = feedback_phi_raw(gamma, &moments.abs_rate_means, f);
    let (radius, iterations, converged) =
        companion_spectral_radius(gamma, &moments.abs_rate_means, f);
    let by_phi = phi_abs < 1.0;
    if !converged {
        return ErgodicityCertificate {
            phi_abs,
            spectral_radius: None,
            iterations,
            ergodic: None,
            diagnostic: Some(format!(
                "power iteration did not settle within {POWER_MAX_ITER} steps (last estimate {radius})"
            )),
        };
    }
    let by_radius = radius < 1.0;
    let near = (phi_abs - 1.0).abs() <= 1e-9 || (radius - 1.0).abs() <= 1e-9;
    let (ergodic, diagnostic) = if by_phi == by_radius {
        (Some(by_phi), None)
    } else if near {
        (
            Some(false),
            Some("drift and spectral tests straddle the critical boundary".to_string()),
        )
    } else {
        (
            None,
            Some(format!(
                "drift test Φ = {phi_abs} and spectral radius {radius} disagree"
            )),
        )
    };
    ErgodicityCertificate {
        phi_abs,
        spectral_radius: Some(radius),
        iterations,
        ergodic,
        diagnostic,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    pub phi_mean: f64,
    pub phi_abs: f64,
    pub spectral_radius: f64,
    pub ergodic: bool,
    pub near_critical: bool,
    pub mean_state: Vec<f64>,
    pub q_mean: Vec<f64>,
    pub total_debt: f64,
    /// `D̄₀/(1−Φ(r̄)) 1ᵀ T f`.
    pub total_debt_base: f64,
    pub next_interest: f64,
    pub cost_ratio: f64,
    pub deterministic_wac: f64,
    pub shares: Vec<f64>,
    pub rollover: f64,
    /// `1 − Φ(r̄) + Φ(r̄_Σ)`, the scale from `Q̃_base` to `E(Q̃)`.
    pub correlation_factor: f64,
}

/// Scalar invariant levels without the certificate or the mean state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvariantLevels {
    pub phi: f64,
    pub phi_sigma: f64,
    pub total_debt: f64,
    pub total_debt_base: f64,
    pub next_interest: f64,
    pub correlation_factor: f64,
}

pub fn invariant_levels(config: &ModelConfig) -> Result<InvariantLevels> {
    let m = config.max_maturity();
    let gamma = config.growth_factor();
    let f = config.allocation();
    let d0 = config.deficit_mean();
    let phi = feedback_phi_raw(gamma, config.mean_rates(), f);
    if phi >= 1.0 {
        return Err(LadderError::ClosedFormInapplicable { phi_mean: phi });
    }
    let r_sigma = adjusted_rates(config);
    let phi_sigma = feedback_phi_raw(gamma, &r_sigma, f);
    let ops = build_operators(gamma, m)?;

    let tf = &ops.discount_toeplitz * DVector::from_column_slice(f);
    let total_debt_base = d0 / (1.0 - phi) * tf.sum();
    let correlation_factor = 1.0 + (phi_sigma - phi);

    // hᵀU((1−Φ) diag(r̄_Σ) + Φ(r̄_Σ) diag(r̄)) f, term by term.
    let h = &ops.discount_row;
    let mut next_interest = 0.0;
    let mut weight = 0.0;
    for j in 0..m {
        weight += h[j];
        let rate = (1.0 - phi) * r_sigma[j] + phi_sigma * config.mean_rates()[j];
        next_interest += weight * rate * f[j];
    }
    next_interest *= d0 / (1.0 - phi);
    Ok(InvariantLevels {
        phi,
        phi_sigma,
        total_debt: correlation_factor * total_debt_base,
        total_debt_base,
        next_interest,
        correlation_factor,
    })
}

pub fn invariant_metrics(config: &ModelConfig) -> Result<InvariantReport> {
    let cert = ergodicity_certificate(config);
    if cert.phi_abs >= 1.0 || cert.ergodic != Some(true) {
        return Err(LadderError::NotErgodic {
            phi_abs: cert.phi_abs,
        });
    }
    let mean = invariant_mean_state(config)?;
    let m = config.max_maturity();
    let gamma = config.growth_factor();
    let f = config.allocation();
    let InvariantLevels {
        phi,
        total_debt,
        total_debt_base,
        next_interest,
        correlation_factor,
        ..
    } = invariant_levels(config)?;

    let q_mean: Vec<f64> = mean.rows(0, m).iter().copied().collect();
    let from_state_q: f64 = q_mean.iter().sum();
    let from_state_i = mean[m];
    for (label, a, b) in [
        ("E(Q̃)", total_debt, from_state_q),
        ("E(Ĩ)", next_interest, from_state_i),
    ] {
        if (a - b).abs() > SOLVE_AGREEMENT * a.abs().max(1.0) {
            return Err(LadderError::Internal(format!(
                "{label}: scalar formula {a} vs mean state {b}"
            )));
        }
    }
    let shares = steady_shares(gamma, f);
    let rollover = shares[0];
    Ok(InvariantReport {
        phi_mean: phi,
        phi_abs: cert.phi_abs,
        spectral_radius: cert.spectral_radius.unwrap_or(f64::NAN),
        ergodic: true,
        near_critical: (phi - 1.0).abs() <= NEAR_CRITICAL_BAND,
        mean_state: mean.iter().copied().collect(),
        q_mean,
        total_debt,
        total_debt_base,
        next_interest,
        cost_ratio: next_interest / total_debt,
        deterministic_wac: steady_wac(gamma, config.mean_rates(), f),
        shares,
        rollover,
        correlation_factor,
    })
}
