//! Deterministic steady-state analytics for constant rates and an
//! exponentially growing deficit, together with the budget recursion that
//! serves as their brute-force oracle.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::error::{LadderError, Result};
use crate::operators::DebtStateQ;

/// Normalized issuance above this magnitude flags a run as divergent.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// Half-width of the band around Φ = 1 reported as ill-conditioned.
pub const NEAR_CRITICAL_BAND: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    DeficitDriven,
    InterestDriven,
}

fn check_len(config: &ModelConfig, rates: &[f64]) -> Result<()> {
    if rates.len() != config.max_maturity() {
        return Err(LadderError::config(
            "rates",
            format!("expected {} rates, got {}", config.max_maturity(), rates.len()),
        ));
    }
    Ok(())
}

/// `Φ = Σ_j (Σ_{k≥j} r_k f_k + f_j) γ^{−j}` for raw vectors.
pub fn feedback_phi_raw(gamma: f64, rates: &[f64], allocation: &[f64]) -> f64 {
    let inv = gamma.recip();
    let mut tail = 0.0;
    let mut terms = vec![0.0; allocation.len()];
    for j in (0..allocation.len()).rev() {
        tail += rates[j] * allocation[j];
        terms[j] = tail + allocation[j];
    }
    let mut disc = 1.0;
    terms
        .iter()
        .map(|t| {
            disc *= inv;
            t * disc
        })
        .sum()
}

/// Feedback function Φ(γ, r, f), nested-sum form.
pub fn feedback_phi(config: &ModelConfig, rates: &[f64]) -> Result<f64> {
    check_len(config, rates)?;
    Ok(feedback_phi_raw(config.growth_factor(), rates, config.allocation()))
}

/// Φ via the geometric-sum form
/// `Σ f_j γ^{−j} + Σ r_j f_j γ⁻¹ (1 − γ^{−j}) / (1 − γ⁻¹)`.
pub fn feedback_phi_geometric(config: &ModelConfig, rates: &[f64]) -> Result<f64> {
    check_len(config, rates)?;
    let gamma = config.growth_factor();
    let inv = gamma.recip();
    let f = config.allocation();
    let mut total = 0.0;
    for (i, (&fj, &rj)) in f.iter().zip(rates).enumerate() {
        let disc = inv.powi(i as i32 + 1);
        total += fj * disc + rj * fj * inv * (1.0 - disc) / (1.0 - inv);
    }
    Ok(total)
}

/// `τ_j = (γ − 1)/(γ^j − 1)`, the steady rollover fraction of a ladder
/// issued only at tenor `j`.
pub fn rollover_tau(gamma: f64, tenor: usize) -> f64 {
    (gamma - 1.0) / (gamma.powi(tenor as i32) - 1.0)
}

/// Accumulation weights `w_j ∝ f_j (1 − γ^{−j})`.
pub fn accumulation_weights(gamma: f64, allocation: &[f64]) -> Vec<f64> {
    let raw: Vec<f64> = allocation
        .iter()
        .enumerate()
        .map(|(i, f)| f * (1.0 - gamma.powi(-(i as i32 + 1))))
        .collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|w| w / total).collect()
}

/// `(T f)_j = Σ_{k≥j} γ^{j−k} f_k`.
pub fn discounted_tail(gamma: f64, allocation: &[f64]) -> Vec<f64> {
    let inv = gamma.recip();
    let mut out = vec![0.0; allocation.len()];
    let mut acc = 0.0;
    for j in (0..allocation.len()).rev() {
        acc = allocation[j] + inv * acc;
        out[j] = acc;
    }
    out
}

/// Steady portfolio shares `θ = T f / 1ᵀ T f`.
pub fn steady_shares(gamma: f64, allocation: &[f64]) -> Vec<f64> {
    let tail = discounted_tail(gamma, allocation);
    let total: f64 = tail.iter().sum();
    tail.iter().map(|x| x / total).collect()
}

/// Steady one-period rollover fraction θ₁ = Σ w_j τ_j.
pub fn steady_rollover(gamma: f64, allocation: &[f64]) -> f64 {
    let a: f64 = allocation
        .iter()
        .enumerate()
        .map(|(i, f)| f * gamma.powi(-(i as i32 + 1)))
        .sum();
    (gamma - 1.0) * a / (1.0 - a)
}

/// Steady weighted-average coupon for the given rates.
pub fn steady_wac(gamma: f64, rates: &[f64], allocation: &[f64]) -> f64 {
    accumulation_weights(gamma, allocation)
        .iter()
        .zip(rates)
        .map(|(w, r)| w * r)
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyMetrics {
    pub phi: f64,
    pub regime: Regime,
    /// False when Φ ≥ 1: the formulas below are formal, not limits.
    pub attracting: bool,
    /// Φ within [`NEAR_CRITICAL_BAND`] of 1.
    pub near_critical: bool,
    pub n_infinity: Option<f64>,
    pub q_levels: Option<Vec<f64>>,
    pub total_debt: Option<f64>,
    pub shares: Vec<f64>,
    pub wac: f64,
    pub wac_weights: Vec<f64>,
    pub rollover: f64,
}

/// Steady-state metrics at the mean rates of `config`.
pub fn steady_metrics(config: &ModelConfig) -> SteadyMetrics {
    steady_metrics_at(config, config.mean_rates())
}

/// Steady-state metrics with an explicit rate vector (length `M`).
pub fn steady_metrics_at(config: &ModelConfig, rates: &[f64]) -> SteadyMetrics {
    let gamma = config.growth_factor();
    let f = config.allocation();
    let phi = feedback_phi_raw(gamma, rates, f);
    let deficit_driven = phi < 1.0;
    let wac_weights = accumulation_weights(gamma, f);
    let wac = wac_weights.iter().zip(rates).map(|(w, r)| w * r).sum();
    let shares = steady_shares(gamma, f);
    let rollover = shares[0];
    let (n_infinity, q_levels, total_debt) = if deficit_driven {
        let n_inf = config.deficit_mean() / (1.0 - phi);
        let q: Vec<f64> = discounted_tail(gamma, f).iter().map(|x| n_inf * x).collect();
        let total = q.iter().sum();
        (Some(n_inf), Some(q), Some(total))
    } else {
        (None, None, None)
    };
    SteadyMetrics {
        phi,
        regime: if deficit_driven {
            Regime::DeficitDriven
        } else {
            Regime::InterestDriven
        },
        attracting: deficit_driven,
        near_critical: (phi - 1.0).abs() <= NEAR_CRITICAL_BAND,
        n_infinity,
        q_levels,
        total_debt,
        shares,
        wac,
        wac_weights,
        rollover,
    }
}

/// Regime via both Φ < 1 and WAC < g; the two must agree away from the
/// boundary.
pub fn classify_regime(config: &ModelConfig, rates: &[f64]) -> Result<Regime> {
    check_len(config, rates)?;
    let gamma = config.growth_factor();
    let f = config.allocation();
    let phi = feedback_phi_raw(gamma, rates, f);
    let wac = steady_wac(gamma, rates, f);
    let g = gamma - 1.0;
    let by_phi = phi < 1.0;
    let by_wac = wac < g;
    if by_phi != by_wac && (phi - 1.0).abs() > 1e-10 && (wac - g).abs() > 1e-10 {
        return Err(LadderError::Internal(format!(
            "regime tests disagree: Φ = {phi}, WAC = {wac}, g = {g}"
        )));
    }
    Ok(if by_phi {
        Regime::DeficitDriven
    } else {
        Regime::InterestDriven
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoGrowthLimits {
    pub shares: Vec<f64>,
    pub wac_weights: Vec<f64>,
    pub wac: f64,
    pub rollover: f64,
    /// New-issue weighted average maturity `Σ j f_j`.
    pub nwam: f64,
}

/// Limits of the steady metrics as γ → 1⁺.
pub fn no_growth_limits(config: &ModelConfig) -> NoGrowthLimits {
    let f = config.allocation();
    let nwam: f64 = f.iter().enumerate().map(|(i, fj)| (i + 1) as f64 * fj).sum();
    let mut shares = vec![0.0; f.len()];
    let mut tail = 0.0;
    for j in (0..f.len()).rev() {
        tail += f[j];
        shares[j] = tail / nwam;
    }
    let wac_weights: Vec<f64> = f
        .iter()
        .enumerate()
        .map(|(i, fj)| (i + 1) as f64 * fj / nwam)
        .collect();
    let wac = wac_weights.iter().zip(config.mean_rates()).map(|(w, r)| w * r).sum();
    NoGrowthLimits {
        shares,
        wac_weights,
        wac,
        rollover: 1.0 / nwam,
        nwam,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalTenor {
    /// `j* = log(1 + (γ−1)/R) / log γ`.
    pub j_star: f64,
    pub lower_tenor: usize,
    pub upper_tenor: usize,
    /// Accumulation weights on the two bracketing tenors.
    pub lower_weight: f64,
    pub upper_weight: f64,
    /// The same blend expressed as issuance fractions.
    pub lower_allocation: f64,
    pub upper_allocation: f64,
}

/// Belly tenor at which a concentrated ladder has rollover exactly `R`,
/// with the neighbouring-tenor blend that achieves `θ₁ = R`.
pub fn optimal_tenor(gamma: f64, risk_tolerance: f64) -> Result<OptimalTenor> {
    if !(gamma.is_finite() && gamma > 1.0) {
        return Err(LadderError::Domain(format!("growth factor must exceed 1, got {gamma}")));
    }
    if !(risk_tolerance > 0.0 && risk_tolerance <= 1.0) {
        return Err(LadderError::Domain(format!(
            "risk tolerance must lie in (0, 1], got {risk_tolerance}"
        )));
    }
    let r = risk_tolerance;
    let j_star = (1.0 + (gamma - 1.0) / r).ln() / gamma.ln();
    let rounded = j_star.round();
    if (j_star - rounded).abs() < 1e-9 {
        let j = (rounded as usize).max(1);
        return Ok(OptimalTenor {
            j_star,
            lower_tenor: j,
            upper_tenor: j,
            lower_weight: 1.0,
            upper_weight: 0.0,
            lower_allocation: 1.0,
            upper_allocation: 0.0,
        });
    }
    let lo = j_star.floor() as usize;
    let hi = lo + 1;
    let (tau_lo, tau_hi) = (rollover_tau(gamma, lo), rollover_tau(gamma, hi));
    let upper_weight = (tau_lo - r) / (tau_lo - tau_hi);
    let lower_weight = 1.0 - upper_weight;
    let a_lo = lower_weight / (1.0 - gamma.powi(-(lo as i32)));
    let a_hi = upper_weight / (1.0 - gamma.powi(-(hi as i32)));
    Ok(OptimalTenor {
        j_star,
        lower_tenor: lo,
        upper_tenor: hi,
        lower_weight,
        upper_weight,
        lower_allocation: a_lo / (a_lo + a_hi),
        upper_allocation: a_hi / (a_lo + a_hi),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunStatus {
    Completed,
    /// Normalized issuance exceeded [`DIVERGENCE_LIMIT`] at this period.
    Divergent { period: usize },
}

/// Normalized path of the budget recursion.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub periods: usize,
    pub normalized_issuance: Vec<f64>,
    pub normalized_states: Vec<DebtStateQ>,
    pub interest: Vec<f64>,
    pub maturing: Vec<f64>,
    pub deficits: Vec<f64>,
    pub status: RunStatus,
}

impl Trajectory {
    pub fn is_divergent(&self) -> bool {
        matches!(self.status, RunStatus::Divergent { .. })
    }
}

/// Period-by-period budget recursion on the face-value ladder.
///
/// Interest is rebuilt from the issuance history and the rates struck at
/// each issue date, so the recursion never touches the cashflow state.
/// Legacy debt in the initial ladder pays `legacy_coupons[j]` per period on
/// the bucket with `j + 1` periods remaining.
#[derive(Debug, Clone)]
pub struct LadderRecursion {
    gamma: f64,
    allocation: Vec<f64>,
    q: Vec<f64>,
    initial: Vec<f64>,
    legacy_coupons: Vec<f64>,
    /// `(Ñ_s, coupon stream Σ_{k≥i} f_k r_{s,k})`, most recent first.
    history: VecDeque<(f64, Vec<f64>)>,
    t: usize,
}

pub struct LadderStep {
    pub issuance: f64,
    pub interest: f64,
    pub maturing: f64,
}

impl LadderRecursion {
    pub fn new(config: &ModelConfig, initial: &DebtStateQ, legacy_coupons: &[f64]) -> Result<Self> {
        let m = config.max_maturity();
        if initial.q.len() != m || legacy_coupons.len() != m {
            return Err(LadderError::config(
                "initial",
                format!("initial ladder and coupons must have length {m}"),
            ));
        }
        if initial.q.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(LadderError::config("initial", "initial ladder must be nonnegative"));
        }
        Ok(LadderRecursion {
            gamma: config.growth_factor(),
            allocation: config.allocation().to_vec(),
            q: initial.q.clone(),
            initial: initial.q.clone(),
            legacy_coupons: legacy_coupons.to_vec(),
            history: VecDeque::with_capacity(m + 1),
            t: 0,
        })
    }

    pub fn state(&self) -> DebtStateQ {
        DebtStateQ { q: self.q.clone() }
    }

    /// Advances one period with the rates struck and the normalized deficit
    /// realized this period.
    pub fn step(&mut self, rates: &[f64], deficit: f64) -> LadderStep {
        self.t += 1;
        let t = self.t;
        let m = self.allocation.len();
        let inv = self.gamma.recip();

        // Coupons due now on issues from k periods ago with tenor ≥ k.
        let mut interest = 0.0;
        for (lag, (n, stream)) in self.history.iter().enumerate() {
            let k = lag + 1;
            interest += inv.powi(k as i32) * n * stream[k - 1];
        }
        if t <= m {
            let legacy: f64 = (t - 1..m)
                .map(|i| self.legacy_coupons[i] * self.initial[i])
                .sum();
            interest += inv.powi(t as i32) * legacy;
        }
        let maturing = inv * self.q[0];
        let issuance = deficit + interest + maturing;

        for j in 0..m {
            let rolled = if j + 1 < m { inv * self.q[j + 1] } else { 0.0 };
            self.q[j] = rolled + self.allocation[j] * issuance;
        }
        let stream = crate::operators::coupon_stream(rates, &self.allocation);
        self.history.push_front((issuance, stream));
        self.history.truncate(m);
        LadderStep {
            issuance,
            interest,
            maturing,
        }
    }
}

/// Iterates the deterministic budget recursion at the mean rates with the
/// deficit held at its mean. Legacy debt in `initial` pays the mean rate of
/// its remaining tenor.
pub fn simulate_deterministic(
    config: &ModelConfig,
    horizon: usize,
    initial: &DebtStateQ,
) -> Result<Trajectory> {
    if horizon < 1 {
        return Err(LadderError::config("horizon", "must be at least 1"));
    }
    let rates = config.mean_rates();
    let mut rec = LadderRecursion::new(config, initial, rates)?;
    let mut traj = Trajectory {
        periods: 0,
        normalized_issuance: Vec::with_capacity(horizon),
        normalized_states: Vec::with_capacity(horizon),
        interest: Vec::with_capacity(horizon),
        maturing: Vec::with_capacity(horizon),
        deficits: Vec::with_capacity(horizon),
        status: RunStatus::Completed,
    };
    let d = config.deficit_mean();
    for t in 1..=horizon {
        let step = rec.step(rates, d);
        traj.periods = t;
        traj.normalized_issuance.push(step.issuance);
        traj.interest.push(step.interest);
        traj.maturing.push(step.maturing);
        traj.deficits.push(d);
        traj.normalized_states.push(rec.state());
        if !step.issuance.is_finite() || step.issuance.abs() > DIVERGENCE_LIMIT {
            traj.status = RunStatus::Divergent { period: t };
            break;
        }
    }
    Ok(traj)
}
