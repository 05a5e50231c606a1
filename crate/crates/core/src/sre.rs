//! Future-cashflow state `Ỹ = (P̃, C̃)` and its one-step linear recurrence
//! `Ỹ_t = B̃_t Ỹ_{t−1} + d̃_t`, all in normalized (trend-deflated) units.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::baseline::DIVERGENCE_LIMIT;
use crate::config::ModelConfig;
use crate::error::{LadderError, Result};
use crate::operators::{coupon_stream, DebtStateQ, LadderOperators};

/// Principal and coupon due `j + 1` periods ahead at index `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CashflowState {
    pub principal: Vec<f64>,
    pub coupon: Vec<f64>,
}

impl CashflowState {
    pub fn zeros(m: usize) -> Self {
        CashflowState {
            principal: vec![0.0; m],
            coupon: vec![0.0; m],
        }
    }

    pub fn max_maturity(&self) -> usize {
        self.principal.len()
    }

    /// Legacy ladder `q` paying `coupon_rates[j]` on the bucket with
    /// `j + 1` periods remaining: `C = U diag(c) q`.
    pub fn from_debt_state(q: &DebtStateQ, coupon_rates: &[f64]) -> Self {
        CashflowState {
            principal: q.q.clone(),
            coupon: coupon_stream(coupon_rates, &q.q),
        }
    }

    /// Stacked `(P̃, C̃)`.
    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_iterator(
            2 * self.principal.len(),
            self.principal.iter().chain(&self.coupon).copied(),
        )
    }

    pub fn from_vector(y: &DVector<f64>) -> Self {
        let m = y.len() / 2;
        CashflowState {
            principal: y.rows(0, m).iter().copied().collect(),
            coupon: y.rows(m, m).iter().copied().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompanionPair {
    /// `B̃_t = γ⁻¹(S′ + R′_t f eᵀ)`.
    pub companion: DMatrix<f64>,
    /// `d̃_t = D̃_t R′_t f`.
    pub forcing: DVector<f64>,
}

/// `R′ f = (f, U diag(r) f)`.
pub fn stacked_issue_vector(rates: &[f64], allocation: &[f64]) -> DVector<f64> {
    let stream = coupon_stream(rates, allocation);
    DVector::from_iterator(
        2 * allocation.len(),
        allocation.iter().chain(&stream).copied(),
    )
}

pub fn companion_pair(
    rates: &[f64],
    deficit: f64,
    config: &ModelConfig,
    ops: &LadderOperators,
) -> Result<CompanionPair> {
    let m = config.max_maturity();
    if rates.len() != m || ops.max_maturity != m {
        return Err(LadderError::config(
            "rates",
            format!("expected {m} rates and matching operators"),
        ));
    }
    let issue = stacked_issue_vector(rates, config.allocation());
    let companion = (&ops.doubled_shift + &issue * ops.selector.transpose()) / ops.growth_factor;
    Ok(CompanionPair {
        companion,
        forcing: issue * deficit,
    })
}

/// One step of the recurrence. Returns the new state and the normalized
/// issuance `Ñ_t = γ⁻¹(P̃_{t−1,1} + C̃_{t−1,1}) + D̃_t`.
pub fn sre_step(
    state: &CashflowState,
    rates: &[f64],
    deficit: f64,
    config: &ModelConfig,
) -> Result<(CashflowState, f64)> {
    let m = config.max_maturity();
    let inv = config.growth_factor().recip();
    let f = config.allocation();
    let issuance = inv * (state.principal[0] + state.coupon[0]) + deficit;
    if !issuance.is_finite() || issuance.abs() > DIVERGENCE_LIMIT {
        return Err(LadderError::Divergent { issuance });
    }
    let stream = coupon_stream(rates, f);
    let mut next = CashflowState::zeros(m);
    for j in 0..m {
        let (p, c) = if j + 1 < m {
            (state.principal[j + 1], state.coupon[j + 1])
        } else {
            (0.0, 0.0)
        };
        next.principal[j] = inv * p + issuance * f[j];
        next.coupon[j] = inv * c + issuance * stream[j];
    }
    #[cfg(debug_assertions)]
    check_matrix_form(state, &next, rates, deficit, config);
    Ok((next, issuance))
}

#[cfg(debug_assertions)]
fn check_matrix_form(
    state: &CashflowState,
    next: &CashflowState,
    rates: &[f64],
    deficit: f64,
    config: &ModelConfig,
) {
    let ops = crate::operators::build_operators(config.growth_factor(), config.max_maturity())
        .expect("validated config");
    let pair = companion_pair(rates, deficit, config, &ops).expect("validated inputs");
    let y = state.to_vector();
    let via_matrix = &pair.companion * &y + &pair.forcing;
    let scale = via_matrix.amax().max(1.0);
    let err = (via_matrix - next.to_vector()).amax();
    assert!(err <= 1e-12 * scale, "explicit and matrix SRE steps differ by {err}");
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioView {
    pub total_debt: f64,
    pub q_levels: Vec<f64>,
    /// Absent when the ladder is empty.
    pub shares: Option<Vec<f64>>,
    pub next_interest: f64,
    pub rollover_fraction: Option<f64>,
}

pub fn state_to_portfolio(state: &CashflowState) -> PortfolioView {
    let total: f64 = state.principal.iter().sum();
    let (shares, rollover_fraction) = if total != 0.0 {
        let s: Vec<f64> = state.principal.iter().map(|p| p / total).collect();
        let first = s[0];
        (Some(s), Some(first))
    } else {
        (None, None)
    };
    PortfolioView {
        total_debt: total,
        q_levels: state.principal.clone(),
        shares,
        next_interest: state.coupon[0],
        rollover_fraction,
    }
}
