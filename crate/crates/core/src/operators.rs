//! Dense ladder operators: shift, cumulative, discount-Toeplitz and coupon
//! matrices over the maturity grid, plus their doubled (principal, coupon)
//! block forms.

use nalgebra::{DMatrix, DVector};

use crate::error::{LadderError, Result};

/// Outstanding face amounts by remaining periods to maturity.
#[derive(Debug, Clone, PartialEq)]
pub struct DebtStateQ {
    pub q: Vec<f64>,
}

impl DebtStateQ {
    pub fn zeros(m: usize) -> Self {
        DebtStateQ { q: vec![0.0; m] }
    }

    pub fn total(&self) -> f64 {
        self.q.iter().sum()
    }
}

/// Operator set for one `(γ, M)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct LadderOperators {
    pub growth_factor: f64,
    pub max_maturity: usize,
    /// `S`, ones on the first superdiagonal.
    pub shift: DMatrix<f64>,
    /// `S′ = diag(S, S)`.
    pub doubled_shift: DMatrix<f64>,
    /// `U`, upper-triangular ones.
    pub cumulative: DMatrix<f64>,
    /// `T_{jk} = γ^{−(k−j)}` for `k ≥ j`.
    pub discount_toeplitz: DMatrix<f64>,
    /// `T′ = diag(T, T)`.
    pub doubled_toeplitz: DMatrix<f64>,
    /// `h = (1, γ⁻¹, …, γ^{−(M−1)})`.
    pub discount_row: DVector<f64>,
    /// `e`, ones at the first principal and first coupon slot.
    pub selector: DVector<f64>,
}

fn block_diag(a: &DMatrix<f64>) -> DMatrix<f64> {
    let m = a.nrows();
    let mut out = DMatrix::zeros(2 * m, 2 * m);
    out.view_mut((0, 0), (m, m)).copy_from(a);
    out.view_mut((m, m), (m, m)).copy_from(a);
    out
}

pub fn build_operators(growth_factor: f64, max_maturity: usize) -> Result<LadderOperators> {
    if !(growth_factor.is_finite() && growth_factor > 1.0) {
        return Err(LadderError::config(
            "growth_factor",
            format!("growth factor must exceed 1, got {growth_factor}"),
        ));
    }
    if max_maturity < 1 {
        return Err(LadderError::config("max_maturity", "must be at least 1"));
    }
    let m = max_maturity;
    let inv = growth_factor.recip();
    let shift = DMatrix::from_fn(m, m, |i, j| if j == i + 1 { 1.0 } else { 0.0 });
    let cumulative = DMatrix::from_fn(m, m, |i, j| if j >= i { 1.0 } else { 0.0 });
    let discount_toeplitz = DMatrix::from_fn(m, m, |i, j| {
        if j >= i {
            inv.powi((j - i) as i32)
        } else {
            0.0
        }
    });
    let discount_row = DVector::from_fn(m, |i, _| inv.powi(i as i32));
    let mut selector = DVector::zeros(2 * m);
    selector[0] = 1.0;
    selector[m] = 1.0;
    Ok(LadderOperators {
        growth_factor,
        max_maturity,
        doubled_shift: block_diag(&shift),
        doubled_toeplitz: block_diag(&discount_toeplitz),
        shift,
        cumulative,
        discount_toeplitz,
        discount_row,
        selector,
    })
}

/// `R_t = U·diag(r_t)`: entry `(i, j)` is `r_j` for `i ≤ j`.
pub fn coupon_matrix(rates: &[f64], max_maturity: usize) -> Result<DMatrix<f64>> {
    if rates.len() != max_maturity {
        return Err(LadderError::config(
            "rates",
            format!("expected {max_maturity} rates, got {}", rates.len()),
        ));
    }
    let m = max_maturity;
    Ok(DMatrix::from_fn(m, m, |i, j| if i <= j { rates[j] } else { 0.0 }))
}

/// `(U·diag(r)·f)_i = Σ_{k≥i} r_k f_k`, the coupon stream created per unit
/// of issuance.
pub fn coupon_stream(rates: &[f64], allocation: &[f64]) -> Vec<f64> {
    let m = allocation.len();
    let mut out = vec![0.0; m];
    let mut acc = 0.0;
    for i in (0..m).rev() {
        acc += rates[i] * allocation[i];
        out[i] = acc;
    }
    out
}
