//! Maturity-ladder model of sovereign debt: deterministic steady states,
//! the stochastic cashflow recurrence, its invariant moments, Monte Carlo
//! validation and issuance-allocation optimization.

pub mod baseline;
pub mod config;
pub mod drivers;
pub mod error;
pub mod frontier;
pub mod invariant;
pub mod montecarlo;
pub mod operators;
pub mod scenario;
pub mod sre;
pub mod validate;

pub use config::{CorrelationMode, DeficitSpec, ModelConfig, TenorSpec};
pub use error::{LadderError, Result};
pub use operators::{build_operators, coupon_matrix, DebtStateQ, LadderOperators};
