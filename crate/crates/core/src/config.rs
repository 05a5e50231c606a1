//! Model parameters: maturity grid, issuance allocation, mean yield curve,
//! and the AR(1) driver parameters for rates and the normalized deficit.
//!
//! Configurations are specified sparsely, one [`TenorSpec`] per key tenor,
//! and expanded to dense vectors over tenors `1..=M` at construction.
//! Mean rates for tenors without a spec are linearly interpolated between
//! neighbouring key tenors (flat beyond the ends); such tenors carry no
//! volatility and never receive issuance.

use serde::{Deserialize, Serialize};

use crate::error::{LadderError, Result};

/// Largest supported maturity grid.
pub const MAX_MATURITY_LIMIT: usize = 100;

/// Tolerance on `Σ f_j = 1`.
pub const ALLOCATION_TOLERANCE: f64 = 1e-12;

/// Parameters attached to one key tenor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TenorSpec {
    /// Original maturity in periods, `1..=M`.
    pub tenor: usize,
    /// Issuance fraction `f_j`.
    pub weight: f64,
    /// Mean coupon rate `r̄_j` per period.
    pub mean_rate: f64,
    /// Innovation standard deviation `σ_j`.
    pub vol: f64,
    /// AR(1) persistence `φ_j` in `[0, 1)`.
    pub persistence: f64,
}

/// Deficit trend and the AR(1) law of the normalized deficit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeficitSpec {
    /// Growth factor `γ = 1 + g > 1`.
    pub growth_factor: f64,
    /// Mean normalized deficit `D̄₀ > 0`.
    pub mean: f64,
    /// Innovation standard deviation `ς`.
    pub vol: f64,
    /// AR(1) persistence `ψ` in `[0, 1)`.
    pub persistence: f64,
}

/// How rate innovations relate to each other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationMode {
    /// Rates mutually independent, each correlated `ρ` with the deficit.
    #[default]
    Independent,
    /// One common factor: `ε_j = σ_j(ρ Z₀ + √(1−ρ²) Z_j)`, `η = ς Z₀`.
    OneFactor,
}

/// Validated, immutable model configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    max_maturity: usize,
    specs: Vec<TenorSpec>,
    deficit: DeficitSpec,
    correlation: f64,
    mode: CorrelationMode,
    allocation: Vec<f64>,
    mean_rates: Vec<f64>,
    rate_vol: Vec<f64>,
    rate_persistence: Vec<f64>,
}

fn check_finite(field: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(LadderError::config(field, format!("must be finite, got {value}")))
    }
}

fn check_persistence(field: &str, value: f64) -> Result<()> {
    check_finite(field, value)?;
    if !(0.0..1.0).contains(&value) {
        return Err(LadderError::config(
            field,
            format!("persistence must lie in [0, 1), got {value}"),
        ));
    }
    Ok(())
}

impl ModelConfig {
    pub fn new(
        max_maturity: usize,
        tenors: &[TenorSpec],
        deficit: DeficitSpec,
        correlation: f64,
        mode: CorrelationMode,
    ) -> Result<Self> {
        if max_maturity < 1 || max_maturity > MAX_MATURITY_LIMIT {
            return Err(LadderError::config(
                "max_maturity",
                format!("must lie in 1..={MAX_MATURITY_LIMIT}, got {max_maturity}"),
            ));
        }
        if tenors.is_empty() {
            return Err(LadderError::config("tenors", "at least one tenor is required"));
        }
        let mut specs = tenors.to_vec();
        specs.sort_by_key(|s| s.tenor);
        for pair in specs.windows(2) {
            if pair[0].tenor == pair[1].tenor {
                return Err(LadderError::config(
                    "tenors",
                    format!("tenor {} listed twice", pair[0].tenor),
                ));
            }
        }
        for s in &specs {
            let field = format!("tenor {}", s.tenor);
            if s.tenor < 1 || s.tenor > max_maturity {
                return Err(LadderError::config(
                    field,
                    format!("tenor must lie in 1..={max_maturity}"),
                ));
            }
            check_finite(&format!("{field}.weight"), s.weight)?;
            check_finite(&format!("{field}.mean_rate"), s.mean_rate)?;
            check_finite(&format!("{field}.vol"), s.vol)?;
            if s.weight < 0.0 {
                return Err(LadderError::config(
                    format!("{field}.weight"),
                    format!("allocation weights must be nonnegative, got {}", s.weight),
                ));
            }
            if s.vol < 0.0 {
                return Err(LadderError::config(
                    format!("{field}.vol"),
                    format!("volatility must be nonnegative, got {}", s.vol),
                ));
            }
            check_persistence(&format!("{field}.persistence"), s.persistence)?;
        }
        let total: f64 = specs.iter().map(|s| s.weight).sum();
        if (total - 1.0).abs() > ALLOCATION_TOLERANCE {
            return Err(LadderError::config(
                "allocation",
                format!("weights must sum to 1 (within {ALLOCATION_TOLERANCE:e}), got {total}"),
            ));
        }

        check_finite("deficit.growth_factor", deficit.growth_factor)?;
        if deficit.growth_factor <= 1.0 {
            return Err(LadderError::config(
                "deficit.growth_factor",
                format!("growth factor must exceed 1, got {}", deficit.growth_factor),
            ));
        }
        check_finite("deficit.mean", deficit.mean)?;
        if deficit.mean <= 0.0 {
            return Err(LadderError::config(
                "deficit.mean",
                format!("mean normalized deficit must be positive, got {}", deficit.mean),
            ));
        }
        check_finite("deficit.vol", deficit.vol)?;
        if deficit.vol < 0.0 {
            return Err(LadderError::config(
                "deficit.vol",
                format!("volatility must be nonnegative, got {}", deficit.vol),
            ));
        }
        check_persistence("deficit.persistence", deficit.persistence)?;
        check_finite("correlation.rho", correlation)?;
        if correlation <= -1.0 || correlation >= 1.0 {
            return Err(LadderError::config(
                "correlation.rho",
                format!("correlation must lie in (-1, 1), got {correlation}"),
            ));
        }

        let m = max_maturity;
        let mut allocation = vec![0.0; m];
        let mut rate_vol = vec![0.0; m];
        let mut rate_persistence = vec![0.0; m];
        for s in &specs {
            allocation[s.tenor - 1] = s.weight;
            rate_vol[s.tenor - 1] = s.vol;
            rate_persistence[s.tenor - 1] = s.persistence;
        }
        let mean_rates = interpolate_rates(m, &specs);

        Ok(ModelConfig {
            max_maturity,
            specs,
            deficit,
            correlation,
            mode,
            allocation,
            mean_rates,
            rate_vol,
            rate_persistence,
        })
    }

    /// Baseline parameter set: tenors 1/3/10 with f = (0.4, 0.5, 0.1),
    /// r̄ = (.02, .03, .05), σ = 0.1 r̄, φ = ψ = 0.98, γ = 1.08, D̄₀ = 1,
    /// ς = 0.1, ρ = −0.5.
    pub fn baseline() -> Self {
        let tenor = |tenor, weight, rate, vol| TenorSpec {
            tenor,
            weight,
            mean_rate: rate,
            vol,
            persistence: 0.98,
        };
        ModelConfig::new(
            10,
            &[
                tenor(1, 0.4, 0.02, 0.002),
                tenor(3, 0.5, 0.03, 0.003),
                tenor(10, 0.1, 0.05, 0.005),
            ],
            DeficitSpec {
                growth_factor: 1.08,
                mean: 1.0,
                vol: 0.1,
                persistence: 0.98,
            },
            -0.5,
            CorrelationMode::Independent,
        )
        .expect("baseline parameters are valid")
    }

    pub fn max_maturity(&self) -> usize {
        self.max_maturity
    }

    /// Key tenors (1-based), ascending.
    pub fn tenors(&self) -> Vec<usize> {
        self.specs.iter().map(|s| s.tenor).collect()
    }

    pub fn tenor_specs(&self) -> &[TenorSpec] {
        &self.specs
    }

    pub fn deficit_spec(&self) -> DeficitSpec {
        self.deficit
    }

    /// Zero-based indices `j-1` of tenors with `f_j > 0`.
    pub fn issued_indices(&self) -> Vec<usize> {
        (0..self.max_maturity)
            .filter(|&i| self.allocation[i] > 0.0)
            .collect()
    }

    /// Dense allocation `f` over tenors `1..=M`.
    pub fn allocation(&self) -> &[f64] {
        &self.allocation
    }

    /// Dense mean rates `r̄` over tenors `1..=M`.
    pub fn mean_rates(&self) -> &[f64] {
        &self.mean_rates
    }

    pub fn rate_vol(&self) -> &[f64] {
        &self.rate_vol
    }

    pub fn rate_persistence(&self) -> &[f64] {
        &self.rate_persistence
    }

    pub fn growth_factor(&self) -> f64 {
        self.deficit.growth_factor
    }

    /// `g = γ − 1`.
    pub fn growth_rate(&self) -> f64 {
        self.deficit.growth_factor - 1.0
    }

    pub fn deficit_mean(&self) -> f64 {
        self.deficit.mean
    }

    pub fn deficit_vol(&self) -> f64 {
        self.deficit.vol
    }

    pub fn deficit_persistence(&self) -> f64 {
        self.deficit.persistence
    }

    pub fn correlation(&self) -> f64 {
        self.correlation
    }

    pub fn correlation_mode(&self) -> CorrelationMode {
        self.mode
    }

    /// `Σ_j = ρ ς σ_j`, dense over tenors.
    pub fn innovation_cross_cov(&self) -> Vec<f64> {
        let scale = self.correlation * self.deficit.vol;
        self.rate_vol.iter().map(|s| scale * s).collect()
    }

    /// Same tenors and parameters with new weights, given in key-tenor order.
    pub fn with_weights(&self, weights: &[f64]) -> Result<Self> {
        if weights.len() != self.specs.len() {
            return Err(LadderError::config(
                "allocation",
                format!(
                    "expected {} weights (one per key tenor), got {}",
                    self.specs.len(),
                    weights.len()
                ),
            ));
        }
        let specs: Vec<TenorSpec> = self
            .specs
            .iter()
            .zip(weights)
            .map(|(s, &w)| TenorSpec { weight: w, ..*s })
            .collect();
        ModelConfig::new(self.max_maturity, &specs, self.deficit, self.correlation, self.mode)
    }

    pub fn with_correlation(&self, rho: f64) -> Result<Self> {
        ModelConfig::new(self.max_maturity, &self.specs, self.deficit, rho, self.mode)
    }

    pub fn with_correlation_mode(&self, mode: CorrelationMode) -> Result<Self> {
        ModelConfig::new(self.max_maturity, &self.specs, self.deficit, self.correlation, mode)
    }

    pub fn with_growth_factor(&self, gamma: f64) -> Result<Self> {
        let deficit = DeficitSpec {
            growth_factor: gamma,
            ..self.deficit
        };
        ModelConfig::new(self.max_maturity, &self.specs, deficit, self.correlation, self.mode)
    }

    /// Multiplies every innovation volatility (rates and deficit) by `scale`.
    pub fn with_volatility_scale(&self, scale: f64) -> Result<Self> {
        let specs: Vec<TenorSpec> = self
            .specs
            .iter()
            .map(|s| TenorSpec {
                vol: s.vol * scale,
                ..*s
            })
            .collect();
        let deficit = DeficitSpec {
            vol: self.deficit.vol * scale,
            ..self.deficit
        };
        ModelConfig::new(self.max_maturity, &specs, deficit, self.correlation, self.mode)
    }

    /// Replaces every rate persistence with `rate` and the deficit
    /// persistence with `deficit`.
    pub fn with_persistence(&self, rate: f64, deficit: f64) -> Result<Self> {
        let specs: Vec<TenorSpec> = self
            .specs
            .iter()
            .map(|s| TenorSpec {
                persistence: rate,
                ..*s
            })
            .collect();
        let d = DeficitSpec {
            persistence: deficit,
            ..self.deficit
        };
        ModelConfig::new(self.max_maturity, &specs, d, self.correlation, self.mode)
    }

    /// Replaces mean rates in key-tenor order, keeping volatilities.
    pub fn with_mean_rates(&self, rates: &[f64]) -> Result<Self> {
        if rates.len() != self.specs.len() {
            return Err(LadderError::config(
                "rates.mean",
                format!("expected {} rates, got {}", self.specs.len(), rates.len()),
            ));
        }
        let specs: Vec<TenorSpec> = self
            .specs
            .iter()
            .zip(rates)
            .map(|(s, &r)| TenorSpec { mean_rate: r, ..*s })
            .collect();
        ModelConfig::new(self.max_maturity, &specs, self.deficit, self.correlation, self.mode)
    }
}

fn interpolate_rates(m: usize, specs: &[TenorSpec]) -> Vec<f64> {
    (1..=m)
        .map(|j| {
            match specs.iter().position(|s| s.tenor >= j) {
                None => specs[specs.len() - 1].mean_rate,
                Some(0) => specs[0].mean_rate,
                Some(i) if specs[i].tenor == j => specs[i].mean_rate,
                Some(i) => {
                    let (lo, hi) = (&specs[i - 1], &specs[i]);
                    let t = (j - lo.tenor) as f64 / (hi.tenor - lo.tenor) as f64;
                    lo.mean_rate + t * (hi.mean_rate - lo.mean_rate)
                }
            }
        })
        .collect()
}
