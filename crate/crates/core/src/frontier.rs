//! Cost/rollover-risk optimization of the issuance allocation.
//!
//! All objectives are ratios of forms linear in `f`, and the rollover cap
//! `θ₁(f) ≤ R` is itself linear in `f`, so the feasible set is an exact
//! polytope: the simplex, the bounds and one half-space.

use std::fmt;

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::error::{LadderError, Result};
use crate::invariant::{adjusted_rates, ergodicity_certificate, invariant_levels};
use crate::montecarlo::{
    estimate_ratio_metrics, run_simulation, InitialCondition, RecordSet, SimulationSpec,
};

/// Objective values within this relative band count as ties.
pub const TIE_TOLERANCE: f64 = 1e-9;
/// Slack allowed on bounds and the rollover cap in returned allocations.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-9;
pub const MULTI_STARTS: usize = 16;

const SLP_MAX_ITER: usize = 4000;
const SLP_MIN_RADIUS: f64 = 1e-10;
const FD_STEP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// `E(Ĩ)`.
    InvariantInterest,
    /// `E(Q̃)`.
    InvariantDebt,
    /// `E(Ĩ)/E(Q̃)`.
    CostRatio,
    DeterministicWac,
}

impl Objective {
    pub fn name(self) -> &'static str {
        match self {
            Objective::InvariantInterest => "invariant_interest",
            Objective::InvariantDebt => "invariant_debt",
            Objective::CostRatio => "cost_ratio",
            Objective::DeterministicWac => "deterministic_wac",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Objective::InvariantInterest,
            Objective::InvariantDebt,
            Objective::CostRatio,
            Objective::DeterministicWac,
        ]
        .into_iter()
        .find(|o| o.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationSpec {
    pub objective: Objective,
    pub rollover_cap: f64,
    /// One entry per key tenor, in key-tenor order.
    pub lower_bounds: Vec<f64>,
    pub upper_bounds: Vec<f64>,
    pub rho_override: Option<f64>,
}

impl OptimizationSpec {
    /// Bounds `[floor, 1]` on each of `tenors` key tenors.
    pub fn with_floor(objective: Objective, rollover_cap: f64, tenors: usize, floor: f64) -> Self {
        OptimizationSpec {
            objective,
            rollover_cap,
            lower_bounds: vec![floor; tenors],
            upper_bounds: vec![1.0; tenors],
            rho_override: None,
        }
    }

    fn validate(&self, k: usize) -> Result<()> {
        if !(self.rollover_cap.is_finite() && self.rollover_cap > 0.0) {
            return Err(LadderError::config(
                "optimization.rollover_cap",
                format!("must be positive, got {}", self.rollover_cap),
            ));
        }
        for (name, b) in [("lower_bounds", &self.lower_bounds), ("upper_bounds", &self.upper_bounds)] {
            if b.len() != k {
                return Err(LadderError::config(
                    format!("optimization.{name}"),
                    format!("expected {k} entries (one per key tenor), got {}", b.len()),
                ));
            }
        }
        for (i, (&l, &u)) in self.lower_bounds.iter().zip(&self.upper_bounds).enumerate() {
            if !(0.0..=1.0).contains(&l) || !(0.0..=1.0).contains(&u) || l > u {
                return Err(LadderError::config(
                    "optimization.bounds",
                    format!("entry {i}: need 0 ≤ lower ≤ upper ≤ 1, got [{l}, {u}]"),
                ));
            }
        }
        let lo: f64 = self.lower_bounds.iter().sum();
        let hi: f64 = self.upper_bounds.iter().sum();
        if lo > 1.0 + 1e-12 || hi < 1.0 - 1e-12 {
            return Err(LadderError::config(
                "optimization.bounds",
                format!("need Σ lower ≤ 1 ≤ Σ upper, got Σ lower = {lo}, Σ upper = {hi}"),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BindingConstraint {
    Lower { tenor: usize },
    Upper { tenor: usize },
    RolloverCap,
}

impl fmt::Display for BindingConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BindingConstraint::Lower { tenor } => write!(f, "lower:{tenor}"),
            BindingConstraint::Upper { tenor } => write!(f, "upper:{tenor}"),
            BindingConstraint::RolloverCap => write!(f, "rollover_cap"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub rollover_cap: f64,
    pub tenors: Vec<usize>,
    /// Optimal weights in key-tenor order.
    pub allocation: Vec<f64>,
    pub objective: Objective,
    pub objective_value: f64,
    pub rollover: f64,
    pub binding_constraints: Vec<BindingConstraint>,
}

/// Closed-form objective pieces per key tenor. With
/// `s_j = Σ_{i<j} γ^{−i}`:
/// `Φ(r, f) = Σ f_j (γ^{−j} + r_j s_j / γ)`, `1ᵀTf = Σ f_j s_j`, and the
/// next-interest weight of tenor `j` is also `s_j`.
#[derive(Debug, Clone)]
pub struct ObjectiveModel {
    pub tenors: Vec<usize>,
    deficit_mean: f64,
    discount: Vec<f64>,
    /// `(1 − γ^{−j})/(γ − 1)`, finite as `γ → 1⁺`.
    accumulation: Vec<f64>,
    annuity: Vec<f64>,
    rates: Vec<f64>,
    rates_sigma: Vec<f64>,
    phi_mean: Vec<f64>,
    phi_sigma: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl ObjectiveModel {
    pub fn new(config: &ModelConfig) -> Self {
        let gamma = config.growth_factor();
        let g = config.growth_rate();
        let tenors = config.tenors();
        let ln = gamma.ln();
        let r_full = config.mean_rates();
        let rs_full = adjusted_rates(config);
        let mut m = ObjectiveModel {
            tenors: tenors.clone(),
            deficit_mean: config.deficit_mean(),
            discount: Vec::new(),
            accumulation: Vec::new(),
            annuity: Vec::new(),
            rates: Vec::new(),
            rates_sigma: Vec::new(),
            phi_mean: Vec::new(),
            phi_sigma: Vec::new(),
        };
        for &j in &tenors {
            let disc = (-(j as f64) * ln).exp();
            let one_minus = -(-(j as f64) * ln).exp_m1();
            let annuity = one_minus / (1.0 - 1.0 / gamma);
            let (r, rs) = (r_full[j - 1], rs_full[j - 1]);
            m.discount.push(disc);
            m.accumulation.push(one_minus / g);
            m.annuity.push(annuity);
            m.rates.push(r);
            m.rates_sigma.push(rs);
            m.phi_mean.push(disc + r * annuity / gamma);
            m.phi_sigma.push(disc + rs * annuity / gamma);
        }
        m
    }

    pub fn dimension(&self) -> usize {
        self.tenors.len()
    }

    /// `θ₁(f) = Σ f_j γ^{−j} / Σ f_j (1−γ^{−j})/(γ−1)`.
    pub fn rollover(&self, f: &[f64]) -> f64 {
        dot(f, &self.discount) / dot(f, &self.accumulation)
    }

    pub fn wac(&self, f: &[f64]) -> f64 {
        let num: f64 = f
            .iter()
            .zip(&self.accumulation)
            .zip(&self.rates)
            .map(|((x, a), r)| x * a * r)
            .sum();
        num / dot(f, &self.accumulation)
    }

    /// `(E(Q̃), E(Ĩ))`, or `None` when `Φ(r̄, f) ≥ 1`. `f` is normalized
    /// to unit sum first.
    pub fn levels(&self, f: &[f64]) -> Option<(f64, f64)> {
        let total: f64 = f.iter().sum();
        let phi = dot(f, &self.phi_mean) / total;
        if !(phi < 1.0) {
            return None;
        }
        let phi_s = dot(f, &self.phi_sigma) / total;
        let s = dot(f, &self.annuity) / total;
        let mut a = 0.0;
        let mut b = 0.0;
        for k in 0..f.len() {
            a += f[k] * self.annuity[k] * self.rates_sigma[k];
            b += f[k] * self.annuity[k] * self.rates[k];
        }
        let (a, b) = (a / total, b / total);
        let scale = self.deficit_mean / (1.0 - phi);
        let q = (1.0 + phi_s - phi) * scale * s;
        let i = scale * ((1.0 - phi) * a + phi_s * b);
        Some((q, i))
    }

    pub fn value(&self, objective: Objective, f: &[f64]) -> f64 {
        if objective == Objective::DeterministicWac {
            return self.wac(f);
        }
        match self.levels(f) {
            Some((q, i)) => match objective {
                Objective::InvariantInterest => i,
                Objective::InvariantDebt => q,
                Objective::CostRatio => i / q,
                Objective::DeterministicWac => unreachable!(),
            },
            None => f64::INFINITY,
        }
    }
}

/// Simplex, bounds and the linear rollover cap
/// `Σ f_j (γ^{−j} − R a_j) ≤ 0`.
struct Polytope {
    lower: Vec<f64>,
    upper: Vec<f64>,
    cap_row: Vec<f64>,
}

type Row = (Vec<f64>, ComparisonOp, f64);

impl Polytope {
    fn new(model: &ObjectiveModel, spec: &OptimizationSpec) -> Self {
        let cap_row = model
            .discount
            .iter()
            .zip(&model.accumulation)
            .map(|(d, a)| d - spec.rollover_cap * a)
            .collect();
        Polytope {
            lower: spec.lower_bounds.clone(),
            upper: spec.upper_bounds.clone(),
            cap_row,
        }
    }

    /// Optimize `c·f` over the polytope intersected with `box_` and the
    /// extra rows.
    fn lp(
        &self,
        c: &[f64],
        direction: OptimizationDirection,
        box_: Option<(&[f64], &[f64])>,
        extra: &[Row],
    ) -> std::result::Result<Vec<f64>, microlp::Error> {
        let mut p = Problem::new(direction);
        let vars: Vec<_> = (0..c.len())
            .map(|k| {
                let (mut lo, mut hi) = (self.lower[k], self.upper[k]);
                if let Some((bl, bu)) = box_ {
                    lo = lo.max(bl[k]);
                    hi = hi.min(bu[k]);
                }
                if hi < lo {
                    hi = lo;
                }
                p.add_var(c[k], (lo, hi))
            })
            .collect();
        p.add_constraint(vars.iter().map(|&v| (v, 1.0)), ComparisonOp::Eq, 1.0);
        p.add_constraint(vars.iter().copied().zip(self.cap_row.iter().copied()), ComparisonOp::Le, 0.0);
        for (row, op, rhs) in extra {
            p.add_constraint(vars.iter().copied().zip(row.iter().copied()), *op, *rhs);
        }
        let sol = p.solve()?.into_solution().map_err(|_| microlp::Error::Infeasible)?;
        Ok(vars.iter().map(|&v| sol.var_value(v)).collect())
    }
}

fn lp_error(e: microlp::Error) -> LadderError {
    match e {
        microlp::Error::Infeasible => LadderError::Infeasible("linear program is infeasible".into()),
        other => LadderError::Internal(format!("linear program failed: {other}")),
    }
}

/// Minimum `θ₁` reachable within the bounds, by Charnes–Cooper on
/// `y = f / Σ f_j a_j`.
pub fn minimum_rollover(config: &ModelConfig, lower: &[f64], upper: &[f64]) -> Result<f64> {
    let model = ObjectiveModel::new(config);
    let (_, v) = charnes_cooper(&model, &model.discount.clone(), lower, upper, None)?;
    Ok(v)
}

/// Minimize `Σ y_j a_j c_j` style ratios: `min (c·f)/(a·f)` over bounds
/// and an optional cap row, returning `(f, value)`.
fn charnes_cooper(
    model: &ObjectiveModel,
    numerator: &[f64],
    lower: &[f64],
    upper: &[f64],
    cap_row: Option<&[f64]>,
) -> Result<(Vec<f64>, f64)> {
    let k = model.dimension();
    let mut p = Problem::new(OptimizationDirection::Minimize);
    let y: Vec<_> = (0..k).map(|j| p.add_var(numerator[j], (0.0, f64::INFINITY))).collect();
    p.add_constraint(y.iter().copied().zip(model.accumulation.iter().copied()), ComparisonOp::Eq, 1.0);
    for j in 0..k {
        let mut lo_row: Vec<(microlp::Variable, f64)> = y.iter().map(|&v| (v, -lower[j])).collect();
        lo_row[j].1 += 1.0;
        p.add_constraint(lo_row, ComparisonOp::Ge, 0.0);
        let mut hi_row: Vec<(microlp::Variable, f64)> = y.iter().map(|&v| (v, -upper[j])).collect();
        hi_row[j].1 += 1.0;
        p.add_constraint(hi_row, ComparisonOp::Le, 0.0);
    }
    if let Some(row) = cap_row {
        p.add_constraint(y.iter().copied().zip(row.iter().copied()), ComparisonOp::Le, 0.0);
    }
    let sol = p
        .solve()
        .map_err(lp_error)?
        .into_solution()
        .map_err(|_| LadderError::Internal("linear program interrupted".into()))?;
    let yv: Vec<f64> = y.iter().map(|&v| sol.var_value(v).max(0.0)).collect();
    let t: f64 = yv.iter().sum();
    Ok((yv.iter().map(|v| v / t).collect(), sol.objective()))
}

fn clean(f: &mut [f64], lower: &[f64], upper: &[f64]) {
    for (k, x) in f.iter_mut().enumerate() {
        *x = x.clamp(lower[k], upper[k]);
    }
    let total: f64 = f.iter().sum();
    for x in f.iter_mut() {
        *x /= total;
    }
}

fn lex_greater(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if (x - y).abs() > 1e-12 {
            return x > y;
        }
    }
    false
}

/// Exact LP for the deterministic WAC, then lexicographic maximization of
/// shorter-tenor weights among ties.
fn solve_wac(model: &ObjectiveModel, poly: &Polytope) -> Result<Vec<f64>> {
    let numerator: Vec<f64> = model
        .accumulation
        .iter()
        .zip(&model.rates)
        .map(|(a, r)| a * r)
        .collect();
    let (mut f, v) = charnes_cooper(model, &numerator, &poly.lower, &poly.upper, Some(&poly.cap_row))?;
    let k = model.dimension();
    let tie_row: Vec<f64> = model
        .accumulation
        .iter()
        .zip(&model.rates)
        .map(|(a, r)| a * (r - v - TIE_TOLERANCE * v.abs()))
        .collect();
    let mut extra: Vec<Row> = vec![(tie_row, ComparisonOp::Le, 0.0)];
    for j in 0..k.saturating_sub(1) {
        let mut c = vec![0.0; k];
        c[j] = 1.0;
        match poly.lp(&c, OptimizationDirection::Maximize, None, &extra) {
            Ok(x) => {
                if x[j] > f[j] + 1e-10 {
                    f = x;
                }
                let mut fix = vec![0.0; k];
                fix[j] = 1.0;
                extra.push((fix, ComparisonOp::Ge, f[j] - 1e-11));
            }
            Err(_) => break,
        }
    }
    Ok(f)
}

fn gradient(model: &ObjectiveModel, objective: Objective, x: &[f64]) -> Vec<f64> {
    let mut y = x.to_vec();
    (0..x.len())
        .map(|k| {
            y[k] = x[k] + FD_STEP;
            let up = model.value(objective, &y);
            y[k] = x[k] - FD_STEP;
            let down = model.value(objective, &y);
            y[k] = x[k];
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

/// Trust-region sequential linear programming from a feasible start.
fn slp(
    model: &ObjectiveModel,
    objective: Objective,
    poly: &Polytope,
    start: Vec<f64>,
) -> Option<(Vec<f64>, f64)> {
    let mut x = start;
    let mut value = model.value(objective, &x);
    if !value.is_finite() {
        return None;
    }
    let mut radius: f64 = 0.1;
    for _ in 0..SLP_MAX_ITER {
        if radius < SLP_MIN_RADIUS {
            break;
        }
        let g = gradient(model, objective, &x);
        if !g.iter().all(|v| v.is_finite()) {
            radius *= 0.25;
            continue;
        }
        let lo: Vec<f64> = x.iter().map(|v| v - radius).collect();
        let hi: Vec<f64> = x.iter().map(|v| v + radius).collect();
        let Ok(z) = poly.lp(&g, OptimizationDirection::Minimize, Some((&lo, &hi)), &[]) else {
            radius *= 0.25;
            continue;
        };
        let predicted: f64 = g.iter().zip(x.iter().zip(&z)).map(|(gk, (a, b))| gk * (a - b)).sum();
        if predicted <= 1e-16 * value.abs().max(1e-300) {
            break;
        }
        let trial = model.value(objective, &z);
        let ratio = (value - trial) / predicted;
        if trial.is_finite() && ratio > 0.1 {
            let step = x.iter().zip(&z).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            x = z;
            value = trial;
            if ratio > 0.75 && step >= 0.99 * radius {
                radius = (2.0 * radius).min(1.0);
            }
        } else {
            radius *= 0.25;
        }
    }
    Some((x, value))
}

/// Deterministic feasible starts: vertices in fixed directions and their
/// centroid.
fn starts(poly: &Polytope, k: usize) -> Vec<Vec<f64>> {
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for j in 0..k {
        let mut e = vec![0.0; k];
        e[j] = 1.0;
        dirs.push(e.clone());
        e[j] = -1.0;
        dirs.push(e);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    while dirs.len() < MULTI_STARTS - 1 {
        dirs.push((0..k).map(|_| rng.random_range(-1.0..1.0)).collect());
    }
    dirs.truncate(MULTI_STARTS - 1);
    let mut pts: Vec<Vec<f64>> = dirs
        .iter()
        .filter_map(|d| poly.lp(d, OptimizationDirection::Minimize, None, &[]).ok())
        .collect();
    if !pts.is_empty() {
        let n = pts.len() as f64;
        let centroid = (0..k).map(|j| pts.iter().map(|p| p[j]).sum::<f64>() / n).collect();
        pts.push(centroid);
    }
    pts
}

fn binding(model: &ObjectiveModel, spec: &OptimizationSpec, f: &[f64]) -> Vec<BindingConstraint> {
    let mut out = Vec::new();
    for (k, &x) in f.iter().enumerate() {
        let tenor = model.tenors[k];
        if x <= spec.lower_bounds[k] + FEASIBILITY_TOLERANCE {
            out.push(BindingConstraint::Lower { tenor });
        }
        if x >= spec.upper_bounds[k] - FEASIBILITY_TOLERANCE {
            out.push(BindingConstraint::Upper { tenor });
        }
    }
    if model.rollover(f) >= spec.rollover_cap - FEASIBILITY_TOLERANCE {
        out.push(BindingConstraint::RolloverCap);
    }
    out
}

pub fn optimize_allocation(config: &ModelConfig, spec: &OptimizationSpec) -> Result<FrontierPoint> {
    let config = match spec.rho_override {
        Some(rho) => config.with_correlation(rho)?,
        None => config.clone(),
    };
    let model = ObjectiveModel::new(&config);
    let k = model.dimension();
    spec.validate(k)?;
    let poly = Polytope::new(&model, spec);

    let min_theta = minimum_rollover(&config, &spec.lower_bounds, &spec.upper_bounds)?;
    if spec.rollover_cap < min_theta - FEASIBILITY_TOLERANCE {
        return Err(LadderError::Infeasible(format!(
            "rollover cap {} is below the minimum achievable θ₁ = {min_theta:.10} within the bounds",
            spec.rollover_cap
        )));
    }

    let mut f = if spec.objective == Objective::DeterministicWac {
        solve_wac(&model, &poly)?
    } else {
        let results: Vec<Option<(Vec<f64>, f64)>> = starts(&poly, k)
            .into_par_iter()
            .map(|s| slp(&model, spec.objective, &poly, s))
            .collect();
        let mut best: Option<(Vec<f64>, f64)> = None;
        for (x, v) in results.into_iter().flatten() {
            best = match best {
                None => Some((x, v)),
                Some((bx, bv)) => {
                    let band = TIE_TOLERANCE * bv.abs();
                    if v < bv - band || (v <= bv + band && lex_greater(&x, &bx)) {
                        Some((x, v))
                    } else {
                        Some((bx, bv))
                    }
                }
            }
        };
        match best {
            Some((x, _)) => x,
            None => {
                return Err(LadderError::NotErgodic {
                    phi_abs: ergodicity_certificate(&config).phi_abs,
                })
            }
        }
    };
    clean(&mut f, &spec.lower_bounds, &spec.upper_bounds);

    let rollover = model.rollover(&f);
    if rollover > spec.rollover_cap + FEASIBILITY_TOLERANCE {
        return Err(LadderError::Internal(format!(
            "optimizer returned θ₁ = {rollover} above cap {}",
            spec.rollover_cap
        )));
    }
    let at_opt = config.with_weights(&f)?;
    let cert = ergodicity_certificate(&at_opt);
    if cert.ergodic != Some(true) {
        return Err(LadderError::NotErgodic {
            phi_abs: cert.phi_abs,
        });
    }
    let objective_value = match spec.objective {
        Objective::DeterministicWac => model.wac(&f),
        other => {
            let lv = invariant_levels(&at_opt)?;
            match other {
                Objective::InvariantInterest => lv.next_interest,
                Objective::InvariantDebt => lv.total_debt,
                _ => lv.next_interest / lv.total_debt,
            }
        }
    };
    Ok(FrontierPoint {
        rollover_cap: spec.rollover_cap,
        tenors: model.tenors.clone(),
        binding_constraints: binding(&model, spec, &f),
        allocation: f,
        objective: spec.objective,
        objective_value,
        rollover,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierRow {
    pub rollover_cap: f64,
    pub point: Option<FrontierPoint>,
    pub error: Option<String>,
}

/// A change in the binding set between consecutive solved rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BindingTransition {
    pub from_cap: f64,
    pub to_cap: f64,
    pub before: Vec<BindingConstraint>,
    pub after: Vec<BindingConstraint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierReport {
    pub rows: Vec<FrontierRow>,
    pub transitions: Vec<BindingTransition>,
}

impl FrontierReport {
    pub fn solved(&self) -> usize {
        self.rows.iter().filter(|r| r.point.is_some()).count()
    }
}

/// Solve each cap in `caps` (sorted descending) with `template`'s other
/// settings; per-point failures are recorded in the row.
pub fn frontier(config: &ModelConfig, template: &OptimizationSpec, caps: &[f64]) -> Result<FrontierReport> {
    if caps.is_empty() {
        return Err(LadderError::config("optimization.grid", "rollover-cap grid is empty"));
    }
    if caps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(LadderError::config(
            "optimization.grid",
            "rollover caps must be strictly decreasing",
        ));
    }
    let rows: Vec<FrontierRow> = caps
        .par_iter()
        .map(|&cap| {
            let spec = OptimizationSpec {
                rollover_cap: cap,
                ..template.clone()
            };
            match optimize_allocation(config, &spec) {
                Ok(p) => FrontierRow {
                    rollover_cap: cap,
                    point: Some(p),
                    error: None,
                },
                Err(e) => FrontierRow {
                    rollover_cap: cap,
                    point: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let mut transitions = Vec::new();
    let mut prev: Option<&FrontierPoint> = None;
    for p in rows.iter().filter_map(|r| r.point.as_ref()) {
        if let Some(q) = prev {
            if q.binding_constraints != p.binding_constraints {
                transitions.push(BindingTransition {
                    from_cap: q.rollover_cap,
                    to_cap: p.rollover_cap,
                    before: q.binding_constraints.clone(),
                    after: p.binding_constraints.clone(),
                });
            }
        }
        prev = Some(p);
    }
    Ok(FrontierReport { rows, transitions })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepMonteCarlo {
    pub paths: usize,
    pub horizon: usize,
    pub burn_in: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoRow {
    pub rho: f64,
    pub cost_ratio: Option<f64>,
    pub deterministic_wac: Option<f64>,
    /// Ratio of ensemble means after burn-in, warm-started at `E(Ỹ)`.
    pub mc_cost_ratio: Option<f64>,
    pub mc_standard_error: Option<f64>,
    pub error: Option<String>,
}

fn rho_row(config: &ModelConfig, rho: f64, mc: Option<&SweepMonteCarlo>) -> Result<RhoRow> {
    let c = config.with_correlation(rho)?;
    crate::drivers::build_joint_covariance(&c)?;
    let report = crate::invariant::invariant_metrics(&c)?;
    let mut row = RhoRow {
        rho,
        cost_ratio: Some(report.cost_ratio),
        deterministic_wac: Some(report.deterministic_wac),
        mc_cost_ratio: None,
        mc_standard_error: None,
        error: None,
    };
    if let Some(mc) = mc {
        let spec = SimulationSpec {
            burn_in: mc.burn_in,
            initial_state: InitialCondition::StationaryWarmStart,
            record: RecordSet::levels(),
            ..SimulationSpec::new(mc.horizon, mc.paths, mc.seed)
        };
        let est = estimate_ratio_metrics(&run_simulation(&c, &spec)?)?;
        row.mc_cost_ratio = Some(est.ratio_of_means);
        row.mc_standard_error = Some(est.ratio_of_means_se);
    }
    Ok(row)
}

/// Analytic (and optionally simulated) cost ratio per correlation value.
pub fn rho_sweep(config: &ModelConfig, rhos: &[f64], mc: Option<SweepMonteCarlo>) -> Result<Vec<RhoRow>> {
    if rhos.is_empty() {
        return Err(LadderError::config("sweep.values", "correlation grid is empty"));
    }
    Ok(rhos
        .iter()
        .map(|&rho| {
            rho_row(config, rho, mc.as_ref()).unwrap_or_else(|e| RhoRow {
                rho,
                cost_ratio: None,
                deterministic_wac: None,
                mc_cost_ratio: None,
                mc_standard_error: None,
                error: Some(e.to_string()),
            })
        })
        .collect())
}
