//! Exit criteria. Runs every criterion at its pinned tolerance and prints
//! one PASS/FAIL line each; exits nonzero if any fails.
//!
//! `cargo test -p ladder-cli --test acceptance -- 3 7` runs a subset.

use std::fs;
use std::panic;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use ladder_core::baseline::{feedback_phi, optimal_tenor, steady_metrics, steady_rollover, LadderRecursion};
use ladder_core::drivers::{build_joint_covariance, step_drivers, DriverState};
use ladder_core::frontier::{frontier, optimize_allocation, rho_sweep, Objective, OptimizationSpec, SweepMonteCarlo};
use ladder_core::invariant::{
    ergodicity_certificate, invariant_covariance, invariant_levels, invariant_mean_closed_form, invariant_mean_solve,
    invariant_mean_state, invariant_metrics,
};
use ladder_core::montecarlo::{
    ensemble_mean_at, ensemble_stats, run_simulation, InitialCondition, Metric, RecordSet, SimulationSpec,
};
use ladder_core::sre::{sre_step, CashflowState};
use ladder_core::{CorrelationMode, DebtStateQ, DeficitSpec, ModelConfig, TenorSpec};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn within_runtime(o: Outcome, elapsed: Duration, limit: Duration) -> Outcome {
    if elapsed <= limit {
        o
    } else {
        outcome(
            false,
            format!("{}; runtime {:.2?} exceeds {:.0?}", o.detail, elapsed, limit),
        )
    }
}

// ------------------------------------------------------------------ fixtures

#[derive(Clone, Copy)]
struct Draw {
    /// Largest mean rate as a fraction of g.
    rate_ceiling: f64,
    stochastic: bool,
}

/// A valid configuration with up to four key tenors on `M ≤ 10`.
fn random_config(rng: &mut ChaCha8Rng, draw: Draw) -> ModelConfig {
    let m = rng.random_range(1..=10);
    let k = rng.random_range(1..=m.min(4));
    let mut tenors: Vec<usize> = sample(rng, m, k).into_iter().map(|i| i + 1).collect();
    tenors.sort_unstable();
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let head: f64 = weights[..k - 1].iter().sum();
    weights[k - 1] = 1.0 - head;
    let gamma = rng.random_range(1.01..1.12);
    let g = gamma - 1.0;
    let specs: Vec<TenorSpec> = tenors
        .iter()
        .zip(&weights)
        .map(|(&tenor, &weight)| {
            let mean_rate = rng.random_range(0.0..draw.rate_ceiling * g);
            TenorSpec {
                tenor,
                weight,
                mean_rate,
                vol: if draw.stochastic { rng.random_range(0.0..0.2) * mean_rate } else { 0.0 },
                persistence: if draw.stochastic { rng.random_range(0.0..0.99) } else { 0.0 },
            }
        })
        .collect();
    let mean = rng.random_range(0.5..2.0);
    let deficit = DeficitSpec {
        growth_factor: gamma,
        mean,
        vol: if draw.stochastic { rng.random_range(0.0..0.3) * mean } else { 0.0 },
        persistence: if draw.stochastic { rng.random_range(0.0..0.99) } else { 0.0 },
    };
    let rho = rng.random_range(-0.5..0.5);
    let mode = if rng.random_bool(0.5) {
        CorrelationMode::Independent
    } else {
        CorrelationMode::OneFactor
    };
    ModelConfig::new(m, &specs, deficit, rho, mode).expect("generator draws valid configs")
}

fn is_ergodic(c: &ModelConfig) -> bool {
    ergodicity_certificate(c).ergodic == Some(true) && steady_metrics(c).phi < 1.0
}

/// `n` random configurations satisfying `keep`.
fn configs(seed: u64, n: usize, draw: Draw, keep: impl Fn(&ModelConfig) -> bool) -> Vec<ModelConfig> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let c = random_config(&mut rng, draw);
        if keep(&c) {
            out.push(c);
        }
    }
    out
}

/// Normalized issuance recursion with constant rates from an empty ladder:
/// `Ñ_t = Σ_j f_j [Σ_{k=1..j} r_j γ^{−k} Ñ_{t−k} + γ^{−j} Ñ_{t−j}] + D̄₀`.
struct RecursionOracle {
    issuance: f64,
    shares: Vec<f64>,
    wac: f64,
    rollover: f64,
}

fn recursion_oracle(c: &ModelConfig, steps: usize) -> RecursionOracle {
    let m = c.max_maturity();
    let gamma = c.growth_factor();
    let f = c.allocation();
    let r = c.mean_rates();
    let d0 = c.deficit_mean();
    let inv: Vec<f64> = (0..=m).map(|k| gamma.powi(-(k as i32))).collect();
    let mut n: Vec<f64> = Vec::with_capacity(steps);
    let past = |n: &Vec<f64>, t: usize, k: usize| if k <= t && t - k < n.len() { n[t - k] } else { 0.0 };
    for t in 0..steps {
        let mut x = d0;
        for j in 1..=m {
            if f[j - 1] == 0.0 {
                continue;
            }
            let coupons: f64 = (1..=j).map(|k| inv[k] * past(&n, t, k)).sum();
            x += f[j - 1] * (r[j - 1] * coupons + inv[j] * past(&n, t, j));
        }
        n.push(x);
    }
    let t = steps - 1;
    // Principal due in i periods: issues at t − k of tenor k + i.
    let q: Vec<f64> = (1..=m)
        .map(|i| {
            (i..=m)
                .map(|j| f[j - 1] * inv[j - i] * past(&n, t, j - i))
                .sum()
        })
        .collect();
    let total: f64 = q.iter().sum();
    let interest: f64 = (1..=m)
        .map(|j| r[j - 1] * f[j - 1] * (0..j).map(|k| inv[k] * past(&n, t, k)).sum::<f64>())
        .sum();
    RecursionOracle {
        issuance: n[t],
        shares: q.iter().map(|x| x / total).collect(),
        wac: interest / total,
        rollover: q[0] / total,
    }
}

/// `E(Ỹ_t) = E[B̃] E(Ỹ_{t−1}) + E[d̃]` iterated from zero, with rates taken
/// independent of the state and `Cov(r_j, D̃) = ρ ς σ_j`.
fn mean_state_recursion(c: &ModelConfig, steps: usize) -> (Vec<f64>, Vec<f64>) {
    let m = c.max_maturity();
    let inv = c.growth_factor().recip();
    let f = c.allocation();
    let r = c.mean_rates();
    let d0 = c.deficit_mean();
    let cross: Vec<f64> = c.rate_vol().iter().map(|s| c.correlation() * c.deficit_vol() * s).collect();
    let tail = |w: &dyn Fn(usize) -> f64, j: usize| (j..m).map(|k| f[k] * w(k)).sum::<f64>();
    let mut p = vec![0.0; m];
    let mut cpn = vec![0.0; m];
    for _ in 0..steps {
        let rolled = inv * (p[0] + cpn[0]);
        let mut np = vec![0.0; m];
        let mut nc = vec![0.0; m];
        for j in 0..m {
            let (ps, cs) = if j + 1 < m { (p[j + 1], cpn[j + 1]) } else { (0.0, 0.0) };
            np[j] = inv * ps + (rolled + d0) * f[j];
            nc[j] = inv * cs + rolled * tail(&|k| r[k], j) + tail(&|k| r[k] * d0 + cross[k], j);
        }
        p = np;
        cpn = nc;
    }
    (p, cpn)
}

// ------------------------------------------------------------------ criteria

fn c1_identity() -> Outcome {
    let start = Instant::now();
    let draw = Draw {
        rate_ceiling: 2.0,
        stochastic: false,
    };
    let cs = configs(101, 1000, draw, |_| true);
    let mut worst: f64 = 0.0;
    for c in &cs {
        let s = steady_metrics(c);
        let phi = feedback_phi(c, c.mean_rates()).unwrap();
        let rhs = (s.rollover + s.wac) / (s.rollover + c.growth_rate());
        worst = worst.max((phi - rhs).abs());
    }
    within_runtime(
        outcome(worst <= 1e-12, format!("max |Φ − (θ₁+WAC)/(θ₁+g)| = {worst:.2e} over 1000 configs")),
        start.elapsed(),
        Duration::from_secs(1),
    )
}

fn c2_recursion_oracle() -> Outcome {
    let start = Instant::now();
    let draw = Draw {
        rate_ceiling: 0.9,
        stochastic: false,
    };
    let cs = configs(202, 100, draw, |c| steady_metrics(c).phi < 1.0);
    let mut worst: f64 = 0.0;
    for c in &cs {
        let s = steady_metrics(c);
        let o = recursion_oracle(c, 10_000);
        let mut gap = rel(o.issuance, s.n_infinity.unwrap())
            .max(rel(o.wac, s.wac))
            .max(rel(o.rollover, s.rollover));
        for (a, b) in o.shares.iter().zip(&s.shares) {
            gap = gap.max(rel(*a, *b));
        }
        worst = worst.max(gap);
    }
    within_runtime(
        outcome(worst <= 1e-7, format!("max relative gap {worst:.2e} over Ñ∞, θ, WAC, θ₁ (100 configs, 10⁴ steps)")),
        start.elapsed(),
        Duration::from_secs(10),
    )
}

fn c3_representations() -> Outcome {
    let draw = Draw {
        rate_ceiling: 0.9,
        stochastic: true,
    };
    let cs = configs(303, 40, draw, |c| build_joint_covariance(c).is_ok());
    let mut worst: f64 = 0.0;
    for (n, c) in cs.iter().enumerate() {
        let m = c.max_maturity();
        let joint = build_joint_covariance(c).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3000 + n as u64);
        let mut drivers = DriverState::at_means(c);
        let mut ladder = LadderRecursion::new(c, &DebtStateQ::zeros(m), &vec![0.0; m]).unwrap();
        let mut state = CashflowState::zeros(m);
        let mut z = vec![0.0; joint.dimension()];
        for _ in 0..1000 {
            for v in z.iter_mut() {
                *v = StandardNormal.sample(&mut rng);
            }
            drivers = step_drivers(c, &joint, &drivers, &z);
            ladder.step(&drivers.rates, drivers.deficit);
            state = sre_step(&state, &drivers.rates, drivers.deficit, c).unwrap().0;
            let q = ladder.state();
            let scale = q.total().max(1.0);
            for (a, b) in q.q.iter().zip(&state.principal) {
                worst = worst.max((a - b).abs() / scale);
            }
        }
    }
    outcome(worst <= 1e-12, format!("max scaled |Q̃ − P̃| = {worst:.2e} over 40 configs × 10³ steps"))
}

fn c4_sherman_morrison() -> Outcome {
    let draw = Draw {
        rate_ceiling: 0.9,
        stochastic: true,
    };
    let cs = configs(404, 100, draw, is_ergodic);
    let mut worst: f64 = 0.0;
    for c in &cs {
        let a = invariant_mean_closed_form(c).unwrap();
        let b = invariant_mean_solve(c).unwrap();
        worst = worst.max((&a - &b).amax() / b.amax());
    }
    outcome(worst <= 1e-10, format!("max relative difference {worst:.2e} over 100 ergodic configs"))
}

fn c5_collapse() -> Outcome {
    let draw = Draw {
        rate_ceiling: 0.9,
        stochastic: true,
    };
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for c in configs(505, 100, draw, is_ergodic) {
        let uncorrelated = c.with_correlation(0.0).unwrap();
        let still = c.with_volatility_scale(0.0).unwrap();
        for v in [uncorrelated, still] {
            let inv = invariant_metrics(&v).unwrap();
            let s = steady_metrics(&v);
            let q = s.total_debt.unwrap();
            let mut gap = rel(inv.total_debt, q)
                .max(rel(inv.total_debt_base, q))
                .max(rel(inv.next_interest, s.wac * q))
                .max(rel(inv.cost_ratio, s.wac))
                .max(rel(inv.deterministic_wac, s.wac))
                .max(rel(inv.rollover, s.rollover))
                .max((inv.correlation_factor - 1.0).abs());
            for (a, b) in inv.shares.iter().zip(&s.shares) {
                gap = gap.max(rel(*a, *b));
            }
            for (a, b) in inv.q_mean.iter().zip(s.q_levels.as_ref().unwrap()) {
                gap = gap.max((a - b).abs() / q);
            }
            worst = worst.max(gap);
            checked += 1;
        }
    }
    outcome(
        worst <= 1e-12,
        format!("max relative gap {worst:.2e} between invariant and deterministic metrics ({checked} cases)"),
    )
}

struct Reported {
    name: &'static str,
    value: f64,
}

const TABLE_PHI: Reported = Reported { name: "Φ", value: 0.9061 };
const TABLE_EQ: Reported = Reported { name: "E(Q̃)", value: 26.7871 };
const TABLE_EI: Reported = Reported { name: "E(Ĩ)", value: 1.06360 };
const TABLE_RATIO: Reported = Reported { name: "E(Ĩ)/E(Q̃)", value: 0.0397 };

/// Baseline with the 3-period mean rate at 0.04 and σ = 0.1 r̄.
fn baseline_mid_rate_four() -> ModelConfig {
    let b = ModelConfig::baseline();
    let specs: Vec<TenorSpec> = b
        .tenor_specs()
        .iter()
        .map(|s| {
            let mean_rate = if s.tenor == 3 { 0.04 } else { s.mean_rate };
            TenorSpec {
                mean_rate,
                vol: 0.1 * mean_rate,
                ..*s
            }
        })
        .collect();
    ModelConfig::new(
        b.max_maturity(),
        &specs,
        b.deficit_spec(),
        b.correlation(),
        b.correlation_mode(),
    )
    .unwrap()
}

fn c6_reference_table() -> Outcome {
    let start = Instant::now();
    let c = ModelConfig::baseline();
    let inv = invariant_metrics(&c).unwrap();
    let s = steady_metrics(&c);
    let theta_ok = (inv.rollover - 0.3492).abs() <= 5e-5;
    let mut lines = vec![format!("θ₁ = {:.6} (hard gate 0.3492 ± 5e-5: {})", inv.rollover, theta_ok)];

    // Independent routes for the model's own values.
    let det = recursion_oracle(&c, 10_000);
    let phi_recursion = 1.0 - c.deficit_mean() / det.issuance;
    let (p, cpn) = mean_state_recursion(&c, 10_000);
    let eq_recursion: f64 = p.iter().sum();
    let ei_recursion = cpn[0];
    let alt = invariant_metrics(&baseline_mid_rate_four()).unwrap();
    let alt_phi = steady_metrics(&baseline_mid_rate_four()).phi;

    let rows = [
        (TABLE_PHI, s.phi, phi_recursion, alt_phi),
        (TABLE_EQ, inv.total_debt, eq_recursion, alt.total_debt),
        (TABLE_EI, inv.next_interest, ei_recursion, alt.next_interest),
        (TABLE_RATIO, inv.cost_ratio, ei_recursion / eq_recursion, alt.cost_ratio),
    ];
    let mut soft_ok = true;
    for (reported, ours, oracle, alt_value) in rows {
        let d = rel(ours, reported.value);
        if d <= 5e-3 {
            lines.push(format!("{} = {ours:.6} matches {} ({:.3}%)", reported.name, reported.value, 100.0 * d));
            continue;
        }
        let backed = rel(ours, oracle) <= 1e-7;
        let explained = rel(alt_value, reported.value) <= 5e-3;
        soft_ok &= backed && explained;
        lines.push(format!(
            "deviation {}: model {ours:.6} vs reference {} ({:+.2}%); recursion oracle {oracle:.6} (agrees: {backed}); \
             3-period mean rate 0.04 gives {alt_value:.6} ({:+.3}%, reproduces: {explained})",
            reported.name,
            reported.value,
            100.0 * (ours / reported.value - 1.0),
            100.0 * (alt_value / reported.value - 1.0),
        ));
    }
    within_runtime(
        outcome(theta_ok && soft_ok, lines.join("\n       ")),
        start.elapsed(),
        Duration::from_secs(1),
    )
}

/// Runs `check` on the baseline, then again with serially independent
/// drivers as a control. Only the baseline result decides the outcome.
fn with_iid_control(check: fn(&ModelConfig) -> Outcome) -> Outcome {
    let base = ModelConfig::baseline();
    let main = check(&base);
    let control = check(&base.with_persistence(0.0, 0.0).unwrap());
    outcome(
        main.pass,
        format!(
            "{}\n       control with φ = ψ = 0 ({}): {}",
            main.detail,
            if control.pass { "pass" } else { "fail" },
            control.detail.replace("\n       ", "\n         ")
        ),
    )
}

fn c7_ensemble() -> Outcome {
    with_iid_control(c7_ensemble_on)
}

fn c7_ensemble_on(c: &ModelConfig) -> Outcome {
    let start = Instant::now();
    let c = c.clone();
    let inv = invariant_metrics(&c).unwrap();
    let spec = SimulationSpec::new(100, 500, 42);
    let ens = run_simulation(&c, &spec).unwrap();
    let stats = ensemble_stats(&ens, &[15.0, 85.0]).unwrap();
    let mut pass = true;
    let mut lines = Vec::new();
    for (metric, target) in [(Metric::TotalDebt, inv.total_debt), (Metric::NextInterest, inv.next_interest)] {
        let (mean, se) = ensemble_mean_at(&ens, metric, 100);
        let ok_mean = (mean - target).abs() <= 2.0 * se;
        let summary = stats.metrics.iter().find(|s| s.metric == metric).unwrap();
        let misses: Vec<usize> = (20..=100)
            .filter(|&t| !(summary.bands[0][t - 1] <= target && target <= summary.bands[1][t - 1]))
            .collect();
        pass &= ok_mean && misses.is_empty();
        lines.push(format!(
            "{}: mean(t=100) {mean:.5} ± {se:.5} vs {target:.5} (z = {:+.2}, within 2 SE: {ok_mean}); \
             15–85 band misses the mean at {} of 81 periods t ≥ 20{}",
            metric.name(),
            (mean - target) / se,
            misses.len(),
            misses.first().map_or(String::new(), |t| format!(" (first t = {t}, last t = {})", misses.last().unwrap())),
        ));
    }
    within_runtime(outcome(pass, lines.join("\n       ")), start.elapsed(), Duration::from_secs(30))
}

fn c8_time_averages() -> Outcome {
    with_iid_control(c8_time_averages_on)
}

fn c8_time_averages_on(c: &ModelConfig) -> Outcome {
    let start = Instant::now();
    let c = c.clone();
    let inv = invariant_metrics(&c).unwrap();
    let mean = invariant_mean_state(&c).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let mut pass = true;
    let mut errs = Vec::new();
    for i in 0..5 {
        let y = mean.map(|x| x * rng.random_range(0.0..2.0));
        let spec = SimulationSpec {
            initial_state: InitialCondition::Given(CashflowState::from_vector(&y)),
            record: RecordSet::levels(),
            ..SimulationSpec::new(2000, 1, 8000 + i)
        };
        let ens = run_simulation(&c, &spec).unwrap();
        let avg = ens.series(Metric::TotalDebt, 0).iter().sum::<f64>() / 2000.0;
        let e = avg / inv.total_debt - 1.0;
        pass &= e.abs() <= 0.02;
        errs.push(format!("{:+.2}%", 100.0 * e));
    }
    within_runtime(
        outcome(
            pass,
            format!("(1/T)ΣQ_t at T = 2000 vs E(Q̃) = {:.4}: {}", inv.total_debt, errs.join(", ")),
        ),
        start.elapsed(),
        Duration::from_secs(30),
    )
}

fn c9_correlation_sweep() -> Outcome {
    with_iid_control(c9_correlation_sweep_on)
}

fn c9_correlation_sweep_on(c: &ModelConfig) -> Outcome {
    let start = Instant::now();
    let c = c.clone();
    let rhos = [-0.5, -0.25, 0.0, 0.25, 0.5];
    let mc = SweepMonteCarlo {
        paths: 50_000,
        horizon: 100,
        burn_in: 20,
        seed: 42,
    };
    let rows = rho_sweep(&c, &rhos, Some(mc)).unwrap();
    let ratios: Vec<f64> = rows.iter().map(|r| r.cost_ratio.unwrap()).collect();
    let increasing = ratios.windows(2).all(|w| w[1] > w[0]);
    let slope_bp = (ratios[4] - ratios[0]) * 1e4 / 10.0;
    let slope_ok = (0.01..=0.16).contains(&slope_bp);
    let mut mc_ok = true;
    let mut zs = Vec::new();
    for r in &rows {
        let (m, se) = (r.mc_cost_ratio.unwrap(), r.mc_standard_error.unwrap());
        let z = (m - r.cost_ratio.unwrap()) / se;
        mc_ok &= z.abs() <= 3.0;
        zs.push(format!("{:+.1}", z));
    }
    within_runtime(
        outcome(
            increasing && slope_ok && mc_ok,
            format!(
                "analytic increasing: {increasing}; slope {slope_bp:.4} bp per 0.1 ρ (in [0.01, 0.16]: {slope_ok}); \
                 MC (N = 50000) z by ρ: [{}] (all within 3 SE: {mc_ok})",
                zs.join(", ")
            ),
        ),
        start.elapsed(),
        Duration::from_secs(300),
    )
}

fn c10_second_moments() -> Outcome {
    with_iid_control(c10_second_moments_on)
}

fn c10_second_moments_on(c: &ModelConfig) -> Outcome {
    const BATCHES: usize = 20;
    const PER_BATCH: usize = 20_000;
    const BURN_IN: usize = 5_000;
    let c = c.clone();
    let m = c.max_maturity();
    let cov = invariant_covariance(&c).unwrap().covariance;
    let scale = cov.amax().max(1.0);
    let asym = (&cov - cov.transpose()).amax();
    let min_eig = cov.clone().symmetric_eigen().eigenvalues.min();
    let structure_ok = asym <= 1e-10 * scale && min_eig >= -1e-10 * scale;

    let joint = build_joint_covariance(&c).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let mut drivers = DriverState::at_means(&c);
    let mut state = CashflowState::from_vector(&invariant_mean_state(&c).unwrap());
    let mut z = vec![0.0; joint.dimension()];
    let mut step = |state: &mut CashflowState, drivers: &mut DriverState| {
        for v in z.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        *drivers = step_drivers(&c, &joint, drivers, &z);
        *state = sre_step(state, &drivers.rates, drivers.deficit, &c).unwrap().0;
    };
    for _ in 0..BURN_IN {
        step(&mut state, &mut drivers);
    }
    // Per-batch sample covariance of the principal block.
    let mut batch_cov = vec![vec![0.0; m * m]; BATCHES];
    for bc in batch_cov.iter_mut() {
        let mut sum = vec![0.0; m];
        let mut cross = vec![0.0; m * m];
        for _ in 0..PER_BATCH {
            step(&mut state, &mut drivers);
            let p = &state.principal;
            for i in 0..m {
                sum[i] += p[i];
                for j in 0..m {
                    cross[i * m + j] += p[i] * p[j];
                }
            }
        }
        let n = PER_BATCH as f64;
        for i in 0..m {
            for j in 0..m {
                bc[i * m + j] = (cross[i * m + j] - sum[i] * sum[j] / n) / (n - 1.0);
            }
        }
    }
    let mut worst_z: f64 = 0.0;
    let mut outside = 0;
    let mut worst_entry = (0, 0);
    for i in 0..m {
        for j in 0..m {
            let xs: Vec<f64> = batch_cov.iter().map(|b| b[i * m + j]).collect();
            let mean = xs.iter().sum::<f64>() / BATCHES as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (BATCHES - 1) as f64;
            let se = (var / BATCHES as f64).sqrt();
            let z = (mean - cov[(i, j)]).abs() / se;
            if z > 3.0 {
                outside += 1;
            }
            if z > worst_z {
                worst_z = z;
                worst_entry = (i + 1, j + 1);
            }
        }
    }
    let (wi, wj) = worst_entry;
    let sample_at = batch_cov.iter().map(|b| b[(wi - 1) * m + wj - 1]).sum::<f64>() / BATCHES as f64;
    outcome(
        structure_ok && outside == 0,
        format!(
            "C symmetric to {asym:.1e}, min eigenvalue {min_eig:.3e} (ok: {structure_ok}); \
             {outside} of {} principal entries beyond 3 SE over {} steps; worst ({wi},{wj}): \
             sample {sample_at:.5} vs solved {:.5} (z = {worst_z:.1})",
            m * m,
            BATCHES * PER_BATCH,
            cov[(wi - 1, wj - 1)],
        ),
    )
}

fn c11_waterfall() -> Outcome {
    let start = Instant::now();
    let c = ModelConfig::baseline();
    let floor = [0.05; 3];
    let caps: Vec<f64> = (1..=50).rev().map(|i| i as f64 * 0.01).collect();
    let template = OptimizationSpec::with_floor(Objective::CostRatio, 0.5, 3, 0.05);
    let report = frontier(&c, &template, &caps).unwrap();

    // Exhaustive 0.005 simplex grid, evaluated through full configurations.
    let n = 200;
    let gamma = c.growth_factor();
    let mut grid = Vec::new();
    for a in 0..=n {
        for b in 0..=n - a {
            let f = [a as f64 / n as f64, b as f64 / n as f64, (n - a - b) as f64 / n as f64];
            if f.iter().zip(&floor).any(|(x, l)| *x < l - 1e-12) {
                continue;
            }
            let cf = c.with_weights(&f).unwrap();
            let lv = invariant_levels(&cf).unwrap();
            grid.push((steady_rollover(gamma, cf.allocation()), lv.next_interest / lv.total_debt));
        }
    }

    let mut worst_gap = f64::NEG_INFINITY;
    let mut solved = Vec::new();
    for row in &report.rows {
        let best = grid
            .iter()
            .filter(|(t, _)| *t <= row.rollover_cap)
            .map(|(_, v)| *v)
            .min_by(f64::total_cmp);
        match (&row.point, best) {
            (Some(p), Some(best)) => {
                worst_gap = worst_gap.max(p.objective_value - best);
                solved.push(p.clone());
            }
            (Some(p), None) => solved.push(p.clone()),
            (None, Some(_)) => worst_gap = f64::INFINITY,
            (None, None) => {}
        }
    }
    let oracle_ok = worst_gap <= 1e-6;
    let f1_ok = solved.windows(2).all(|w| w[1].allocation[0] <= w[0].allocation[0] + 1e-9);
    let f10_ok = solved.windows(2).all(|w| w[1].allocation[2] >= w[0].allocation[2] - 1e-9);
    // The middle tenor gives up mass only once the shortest sits at its floor.
    let drain_ok = solved
        .windows(2)
        .all(|w| w[1].allocation[1] >= w[0].allocation[1] - 1e-9 || w[0].allocation[0] <= floor[0] + 1e-9);
    let heaviest: Vec<usize> = solved
        .iter()
        .map(|p| {
            let k = (0..3).max_by(|&a, &b| p.allocation[a].total_cmp(&p.allocation[b])).unwrap();
            p.tenors[k]
        })
        .collect();
    let mut order = heaviest.clone();
    order.dedup();
    let order_ok = order == [1, 3, 10];
    within_runtime(
        outcome(
            !solved.is_empty() && oracle_ok && f1_ok && f10_ok && drain_ok && order_ok,
            format!(
                "{} of {} caps solved; heaviest tenor as R falls {:?}; f₁ nonincreasing: {f1_ok}; f₁₀ nondecreasing: {f10_ok}; \
                 f₃ drains after f₁ floors: {drain_ok}; max (optimizer − grid oracle) = {worst_gap:.2e}",
                solved.len(),
                caps.len(),
                order,
            ),
        ),
        start.elapsed(),
        Duration::from_secs(120),
    )
}

fn c12_optimal_tenor() -> Outcome {
    let gamma = 1.0 + 1e-4;
    let specs: Vec<TenorSpec> = (1..=10)
        .map(|j| TenorSpec {
            tenor: j,
            weight: 0.1,
            mean_rate: 1e-6 * j as f64,
            vol: 0.0,
            persistence: 0.0,
        })
        .collect();
    let c = ModelConfig::new(
        10,
        &specs,
        DeficitSpec {
            growth_factor: gamma,
            mean: 1.0,
            vol: 0.0,
            persistence: 0.0,
        },
        0.0,
        CorrelationMode::Independent,
    )
    .unwrap();
    let theta1 = |g: f64, f: &[(usize, f64)]| {
        let num: f64 = f.iter().map(|&(j, x)| x * g.powi(-(j as i32))).sum();
        let den: f64 = f
            .iter()
            .map(|&(j, x)| x * (1.0 - g.powi(-(j as i32))) / (g - 1.0))
            .sum();
        num / den
    };
    let mut pass = true;
    let mut lines = Vec::new();
    for cap in [0.5f64, 0.25, 0.2, 0.125] {
        let target = (1.0 / cap).round() as usize;
        let opt = optimal_tenor(gamma, cap).unwrap();
        let spec = OptimizationSpec::with_floor(Objective::DeterministicWac, cap, 10, 0.0);
        let p = optimize_allocation(&c, &spec).unwrap();
        let brackets = opt.lower_tenor <= target && target <= opt.upper_tenor && opt.upper_tenor - opt.lower_tenor <= 1;
        let stray = p
            .allocation
            .iter()
            .enumerate()
            .filter(|(k, _)| k + 1 != opt.lower_tenor && k + 1 != opt.upper_tenor)
            .map(|(_, x)| *x)
            .fold(0.0, f64::max);
        let concentrated = stray < 1e-7 && (p.allocation[opt.lower_tenor - 1] - opt.lower_allocation).abs() < 1e-6;
        let blend = theta1(
            gamma,
            &[(opt.lower_tenor, opt.lower_allocation), (opt.upper_tenor, opt.upper_allocation)],
        );
        let blend_ok = (blend - cap).abs() <= 1e-10;
        // Same check away from the limit, where j* is clearly fractional.
        let far = optimal_tenor(1.08, cap).unwrap();
        let far_blend = theta1(1.08, &[(far.lower_tenor, far.lower_allocation), (far.upper_tenor, far.upper_allocation)]);
        let far_ok = (far_blend - cap).abs() <= 1e-10
            && (far.lower_tenor as f64) <= far.j_star
            && far.j_star <= far.upper_tenor as f64;
        pass &= brackets && concentrated && blend_ok && far_ok;
        lines.push(format!(
            "R = {cap}: j* = {:.6}, tenors {}/{} (weights {:.4}/{:.4}), stray mass {stray:.1e}, \
             |θ₁(blend) − R| = {:.1e}, at γ = 1.08 {:.1e}",
            opt.j_star,
            opt.lower_tenor,
            opt.upper_tenor,
            p.allocation[opt.lower_tenor - 1],
            p.allocation[opt.upper_tenor - 1],
            (blend - cap).abs(),
            (far_blend - cap).abs(),
        ));
    }
    outcome(pass, lines.join("\n       "))
}

fn c13_determinism() -> Outcome {
    let dir = std::env::temp_dir().join(format!("ladder-acceptance-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    let run = |threads: &str, sub: &str| {
        let out = dir.join(sub);
        let status = Command::new(env!("CARGO_BIN_EXE_ladder"))
            .args(["simulate", "--seed", "42", "--out"])
            .arg(&out)
            .env("RAYON_NUM_THREADS", threads)
            .output()
            .expect("binary runs");
        (status.status.success(), out)
    };
    let runs = [run("1", "a"), run("4", "b"), run("4", "c")];
    let mut pass = runs.iter().all(|(ok, _)| *ok);
    let mut files = Vec::new();
    if pass {
        let mut names: Vec<_> = fs::read_dir(&runs[0].1)
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        names.sort();
        for name in &names {
            let a = fs::read(runs[0].1.join(name)).unwrap();
            let same = runs[1..].iter().all(|(_, d)| {
                let p: &Path = d;
                fs::read(p.join(name)).is_ok_and(|b| b == a)
            });
            pass &= same;
            files.push(format!("{}{}", name.to_string_lossy(), if same { "" } else { " (differs)" }));
        }
    }
    let _ = fs::remove_dir_all(&dir);
    outcome(
        pass,
        format!("3 runs (1, 4, 4 threads), byte-identical: {}", files.join(", ")),
    )
}

type Criterion = (u32, &'static str, fn() -> Outcome);

const CRITERIA: [Criterion; 13] = [
    (1, "feedback identity", c1_identity),
    (2, "deterministic recursion oracle", c2_recursion_oracle),
    (3, "ladder vs cashflow representation", c3_representations),
    (4, "rank-one inverse vs dense solve", c4_sherman_morrison),
    (5, "collapse to deterministic", c5_collapse),
    (6, "baseline reference table", c6_reference_table),
    (7, "ensemble means and bands", c7_ensemble),
    (8, "ergodic time averages", c8_time_averages),
    (9, "correlation sweep", c9_correlation_sweep),
    (10, "second moments", c10_second_moments),
    (11, "frontier waterfall", c11_waterfall),
    (12, "optimal-tenor law", c12_optimal_tenor),
    (13, "determinism across thread counts", c13_determinism),
];

fn main() {
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    // libtest-style flags such as `--list` from `cargo test -- --list`.
    if std::env::args().any(|a| a == "--list") {
        for (id, name, _) in CRITERIA {
            println!("criterion_{id:02}_{}: test", name.replace([' ', '-'], "_"));
        }
        return;
    }
    let mut failed = Vec::new();
    let mut ran = 0;
    for (id, name, run) in CRITERIA {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let result = panic::catch_unwind(run).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        println!(
            "{} criterion {id:>2} {name} ({:.2} s)\n       {}",
            if result.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            result.detail
        );
        if !result.pass {
            failed.push(id);
        }
    }
    println!("\nacceptance: {} of {ran} criteria passed", ran - failed.len());
    if !failed.is_empty() {
        println!("failed: {failed:?}");
        std::process::exit(1);
    }
}
