//! Seeded, order-independent Monte Carlo of the normalized cashflow
//! recurrence, with ensemble and time-average statistics.
//!
//! Path `p` draws from `ChaCha8Rng::seed_from_u64(master_seed)` on stream
//! `p`, so output depends only on `(config, spec)` and never on how paths
//! are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::drivers::{build_joint_covariance, step_drivers, DriverState};
use crate::error::{LadderError, Result};
use crate::invariant::invariant_mean_state;
use crate::sre::{sre_step, CashflowState};

/// Number of batches used for batch-means standard errors.
pub const BATCHES: usize = 20;

pub const DEFAULT_PERCENTILES: [f64; 3] = [15.0, 50.0, 85.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InitialCondition {
    ZeroDebt,
    /// Start at the invariant mean `E(Ỹ)`.
    StationaryWarmStart,
    Given(CashflowState),
}

/// Which per-period series to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordSet {
    pub total_debt: bool,
    pub next_interest: bool,
    pub rollover: bool,
    pub issuance: bool,
    pub drivers: bool,
}

impl Default for RecordSet {
    fn default() -> Self {
        RecordSet {
            total_debt: true,
            next_interest: true,
            rollover: true,
            issuance: true,
            drivers: true,
        }
    }
}

impl RecordSet {
    /// Debt level and interest only; enough for the ratio estimators.
    pub fn levels() -> Self {
        RecordSet {
            total_debt: true,
            next_interest: true,
            rollover: false,
            issuance: false,
            drivers: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub horizon: usize,
    pub paths: usize,
    pub master_seed: u64,
    pub burn_in: usize,
    pub initial_state: InitialCondition,
    /// Starting driver values; stationary means when absent.
    pub initial_drivers: Option<DriverState>,
    pub record: RecordSet,
}

impl SimulationSpec {
    pub fn new(horizon: usize, paths: usize, master_seed: u64) -> Self {
        SimulationSpec {
            horizon,
            paths,
            master_seed,
            burn_in: 20.min(horizon.saturating_sub(1)),
            initial_state: InitialCondition::ZeroDebt,
            initial_drivers: None,
            record: RecordSet::default(),
        }
    }

    fn validate(&self, m: usize) -> Result<()> {
        if self.horizon < 1 {
            return Err(LadderError::config("simulation.horizon", "must be at least 1"));
        }
        if self.paths < 1 {
            return Err(LadderError::config("simulation.paths", "must be at least 1"));
        }
        if self.burn_in >= self.horizon {
            return Err(LadderError::config(
                "simulation.burn_in",
                format!("burn-in {} must be below the horizon {}", self.burn_in, self.horizon),
            ));
        }
        if let InitialCondition::Given(s) = &self.initial_state {
            if s.principal.len() != m || s.coupon.len() != m {
                return Err(LadderError::config(
                    "simulation.initial_state",
                    format!("cashflow vectors must have length {m}"),
                ));
            }
        }
        if let Some(d) = &self.initial_drivers {
            if d.rates.len() != m {
                return Err(LadderError::config(
                    "simulation.initial_drivers",
                    format!("rate vector must have length {m}"),
                ));
            }
        }
        Ok(())
    }
}

/// Per-metric storage, path-major: entry `p * horizon + (t − 1)` is period
/// `t` of path `p`. Periods after a divergence hold NaN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathEnsemble {
    pub horizon: usize,
    pub paths: usize,
    pub burn_in: usize,
    /// 0-based issued tenor indices for the `rates` series.
    pub rate_tenors: Vec<usize>,
    pub total_debt: Vec<f64>,
    pub next_interest: Vec<f64>,
    pub rollover: Vec<f64>,
    pub issuance: Vec<f64>,
    pub deficit: Vec<f64>,
    /// `(p * horizon + t − 1) * K + k` for issued tenor `k`.
    pub rates: Vec<f64>,
    /// Period at which each path hit the divergence guard.
    pub divergent: Vec<Option<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    TotalDebt,
    NextInterest,
    Rollover,
    Issuance,
    Deficit,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::TotalDebt => "total_debt",
            Metric::NextInterest => "next_interest",
            Metric::Rollover => "rollover",
            Metric::Issuance => "issuance",
            Metric::Deficit => "deficit",
        }
    }
}

impl PathEnsemble {
    pub fn data(&self, metric: Metric) -> &[f64] {
        match metric {
            Metric::TotalDebt => &self.total_debt,
            Metric::NextInterest => &self.next_interest,
            Metric::Rollover => &self.rollover,
            Metric::Issuance => &self.issuance,
            Metric::Deficit => &self.deficit,
        }
    }

    pub fn is_recorded(&self, metric: Metric) -> bool {
        !self.data(metric).is_empty()
    }

    /// Full series of one path, periods `1..=horizon`.
    pub fn series(&self, metric: Metric, path: usize) -> &[f64] {
        let h = self.horizon;
        &self.data(metric)[path * h..(path + 1) * h]
    }

    /// Values across non-divergent paths at period `t` (1-based).
    pub fn cross_section(&self, metric: Metric, t: usize) -> Vec<f64> {
        (0..self.paths)
            .filter(|&p| self.divergent[p].is_none())
            .map(|p| self.series(metric, p)[t - 1])
            .collect()
    }

    pub fn converged_paths(&self) -> usize {
        self.divergent.iter().filter(|d| d.is_none()).count()
    }
}

struct PathOutput {
    total_debt: Vec<f64>,
    next_interest: Vec<f64>,
    rollover: Vec<f64>,
    issuance: Vec<f64>,
    deficit: Vec<f64>,
    rates: Vec<f64>,
    divergent: Option<usize>,
}

pub fn run_simulation(config: &ModelConfig, spec: &SimulationSpec) -> Result<PathEnsemble> {
    let m = config.max_maturity();
    spec.validate(m)?;
    let joint = build_joint_covariance(config)?;
    let start = match &spec.initial_state {
        InitialCondition::ZeroDebt => CashflowState::zeros(m),
        InitialCondition::StationaryWarmStart => {
            CashflowState::from_vector(&invariant_mean_state(config)?)
        }
        InitialCondition::Given(s) => s.clone(),
    };
    let drivers0 = spec
        .initial_drivers
        .clone()
        .unwrap_or_else(|| DriverState::at_means(config));
    let rec = spec.record;
    let h = spec.horizon;
    let k = joint.issued.len();

    let outputs: Vec<PathOutput> = (0..spec.paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.master_seed);
            rng.set_stream(p as u64);
            let cap = |on: bool, n: usize| if on { Vec::with_capacity(n) } else { Vec::new() };
            let mut out = PathOutput {
                total_debt: cap(rec.total_debt, h),
                next_interest: cap(rec.next_interest, h),
                rollover: cap(rec.rollover, h),
                issuance: cap(rec.issuance, h),
                deficit: cap(rec.drivers, h),
                rates: cap(rec.drivers, h * k),
                divergent: None,
            };
            let mut state = start.clone();
            let mut drivers = drivers0.clone();
            let mut z = vec![0.0; joint.dimension()];
            for t in 1..=h {
                for v in z.iter_mut() {
                    *v = StandardNormal.sample(&mut rng);
                }
                drivers = step_drivers(config, &joint, &drivers, &z);
                let (q, i, roll, n) = match sre_step(&state, &drivers.rates, drivers.deficit, config) {
                    Ok((next, n)) => {
                        state = next;
                        let q: f64 = state.principal.iter().sum();
                        let roll = if q != 0.0 { state.principal[0] / q } else { f64::NAN };
                        (q, state.coupon[0], roll, n)
                    }
                    Err(_) => {
                        out.divergent = Some(t);
                        (f64::NAN, f64::NAN, f64::NAN, f64::NAN)
                    }
                };
                let remaining = if out.divergent.is_some() { h - t + 1 } else { 1 };
                let push = |on: bool, v: &mut Vec<f64>, x: f64| {
                    if on {
                        v.extend(std::iter::repeat_n(x, remaining));
                    }
                };
                push(rec.total_debt, &mut out.total_debt, q);
                push(rec.next_interest, &mut out.next_interest, i);
                push(rec.rollover, &mut out.rollover, roll);
                push(rec.issuance, &mut out.issuance, n);
                if rec.drivers {
                    for _ in 0..remaining {
                        out.deficit.push(drivers.deficit);
                        out.rates.extend(joint.issued.iter().map(|&j| drivers.rates[j]));
                    }
                }
                if out.divergent.is_some() {
                    break;
                }
            }
            out
        })
        .collect();

    let mut ens = PathEnsemble {
        horizon: h,
        paths: spec.paths,
        burn_in: spec.burn_in,
        rate_tenors: joint.issued.clone(),
        total_debt: Vec::new(),
        next_interest: Vec::new(),
        rollover: Vec::new(),
        issuance: Vec::new(),
        deficit: Vec::new(),
        rates: Vec::new(),
        divergent: Vec::with_capacity(spec.paths),
    };
    for o in outputs {
        ens.total_debt.extend(o.total_debt);
        ens.next_interest.extend(o.next_interest);
        ens.rollover.extend(o.rollover);
        ens.issuance.extend(o.issuance);
        ens.deficit.extend(o.deficit);
        ens.rates.extend(o.rates);
        ens.divergent.push(o.divergent);
    }
    Ok(ens)
}

/// Percentile with linear interpolation between order statistics.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = p / 100.0 * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Mean and standard error from [`BATCHES`] contiguous batches. Leftover
/// samples beyond a whole number per batch are dropped from the SE but kept
/// in the mean.
pub fn batch_means(values: &[f64]) -> (f64, f64) {
    batch_means_with(values, BATCHES)
}

pub fn batch_means_with(values: &[f64], batches: usize) -> (f64, f64) {
    let mu = mean(values);
    let per = values.len() / batches;
    if per == 0 || batches < 2 {
        return (mu, f64::NAN);
    }
    let bm: Vec<f64> = (0..batches)
        .map(|b| mean(&values[b * per..(b + 1) * per]))
        .collect();
    let grand = mean(&bm);
    let var = bm.iter().map(|x| (x - grand).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (mu, (var / batches as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub metric: Metric,
    /// Ensemble mean per period.
    pub mean: Vec<f64>,
    pub median: Vec<f64>,
    /// `bands[i][t − 1]` is percentile `i` at period `t`.
    pub bands: Vec<Vec<f64>>,
    /// Per-path `(1/T) Σ_t x_t` over the whole horizon.
    pub time_average: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub percentiles: Vec<f64>,
    pub metrics: Vec<MetricSummary>,
}

/// Running average `(1/t) Σ_{s≤t} x_s` of one series.
pub fn running_time_average(series: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    series
        .iter()
        .enumerate()
        .map(|(i, x)| {
            acc += x;
            acc / (i + 1) as f64
        })
        .collect()
}

pub fn ensemble_stats(ensemble: &PathEnsemble, percentiles: &[f64]) -> Result<EnsembleSummary> {
    for &p in percentiles {
        if !(p > 0.0 && p < 100.0) {
            return Err(LadderError::Domain(format!(
                "percentile {p} outside (0, 100)"
            )));
        }
    }
    if ensemble.converged_paths() == 0 {
        return Err(LadderError::Domain("ensemble has no non-divergent paths".into()));
    }
    let mut metrics = Vec::new();
    for metric in [
        Metric::TotalDebt,
        Metric::NextInterest,
        Metric::Rollover,
        Metric::Issuance,
        Metric::Deficit,
    ] {
        if !ensemble.is_recorded(metric) {
            continue;
        }
        let h = ensemble.horizon;
        let mut mean_t = Vec::with_capacity(h);
        let mut median = Vec::with_capacity(h);
        let mut bands = vec![Vec::with_capacity(h); percentiles.len()];
        for t in 1..=h {
            let mut xs = ensemble.cross_section(metric, t);
            mean_t.push(mean(&xs));
            xs.sort_by(f64::total_cmp);
            median.push(percentile(&xs, 50.0));
            for (b, &p) in bands.iter_mut().zip(percentiles) {
                b.push(percentile(&xs, p));
            }
        }
        let time_average = (0..ensemble.paths)
            .map(|p| mean(ensemble.series(metric, p)))
            .collect();
        metrics.push(MetricSummary {
            metric,
            mean: mean_t,
            median,
            bands,
            time_average,
        });
    }
    Ok(EnsembleSummary {
        percentiles: percentiles.to_vec(),
        metrics,
    })
}

/// Ensemble mean at period `t` with a batch-means SE over groups of paths.
pub fn ensemble_mean_at(ensemble: &PathEnsemble, metric: Metric, t: usize) -> (f64, f64) {
    batch_means(&ensemble.cross_section(metric, t))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioEstimates {
    /// Mean of `I_t / Q_t` over post-burn-in samples.
    pub mean_of_ratio: f64,
    pub mean_of_ratio_se: f64,
    /// `Ê(I) / Ê(Q)`.
    pub ratio_of_means: f64,
    pub ratio_of_means_se: f64,
    /// `Ê(I/Q) − Ê(I)/Ê(Q)` and its SE, batch by batch.
    pub jensen_gap: f64,
    pub jensen_gap_se: f64,
    pub mean_debt: f64,
    pub mean_debt_se: f64,
    pub mean_interest: f64,
    pub mean_interest_se: f64,
    pub samples: usize,
}

/// Batches are contiguous groups of paths when there are at least
/// [`BATCHES`] paths, else contiguous time blocks of the concatenated series.
fn batched_samples(ensemble: &PathEnsemble, metric: Metric) -> Vec<Vec<f64>> {
    let live: Vec<usize> = (0..ensemble.paths)
        .filter(|&p| ensemble.divergent[p].is_none())
        .collect();
    let window = |p: usize| &ensemble.series(metric, p)[ensemble.burn_in..];
    if live.len() >= BATCHES {
        let per = live.len() / BATCHES;
        (0..BATCHES)
            .map(|b| {
                let end = if b + 1 == BATCHES { live.len() } else { (b + 1) * per };
                live[b * per..end].iter().flat_map(|&p| window(p).iter().copied()).collect()
            })
            .collect()
    } else {
        let all: Vec<f64> = live.iter().flat_map(|&p| window(p).iter().copied()).collect();
        let per = all.len() / BATCHES;
        (0..BATCHES)
            .map(|b| {
                let end = if b + 1 == BATCHES { all.len() } else { (b + 1) * per };
                all[b * per..end].to_vec()
            })
            .collect()
    }
}

fn mean_se_of(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mu = mean(values);
    (values.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
}

pub fn estimate_ratio_metrics(ensemble: &PathEnsemble) -> Result<RatioEstimates> {
    if !ensemble.is_recorded(Metric::TotalDebt) || !ensemble.is_recorded(Metric::NextInterest) {
        return Err(LadderError::config("record", "debt and interest series are required"));
    }
    let q = batched_samples(ensemble, Metric::TotalDebt);
    let i = batched_samples(ensemble, Metric::NextInterest);
    let samples: usize = q.iter().map(Vec::len).sum();
    if q.iter().any(Vec::is_empty) {
        return Err(LadderError::Domain(
            "too few post-burn-in samples for batch means".into(),
        ));
    }
    let mut b_q = Vec::new();
    let mut b_i = Vec::new();
    let mut b_moi = Vec::new();
    let mut b_rom = Vec::new();
    let mut b_gap = Vec::new();
    for (qs, is) in q.iter().zip(&i) {
        let mq = mean(qs);
        let mi = mean(is);
        let moi = qs.iter().zip(is).map(|(q, i)| i / q).sum::<f64>() / qs.len() as f64;
        b_q.push(mq);
        b_i.push(mi);
        b_moi.push(moi);
        b_rom.push(mi / mq);
        b_gap.push(moi - mi / mq);
    }
    let all_q: f64 = q.iter().flatten().sum::<f64>() / samples as f64;
    let all_i: f64 = i.iter().flatten().sum::<f64>() / samples as f64;
    let all_moi: f64 = q
        .iter()
        .flatten()
        .zip(i.iter().flatten())
        .map(|(q, i)| i / q)
        .sum::<f64>()
        / samples as f64;
    Ok(RatioEstimates {
        mean_of_ratio: all_moi,
        mean_of_ratio_se: mean_se_of(&b_moi),
        ratio_of_means: all_i / all_q,
        ratio_of_means_se: mean_se_of(&b_rom),
        jensen_gap: all_moi - all_i / all_q,
        jensen_gap_se: mean_se_of(&b_gap),
        mean_debt: all_q,
        mean_debt_se: mean_se_of(&b_q),
        mean_interest: all_i,
        mean_interest_se: mean_se_of(&b_i),
        samples,
    })
}
