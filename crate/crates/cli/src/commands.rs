use std::io::Write;
use std::path::Path;

use ladder_core::baseline::{steady_metrics, Regime, SteadyMetrics};
use ladder_core::frontier::{frontier as solve_frontier, rho_sweep, FrontierReport, Objective, OptimizationSpec, RhoRow, SweepMonteCarlo};
use ladder_core::invariant::{ergodicity_certificate, invariant_metrics, ErgodicityCertificate, InvariantReport};
use ladder_core::montecarlo::{
    ensemble_mean_at, ensemble_stats, estimate_ratio_metrics, running_time_average, run_simulation, InitialCondition,
    Metric, MetricSummary, PathEnsemble, RatioEstimates, SimulationSpec, DEFAULT_PERCENTILES,
};
use ladder_core::scenario::ScenarioFile;
use ladder_core::validate::{validate_suite, CheckStatus};
use serde::Serialize;

use crate::output::{aligned, ensure_dir, fmt_csv, fmt_opt, percentile_label, to_json, write_file, Table};
use crate::{CliError, CliResult, Format, Start, EXIT_INPUT, EXIT_NOT_ERGODIC, EXIT_OK, EXIT_VALIDATION};

const DEFAULT_HORIZON: usize = 100;
const DEFAULT_PATHS: usize = 500;
const DEFAULT_SEED: u64 = 42;
const DEFAULT_BURN_IN: usize = 20;
/// Paths written in full to `sample_paths.csv`.
const SAMPLE_PATHS: usize = 10;

fn emit(stdout: &mut dyn Write, bytes: &[u8]) -> CliResult<()> {
    stdout
        .write_all(bytes)
        .map_err(|e| CliError::input(format!("cannot write to stdout: {e}")))
}

fn num(x: f64) -> String {
    format!("{x:.10}")
}

fn opt_num(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".into(), num)
}

// ---------------------------------------------------------------- metrics

#[derive(Debug, Serialize)]
#[allow(non_snake_case)]
pub struct MetricsReport {
    pub phi: f64,
    pub regime: Regime,
    pub ergodic: bool,
    pub E_Q: Option<f64>,
    pub E_I: Option<f64>,
    pub cost_ratio: Option<f64>,
    pub theta_1: f64,
    pub wac: f64,
    pub n_infinity: Option<f64>,
    pub total_debt_deterministic: Option<f64>,
    pub certificate: ErgodicityCertificate,
    pub steady: SteadyMetrics,
    pub invariant: Option<InvariantReport>,
    pub diagnostic: Option<String>,
}

pub fn metrics_report(scenario: &ScenarioFile) -> CliResult<MetricsReport> {
    let config = scenario.model_config()?;
    let steady = steady_metrics(&config);
    let certificate = ergodicity_certificate(&config);
    let (invariant, diagnostic) = match invariant_metrics(&config) {
        Ok(r) => (Some(r), None),
        Err(e) => {
            let code = CliError::from(e.clone()).code;
            if code != EXIT_NOT_ERGODIC {
                return Err(e.into());
            }
            (None, Some(e.to_string()))
        }
    };
    Ok(MetricsReport {
        phi: steady.phi,
        regime: steady.regime,
        ergodic: invariant.is_some(),
        E_Q: invariant.as_ref().map(|r| r.total_debt),
        E_I: invariant.as_ref().map(|r| r.next_interest),
        cost_ratio: invariant.as_ref().map(|r| r.cost_ratio),
        theta_1: steady.rollover,
        wac: steady.wac,
        n_infinity: steady.n_infinity,
        total_debt_deterministic: steady.total_debt,
        certificate,
        steady,
        invariant,
        diagnostic,
    })
}

pub fn metrics(scenario: &ScenarioFile, format: Format, stdout: &mut dyn Write) -> CliResult<i32> {
    let r = metrics_report(scenario)?;
    let rows = vec![
        ("phi".to_string(), num(r.phi)),
        ("regime".into(), format!("{:?}", r.regime)),
        ("ergodic".into(), r.ergodic.to_string()),
        ("phi_abs".into(), num(r.certificate.phi_abs)),
        ("spectral_radius".into(), opt_num(r.certificate.spectral_radius)),
        ("E_Q".into(), opt_num(r.E_Q)),
        ("E_I".into(), opt_num(r.E_I)),
        ("cost_ratio".into(), opt_num(r.cost_ratio)),
        ("theta_1".into(), num(r.theta_1)),
        ("wac".into(), num(r.wac)),
        ("n_infinity".into(), opt_num(r.n_infinity)),
        ("total_debt_deterministic".into(), opt_num(r.total_debt_deterministic)),
    ];
    match format {
        Format::Json => emit(stdout, &to_json(&r))?,
        Format::Text => {
            let mut s = aligned(&rows);
            if let Some(d) = &r.diagnostic {
                s.push_str(&format!("diagnostic  {d}\n"));
            }
            emit(stdout, s.as_bytes())?
        }
        Format::Csv => {
            let mut t = Table::new(&["quantity", "value"]);
            let csv_rows = [
                ("phi", Some(r.phi)),
                ("phi_abs", Some(r.certificate.phi_abs)),
                ("spectral_radius", r.certificate.spectral_radius),
                ("E_Q", r.E_Q),
                ("E_I", r.E_I),
                ("cost_ratio", r.cost_ratio),
                ("theta_1", Some(r.theta_1)),
                ("wac", Some(r.wac)),
                ("n_infinity", r.n_infinity),
                ("total_debt_deterministic", r.total_debt_deterministic),
            ];
            for (k, v) in csv_rows {
                t.row(&[k.to_string(), fmt_opt(v)]);
            }
            emit(stdout, &t.into_bytes())?
        }
    }
    Ok(if r.ergodic { EXIT_OK } else { EXIT_NOT_ERGODIC })
}

// ---------------------------------------------------------------- simulate

pub struct SimulateArgs {
    pub paths: Option<usize>,
    pub horizon: Option<usize>,
    pub burn_in: Option<usize>,
    pub initial: Start,
    pub seed: Option<u64>,
}

#[derive(Debug, Serialize)]
#[allow(non_snake_case)]
pub struct AnalyticOverlay {
    pub phi: f64,
    pub ergodic: bool,
    pub E_Q: Option<f64>,
    pub E_I: Option<f64>,
    pub theta_1: f64,
    pub cost_ratio: Option<f64>,
    pub diagnostic: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct FinalPeriod {
    pub t: usize,
    pub mean: f64,
    pub standard_error: Option<f64>,
    pub analytic: Option<f64>,
    /// `(mean − analytic)/SE`.
    pub z: Option<f64>,
    pub within_2se: Option<bool>,
}

#[derive(Debug, Serialize)]
pub struct BandCoverage {
    pub from_period: usize,
    pub periods: usize,
    /// Periods whose percentile band contains the analytic mean.
    pub covered: usize,
    pub first_miss: Option<usize>,
}

#[derive(Debug, Serialize)]
pub struct MetricOverview {
    pub metric: Metric,
    pub final_period: FinalPeriod,
    pub band: Option<BandCoverage>,
    /// Mean and spread of the per-path time averages.
    pub time_average_mean: f64,
    pub time_average_min: f64,
    pub time_average_max: f64,
}

#[derive(Debug, Serialize)]
pub struct SimulationEcho {
    pub horizon: usize,
    pub paths: usize,
    pub seed: u64,
    pub burn_in: usize,
    pub initial: String,
    pub percentiles: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct SimulationSummary {
    pub scenario: ScenarioFile,
    pub simulation: SimulationEcho,
    pub analytic: AnalyticOverlay,
    pub converged_paths: usize,
    pub divergent_paths: usize,
    pub metrics: Vec<MetricOverview>,
    pub ratio: Option<RatioEstimates>,
    pub artifacts: Vec<String>,
}

fn overview(
    ens: &PathEnsemble,
    summary: &MetricSummary,
    analytic: Option<f64>,
    percentiles: &[f64],
    from_period: usize,
) -> MetricOverview {
    let h = ens.horizon;
    let (mean, se) = ensemble_mean_at(ens, summary.metric, h);
    let se = Some(se).filter(|s| s.is_finite());
    let z = match (analytic, se) {
        (Some(a), Some(s)) if s > 0.0 => Some((mean - a) / s),
        _ => None,
    };
    let within_2se = match (analytic, se) {
        (Some(a), Some(s)) => Some((mean - a).abs() <= 2.0 * s),
        _ => None,
    };
    let lo = percentiles.iter().position(|&p| p == percentiles.iter().copied().fold(f64::INFINITY, f64::min));
    let hi = percentiles.iter().position(|&p| p == percentiles.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    let band = match (analytic, lo, hi) {
        (Some(a), Some(lo), Some(hi)) if lo != hi && from_period <= h => {
            let periods: Vec<usize> = (from_period.max(1)..=h).collect();
            let inside = |t: usize| summary.bands[lo][t - 1] <= a && a <= summary.bands[hi][t - 1];
            Some(BandCoverage {
                from_period: from_period.max(1),
                periods: periods.len(),
                covered: periods.iter().filter(|&&t| inside(t)).count(),
                first_miss: periods.iter().copied().find(|&t| !inside(t)),
            })
        }
        _ => None,
    };
    let ta = &summary.time_average;
    let finite: Vec<f64> = ta.iter().copied().filter(|x| x.is_finite()).collect();
    MetricOverview {
        metric: summary.metric,
        final_period: FinalPeriod {
            t: h,
            mean,
            standard_error: se,
            analytic,
            z,
            within_2se,
        },
        band,
        time_average_mean: finite.iter().sum::<f64>() / finite.len().max(1) as f64,
        time_average_min: finite.iter().copied().fold(f64::INFINITY, f64::min),
        time_average_max: finite.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    }
}

fn metric_csv(summary: &MetricSummary, percentiles: &[f64]) -> Vec<u8> {
    // The median column already covers a requested 50th percentile.
    let bands: Vec<usize> = (0..percentiles.len()).filter(|&k| percentiles[k] != 50.0).collect();
    let mut header = vec!["t".to_string(), "mean".into(), "median".into()];
    header.extend(bands.iter().map(|&k| percentile_label(percentiles[k])));
    let mut t = Table::new(&header);
    for i in 0..summary.mean.len() {
        let mut row = vec![(i + 1).to_string(), fmt_csv(summary.mean[i]), fmt_csv(summary.median[i])];
        row.extend(bands.iter().map(|&k| fmt_csv(summary.bands[k][i])));
        t.row(&row);
    }
    t.into_bytes()
}

fn sample_paths_csv(ens: &PathEnsemble, tenors: &[usize]) -> Vec<u8> {
    let metrics: Vec<Metric> = [Metric::TotalDebt, Metric::NextInterest, Metric::Rollover, Metric::Issuance, Metric::Deficit]
        .into_iter()
        .filter(|&m| ens.is_recorded(m))
        .collect();
    let with_rates = !ens.rates.is_empty();
    let mut header = vec!["path".to_string(), "t".into()];
    header.extend(metrics.iter().map(|m| m.name().to_string()));
    if with_rates {
        header.extend(tenors.iter().map(|j| format!("rate_{j}")));
    }
    let k = ens.rate_tenors.len();
    let mut t = Table::new(&header);
    for p in 0..ens.paths.min(SAMPLE_PATHS) {
        for s in 0..ens.horizon {
            let mut row = vec![p.to_string(), (s + 1).to_string()];
            row.extend(metrics.iter().map(|&m| fmt_csv(ens.series(m, p)[s])));
            if with_rates {
                let base = (p * ens.horizon + s) * k;
                row.extend(ens.rates[base..base + k].iter().map(|&x| fmt_csv(x)));
            }
            t.row(&row);
        }
    }
    t.into_bytes()
}

fn time_average_csv(ens: &PathEnsemble) -> Vec<u8> {
    let metrics: Vec<Metric> = [Metric::TotalDebt, Metric::NextInterest]
        .into_iter()
        .filter(|&m| ens.is_recorded(m))
        .collect();
    let mut header = vec!["path".to_string(), "t".into()];
    header.extend(metrics.iter().map(|m| m.name().to_string()));
    let mut t = Table::new(&header);
    for p in 0..ens.paths {
        let runs: Vec<Vec<f64>> = metrics.iter().map(|&m| running_time_average(ens.series(m, p))).collect();
        for s in 0..ens.horizon {
            let mut row = vec![p.to_string(), (s + 1).to_string()];
            row.extend(runs.iter().map(|r| fmt_csv(r[s])));
            t.row(&row);
        }
    }
    t.into_bytes()
}

pub fn simulate(
    scenario: &ScenarioFile,
    args: &SimulateArgs,
    out: &Path,
    format: Format,
    stdout: &mut dyn Write,
) -> CliResult<i32> {
    let config = scenario.model_config()?;
    let section = scenario.simulation.as_ref();
    let horizon = args.horizon.or(section.map(|s| s.horizon)).unwrap_or(DEFAULT_HORIZON);
    let paths = args.paths.or(section.map(|s| s.paths)).unwrap_or(DEFAULT_PATHS);
    let seed = args.seed.or(section.map(|s| s.seed)).unwrap_or(DEFAULT_SEED);
    let burn_in = args
        .burn_in
        .unwrap_or_else(|| section.map_or(DEFAULT_BURN_IN, |s| s.burn_in).min(horizon.saturating_sub(1)));
    let percentiles = section.map_or_else(|| DEFAULT_PERCENTILES.to_vec(), |s| s.percentiles.clone());
    let spec = SimulationSpec {
        burn_in,
        initial_state: match args.initial {
            Start::Zero => InitialCondition::ZeroDebt,
            Start::Stationary => InitialCondition::StationaryWarmStart,
        },
        ..SimulationSpec::new(horizon, paths, seed)
    };

    let steady = steady_metrics(&config);
    let (invariant, diagnostic) = match invariant_metrics(&config) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    if invariant.is_none() && args.initial == Start::Stationary {
        return Err(CliError {
            code: EXIT_NOT_ERGODIC,
            message: format!("stationary start needs the invariant mean: {}", diagnostic.unwrap_or_default()),
        });
    }
    let analytic = AnalyticOverlay {
        phi: steady.phi,
        ergodic: invariant.is_some(),
        E_Q: invariant.as_ref().map(|r| r.total_debt),
        E_I: invariant.as_ref().map(|r| r.next_interest),
        theta_1: steady.rollover,
        cost_ratio: invariant.as_ref().map(|r| r.cost_ratio),
        diagnostic,
    };

    ensure_dir(out)?;
    let ens = run_simulation(&config, &spec)?;
    let stats = ensemble_stats(&ens, &percentiles)?;
    let mut artifacts = Vec::new();
    let mut overviews = Vec::new();
    for s in &stats.metrics {
        let name = format!("{}.csv", s.metric.name());
        write_file(out, &name, &metric_csv(s, &percentiles))?;
        artifacts.push(name);
        let target = match s.metric {
            Metric::TotalDebt => analytic.E_Q,
            Metric::NextInterest => analytic.E_I,
            Metric::Rollover => Some(analytic.theta_1),
            _ => None,
        };
        overviews.push(overview(&ens, s, target, &percentiles, burn_in));
    }
    write_file(out, "time_average.csv", &time_average_csv(&ens))?;
    artifacts.push("time_average.csv".into());
    write_file(out, "sample_paths.csv", &sample_paths_csv(&ens, &config.tenors()))?;
    artifacts.push("sample_paths.csv".into());
    artifacts.push("summary.json".into());

    let summary = SimulationSummary {
        scenario: scenario.clone(),
        simulation: SimulationEcho {
            horizon,
            paths,
            seed,
            burn_in,
            initial: format!("{:?}", args.initial).to_lowercase(),
            percentiles,
        },
        converged_paths: ens.converged_paths(),
        divergent_paths: ens.paths - ens.converged_paths(),
        ratio: estimate_ratio_metrics(&ens).ok(),
        metrics: overviews,
        analytic,
        artifacts,
    };
    let json = to_json(&summary);
    write_file(out, "summary.json", &json)?;

    match format {
        Format::Json => emit(stdout, &json)?,
        Format::Text | Format::Csv => {
            let mut t = Table::new(&["metric", "t", "mean", "standard_error", "analytic", "within_2se"]);
            let mut rows = Vec::new();
            for m in &summary.metrics {
                let f = &m.final_period;
                t.row(&[
                    m.metric.name().to_string(),
                    f.t.to_string(),
                    fmt_csv(f.mean),
                    fmt_opt(f.standard_error),
                    fmt_opt(f.analytic),
                    f.within_2se.map_or_else(String::new, |b| b.to_string()),
                ]);
                rows.push((
                    format!("{} (t = {})", m.metric.name(), f.t),
                    format!(
                        "mean {} ± {}  analytic {}",
                        num(f.mean),
                        opt_num(f.standard_error),
                        opt_num(f.analytic)
                    ),
                ));
            }
            if format == Format::Csv {
                emit(stdout, &t.into_bytes())?
            } else {
                rows.push(("paths".into(), format!("{} ({} divergent)", paths, summary.divergent_paths)));
                rows.push(("artifacts".into(), out.display().to_string()));
                emit(stdout, aligned(&rows).as_bytes())?
            }
        }
    }
    Ok(if summary.analytic.ergodic { EXIT_OK } else { EXIT_NOT_ERGODIC })
}

// ---------------------------------------------------------------- frontier

fn row_status(error: &str) -> &'static str {
    if error.starts_with("infeasible") {
        "infeasible"
    } else if error.starts_with("not ergodic") || error.starts_with("closed form inapplicable") {
        "not_ergodic"
    } else {
        "error"
    }
}

fn solved_or_code<'a>(statuses: impl Iterator<Item = Option<&'a str>>) -> i32 {
    let errors: Vec<Option<&str>> = statuses.collect();
    if errors.iter().any(Option::is_none) {
        EXIT_OK
    } else if errors.iter().all(|e| e.is_some_and(|e| row_status(e) == "not_ergodic")) {
        EXIT_NOT_ERGODIC
    } else {
        EXIT_INPUT
    }
}

pub fn frontier_csv(report: &FrontierReport, tenors: &[usize]) -> Vec<u8> {
    let mut header = vec!["rollover_cap".to_string(), "status".into()];
    header.extend(tenors.iter().map(|j| format!("f_{j}")));
    header.extend(["objective", "objective_value", "rollover", "binding", "message"].map(String::from));
    let mut t = Table::new(&header);
    for r in &report.rows {
        let mut row = vec![fmt_csv(r.rollover_cap)];
        match (&r.point, &r.error) {
            (Some(p), _) => {
                row.push("ok".into());
                row.extend(p.allocation.iter().map(|&x| fmt_csv(x)));
                row.push(p.objective.name().into());
                row.push(fmt_csv(p.objective_value));
                row.push(fmt_csv(p.rollover));
                row.push(
                    p.binding_constraints
                        .iter()
                        .map(ToString::to_string)
                        .collect::<Vec<_>>()
                        .join(";"),
                );
                row.push(String::new());
            }
            (None, e) => {
                let e = e.clone().unwrap_or_default();
                row.push(row_status(&e).into());
                row.extend(std::iter::repeat_n(String::new(), tenors.len() + 4));
                row.push(e);
            }
        }
        t.row(&row);
    }
    t.into_bytes()
}

pub fn frontier(
    scenario: &ScenarioFile,
    mut caps: Vec<f64>,
    objective: Option<&str>,
    out: &Path,
    format: Format,
    stdout: &mut dyn Write,
) -> CliResult<i32> {
    let config = scenario.model_config()?;
    if caps.is_empty() {
        return Err(CliError::input("empty rollover-cap grid: pass --grid or --step, or set optimization.grid"));
    }
    caps.sort_by(|a, b| b.total_cmp(a));
    caps.dedup();
    let k = config.tenors().len();
    let mut template = scenario.optimization_spec().unwrap_or(OptimizationSpec {
        objective: Objective::CostRatio,
        rollover_cap: 1.0,
        lower_bounds: vec![0.0; k],
        upper_bounds: vec![1.0; k],
        rho_override: None,
    });
    if let Some(name) = objective {
        template.objective = Objective::parse(name).ok_or_else(|| {
            CliError::input(format!(
                "unknown objective {name:?}; expected invariant_interest, invariant_debt, cost_ratio or deterministic_wac"
            ))
        })?;
    }
    let report = solve_frontier(&config, &template, &caps)?;
    ensure_dir(out)?;
    let csv = frontier_csv(&report, &config.tenors());
    write_file(out, "frontier.csv", &csv)?;
    let json = to_json(&report);
    write_file(out, "frontier.json", &json)?;

    match format {
        Format::Json => emit(stdout, &json)?,
        Format::Csv => emit(stdout, &csv)?,
        Format::Text => {
            let mut s = String::new();
            let tenors = config.tenors();
            for r in &report.rows {
                match &r.point {
                    Some(p) => {
                        let f: Vec<String> = tenors
                            .iter()
                            .zip(&p.allocation)
                            .map(|(j, x)| format!("f{j}={x:.4}"))
                            .collect();
                        let b: Vec<String> = p.binding_constraints.iter().map(ToString::to_string).collect();
                        s.push_str(&format!(
                            "R={:<8.4} {}  {}={:.8}  [{}]\n",
                            r.rollover_cap,
                            f.join(" "),
                            p.objective.name(),
                            p.objective_value,
                            b.join(", ")
                        ));
                    }
                    None => s.push_str(&format!(
                        "R={:<8.4} {}\n",
                        r.rollover_cap,
                        r.error.as_deref().unwrap_or("failed")
                    )),
                }
            }
            for tr in &report.transitions {
                let before: Vec<String> = tr.before.iter().map(ToString::to_string).collect();
                let after: Vec<String> = tr.after.iter().map(ToString::to_string).collect();
                s.push_str(&format!(
                    "binding set changes between R={} and R={}: [{}] -> [{}]\n",
                    tr.from_cap,
                    tr.to_cap,
                    before.join(", "),
                    after.join(", ")
                ));
            }
            emit(stdout, s.as_bytes())?
        }
    }
    Ok(solved_or_code(report.rows.iter().map(|r| if r.point.is_some() { None } else { r.error.as_deref().or(Some("")) })))
}

// ---------------------------------------------------------------- sweep-rho

pub struct SweepArgs {
    pub paths: Option<usize>,
    pub horizon: Option<usize>,
    pub burn_in: Option<usize>,
    pub seed: Option<u64>,
}

pub fn sweep_csv(rows: &[RhoRow]) -> Vec<u8> {
    let mut t = Table::new(&[
        "rho",
        "status",
        "cost_ratio",
        "deterministic_wac",
        "mc_cost_ratio",
        "mc_standard_error",
        "message",
    ]);
    for r in rows {
        t.row(&[
            fmt_csv(r.rho),
            r.error.as_deref().map_or("ok", row_status).to_string(),
            fmt_opt(r.cost_ratio),
            fmt_opt(r.deterministic_wac),
            fmt_opt(r.mc_cost_ratio),
            fmt_opt(r.mc_standard_error),
            r.error.clone().unwrap_or_default(),
        ]);
    }
    t.into_bytes()
}

pub fn sweep_rho(
    scenario: &ScenarioFile,
    rhos: &[f64],
    args: &SweepArgs,
    out: &Path,
    format: Format,
    stdout: &mut dyn Write,
) -> CliResult<i32> {
    let config = scenario.model_config()?;
    if rhos.is_empty() {
        return Err(CliError::input("empty correlation grid: pass --values"));
    }
    let section = scenario.simulation.as_ref();
    let mc = args.paths.map(|paths| {
        let horizon = args.horizon.or(section.map(|s| s.horizon)).unwrap_or(DEFAULT_HORIZON);
        SweepMonteCarlo {
            paths,
            horizon,
            burn_in: args
                .burn_in
                .unwrap_or_else(|| section.map_or(DEFAULT_BURN_IN, |s| s.burn_in).min(horizon.saturating_sub(1))),
            seed: args.seed.or(section.map(|s| s.seed)).unwrap_or(DEFAULT_SEED),
        }
    });
    let rows = rho_sweep(&config, rhos, mc)?;
    ensure_dir(out)?;
    let csv = sweep_csv(&rows);
    write_file(out, "rho_sweep.csv", &csv)?;

    match format {
        Format::Json => emit(stdout, &to_json(&rows))?,
        Format::Csv => emit(stdout, &csv)?,
        Format::Text => {
            let mut s = String::new();
            for r in &rows {
                match (r.cost_ratio, &r.error) {
                    (Some(c), _) => {
                        s.push_str(&format!("rho={:>6.3}  cost_ratio={:.8}", r.rho, c));
                        if let (Some(m), Some(se)) = (r.mc_cost_ratio, r.mc_standard_error) {
                            s.push_str(&format!("  mc={m:.8} ± {se:.2e}"));
                        }
                        s.push('\n');
                    }
                    (None, e) => s.push_str(&format!("rho={:>6.3}  {}\n", r.rho, e.as_deref().unwrap_or("failed"))),
                }
            }
            let ratios: Vec<f64> = rows.iter().filter_map(|r| r.cost_ratio).collect();
            if ratios.len() == rows.len() && ratios.len() > 1 {
                let increasing = ratios.windows(2).all(|w| w[1] > w[0]);
                s.push_str(&format!("strictly increasing in rho: {increasing}\n"));
            }
            emit(stdout, s.as_bytes())?
        }
    }
    Ok(solved_or_code(rows.iter().map(|r| if r.error.is_none() { None } else { r.error.as_deref() })))
}

// ---------------------------------------------------------------- validate

pub fn validate(scenario: &ScenarioFile, format: Format, stdout: &mut dyn Write) -> CliResult<i32> {
    let config = scenario.model_config()?;
    let report = validate_suite(&config);
    let label = |s: CheckStatus| match s {
        CheckStatus::Pass => "PASS",
        CheckStatus::Fail => "FAIL",
        CheckStatus::Skip => "SKIP",
    };
    match format {
        Format::Json => emit(stdout, &to_json(&report))?,
        Format::Csv => {
            let mut t = Table::new(&["check", "status", "detail"]);
            for c in &report.checks {
                t.row(&[c.name.as_str(), label(c.status), c.detail.as_str()]);
            }
            emit(stdout, &t.into_bytes())?
        }
        Format::Text => {
            let rows: Vec<(String, String)> = report
                .checks
                .iter()
                .map(|c| (format!("{} {}", label(c.status), c.name), c.detail.clone()))
                .collect();
            emit(stdout, aligned(&rows).as_bytes())?
        }
    }
    Ok(if report.passed() { EXIT_OK } else { EXIT_VALIDATION })
}
