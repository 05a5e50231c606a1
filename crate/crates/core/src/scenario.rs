//! TOML scenario files: schema, loading with line-precise errors, and
//! conversion into model, simulation and optimization settings.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use toml::de::{DeTable, DeValue};

use crate::config::{CorrelationMode, DeficitSpec, ModelConfig, TenorSpec};
use crate::error::{LadderError, Result};
use crate::frontier::{Objective, OptimizationSpec};
use crate::montecarlo::{SimulationSpec, DEFAULT_PERCENTILES};

/// The baseline parameter set as a scenario document.
pub const BASELINE_SCENARIO: &str = include_str!("../scenarios/baseline.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub model: ModelSection,
    pub deficit: DeficitSection,
    pub correlation: CorrelationSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimization: Option<OptimizationSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub max_maturity: usize,
    pub tenors: Vec<usize>,
    /// Weight per tenor, keyed by the tenor written as a string.
    pub allocation: BTreeMap<String, f64>,
    pub rates: RatesSection,
}

/// Per-tenor arrays in the order of `model.tenors`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesSection {
    pub mean: Vec<f64>,
    pub vol: Vec<f64>,
    pub persistence: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeficitSection {
    pub growth_factor: f64,
    pub mean_normalized: f64,
    pub vol: f64,
    pub persistence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelationSection {
    pub rho: f64,
    #[serde(default)]
    pub mode: CorrelationMode,
}

fn default_burn_in() -> usize {
    20
}

fn default_percentiles() -> Vec<f64> {
    DEFAULT_PERCENTILES.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    pub horizon: usize,
    pub paths: usize,
    pub seed: u64,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default = "default_percentiles")]
    pub percentiles: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizationSection {
    pub objective: Objective,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rollover_cap: Option<f64>,
    /// Rollover caps for a frontier, strictly decreasing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower_bounds: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper_bounds: Option<Vec<f64>>,
}

/// Path segment into a TOML document.
enum Seg<'a> {
    Key(&'a str),
    Index(usize),
}

/// 1-based line and column of the value at `path`, falling back to the
/// closest existing ancestor.
fn locate(text: &str, path: &[Seg]) -> Option<(usize, usize)> {
    let root = DeTable::parse(text).ok()?;
    let mut span = None;
    let mut table = Some(root.get_ref());
    let mut value: Option<&DeValue> = None;
    for seg in path {
        let next = match (seg, table, value) {
            (Seg::Key(k), Some(t), _) => t.get(*k),
            (Seg::Key(k), None, Some(DeValue::Table(t))) => t.get(*k),
            (Seg::Index(i), _, Some(DeValue::Array(a))) => a.get(*i),
            _ => None,
        };
        let Some(v) = next else { break };
        span = Some(v.span());
        value = Some(v.get_ref());
        table = None;
    }
    let start = span?.start;
    let before = &text[..start];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    Some((line, col))
}

impl ScenarioFile {
    pub fn baseline() -> Self {
        ScenarioFile::from_toml_str(BASELINE_SCENARIO).expect("bundled baseline scenario parses")
    }

    /// Parse and fully validate, so that every accessor below succeeds.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| LadderError::Config {
            field: "scenario".into(),
            reason: e.to_string().trim_end().to_string(),
        })?;
        file.validate().map_err(|e| file.with_location(text, e))?;
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LadderError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| LadderError::Internal(e.to_string()))
    }

    /// Scenario describing `config`, with the given optional sections.
    pub fn from_config(
        config: &ModelConfig,
        simulation: Option<SimulationSection>,
        optimization: Option<OptimizationSection>,
    ) -> Self {
        let specs = config.tenor_specs();
        let d = config.deficit_spec();
        ScenarioFile {
            model: ModelSection {
                max_maturity: config.max_maturity(),
                tenors: specs.iter().map(|s| s.tenor).collect(),
                allocation: specs.iter().map(|s| (s.tenor.to_string(), s.weight)).collect(),
                rates: RatesSection {
                    mean: specs.iter().map(|s| s.mean_rate).collect(),
                    vol: specs.iter().map(|s| s.vol).collect(),
                    persistence: specs.iter().map(|s| s.persistence).collect(),
                },
            },
            deficit: DeficitSection {
                growth_factor: d.growth_factor,
                mean_normalized: d.mean,
                vol: d.vol,
                persistence: d.persistence,
            },
            correlation: CorrelationSection {
                rho: config.correlation(),
                mode: config.correlation_mode(),
            },
            simulation,
            optimization,
        }
    }

    fn tenor_specs(&self) -> Result<Vec<TenorSpec>> {
        let m = &self.model;
        let k = m.tenors.len();
        for (name, v) in [("mean", &m.rates.mean), ("vol", &m.rates.vol), ("persistence", &m.rates.persistence)] {
            if v.len() != k {
                return Err(LadderError::config(
                    format!("model.rates.{name}"),
                    format!("expected {k} entries (one per tenor), got {}", v.len()),
                ));
            }
        }
        for key in m.allocation.keys() {
            let known = key.parse::<usize>().ok().is_some_and(|t| m.tenors.contains(&t));
            if !known {
                return Err(LadderError::config(
                    format!("model.allocation.{key}"),
                    "key is not one of model.tenors",
                ));
            }
        }
        m.tenors
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let weight = *m.allocation.get(&t.to_string()).ok_or_else(|| {
                    LadderError::config("model.allocation", format!("missing weight for tenor {t}"))
                })?;
                Ok(TenorSpec {
                    tenor: t,
                    weight,
                    mean_rate: m.rates.mean[i],
                    vol: m.rates.vol[i],
                    persistence: m.rates.persistence[i],
                })
            })
            .collect()
    }

    /// The validated model. The joint driver covariance is not checked
    /// here; see [`crate::drivers::build_joint_covariance`].
    pub fn model_config(&self) -> Result<ModelConfig> {
        let specs = self.tenor_specs()?;
        let d = &self.deficit;
        ModelConfig::new(
            self.model.max_maturity,
            &specs,
            DeficitSpec {
                growth_factor: d.growth_factor,
                mean: d.mean_normalized,
                vol: d.vol,
                persistence: d.persistence,
            },
            self.correlation.rho,
            self.correlation.mode,
        )
    }

    pub fn simulation_spec(&self) -> Option<SimulationSpec> {
        self.simulation.as_ref().map(|s| SimulationSpec {
            burn_in: s.burn_in,
            ..SimulationSpec::new(s.horizon, s.paths, s.seed)
        })
    }

    pub fn percentiles(&self) -> Vec<f64> {
        self.simulation
            .as_ref()
            .map_or_else(default_percentiles, |s| s.percentiles.clone())
    }

    /// Template spec; the rollover cap is the section's `rollover_cap`, or
    /// the first grid value, or 1.
    pub fn optimization_spec(&self) -> Option<OptimizationSpec> {
        let o = self.optimization.as_ref()?;
        let k = self.model.tenors.len();
        let cap = o
            .rollover_cap
            .or_else(|| o.grid.as_ref().and_then(|g| g.first().copied()))
            .unwrap_or(1.0);
        Some(OptimizationSpec {
            objective: o.objective,
            rollover_cap: cap,
            lower_bounds: o.lower_bounds.clone().unwrap_or_else(|| vec![0.0; k]),
            upper_bounds: o.upper_bounds.clone().unwrap_or_else(|| vec![1.0; k]),
            rho_override: None,
        })
    }

    fn validate(&self) -> Result<()> {
        self.model_config()?;
        if let Some(s) = &self.simulation {
            if s.horizon < 1 {
                return Err(LadderError::config("simulation.horizon", "must be at least 1"));
            }
            if s.paths < 1 {
                return Err(LadderError::config("simulation.paths", "must be at least 1"));
            }
            if s.burn_in >= s.horizon {
                return Err(LadderError::config("simulation.burn_in", "must be below the horizon"));
            }
            if let Some(p) = s.percentiles.iter().find(|p| !(**p > 0.0 && **p < 100.0)) {
                return Err(LadderError::config(
                    "simulation.percentiles",
                    format!("{p} is outside (0, 100)"),
                ));
            }
        }
        if let Some(o) = &self.optimization {
            let k = self.model.tenors.len();
            if let Some(g) = &o.grid {
                if g.is_empty() || g.windows(2).any(|w| w[1] >= w[0]) || g.iter().any(|x| !(*x > 0.0)) {
                    return Err(LadderError::config(
                        "optimization.grid",
                        "must be a non-empty, strictly decreasing list of positive caps",
                    ));
                }
            }
            if let Some(cap) = o.rollover_cap {
                if !(cap > 0.0 && cap.is_finite()) {
                    return Err(LadderError::config("optimization.rollover_cap", "must be positive"));
                }
            }
            for (name, b) in [("lower_bounds", &o.lower_bounds), ("upper_bounds", &o.upper_bounds)] {
                if let Some(b) = b {
                    if b.len() != k {
                        return Err(LadderError::config(
                            format!("optimization.{name}"),
                            format!("expected {k} entries (one per tenor), got {}", b.len()),
                        ));
                    }
                }
            }
            let lo: f64 = o.lower_bounds.as_ref().map_or(0.0, |b| b.iter().sum());
            let hi: f64 = o.upper_bounds.as_ref().map_or(k as f64, |b| b.iter().sum());
            if lo > 1.0 + 1e-12 || hi < 1.0 - 1e-12 {
                return Err(LadderError::config(
                    "optimization.lower_bounds",
                    format!("need Σ lower ≤ 1 ≤ Σ upper, got {lo} and {hi}"),
                ));
            }
        }
        Ok(())
    }

    /// Rewrite a model-level field name as a document path with position.
    fn with_location(&self, text: &str, err: LadderError) -> LadderError {
        let LadderError::Config { field, reason } = err else { return err };
        let idx = |t: usize| self.model.tenors.iter().position(|&x| x == t);
        let mut parts = field.splitn(2, '.');
        let head = parts.next().unwrap_or("");
        let tail = parts.next();
        let (name, path): (String, Vec<Seg>) = if let Some(t) = head.strip_prefix("tenor ").and_then(|t| t.parse::<usize>().ok()) {
            let i = idx(t).unwrap_or(0);
            match tail {
                Some("weight") => (format!("model.allocation.{t}"), vec![Seg::Key("model"), Seg::Key("allocation")]),
                Some("mean_rate") => (format!("model.rates.mean[{i}]"), vec![Seg::Key("model"), Seg::Key("rates"), Seg::Key("mean"), Seg::Index(i)]),
                Some("vol") => (format!("model.rates.vol[{i}]"), vec![Seg::Key("model"), Seg::Key("rates"), Seg::Key("vol"), Seg::Index(i)]),
                Some("persistence") => (format!("model.rates.persistence[{i}]"), vec![Seg::Key("model"), Seg::Key("rates"), Seg::Key("persistence"), Seg::Index(i)]),
                _ => (format!("model.tenors[{i}]"), vec![Seg::Key("model"), Seg::Key("tenors"), Seg::Index(i)]),
            }
        } else {
            match field.as_str() {
                "max_maturity" => ("model.max_maturity".into(), vec![Seg::Key("model"), Seg::Key("max_maturity")]),
                "tenors" => ("model.tenors".into(), vec![Seg::Key("model"), Seg::Key("tenors")]),
                "allocation" => ("model.allocation".into(), vec![Seg::Key("model"), Seg::Key("allocation")]),
                "deficit.mean" => ("deficit.mean_normalized".into(), vec![Seg::Key("deficit"), Seg::Key("mean_normalized")]),
                other => {
                    let keys: Vec<Seg> = other
                        .split('.')
                        .map(|s| match s.split_once('[') {
                            Some((k, _)) => Seg::Key(k),
                            None => Seg::Key(s),
                        })
                        .collect();
                    (other.to_string(), keys)
                }
            }
        };
        let reason = match locate(text, &path) {
            Some((line, col)) => format!("{reason} (line {line}, column {col})"),
            None => reason,
        };
        LadderError::Config { field: name, reason }
    }
}
