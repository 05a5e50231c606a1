use std::path::Path;

use ladder_core::baseline::steady_metrics;
use ladder_core::scenario::ScenarioFile;
use ladder_core::{CorrelationMode, DeficitSpec, ModelConfig, TenorSpec};
use proptest::prelude::*;

#[test]
fn shipped_baseline_matches_builtin() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/baseline.toml");
    let s = ScenarioFile::load(&path).unwrap();
    assert_eq!(s.model_config().unwrap(), ModelConfig::baseline());
    assert_eq!(s, ScenarioFile::baseline());
}

#[test]
fn missing_file_is_an_error() {
    assert!(ScenarioFile::load(Path::new("/nonexistent/scenario.toml")).is_err());
}

fn config_strategy() -> impl Strategy<Value = ModelConfig> {
    (2usize..=10, 0.01f64..0.99, 1.001f64..1.2, 0.0f64..0.1, -0.9f64..0.9, any::<bool>()).prop_map(
        |(m, w, gamma, rate, rho, one_factor)| {
            let specs = [
                TenorSpec {
                    tenor: 1,
                    weight: w,
                    mean_rate: rate,
                    vol: 0.1 * rate,
                    persistence: 0.5,
                },
                TenorSpec {
                    tenor: m,
                    weight: 1.0 - w,
                    mean_rate: 1.5 * rate,
                    vol: 0.2 * rate,
                    persistence: 0.9,
                },
            ];
            let deficit = DeficitSpec {
                growth_factor: gamma,
                mean: 1.0,
                vol: 0.3,
                persistence: 0.7,
            };
            let mode = if one_factor {
                CorrelationMode::OneFactor
            } else {
                CorrelationMode::Independent
            };
            ModelConfig::new(m, &specs, deficit, rho, mode).unwrap()
        },
    )
}

proptest! {
    #[test]
    fn toml_round_trip_is_exact(c in config_strategy()) {
        let text = ScenarioFile::from_config(&c, None, None).to_toml_string().unwrap();
        let back = ScenarioFile::from_toml_str(&text).unwrap().model_config().unwrap();
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(steady_metrics(&back).phi.to_bits(), steady_metrics(&c).phi.to_bits());
    }
}
