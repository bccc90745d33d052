//! Named preset configurations, one per reproduced figure, compiled into
//! the binary.

use crate::config::RunConfig;
use crate::CliError;

const PRESETS: &[(&str, &str)] = &[
    ("bic-overlap", include_str!("../presets/bic-overlap.toml")),
    ("decay-rates-far", include_str!("../presets/decay-rates-far.toml")),
    ("decay-rates", include_str!("../presets/decay-rates.toml")),
    ("echoes", include_str!("../presets/echoes.toml")),
    ("emission-profiles", include_str!("../presets/emission-profiles.toml")),
    ("fano-nonidentical", include_str!("../presets/fano-nonidentical.toml")),
    ("first-qubit-saturation", include_str!("../presets/first-qubit-saturation.toml")),
    ("gaussian-optimum-first-qubit", include_str!("../presets/gaussian-optimum-first-qubit.toml")),
    ("gaussian-optimum-vs-n", include_str!("../presets/gaussian-optimum-vs-n.toml")),
    ("markovian-emission", include_str!("../presets/markovian-emission.toml")),
    ("oracle-check", include_str!("../presets/oracle-check.toml")),
    ("pole-map", include_str!("../presets/pole-map.toml")),
    ("pulse-three-qubits-decaying", include_str!("../presets/pulse-three-qubits-decaying.toml")),
    ("pulse-three-qubits", include_str!("../presets/pulse-three-qubits.toml")),
    ("quasi-bound", include_str!("../presets/quasi-bound.toml")),
    ("retardation", include_str!("../presets/retardation.toml")),
    ("rising-exp-500", include_str!("../presets/rising-exp-500.toml")),
    ("rising-exp-large-n", include_str!("../presets/rising-exp-large-n.toml")),
    ("single-qubit-decaying", include_str!("../presets/single-qubit-decaying.toml")),
    ("single-qubit-gaussian", include_str!("../presets/single-qubit-gaussian.toml")),
    ("three-qubit-optima", include_str!("../presets/three-qubit-optima.toml")),
];

pub fn load(id: &str) -> Result<RunConfig, CliError> {
    let (_, text) = PRESETS.iter().find(|(k, _)| *k == id).ok_or_else(|| {
        let known: Vec<&str> = PRESETS.iter().map(|(k, _)| *k).collect();
        CliError::config(format!("unknown preset `{id}`; known: {}", known.join(", ")))
    })?;
    RunConfig::parse(text)
}

pub fn all() -> Result<Vec<(&'static str, RunConfig)>, CliError> {
    PRESETS.iter().map(|(k, t)| Ok((*k, RunConfig::parse(t)?))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_parses_and_names_a_scenario() {
        for (id, cfg) in all().unwrap() {
            assert!(cfg.scenario.is_some(), "{id}");
            assert!(cfg.title.is_some(), "{id}");
            assert!(cfg.criteria.iter().all(|c| (1..=12).contains(c)), "{id}");
        }
    }

    #[test]
    fn every_criterion_has_a_preset() {
        let all = all().unwrap();
        for c in 1..=12 {
            if c == 11 {
                // conservation is checked on every run, not by one figure
                continue;
            }
            assert!(all.iter().any(|(_, cfg)| cfg.criteria.contains(&c)), "criterion {c}");
        }
    }
}
