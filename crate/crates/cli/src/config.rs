//! Scenario configuration: parsing, defaults and validation.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use xssh_core::{DisorderMode, DisorderSpec, SystemConfig};

use crate::failure::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
#[value(rename_all = "kebab-case")]
pub enum Scenario {
    Spectrum,
    Transfer,
    Swap,
    SwapMap,
    Calibrate,
    Disorder,
    Dissipative,
    Entangle,
    BellTransfer,
    GateSweep,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Spectrum => "spectrum",
            Scenario::Transfer => "transfer",
            Scenario::Swap => "swap",
            Scenario::SwapMap => "swap-map",
            Scenario::Calibrate => "calibrate",
            Scenario::Disorder => "disorder",
            Scenario::Dissipative => "dissipative",
            Scenario::Entangle => "entangle",
            Scenario::BellTransfer => "bell-transfer",
            Scenario::GateSweep => "gate-sweep",
        }
    }

    /// Stem of the files written by this scenario.
    pub fn stem(self) -> String {
        self.name().replace('-', "_")
    }

    /// Parameter keys the scenario reads.
    fn accepted(self) -> &'static [&'static str] {
        match self {
            Scenario::Spectrum => &[],
            Scenario::Transfer => &["n_steps"],
            Scenario::Swap => &["n_steps", "k_index"],
            Scenario::SwapMap => &["k_max", "grid_points"],
            Scenario::Calibrate => &["k_index"],
            Scenario::Disorder => &["k_index", "delta_fractions", "n_instances", "disorder_mode"],
            Scenario::Dissipative => &["n_steps", "t_max", "gamma0", "initial_state"],
            Scenario::Entangle => &["n_steps", "t_max", "gamma0"],
            Scenario::BellTransfer => &["n_steps", "t_max", "gamma0"],
            Scenario::GateSweep => &["k_index", "j2_values", "k_plus_values"],
        }
    }

    fn default_system(self) -> SystemConfig {
        let sys = |n_cells, j1, k| SystemConfig {
            n_cells,
            j1,
            j2: 1.0,
            k,
            disorder: DisorderSpec::none(),
        };
        match self {
            Scenario::Spectrum | Scenario::Transfer => sys(5, 0.4, [0.07; 4]),
            Scenario::Swap | Scenario::SwapMap | Scenario::Calibrate | Scenario::Disorder | Scenario::GateSweep => {
                sys(5, 0.51, [0.0; 4])
            }
            Scenario::Dissipative | Scenario::Entangle => sys(5, 0.25, [0.0; 4]),
            Scenario::BellTransfer => sys(3, 0.25, [0.1, 0.0, 0.0, 0.1]),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EdgeState {
    S,
    A,
}

/// Scenario-specific knobs. Unset values are filled in by [`ScenarioConfig::resolve`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    /// Number of time steps in a trace (samples = n_steps + 1).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    /// SWAP island index `k >= 1`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_index: Option<usize>,
    /// Upper end of the `K+`/`K-` axes of the fidelity map.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<usize>,
    /// Disorder strengths in units of the analytic `K-` seed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_fractions: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_instances: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub disorder_mode: Option<DisorderMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<EdgeState>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub j2_values: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_plus_values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub system: SystemConfig,
    #[serde(default)]
    pub params: Params,
    /// Seed of every random draw in the run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Output directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<String>,
}

/// Command-line overrides applied on top of a config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub instances: Option<usize>,
    pub out: Option<String>,
}

pub const DEFAULT_OUTPUT: &str = "results";

fn geometric(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
}

fn invalid(field: &str, reason: impl Into<String>) -> Failure {
    Failure::config(Some(field.to_string()), reason)
}

impl ScenarioConfig {
    pub fn default_for(scenario: Scenario) -> Self {
        Self {
            scenario,
            system: scenario.default_system(),
            params: Params::default(),
            seed: None,
            output_path: None,
        }
    }

    /// Parses a config file; a metadata sidecar (`{"config": ...}`) is accepted too.
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::config(None, format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, Failure> {
        let value: Value = serde_json::from_str(text).map_err(|e| Failure::config(None, e.to_string()))?;
        let value = match value {
            Value::Object(mut map) if !map.contains_key("scenario") && map.contains_key("config") => {
                map.remove("config").unwrap_or(Value::Null)
            }
            other => other,
        };
        serde_json::from_value(value).map_err(|e| {
            let msg = e.to_string();
            let field = msg
                .split('`')
                .nth(1)
                .filter(|_| msg.starts_with("unknown field") || msg.starts_with("missing field"))
                .map(str::to_string);
            Failure::config(field, msg)
        })
    }

    /// Applies overrides and fills every parameter the scenario uses.
    pub fn resolve(mut self, ov: &Overrides) -> Result<Self, Failure> {
        let accepted = self.scenario.accepted();
        let given = serde_json::to_value(&self.params).expect("params serialize");
        if let Value::Object(map) = given {
            for key in map.keys() {
                if !accepted.contains(&key.as_str()) {
                    return Err(invalid(
                        &format!("params.{key}"),
                        format!("not used by scenario `{}`", self.scenario),
                    ));
                }
            }
        }
        if let Some(seed) = ov.seed {
            self.seed = Some(seed);
            self.system.disorder.seed = seed;
        }
        let seed = *self.seed.get_or_insert(self.system.disorder.seed);
        self.system.disorder.seed = seed;
        if let Some(out) = &ov.out {
            self.output_path = Some(out.clone());
        }
        self.output_path.get_or_insert_with(|| DEFAULT_OUTPUT.to_string());

        let p = &mut self.params;
        let has = |k: &str| accepted.contains(&k);
        if has("n_steps") {
            p.n_steps.get_or_insert(400);
        }
        if has("k_index") {
            let default = if self.scenario == Scenario::GateSweep { 1 } else { 2 };
            p.k_index.get_or_insert(default);
        }
        if has("k_max") {
            p.k_max.get_or_insert(0.1);
            p.grid_points.get_or_insert(41);
        }
        if has("delta_fractions") {
            p.delta_fractions
                .get_or_insert_with(|| vec![0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5]);
            p.disorder_mode.get_or_insert(DisorderMode::Mirrored);
            p.n_instances = ov.instances.or(p.n_instances).or(Some(100));
        }
        if has("gamma0") {
            p.gamma0.get_or_insert(0.035);
        }
        if has("initial_state") {
            p.initial_state.get_or_insert(EdgeState::S);
        }
        if has("t_max") {
            let gamma0 = p.gamma0.unwrap_or(0.035);
            match self.scenario {
                Scenario::Dissipative => {
                    p.t_max.get_or_insert(10.0 / gamma0);
                }
                Scenario::Entangle => {
                    p.t_max.get_or_insert(2000.0);
                }
                _ => {}
            }
        }
        if has("j2_values") {
            let j2 = self.system.j2;
            p.j2_values.get_or_insert_with(|| vec![j2]);
            p.k_plus_values.get_or_insert_with(|| geometric(0.06, 0.18, 7));
        }
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<(), Failure> {
        let p = &self.params;
        if p.n_steps == Some(0) {
            return Err(invalid("params.n_steps", "must be at least 1"));
        }
        if p.k_index == Some(0) {
            return Err(invalid("params.k_index", "must be at least 1"));
        }
        if let Some(t) = p.t_max {
            if !(t > 0.0 && t.is_finite()) {
                return Err(invalid("params.t_max", format!("must be positive, got {t}")));
            }
        }
        if let Some(g) = p.gamma0 {
            if !(g >= 0.0 && g.is_finite()) {
                return Err(invalid("params.gamma0", format!("must be >= 0, got {g}")));
            }
        }
        if let Some(k) = p.k_max {
            if !(k > 0.0 && k.is_finite()) {
                return Err(invalid("params.k_max", format!("must be positive, got {k}")));
            }
        }
        if matches!(p.grid_points, Some(n) if n < 2) {
            return Err(invalid("params.grid_points", "must be at least 2"));
        }
        if p.n_instances == Some(0) {
            return Err(invalid("params.n_instances", "must be at least 1"));
        }
        if let Some(d) = &p.delta_fractions {
            if d.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
                return Err(invalid("params.delta_fractions", "entries must be finite and >= 0"));
            }
        }
        for (field, list) in [("params.j2_values", &p.j2_values), ("params.k_plus_values", &p.k_plus_values)] {
            if let Some(v) = list {
                if v.is_empty() || v.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
                    return Err(invalid(field, "must be a non-empty list of positive numbers"));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_config() {
        let c = ScenarioConfig::parse(r#"{"scenario": "swap-map", "system": {"n_cells": 5, "j1": 0.51}}"#).unwrap();
        assert_eq!(c.scenario, Scenario::SwapMap);
        assert_eq!(c.system.j2, 1.0);
    }

    #[test]
    fn unknown_field_names_the_field() {
        let e = ScenarioConfig::parse(r#"{"scenario": "swap", "system": {"n_cells": 5, "j1": 0.5}, "gama": 1}"#)
            .unwrap_err();
        assert_eq!(e.field.as_deref(), Some("gama"));
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn rejects_foreign_params() {
        let c = ScenarioConfig::parse(
            r#"{"scenario": "spectrum", "system": {"n_cells": 5, "j1": 0.4}, "params": {"gamma0": 0.1}}"#,
        )
        .unwrap();
        let e = c.resolve(&Overrides::default()).unwrap_err();
        assert_eq!(e.field.as_deref(), Some("params.gamma0"));
    }

    #[test]
    fn resolution_is_idempotent() {
        let c = ScenarioConfig::default_for(Scenario::Disorder)
            .resolve(&Overrides {
                seed: Some(9),
                instances: Some(12),
                out: None,
            })
            .unwrap();
        assert_eq!(c.params.n_instances, Some(12));
        assert_eq!(c.system.disorder.seed, 9);
        let again = c.clone().resolve(&Overrides::default()).unwrap();
        assert_eq!(again, c);
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(ScenarioConfig::parse(&text).unwrap(), c);
    }

    #[test]
    fn example_configs_resolve() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
        let mut seen = Vec::new();
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            let c = ScenarioConfig::load(&path).unwrap().resolve(&Overrides::default()).unwrap();
            assert_eq!(path.file_stem().unwrap().to_str(), Some(c.scenario.name()));
            c.system.build().unwrap();
            seen.push(c.scenario);
        }
        assert_eq!(seen.len(), 10);
    }

    #[test]
    fn accepts_metadata_wrapper() {
        let c = ScenarioConfig::default_for(Scenario::Transfer);
        let wrapped = serde_json::json!({"config": c, "outputs": []}).to_string();
        assert_eq!(ScenarioConfig::parse(&wrapped).unwrap(), c);
    }
}
