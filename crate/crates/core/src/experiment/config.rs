//! Sweep configuration files.
//!
//! ```toml
//! [sweep]
//! variable = "snr_db"                       # snr_db | kappa | cluster_size | sectors
//! values = { start = 0, stop = 20, step = 5 }   # or a list: [10, 20]
//! trials = 50
//! algorithms = ["dmmse", "emmseia", "pwf"]
//! master_seed = 1
//! paired = true                             # same draws at every value
//!
//! [scenario]
//! cluster_size = 3
//! cooperation = 2
//! sector_offset = "30deg"
//!
//! [algorithm]
//! objective = "srm"
//! ```
//!
//! The `snr_db` variable sets the interference-free SNR at the cell boundary.
//! Every key of `[scenario]` and `[algorithm]` is optional and defaults to
//! [`ScenarioConfig::default`] and [`AlgorithmConfig::default`].

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::algorithms::{AlgorithmConfig, AlgorithmKind, Objective};
use crate::error::{Error, Result};
use crate::scenario::ScenarioConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    SnrDb,
    Kappa,
    ClusterSize,
    Sectors,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            Self::SnrDb => "snr_db",
            Self::Kappa => "kappa",
            Self::ClusterSize => "cluster_size",
            Self::Sectors => "sectors",
        }
    }

    /// The [`ScenarioConfig`] field the variable sets.
    pub fn scenario_key(self) -> &'static str {
        match self {
            Self::SnrDb => "boundary_snr_db",
            Self::Kappa => "cooperation",
            Self::ClusterSize => "cluster_size",
            Self::Sectors => "sectors",
        }
    }

    /// The scenario at one sweep point.
    pub fn apply(self, base: &ScenarioConfig, value: f64) -> Result<ScenarioConfig> {
        let mut cfg = base.clone();
        if self == Self::SnrDb {
            cfg.boundary_snr_db = value;
            return Ok(cfg);
        }
        if !(value >= 1.0 && value.fract() == 0.0 && value < 1e6) {
            return Err(Error::Config(format!("{} values must be positive integers, got {value}", self.name())));
        }
        let n = value as usize;
        match self {
            Self::Kappa => cfg.cooperation = n,
            Self::ClusterSize => cfg.cluster_size = n,
            Self::Sectors => cfg.sectors = n,
            Self::SnrDb => unreachable!(),
        }
        Ok(cfg)
    }
}

/// A validated sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    pub trials: usize,
    pub algorithms: Vec<AlgorithmKind>,
    pub scenario: ScenarioConfig,
    pub algorithm: AlgorithmConfig,
    pub master_seed: u64,
    /// Reuse trial `t`'s random stream at every sweep value, so all values see
    /// the same drops and fading (common random numbers). When false, every
    /// (value, trial) pair has its own stream.
    pub paired: bool,
}

impl SweepSpec {
    /// Stream index of trial draws at sweep point `value_index`.
    pub fn stream_value_index(&self, value_index: usize) -> usize {
        if self.paired {
            0
        } else {
            value_index
        }
    }

    /// Scenario at sweep point `value_index`.
    pub fn scenario_at(&self, value_index: usize) -> Result<ScenarioConfig> {
        self.variable.apply(&self.scenario, self.values[value_index])
    }

    /// Solver settings for one algorithm. Leakage minimization has no sum-rate
    /// mode and always runs on its own objective.
    pub fn algorithm_config(&self, kind: AlgorithmKind) -> AlgorithmConfig {
        let objective = if kind == AlgorithmKind::MinLeakage { Objective::Wsmmse } else { self.algorithm.objective };
        AlgorithmConfig { algorithm: kind, objective, ..self.algorithm.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.values.is_empty() {
            return Err(Error::Config("values must not be empty".into()));
        }
        if let Some(v) = self.values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Config(format!("sweep value {v} is not finite")));
        }
        if self.algorithms.is_empty() {
            return Err(Error::Config("algorithms must not be empty".into()));
        }
        for (i, a) in self.algorithms.iter().enumerate() {
            if self.algorithms[..i].contains(a) {
                return Err(Error::Config(format!("algorithm {a} is listed twice")));
            }
            self.algorithm_config(*a).validate()?;
        }
        let key = self.variable.scenario_key();
        for &v in &self.values {
            self.variable.apply(&self.scenario, v)?.validate().map_err(|e| match e {
                Error::Config(msg) if msg.split(|c: char| !(c.is_alphanumeric() || c == '_')).any(|w| w == key) => {
                    Error::Config(format!("at {} = {v}: {msg}", self.variable.name()))
                }
                other => other,
            })?;
        }
        Ok(())
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Values {
    List(Vec<f64>),
    Range(Range),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Range {
    start: f64,
    stop: f64,
    step: f64,
}

impl Values {
    fn expand(self) -> Result<Vec<f64>> {
        match self {
            Values::List(v) => Ok(v),
            Values::Range(Range { start, stop, step }) => {
                if !(step > 0.0) || !(stop >= start) || !start.is_finite() || !stop.is_finite() {
                    return Err(Error::Config(format!("range start = {start}, stop = {stop}, step = {step} is empty or unbounded")));
                }
                let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
                Ok((0..count).map(|i| start + i as f64 * step).collect())
            }
        }
    }
}

fn default_algorithms() -> Vec<AlgorithmKind> {
    vec![AlgorithmKind::Dmmse]
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepSection {
    variable: SweepVariable,
    values: Values,
    trials: usize,
    #[serde(default = "default_algorithms")]
    algorithms: Vec<AlgorithmKind>,
    #[serde(default)]
    master_seed: u64,
    #[serde(default = "default_paired")]
    paired: bool,
}

fn default_paired() -> bool {
    true
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    sweep: SweepSection,
    #[serde(default)]
    scenario: ScenarioConfig,
    #[serde(default)]
    algorithm: AlgorithmConfig,
}

/// Line of `key = ...` inside `[section]`, for error messages.
fn key_line(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if let Some(name) = t.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            current = name.trim().to_string();
        } else if current == section && t.split('=').next().map(str::trim) == Some(key) {
            return Some(i + 1);
        }
    }
    None
}

/// Scenario keys a validation message may refer to, in search order.
const SCENARIO_KEYS: [&str; 13] = [
    "cooperation",
    "cluster_size",
    "sectors",
    "nt",
    "nr",
    "users_per_cell",
    "streams",
    "pathloss_exponent",
    "cell_radius_km",
    "per_bs_power",
    "shadowing_sigma_db",
    "user_placement",
    "sector_offset",
];

fn with_line_context(text: &str, msg: String) -> Error {
    let mentioned = |key: &str| msg.split(|c: char| !(c.is_alphanumeric() || c == '_')).any(|w| w == key);
    // Sweep values that break a scenario invariant point at the values line.
    let swept = if msg.starts_with("at ") { key_line(text, "sweep", "values") } else { None };
    let located = swept.or_else(|| {
        SCENARIO_KEYS
            .iter()
            .filter(|k| mentioned(k))
            .find_map(|k| key_line(text, "scenario", k))
            .or_else(|| ["trials", "values", "algorithms", "variable"].iter().filter(|k| mentioned(k)).find_map(|k| key_line(text, "sweep", k)))
            .or_else(|| {
                ["inner_tol", "constraint_tol", "subgradient_step", "lambda_init", "max_inner", "max_outer", "objective"]
                    .iter()
                    .filter(|k| mentioned(k))
                    .find_map(|k| key_line(text, "algorithm", k))
            })
    });
    match located {
        Some(line) => Error::Config(format!("line {line}: {msg}")),
        None => Error::Config(msg),
    }
}

/// Parses and validates a sweep from TOML text.
pub fn parse_config_str(text: &str) -> Result<SweepSpec> {
    let file: ConfigFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))?;
    let values = file.sweep.values.expand().map_err(|e| with_line_context(text, e.to_string()))?;
    let spec = SweepSpec {
        variable: file.sweep.variable,
        values,
        trials: file.sweep.trials,
        algorithms: file.sweep.algorithms,
        scenario: file.scenario,
        algorithm: file.algorithm,
        master_seed: file.sweep.master_seed,
        paired: file.sweep.paired,
    };
    spec.validate().map_err(|e| match e {
        Error::Config(msg) => with_line_context(text, msg),
        other => other,
    })?;
    Ok(spec)
}

/// Reads and validates a sweep file.
pub fn parse_config(path: &Path) -> Result<SweepSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str =
        "[sweep]\nvariable = \"snr_db\"\nvalues = { start = 0, stop = 20, step = 5 }\ntrials = 50\n\n[scenario]\ncluster_size = 3\ncooperation = 2\n";

    #[test]
    fn minimal_config() {
        let spec = parse_config_str(MINIMAL).unwrap();
        assert_eq!(spec.values, vec![0.0, 5.0, 10.0, 15.0, 20.0]);
        assert_eq!(spec.trials, 50);
        assert_eq!(spec.algorithms, vec![AlgorithmKind::Dmmse]);
        assert_eq!(spec.scenario, ScenarioConfig::default());
    }

    #[test]
    fn cooperation_beyond_cluster_is_rejected_with_line() {
        let text = MINIMAL.replace("cooperation = 2", "cooperation = 4");
        let err = parse_config_str(&text).unwrap_err().to_string();
        assert!(err.contains("line 8") && err.contains("cooperation"), "{err}");
    }

    #[test]
    fn swept_kappa_beyond_cluster_is_rejected() {
        let text = MINIMAL.replace("\"snr_db\"", "\"kappa\"").replace("{ start = 0, stop = 20, step = 5 }", "[1, 2, 4]");
        let err = parse_config_str(&text).unwrap_err().to_string();
        assert!(err.contains("line 3") && err.contains("kappa = 4"), "{err}");
    }

    #[test]
    fn duplicate_and_unknown_keys() {
        let dup = MINIMAL.replace("cooperation = 2", "cooperation = 2\ncooperation = 1");
        assert!(matches!(parse_config_str(&dup), Err(Error::Config(_))));
        let unknown = MINIMAL.replace("cooperation = 2", "coperation = 2");
        let err = parse_config_str(&unknown).unwrap_err().to_string();
        assert!(err.contains("coperation"), "{err}");
    }

    #[test]
    fn angles_and_placement() {
        let text = format!("{MINIMAL}sectors = 3\nnt = 6\nsector_offset = \"30deg\"\nuser_placement = {{ fixed_radius = 0.5 }}\n\n[algorithm]\nobjective = \"srm\"\ninitialization = {{ random_orthonormal = {{ seed = 4 }} }}\n");
        let spec = parse_config_str(&text).unwrap();
        assert!((spec.scenario.sector_offset - std::f64::consts::PI / 6.0).abs() < 1e-15);
        assert_eq!(spec.scenario.user_placement, crate::scenario::UserPlacement::FixedRadius(0.5));
        assert_eq!(spec.algorithm.objective, Objective::Srm);
    }
}
