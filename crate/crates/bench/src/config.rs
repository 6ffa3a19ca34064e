use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stf_core::StfConfig;
use stf_scenarios::ballistic::BallisticConfig;
use stf_scenarios::bearings::BearingsConfig;
use stf_scenarios::linear::LinearConfig;

use crate::error::{BenchError, Result};
use crate::registry;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Summary CSV; `steps.csv` is written next to it.
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
}

/// Everything a campaign needs. Omitted fields take the scenario defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub scenario: u8,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub estimators: Vec<String>,
    #[serde(default)]
    pub stf: Option<StfConfig>,
    #[serde(default)]
    pub linear: LinearConfig,
    #[serde(default)]
    pub bearings: BearingsConfig,
    #[serde(default)]
    pub ballistic: BallisticConfig,
    #[serde(default)]
    pub output: OutputConfig,
    /// Worker threads; `None` uses every core.
    #[serde(default)]
    pub threads: Option<usize>,
    /// Record wall time per estimator. Off makes every output byte a
    /// function of the configuration.
    #[serde(default)]
    pub timing: bool,
}

fn default_runs() -> usize {
    100
}

impl CampaignConfig {
    pub fn new(scenario: u8) -> Self {
        Self {
            scenario,
            runs: default_runs(),
            seed: 0,
            estimators: Vec::new(),
            stf: None,
            linear: LinearConfig::default(),
            bearings: BearingsConfig::default(),
            ballistic: BallisticConfig::default(),
            output: OutputConfig::default(),
            threads: None,
            timing: false,
        }
    }

    /// Fills the estimator list and validates names and counts.
    pub fn normalized(mut self) -> Result<Self> {
        if !(1..=3).contains(&self.scenario) {
            return Err(BenchError::Invalid(format!("scenario must be 1, 2 or 3, got {}", self.scenario)));
        }
        if self.runs == 0 {
            return Err(BenchError::Invalid("runs must be at least 1".into()));
        }
        if self.estimators.is_empty() {
            self.estimators = registry::defaults(self.scenario);
        }
        let available = registry::available(self.scenario);
        for name in &self.estimators {
            if !available.contains(&name.as_str()) {
                return Err(BenchError::UnknownEstimator {
                    name: name.clone(),
                    scenario: self.scenario,
                    available: available.join(", "),
                });
            }
        }
        let stf = self.stf_config();
        stf.validate()?;
        self.stf = Some(stf);
        Ok(self)
    }

    /// Fitting settings for this scenario unless overridden.
    pub fn stf_config(&self) -> StfConfig {
        if let Some(s) = self.stf {
            return s;
        }
        match self.scenario {
            1 => StfConfig { nominal_interval: self.linear.dt, ..StfConfig::default() },
            2 => StfConfig { nominal_interval: self.bearings.dt, ..StfConfig::default() },
            _ => StfConfig {
                window_count: self.ballistic.window,
                order: self.ballistic.order,
                nominal_interval: 1.0,
                ..StfConfig::default()
            },
        }
    }
}

pub fn parse_config(text: &str, origin: &str) -> Result<CampaignConfig> {
    let cfg: CampaignConfig = serde_json::from_str(text)
        .map_err(|e| BenchError::Config { path: origin.to_string(), message: e.to_string() })?;
    cfg.normalized()
}

pub fn load_config(path: &Path) -> Result<CampaignConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
    parse_config(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config(r#"{"scenario": 1}"#, "inline").unwrap();
        assert_eq!(c.runs, 100);
        assert_eq!(c.linear, LinearConfig::default());
        assert_eq!(c.linear.steps, 200);
        assert_eq!(c.linear.wpa_intervals, vec![(51, 70), (121, 150)]);
        assert_eq!(c.stf.unwrap().window_count, 10);
        assert_eq!(c.stf.unwrap().order, 2);
        assert!(c.estimators.contains(&"imm-smoother".to_string()));
        assert!(!c.estimators.contains(&"oracle".to_string()));
    }

    #[test]
    fn scenario_three_uses_its_window() {
        let c = parse_config(r#"{"scenario": 3}"#, "inline").unwrap();
        let s = c.stf.unwrap();
        assert_eq!((s.window_count, s.order, s.nominal_interval), (5, 3, 1.0));
    }

    #[test]
    fn zero_runs_rejected() {
        assert!(parse_config(r#"{"scenario": 1, "runs": 0}"#, "inline").is_err());
    }

    #[test]
    fn unknown_key_named() {
        let err = parse_config(r#"{"scenario": 1, "rnus": 3}"#, "inline").unwrap_err().to_string();
        assert!(err.contains("rnus"), "{err}");
    }

    #[test]
    fn unknown_nested_key_named() {
        let err = parse_config(r#"{"scenario": 2, "bearings": {"sigma": 1}}"#, "inline").unwrap_err().to_string();
        assert!(err.contains("sigma"), "{err}");
    }

    #[test]
    fn unknown_estimator_lists_registry() {
        let err = parse_config(r#"{"scenario": 3, "estimators": ["kalman"]}"#, "inline").unwrap_err().to_string();
        assert!(err.contains("kalman") && err.contains("o2-unbiased") && err.contains("fit-online"), "{err}");
    }
}
