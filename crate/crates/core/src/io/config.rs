//! TOML run configuration.
//!
//! ```toml
//! seed = 20240101
//! alpha = 0.05
//! tau = [1.0, 1.5, 2.0]
//! precision = 3
//!
//! [rates]
//! control = [0.5, 0.2, 0.1, 1.0, 0.4, 0.2, 0.6, 0.3, 0.3]
//! treatment = [0.3, 0.15, 0.06, 0.6, 0.3, 0.12, 0.36, 0.24, 0.24]
//!
//! [simulation]
//! n_per_arm = [100, 400]
//! censor_max = 4.0
//! replicates = 1000
//!
//! [analysis]
//! tests = ["between", "within", "wald"]
//! within_pairs = [[1, 2]]
//! ```
//!
//! Unknown keys are rejected.

use std::path::Path;

use serde::Deserialize;

use crate::door::DoorConfig;
use crate::error::{Error, Result};
use crate::io::data::sha256_hex;
use crate::oracle::DEFAULT_MC_REPS;
use crate::sim::{SimConfig, TransitionRates};

pub const DEFAULT_PRECISION: usize = 3;
pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub tau: Vec<f64>,
    /// Decimal places in printed tables.
    #[serde(default = "default_precision")]
    pub precision: usize,
    pub rates: Option<RatesSection>,
    pub simulation: Option<SimulationSection>,
    #[serde(default)]
    pub analysis: AnalysisSection,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesSection {
    pub control: TransitionRates,
    pub treatment: TransitionRates,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    pub n_per_arm: Vec<usize>,
    pub censor_max: f64,
    #[serde(default)]
    pub replicates: usize,
    /// Monte Carlo draws for the true-RMST oracle.
    #[serde(default = "default_mc_reps")]
    pub mc_reps: usize,
    /// Also write SVG plots.
    #[serde(default = "default_true")]
    pub plots: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestKind {
    Single,
    Between,
    Within,
    Wald,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    #[serde(default = "default_tests")]
    pub tests: Vec<TestKind>,
    /// Null value of the single-tier test; required when it is requested.
    pub null_value: Option<f64>,
    /// 1-based tier pairs `[j, k]` for within-arm tests, reported as
    /// `RMST_k − RMST_j`. Defaults to consecutive tiers.
    #[serde(default)]
    pub within_pairs: Vec<[usize; 2]>,
    /// DOOR level labels, best first. Needed for longitudinal data.
    pub door_labels: Option<Vec<String>>,
    /// Round times to this many decimals on ingestion.
    pub time_decimals: Option<u32>,
    #[serde(default = "default_true")]
    pub plots: bool,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        AnalysisSection {
            tests: default_tests(),
            null_value: None,
            within_pairs: Vec::new(),
            door_labels: None,
            time_decimals: None,
            plots: true,
        }
    }
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

fn default_precision() -> usize {
    DEFAULT_PRECISION
}

fn default_mc_reps() -> usize {
    DEFAULT_MC_REPS
}

fn default_true() -> bool {
    true
}

fn default_tests() -> Vec<TestKind> {
    vec![TestKind::Between, TestKind::Wald]
}

/// Tests resolved from the configuration for a `J`-tier analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct TestPlan {
    pub single_null: Option<f64>,
    pub between: bool,
    pub within_pairs: Vec<(usize, usize)>,
    pub wald: bool,
}

impl Config {
    pub fn parse(text: &str) -> Result<Config> {
        let cfg: Config =
            toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    /// Loads a config file and returns it with the SHA-256 of its bytes.
    pub fn load(path: &Path) -> Result<(Config, String)> {
        let bytes = std::fs::read(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let text = std::str::from_utf8(&bytes)
            .map_err(|_| Error::Config(format!("{} is not UTF-8", path.display())))?;
        Ok((Config::parse(text)?, sha256_hex(&bytes)))
    }

    fn check(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidAlpha(self.alpha));
        }
        if let Some(&t) = self.tau.iter().find(|t| !(**t > 0.0) || !t.is_finite()) {
            return Err(Error::InvalidTau(t));
        }
        if let Some(sim) = &self.simulation {
            if sim.mc_reps == 0 {
                return Err(Error::Config("mc_reps must be positive".into()));
            }
        }
        let a = &self.analysis;
        if a.tests.contains(&TestKind::Single) && a.null_value.is_none() {
            return Err(Error::Config(
                "the single-tier test needs an explicit analysis.null_value".into(),
            ));
        }
        if let Some(p) = a.within_pairs.iter().find(|p| p[0] == p[1]) {
            return Err(Error::SameTier(p[0]));
        }
        Ok(())
    }

    pub fn require_tau(&self) -> Result<&[f64]> {
        if self.tau.is_empty() {
            Err(Error::Config("at least one tau is required".into()))
        } else {
            Ok(&self.tau)
        }
    }

    pub fn rates(&self) -> Result<&RatesSection> {
        self.rates
            .as_ref()
            .ok_or_else(|| Error::Config("missing [rates] table".into()))
    }

    /// Simulation settings; `replicates = 0` is rejected here.
    pub fn sim_config(&self) -> Result<SimConfig> {
        let cfg = self.build_sim(None)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Settings for simulating a single trial, where `replicates` is unused.
    pub fn trial_config(&self) -> Result<SimConfig> {
        let cfg = self.build_sim(Some(1))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn build_sim(&self, replicates: Option<usize>) -> Result<SimConfig> {
        let rates = self.rates()?;
        let sim = self
            .simulation
            .as_ref()
            .ok_or_else(|| Error::Config("missing [simulation] table".into()))?;
        Ok(SimConfig {
            rates_control: rates.control,
            rates_treatment: rates.treatment,
            n_per_arm: sim.n_per_arm.clone(),
            censor_max: sim.censor_max,
            tau_list: self.require_tau()?.to_vec(),
            seed: self.seed,
            replicates: replicates.unwrap_or(sim.replicates),
        })
    }

    pub fn door_config(&self) -> Result<Option<DoorConfig>> {
        self.analysis
            .door_labels
            .clone()
            .map(DoorConfig::new)
            .transpose()
    }

    pub fn test_plan(&self, num_tiers: usize) -> Result<TestPlan> {
        let a = &self.analysis;
        let has = |k| a.tests.contains(&k);
        let within_pairs = if !has(TestKind::Within) {
            Vec::new()
        } else if a.within_pairs.is_empty() {
            (1..num_tiers).map(|j| (j, j + 1)).collect()
        } else {
            for p in &a.within_pairs {
                if let Some(&t) = p.iter().find(|&&t| t == 0 || t > num_tiers) {
                    return Err(Error::TierOutOfRange {
                        tier: t,
                        max: num_tiers,
                    });
                }
            }
            a.within_pairs.iter().map(|p| (p[0], p[1])).collect()
        };
        Ok(TestPlan {
            single_null: if has(TestKind::Single) {
                a.null_value
            } else {
                None
            },
            between: has(TestKind::Between),
            within_pairs,
            wald: has(TestKind::Wald),
        })
    }
}
