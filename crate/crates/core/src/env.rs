//! One-step environment: an action runs one simulated session and returns
//! the session's state, KPIs and reward.
//!
//! A session that fails the load constraints is rerun with a fresh derived
//! seed, up to `max_constraint_retries` times. If every attempt fails, the
//! last attempt is returned with `constraint_ok = false` and reward 0.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::ParameterSet;
use crate::kpi::{
    check_constraints, features, summarize, AggregatedBin, BinAccumulator, FeatureVector,
    KpiError, KpiVector, SessionMeta,
};
use crate::objective::{ObjectiveConfig, ObjectiveError};
use crate::rng::{derive_seed, label};
use crate::sim::{simulate, Scenario, SimError, SLOTS_PER_SECOND};

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("environment config: {0}")]
    Config(String),
    #[error("no SME session met the load constraints after {attempts} attempts")]
    EnvironmentInfeasible { attempts: u32 },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Kpi(#[from] KpiError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
}

/// Where the scenario comes from: a built-in name (`"default"`, `"idle"`), a
/// JSON file path, or an inline scenario object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioRef {
    Inline(Box<Scenario>),
    Named(String),
}

impl Default for ScenarioRef {
    fn default() -> Self {
        ScenarioRef::Named("default".into())
    }
}

impl ScenarioRef {
    /// Loads the scenario; relative paths resolve against `base_dir`.
    pub fn load(&self, base_dir: Option<&Path>) -> Result<Scenario, EnvError> {
        match self {
            ScenarioRef::Inline(s) => Ok((**s).clone()),
            ScenarioRef::Named(n) if n == "default" => Ok(Scenario::default_three_ue()),
            ScenarioRef::Named(n) if n == "idle" => Ok(Scenario::idle()),
            ScenarioRef::Named(p) => {
                let path = PathBuf::from(p);
                let path = match base_dir {
                    Some(b) if path.is_relative() => b.join(path),
                    _ => path,
                };
                Ok(Scenario::load(&path)?)
            }
        }
    }
}

fn default_duration() -> f64 {
    30.0
}
fn default_band_seconds() -> u64 {
    5
}
fn default_retries() -> u32 {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    #[serde(default)]
    pub scenario: ScenarioRef,
    #[serde(default = "default_duration")]
    pub session_duration_s: f64,
    /// Minimum seconds with more than 1280 scheduled downlink TTIs.
    #[serde(default = "default_band_seconds")]
    pub x_seconds: u64,
    /// Minimum seconds with 320 to 1280 scheduled downlink TTIs.
    #[serde(default = "default_band_seconds")]
    pub y_seconds: u64,
    #[serde(default = "default_retries")]
    pub max_constraint_retries: u32,
    #[serde(default)]
    pub objective: ObjectiveConfig,
    #[serde(default)]
    pub base_seed: u64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioRef::default(),
            session_duration_s: default_duration(),
            x_seconds: default_band_seconds(),
            y_seconds: default_band_seconds(),
            max_constraint_retries: default_retries(),
            objective: ObjectiveConfig::default(),
            base_seed: 0,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        if !(self.session_duration_s * SLOTS_PER_SECOND as f64 >= SLOTS_PER_SECOND as f64)
            || !self.session_duration_s.is_finite()
        {
            return Err(EnvError::Config(format!(
                "session_duration_s must cover at least one 1 s bin, got {}",
                self.session_duration_s
            )));
        }
        self.objective.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepResult {
    pub state: FeatureVector,
    pub reward: f64,
    pub kpis: KpiVector,
    pub constraint_ok: bool,
    pub retries_used: u32,
    /// Seed of the session that produced this result.
    pub session_seed: u64,
    #[serde(skip)]
    pub bins: Vec<AggregatedBin>,
}

/// Immutable after construction; `step` may be called concurrently.
#[derive(Debug, Clone)]
pub struct Environment {
    cfg: EnvConfig,
    scenario: Scenario,
    meta: SessionMeta,
}

impl Environment {
    pub fn new(cfg: EnvConfig) -> Result<Self, EnvError> {
        Self::with_base_dir(cfg, None)
    }

    pub fn with_base_dir(cfg: EnvConfig, base_dir: Option<&Path>) -> Result<Self, EnvError> {
        cfg.validate()?;
        let scenario = cfg.scenario.load(base_dir)?;
        Self::from_scenario(cfg, scenario)
    }

    pub fn from_scenario(cfg: EnvConfig, scenario: Scenario) -> Result<Self, EnvError> {
        cfg.validate()?;
        scenario.validate()?;
        let (offered_bps, full_buffer_fraction) = scenario.offered_load(cfg.session_duration_s);
        let meta = SessionMeta {
            duration_s: cfg.session_duration_s,
            offered_bps,
            full_buffer_fraction,
        };
        Ok(Self { cfg, scenario, meta })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    /// Runs one session under the SME set and returns its state.
    pub fn reset(&self) -> Result<FeatureVector, EnvError> {
        let r = self.step(&ParameterSet::sme_default(), derive_seed(0, &[label::BASELINE]))?;
        if !r.constraint_ok {
            return Err(EnvError::EnvironmentInfeasible {
                attempts: self.cfg.max_constraint_retries + 1,
            });
        }
        Ok(r.state)
    }

    /// Runs `action` on the session seeded by `base_seed ^ seed_offset`,
    /// retrying constraint failures on derived seeds.
    pub fn step(&self, action: &ParameterSet, seed_offset: u64) -> Result<StepResult, EnvError> {
        let first_seed = self.cfg.base_seed ^ seed_offset;
        let mut attempt = 0u32;
        loop {
            let session_seed = if attempt == 0 {
                first_seed
            } else {
                derive_seed(first_seed, &[label::RETRY, u64::from(attempt)])
            };
            let bins = self.session_bins(action, session_seed)?;
            let ok = check_constraints(&bins, self.cfg.x_seconds, self.cfg.y_seconds);
            if ok || attempt >= self.cfg.max_constraint_retries {
                let kpis = summarize(&bins);
                let reward = if ok { self.cfg.objective.reward(&kpis)? } else { 0.0 };
                return Ok(StepResult {
                    state: features(&bins, &self.meta)?,
                    reward,
                    kpis,
                    constraint_ok: ok,
                    retries_used: attempt,
                    session_seed,
                    bins,
                });
            }
            attempt += 1;
        }
    }

    fn session_bins(&self, action: &ParameterSet, seed: u64) -> Result<Vec<AggregatedBin>, EnvError> {
        let mut acc = BinAccumulator::new(self.scenario.sim.n_rbs);
        simulate(
            &self.scenario,
            action,
            seed,
            self.cfg.session_duration_s,
            |t| acc.push(t),
        )?;
        Ok(acc.finish())
    }
}
