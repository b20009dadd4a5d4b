//! Baseline evaluation, the optimisation loop, checkpoints and result files.
//!
//! Output directory layout:
//! * `baseline.csv`: one row per SME session;
//! * `epochs.csv`: one row per epoch (reward percentiles, baseline, best);
//! * `steps.csv`: one row per evaluated candidate;
//! * `kpis.csv`: per-epoch population-mean KPIs next to the baseline's;
//! * `best_params.json`, `summary.json`, `report.json`;
//! * `checkpoint.json`: distribution and loop state after the last epoch.
//!
//! Every file is a deterministic function of the config.

mod output;

pub use output::{emit_plot_data, write_baseline_csv, PLOT_REWARDS_FILE};

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::{ActionError, ActionSpace, ParameterSet};
use crate::cem::{self, CemConfig, CemError, EpochStats, SearchDistribution};
use crate::env::{EnvConfig, EnvError, Environment};
use crate::kpi::{FeatureVector, KpiError, KpiVector};
use crate::rng::{derive_seed, label};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config: {0}")]
    Config(String),
    #[error("no SME session met the load constraints ({0} sessions tried)")]
    BaselineInfeasible(usize),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Cem(#[from] CemError),
    #[error(transparent)]
    Kpi(#[from] KpiError),
    #[error(transparent)]
    Action(#[from] ActionError),
}

impl ExperimentError {
    /// Whether the error means the scenario cannot produce valid sessions,
    /// as opposed to a malformed config or an I/O failure.
    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            ExperimentError::BaselineInfeasible(_)
                | ExperimentError::Env(EnvError::EnvironmentInfeasible { .. })
                | ExperimentError::Cem(CemError::Env(EnvError::EnvironmentInfeasible { .. }))
        )
    }
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn default_sessions() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineConfig {
    #[serde(default = "ParameterSet::sme_default")]
    pub sme_parameter_set: ParameterSet,
    #[serde(default = "default_sessions")]
    pub n_sessions: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            sme_parameter_set: ParameterSet::sme_default(),
            n_sessions: default_sessions(),
        }
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub env: EnvConfig,
    #[serde(default)]
    pub optimizer: CemConfig,
    #[serde(default)]
    pub baseline: BaselineConfig,
    /// Recommended-range overrides by parameter name; `null` removes a range.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub action_space: BTreeMap<String, Option<[f64; 2]>>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// Directory that relative scenario paths resolve against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            env: EnvConfig::default(),
            optimizer: CemConfig::default(),
            baseline: BaselineConfig::default(),
            action_space: BTreeMap::new(),
            output_dir: default_output_dir(),
            seed: 0,
            base_dir: None,
        }
    }
}

impl ExperimentConfig {
    /// Small preset that finishes in minutes on one core: 20 candidates per
    /// epoch, 60 epochs, 10 s sessions.
    pub fn desk() -> Self {
        let mut cfg = Self::default();
        cfg.env.session_duration_s = 10.0;
        cfg.optimizer.population = 20;
        cfg.optimizer.epochs = 60;
        cfg
    }

    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let mut cfg = Self::from_json(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    /// Checks everything that can be checked without running a session.
    pub fn validate(&self) -> Result<(), ExperimentError> {
        self.env.validate()?;
        self.optimizer.validate()?;
        if self.optimizer.policy.input_dim != crate::kpi::FEATURE_LEN
            || self.optimizer.policy.output_dim != crate::action::PARAM_COUNT
        {
            return Err(ExperimentError::Config(format!(
                "policy must map {} inputs to {} outputs",
                crate::kpi::FEATURE_LEN,
                crate::action::PARAM_COUNT
            )));
        }
        if self.baseline.n_sessions < 1 {
            return Err(ExperimentError::Config("baseline.n_sessions must be at least 1".into()));
        }
        self.action_space()?;
        self.env.scenario.load(self.base_dir.as_deref())?.validate().map_err(EnvError::from)?;
        Ok(())
    }

    pub fn action_space(&self) -> Result<ActionSpace, ExperimentError> {
        Ok(ActionSpace::default().with_overrides(&self.action_space)?)
    }

    pub fn environment(&self) -> Result<Environment, ExperimentError> {
        Ok(Environment::with_base_dir(
            self.env.clone(),
            self.base_dir.as_deref(),
        )?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineResult {
    pub rewards: Vec<f64>,
    pub constraint_ok: Vec<bool>,
    pub seeds: Vec<u64>,
    /// Maximum reward over constraint-passing sessions.
    pub baseline_value: f64,
    /// Index of the session that set the baseline.
    pub best_session: usize,
    pub kpi_table: Vec<KpiVector>,
}

impl BaselineResult {
    pub fn baseline_kpis(&self) -> KpiVector {
        self.kpi_table[self.best_session]
    }
}

/// Seed offset of baseline session `i`.
pub fn baseline_seed(seed: u64, i: usize) -> u64 {
    derive_seed(seed, &[label::BASELINE, i as u64])
}

/// Runs `n_sessions` SME sessions on distinct seeds; the baseline is the
/// best constraint-passing reward.
pub fn run_baseline(env: &Environment, cfg: &ExperimentConfig) -> Result<BaselineResult, ExperimentError> {
    let n = cfg.baseline.n_sessions;
    let sme = cfg.baseline.sme_parameter_set;
    let seeds: Vec<u64> = (0..n).map(|i| baseline_seed(cfg.seed, i)).collect();
    let steps = seeds
        .par_iter()
        .map(|&s| env.step(&sme, s))
        .collect::<Result<Vec<_>, _>>()?;
    let best = steps
        .iter()
        .enumerate()
        .filter(|(_, s)| s.constraint_ok)
        .fold(None::<(usize, f64)>, |acc, (i, s)| match acc {
            Some((_, r)) if r >= s.reward => acc,
            _ => Some((i, s.reward)),
        });
    let (best_session, baseline_value) = best.ok_or(ExperimentError::BaselineInfeasible(n))?;
    Ok(BaselineResult {
        rewards: steps.iter().map(|s| s.reward).collect(),
        constraint_ok: steps.iter().map(|s| s.constraint_ok).collect(),
        seeds,
        baseline_value,
        best_session,
        kpi_table: steps.iter().map(|s| s.kpis).collect(),
    })
}

/// First epochs at which the population reached the baseline.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Milestones {
    pub first_median_at_or_above_baseline: Option<u64>,
    pub first_p25_at_or_above_baseline: Option<u64>,
}

impl Milestones {
    pub fn observe(&mut self, s: &EpochStats) {
        if self.first_median_at_or_above_baseline.is_none() && s.median >= s.baseline {
            self.first_median_at_or_above_baseline = Some(s.epoch);
        }
        if self.first_p25_at_or_above_baseline.is_none() && s.p25 >= s.baseline {
            self.first_p25_at_or_above_baseline = Some(s.epoch);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestSoFar {
    pub epoch: u64,
    pub reward: f64,
    pub action: ParameterSet,
}

/// Loop state persisted after every epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config: ExperimentConfig,
    pub base_dir: Option<PathBuf>,
    pub baseline: BaselineResult,
    pub dist: SearchDistribution,
    pub state: FeatureVector,
    pub completed_epochs: u64,
    pub epochs: Vec<EpochStats>,
    pub kpi_means: Vec<KpiVector>,
    pub milestones: Milestones,
    pub best: Option<BestSoFar>,
}

impl Checkpoint {
    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let ck: Checkpoint = serde_json::from_str(&text)?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(ExperimentError::Checkpoint(format!(
                "unsupported version {} (expected {CHECKPOINT_VERSION})",
                ck.version
            )));
        }
        Ok(ck)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub seed: u64,
    pub baseline: f64,
    pub baseline_kpis: KpiVector,
    pub epochs: Vec<EpochStats>,
    /// Population-mean KPIs per epoch.
    pub kpi_means: Vec<KpiVector>,
    pub milestones: Milestones,
    /// Top-ranked action of the last epoch.
    pub final_best: ParameterSet,
    pub best_so_far: Option<BestSoFar>,
    pub completed_epochs: u64,
    pub output_dir: PathBuf,
}

/// Controls for a run that are not part of the experiment definition.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Return after this many completed epochs, as if interrupted.
    pub stop_after_epochs: Option<u64>,
}

/// Runs the baseline and then the full CEM loop, writing every output file.
pub fn run_experiment(cfg: &ExperimentConfig, opts: RunOptions) -> Result<ExperimentReport, ExperimentError> {
    cfg.validate()?;
    let env = cfg.environment()?;
    let baseline = run_baseline(&env, cfg)?;
    let state = env.reset()?;
    let out = output::Outputs::create(&cfg.output_dir)?;
    out.write_baseline(&baseline)?;
    let ck = Checkpoint {
        version: CHECKPOINT_VERSION,
        config: cfg.clone(),
        base_dir: cfg.base_dir.clone(),
        baseline,
        dist: cem::init_distribution(&cfg.optimizer.policy, derive_seed(cfg.seed, &[label::INIT])),
        state,
        completed_epochs: 0,
        epochs: Vec::new(),
        kpi_means: Vec::new(),
        milestones: Milestones::default(),
        best: None,
    };
    drive(&env, ck, out, opts)
}

/// Continues a run from its checkpoint. Result files are cut back to the
/// checkpointed epochs first, so the finished directory matches an
/// uninterrupted run.
pub fn resume(checkpoint: &Path, opts: RunOptions) -> Result<ExperimentReport, ExperimentError> {
    let mut ck = Checkpoint::load(checkpoint)?;
    ck.config.base_dir = ck.base_dir.clone();
    let cfg = &ck.config;
    cfg.validate()?;
    let env = cfg.environment()?;
    let out = output::Outputs::reopen(&cfg.output_dir, ck.completed_epochs)?;
    drive(&env, ck, out, opts)
}

fn drive(
    env: &Environment,
    mut ck: Checkpoint,
    mut out: output::Outputs,
    opts: RunOptions,
) -> Result<ExperimentReport, ExperimentError> {
    let cfg = ck.config.clone();
    let space = cfg.action_space()?;
    let baseline = ck.baseline.baseline_value;
    while ck.completed_epochs < cfg.optimizer.epochs {
        if opts.stop_after_epochs.is_some_and(|s| ck.completed_epochs >= s) {
            break;
        }
        let o = cem::run_epoch(env, &ck.dist, &cfg.optimizer, &space, &ck.state, baseline, cfg.seed)?;
        let kpis: Vec<KpiVector> = o.steps.iter().map(|s| s.result.kpis).collect();
        let kpi_mean = KpiVector::mean_of(&kpis);
        out.append_epoch(&o.stats, &o.steps, &kpi_mean, &ck.baseline.baseline_kpis())?;
        ck.milestones.observe(&o.stats);
        if ck.best.as_ref().is_none_or(|b| o.stats.best_reward > b.reward) {
            ck.best = Some(BestSoFar {
                epoch: o.stats.epoch,
                reward: o.stats.best_reward,
                action: o.stats.best_action,
            });
        }
        ck.dist = o.dist;
        ck.state = o.next_state;
        ck.completed_epochs += 1;
        ck.epochs.push(o.stats);
        ck.kpi_means.push(kpi_mean);
        out.flush()?;
        output::write_json_atomic(&out.dir.join("checkpoint.json"), &ck)?;
    }
    let report = ExperimentReport {
        seed: cfg.seed,
        baseline,
        baseline_kpis: ck.baseline.baseline_kpis(),
        final_best: ck
            .epochs
            .last()
            .map_or(cfg.baseline.sme_parameter_set, |e| e.best_action),
        epochs: ck.epochs,
        kpi_means: ck.kpi_means,
        milestones: ck.milestones,
        best_so_far: ck.best,
        completed_epochs: ck.completed_epochs,
        output_dir: cfg.output_dir.clone(),
    };
    if report.completed_epochs >= cfg.optimizer.epochs {
        out.write_final(&report)?;
    }
    Ok(report)
}

/// Mean reward of `action` over `n` sessions on seeds no other phase uses.
pub fn evaluate_fresh(
    env: &Environment,
    action: &ParameterSet,
    seed: u64,
    n: usize,
) -> Result<f64, ExperimentError> {
    let rewards = (0..n)
        .into_par_iter()
        .map(|i| {
            env.step(action, derive_seed(seed, &[label::EVALUATION, i as u64]))
                .map(|s| s.reward)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(rewards.iter().sum::<f64>() / n.max(1) as f64)
}
