//! Cross-entropy search over policy weights.
//!
//! A diagonal Gaussian over the flat weight vector is sampled, each sample is
//! scored, and the distribution is refit to the top fraction. Ranking sorts
//! by reward (descending) then candidate index, so results do not depend on
//! evaluation order.

mod policy;

pub use policy::{policy_forward, PolicyShape};

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::{decode_action, ActionError, ActionSpace, ParameterSet, SampleMode};
use crate::env::{EnvError, Environment, StepResult};
use crate::kpi::FeatureVector;
use crate::rng::{derive_seed, label, stream};
use crate::stats;

#[derive(Debug, Error)]
pub enum CemError {
    #[error("optimizer config: {0}")]
    Config(String),
    #[error("{what} has length {got}, expected {expected}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("cannot refit to an empty population")]
    EmptyPopulation,
    #[error(transparent)]
    Action(#[from] ActionError),
    #[error(transparent)]
    Env(#[from] EnvError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchDistribution {
    pub mean: Vec<f64>,
    pub stddev: Vec<f64>,
    /// Completed refits.
    pub epoch: u64,
}

/// Mean drawn from N(0, 0.1²) per weight; unit standard deviation.
pub fn init_distribution(shape: &PolicyShape, seed: u64) -> SearchDistribution {
    let mut rng = stream(seed, &[label::INIT]);
    let normal = Normal::new(0.0, 0.1).expect("finite parameters");
    let n = shape.weight_count();
    SearchDistribution {
        mean: (0..n).map(|_| normal.sample(&mut rng)).collect(),
        stddev: vec![1.0; n],
        epoch: 0,
    }
}

impl SearchDistribution {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.mean
            .iter()
            .zip(&self.stddev)
            .map(|(m, s)| {
                let z: f64 = StandardNormal.sample(rng);
                m + s * z
            })
            .collect()
    }
}

/// Exploration noise added to the refit deviation; vanishes after epoch 50.
pub fn extra_noise(epoch: u64) -> f64 {
    (0.05 - 0.001 * epoch as f64).max(0.0)
}

/// Candidate indices ordered best first: reward descending, then index.
pub fn ranking(rewards: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..rewards.len()).collect();
    order.sort_by(|&a, &b| rewards[b].total_cmp(&rewards[a]).then(a.cmp(&b)));
    order
}

pub fn elite_count(n: usize, elite_frac: f64) -> usize {
    ((elite_frac * n as f64).ceil() as usize).clamp(1, n.max(1))
}

/// Refits `dist` to the top `⌈elite_frac·n⌉` of `scored`.
pub fn elite_update(
    dist: &SearchDistribution,
    scored: &[(Vec<f64>, f64)],
    elite_frac: f64,
    stddev_floor: f64,
) -> Result<SearchDistribution, CemError> {
    if scored.is_empty() {
        return Err(CemError::EmptyPopulation);
    }
    if !(elite_frac > 0.0 && elite_frac <= 1.0) {
        return Err(CemError::Config(format!("elite_frac {elite_frac} outside (0, 1]")));
    }
    let dim = dist.mean.len();
    if let Some((w, _)) = scored.iter().find(|(w, _)| w.len() != dim) {
        return Err(CemError::Dimension {
            what: "candidate weights",
            expected: dim,
            got: w.len(),
        });
    }
    let rewards: Vec<f64> = scored.iter().map(|(_, r)| *r).collect();
    let k = elite_count(scored.len(), elite_frac);
    let elite: Vec<&[f64]> = ranking(&rewards)[..k]
        .iter()
        .map(|&i| scored[i].0.as_slice())
        .collect();
    let kf = k as f64;
    let noise = extra_noise(dist.epoch);
    let mut mean = vec![0.0; dim];
    let mut stddev = vec![0.0; dim];
    for j in 0..dim {
        let m = elite.iter().map(|w| w[j]).sum::<f64>() / kf;
        let var = elite.iter().map(|w| (w[j] - m) * (w[j] - m)).sum::<f64>() / kf;
        mean[j] = m;
        stddev[j] = (var.sqrt() + noise).max(stddev_floor);
    }
    Ok(SearchDistribution {
        mean,
        stddev,
        epoch: dist.epoch + 1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Gaussian,
    Manual,
    Random,
}

impl Origin {
    pub fn as_str(self) -> &'static str {
        match self {
            Origin::Gaussian => "gaussian",
            Origin::Manual => "manual",
            Origin::Random => "random",
        }
    }
}

/// How the first population is split between Gaussian draws and candidates
/// grounded on sampled parameter sets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeedingMix {
    pub enabled: bool,
}

impl Default for SeedingMix {
    fn default() -> Self {
        Self { enabled: true }
    }
}

/// `(gaussian, manual, random)` counts for the first population: half
/// grounded, manual rounded up.
pub fn seeding_split(n: usize) -> (usize, usize, usize) {
    let grounded = n / 2;
    let manual = grounded.div_ceil(2);
    (n - grounded, manual, grounded - manual)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub weights: Vec<f64>,
    pub origin: Origin,
}

/// A weight vector whose hidden layer is silent, so the output is pinned to
/// `tanh(b2)` and decodes to `target` for any state.
pub fn grounded_weights<R: Rng + ?Sized>(
    shape: &PolicyShape,
    dist: &SearchDistribution,
    target: &ParameterSet,
    rng: &mut R,
) -> Vec<f64> {
    let mut w = dist.sample(rng);
    for i in shape.w1_range().chain(shape.b1_range()) {
        w[i] = 0.0;
    }
    let encoded = target.encode();
    for (slot, (p, e)) in shape
        .b2_range()
        .zip(crate::action::Param::ALL.into_iter().zip(encoded))
    {
        let top = (p.spec().value_count() - 1) as f64;
        // Grid end points sit at +-1; pull them a quarter cell inward.
        let inset = 0.5 / top;
        let e = e.clamp(-1.0 + inset, 1.0 - inset);
        w[slot] = e.atanh();
    }
    w
}

pub fn sample_population<R: Rng + ?Sized>(
    shape: &PolicyShape,
    dist: &SearchDistribution,
    n: usize,
    seeding: SeedingMix,
    space: &ActionSpace,
    rng: &mut R,
) -> Result<Vec<Candidate>, CemError> {
    if n < 1 {
        return Err(CemError::Config("population must be positive".into()));
    }
    let (gaussian, manual, random) = if dist.epoch == 0 && seeding.enabled && shape.output_dim == crate::action::PARAM_COUNT {
        seeding_split(n)
    } else {
        (n, 0, 0)
    };
    let mut out = Vec::with_capacity(n);
    for _ in 0..gaussian {
        out.push(Candidate {
            weights: dist.sample(rng),
            origin: Origin::Gaussian,
        });
    }
    for (count, mode, origin) in [
        (manual, SampleMode::ManualRange, Origin::Manual),
        (random, SampleMode::UniformRandom, Origin::Random),
    ] {
        for _ in 0..count {
            let target = space.sample_candidate(mode, rng)?;
            out.push(Candidate {
                weights: grounded_weights(shape, dist, &target, rng),
                origin,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CemConfig {
    pub population: usize,
    pub elite_frac: f64,
    pub epochs: u64,
    pub policy: PolicyShape,
    pub stddev_floor: f64,
    pub seeding: SeedingMix,
}

impl Default for CemConfig {
    fn default() -> Self {
        Self {
            population: 50,
            elite_frac: 0.2,
            epochs: 150,
            policy: PolicyShape::default(),
            stddev_floor: 0.01,
            seeding: SeedingMix::default(),
        }
    }
}

impl CemConfig {
    pub fn validate(&self) -> Result<(), CemError> {
        if self.epochs < 1 {
            return Err(CemError::Config("epochs must be at least 1".into()));
        }
        if self.population < 2 {
            return Err(CemError::Config("population must be at least 2".into()));
        }
        if !(self.elite_frac > 0.0 && self.elite_frac <= 1.0) {
            return Err(CemError::Config(format!(
                "elite_frac {} outside (0, 1]",
                self.elite_frac
            )));
        }
        if !(self.stddev_floor >= 0.0) {
            return Err(CemError::Config("stddev_floor must be non-negative".into()));
        }
        self.policy.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: u64,
    pub rewards: Vec<f64>,
    pub p25: f64,
    pub median: f64,
    pub mean: f64,
    pub p75: f64,
    pub best_reward: f64,
    pub best_index: usize,
    pub best_action: ParameterSet,
    pub baseline: f64,
    /// Elite candidate indices, best first.
    pub elite: Vec<usize>,
}

impl EpochStats {
    /// Summary statistics of `rewards`; percentiles interpolate linearly at
    /// `q·(n−1)` in the ascending sort.
    pub fn summarize(
        epoch: u64,
        rewards: Vec<f64>,
        best_action: ParameterSet,
        baseline: f64,
        elite_frac: f64,
    ) -> Self {
        let mut sorted = rewards.clone();
        sorted.sort_by(f64::total_cmp);
        let order = ranking(&rewards);
        let k = elite_count(rewards.len(), elite_frac);
        Self {
            epoch,
            p25: stats::percentile_sorted(&sorted, 0.25),
            median: stats::percentile_sorted(&sorted, 0.5),
            mean: stats::mean(&rewards),
            p75: stats::percentile_sorted(&sorted, 0.75),
            best_reward: order.first().map_or(0.0, |&i| rewards[i]),
            best_index: order.first().copied().unwrap_or(0),
            best_action,
            baseline,
            elite: order[..k.min(order.len())].to_vec(),
            rewards,
        }
    }
}

/// One evaluated candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub epoch: u64,
    pub candidate: usize,
    pub origin: Origin,
    pub action: ParameterSet,
    pub result: StepResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochOutcome {
    pub dist: SearchDistribution,
    pub stats: EpochStats,
    /// State of the best session; every candidate of the next epoch reads it.
    pub next_state: FeatureVector,
    pub steps: Vec<StepRecord>,
}

/// Seed offset of candidate `index` in `epoch`.
pub fn candidate_seed(seed: u64, epoch: u64, index: usize) -> u64 {
    derive_seed(seed, &[label::CANDIDATE, epoch, index as u64])
}

/// Samples, evaluates (in parallel) and refits one epoch.
pub fn run_epoch(
    env: &Environment,
    dist: &SearchDistribution,
    cfg: &CemConfig,
    space: &ActionSpace,
    state: &FeatureVector,
    baseline: f64,
    seed: u64,
) -> Result<EpochOutcome, CemError> {
    let epoch = dist.epoch;
    let mut rng = stream(seed, &[label::POPULATION, epoch]);
    let population = sample_population(&cfg.policy, dist, cfg.population, cfg.seeding, space, &mut rng)?;
    let steps = population
        .par_iter()
        .enumerate()
        .map(|(i, c)| -> Result<StepRecord, CemError> {
            let out = policy_forward(&cfg.policy, &c.weights, &state.values)?;
            let action = decode_action(&out)?;
            let result = env.step(&action, candidate_seed(seed, epoch, i))?;
            Ok(StepRecord {
                epoch,
                candidate: i,
                origin: c.origin,
                action,
                result,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let rewards: Vec<f64> = steps.iter().map(|s| s.result.reward).collect();
    let scored: Vec<(Vec<f64>, f64)> = population
        .into_iter()
        .zip(&rewards)
        .map(|(c, &r)| (c.weights, r))
        .collect();
    let next = elite_update(dist, &scored, cfg.elite_frac, cfg.stddev_floor)?;
    let best = ranking(&rewards)[0];
    let stats = EpochStats::summarize(epoch, rewards, steps[best].action, baseline, cfg.elite_frac);
    Ok(EpochOutcome {
        dist: next,
        stats,
        next_state: steps[best].result.state.clone(),
        steps,
    })
}

/// One refit on a plain objective over the weights, without the simulator.
pub fn optimize_step<F, R>(
    dist: &SearchDistribution,
    n: usize,
    elite_frac: f64,
    stddev_floor: f64,
    rng: &mut R,
    objective: F,
) -> Result<(SearchDistribution, Vec<f64>), CemError>
where
    F: Fn(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    let scored: Vec<(Vec<f64>, f64)> = (0..n)
        .map(|_| {
            let w = dist.sample(rng);
            let f = objective(&w);
            (w, f)
        })
        .collect();
    let rewards = scored.iter().map(|(_, r)| *r).collect();
    Ok((elite_update(dist, &scored, elite_frac, stddev_floor)?, rewards))
}
