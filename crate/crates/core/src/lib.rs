//! Closed-loop tuning of 5G downlink scheduler parameters.
//!
//! A deterministic TTI-level cell simulator ([`sim`]) stands in for a live
//! cell. Its slot traces are binned and summarised ([`kpi`]), scored by a
//! weighted KPI reward ([`objective`]), and wrapped in a one-step environment
//! ([`env`]). A cross-entropy-method search over MLP policy weights ([`cem`])
//! proposes parameter sets ([`action`]); [`experiment`] runs the baseline and
//! the optimisation loop and writes the result files.

// `!(x > 0.0)` is used deliberately so that NaN fails range checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod action;
pub mod cem;
pub mod env;
pub mod experiment;
pub mod kpi;
pub mod objective;
pub mod rng;
pub mod sim;
pub mod stats;

pub use action::{decode_action, ActionSpace, Param, ParameterSet, RawParameterSet};
pub use cem::{EpochStats, PolicyShape, SearchDistribution};
pub use env::{EnvConfig, Environment, StepResult};
pub use experiment::{ExperimentConfig, ExperimentReport};
pub use kpi::{AggregatedBin, FeatureVector, KpiVector};
pub use objective::ObjectiveConfig;
pub use sim::{Scenario, SimConfig, TtiTrace};
