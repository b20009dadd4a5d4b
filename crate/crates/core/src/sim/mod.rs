//! Deterministic TTI-level simulator of a single 5G NR downlink cell.
//!
//! One slot is 0.5 ms (30 kHz numerology), so a second holds 2000 slots. A
//! fixed DDDDU pattern makes four of every five slots downlink, giving 1600
//! downlink TTIs per second. Each downlink slot runs the scheduler: pending
//! HARQ retransmissions first, then proportional-fair new transmissions,
//! subject to the RB and PDCCH CCE budgets.

mod cell;
pub mod channel;
pub mod link;
mod scenario;
mod session;
mod trace;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cell::{allocate_tti, CellState};
pub use link::Outcome;
pub use scenario::{ActivePhase, AppKind, AppPhase, CoverageClass, OfferedRate, Scenario, UeProfile};
pub use session::{run_session, session_slots, simulate};
pub use trace::{write_trace_csv, SlotKind, TtiTrace, UeRecord};

pub const SLOTS_PER_SECOND: u64 = 2000;
pub const DL_SLOTS_PER_SECOND: u64 = 1600;
/// Length of the TDD pattern; the last slot of each period is uplink.
pub const TDD_PERIOD: u64 = 5;

pub fn slot_kind(slot: u64) -> SlotKind {
    if slot % TDD_PERIOD < TDD_PERIOD - 1 {
        SlotKind::Downlink
    } else {
        SlotKind::Other
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("simulator configuration: {0}")]
    Config(String),
    #[error("scenario: {0}")]
    Scenario(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Channel, link and scheduler constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub n_rbs: u16,
    /// AR(1) coefficient of the SINR deviation, per slot.
    pub ar_coefficient: f64,
    pub olla_step_down_db: f64,
    pub olla_clamp_db: f64,
    pub bler_slope_db: f64,
    pub pmi_gain_db: f64,
    /// Per-layer SINR loss for each layer above the first.
    pub rank_penalty_db: f64,
    pub p_dtx: f64,
    pub feedback_delay_slots: u64,
    pub max_retx: u8,
    pub harq_combining_gain_db: f64,
    pub harq_processes: usize,
    pub cce_budget: u16,
    /// Initial transmissions tracked by adaptive MCS selection.
    pub adaptive_mcs_window: usize,
    /// Time constant (downlink slots) of the PF average-throughput filter.
    pub pf_time_constant: f64,
    /// Backlog kept topped up for full-buffer traffic.
    pub full_buffer_bits: u64,
    pub video_period_s: f64,
    /// Fraction of each video period during which the server sends.
    pub video_duty_cycle: f64,
    pub messaging_period_s: f64,
    /// Uplink ACK-probability shift with PMI enhancement enabled.
    pub ul_pmi_shift: f64,
    /// Uplink ACK-probability shift at rank cap 1, scaling to 0 at cap 8.
    pub ul_low_rank_shift: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_rbs: 273,
            ar_coefficient: 0.98,
            olla_step_down_db: 0.5,
            olla_clamp_db: 10.0,
            bler_slope_db: 1.0,
            pmi_gain_db: 1.0,
            rank_penalty_db: 3.0,
            p_dtx: 0.005,
            feedback_delay_slots: 8,
            max_retx: 3,
            harq_combining_gain_db: 3.0,
            harq_processes: 16,
            cce_budget: 48,
            adaptive_mcs_window: 200,
            pf_time_constant: 100.0,
            full_buffer_bits: 20_000_000,
            video_period_s: 1.0,
            video_duty_cycle: 0.5,
            messaging_period_s: 0.1,
            ul_pmi_shift: 0.005,
            ul_low_rank_shift: 0.005,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::Config(m.to_string()));
        if self.n_rbs == 0 {
            return bad("n_rbs must be positive");
        }
        if !(0.0..=1.0).contains(&self.ar_coefficient) {
            return bad("ar_coefficient outside [0, 1]");
        }
        if !(self.olla_step_down_db > 0.0) || !(self.olla_clamp_db > 0.0) {
            return bad("outer-loop step and clamp must be positive");
        }
        if !(self.bler_slope_db > 0.0) {
            return bad("bler_slope_db must be positive");
        }
        if !(0.0..=1.0).contains(&self.p_dtx) {
            return bad("p_dtx outside [0, 1]");
        }
        if self.feedback_delay_slots == 0 || self.harq_processes == 0 {
            return bad("feedback delay and HARQ process count must be positive");
        }
        if self.cce_budget < 16 {
            return bad("cce_budget must fit at least one aggregation-level-16 grant");
        }
        if self.adaptive_mcs_window == 0 || !(self.pf_time_constant >= 1.0) {
            return bad("adaptive MCS window and PF time constant must be positive");
        }
        if !(self.video_period_s > 0.0)
            || !(self.messaging_period_s > 0.0)
            || !(self.video_duty_cycle > 0.0 && self.video_duty_cycle <= 1.0)
        {
            return bad("traffic periods must be positive and duty cycle in (0, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HarqState {
    Idle,
    AwaitingFeedback,
    PendingRetx,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarqProcess {
    pub state: HarqState,
    pub tb_bits: u64,
    pub mcs: u8,
    pub rank: u8,
    pub retx_count: u8,
    /// Outcome drawn at transmission, revealed at `feedback_slot`.
    pub(crate) pending: Outcome,
    pub(crate) feedback_slot: u64,
}

impl HarqProcess {
    fn idle() -> Self {
        Self {
            state: HarqState::Idle,
            tb_bits: 0,
            mcs: 0,
            rank: 1,
            retx_count: 0,
            pending: Outcome::NotScheduled,
            feedback_slot: 0,
        }
    }
}

/// Dynamic per-UE scheduler state.
#[derive(Debug, Clone, PartialEq)]
pub struct UeState {
    pub sinr_db: f64,
    pub(crate) sinr_deviation_db: f64,
    pub filtered_cqi: f64,
    pub olla_offset_db: f64,
    pub rank: u8,
    /// Bits queued for the UE, including bits in flight awaiting feedback.
    pub buffer_bits: u64,
    pub(crate) inflight_bits: u64,
    pub harq_processes: Vec<HarqProcess>,
    /// PF average served bits per downlink slot.
    pub(crate) avg_throughput: f64,
    pub(crate) mcs_smoothed: Option<f64>,
    recent_initial_errors: VecDeque<bool>,
    recent_error_count: usize,
    window: usize,
    pub(crate) arrival_carry: f64,
}

impl UeState {
    pub fn new(profile: &UeProfile, initial_rank: u8, cfg: &SimConfig) -> Self {
        Self {
            sinr_db: profile.mean_sinr_db,
            sinr_deviation_db: 0.0,
            filtered_cqi: link::sinr_to_cqi(profile.mean_sinr_db),
            olla_offset_db: 0.0,
            rank: initial_rank.clamp(1, 8),
            buffer_bits: 0,
            inflight_bits: 0,
            harq_processes: vec![HarqProcess::idle(); cfg.harq_processes],
            avg_throughput: 1.0,
            mcs_smoothed: None,
            recent_initial_errors: VecDeque::with_capacity(cfg.adaptive_mcs_window),
            recent_error_count: 0,
            window: cfg.adaptive_mcs_window,
            arrival_carry: 0.0,
        }
    }

    /// Bits not yet handed to a HARQ process.
    pub fn schedulable_bits(&self) -> u64 {
        self.buffer_bits.saturating_sub(self.inflight_bits)
    }

    /// Initial-transmission error rate over the tracking window.
    pub fn initial_error_rate(&self) -> f64 {
        if self.recent_initial_errors.is_empty() {
            0.0
        } else {
            self.recent_error_count as f64 / self.recent_initial_errors.len() as f64
        }
    }

    pub(crate) fn record_initial(&mut self, failed: bool) {
        if self.recent_initial_errors.len() == self.window
            && self.recent_initial_errors.pop_front() == Some(true)
        {
            self.recent_error_count -= 1;
        }
        self.recent_initial_errors.push_back(failed);
        if failed {
            self.recent_error_count += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tdd_pattern_gives_1600_dl_slots() {
        let dl = (0..SLOTS_PER_SECOND)
            .filter(|&s| slot_kind(s) == SlotKind::Downlink)
            .count() as u64;
        assert_eq!(dl, DL_SLOTS_PER_SECOND);
    }

    #[test]
    fn error_window_rolls() {
        let cfg = SimConfig {
            adaptive_mcs_window: 4,
            ..SimConfig::default()
        };
        let p = UeProfile::default_for(0, CoverageClass::Medium);
        let mut ue = UeState::new(&p, 1, &cfg);
        for f in [true, true, false, false] {
            ue.record_initial(f);
        }
        assert_eq!(ue.initial_error_rate(), 0.5);
        ue.record_initial(false);
        ue.record_initial(false);
        assert_eq!(ue.initial_error_rate(), 0.0);
    }

    #[test]
    fn config_validation() {
        SimConfig::default().validate().unwrap();
        let c = SimConfig {
            p_dtx: 1.5,
            ..SimConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
