//! Link adaptation: CQI mapping, MCS and rank selection, outer-loop offset,
//! and the BLER model that turns an allocation into an ACK/NACK/DTX outcome.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{SimConfig, UeState};
use crate::action::ParameterSet;

pub const MCS_COUNT: usize = 28;
pub const MAX_MCS: u8 = 27;
pub const MAX_CQI: f64 = 15.0;

/// Spectral efficiency (bits per resource element) of the 256QAM MCS table.
const SPECTRAL_EFFICIENCY: [f64; MCS_COUNT] = [
    0.2344, 0.3770, 0.6016, 0.8770, 1.1758, 1.4766, 1.6953, 1.9141, 2.1602, 2.4063, 2.5703,
    2.7305, 3.0293, 3.3223, 3.6094, 3.9023, 4.2129, 4.5234, 4.8164, 5.1152, 5.3320, 5.5547,
    5.8906, 6.2266, 6.5703, 6.9141, 7.1602, 7.4063,
];

/// Data resource elements per RB per slot (12 subcarriers x 11 symbols).
const DATA_RE_PER_RB: f64 = 132.0;

const THRESHOLD_BASE_DB: f64 = -6.0;
const THRESHOLD_SPACING_DB: f64 = 1.1;

/// Bits one RB carries on one layer at `mcs`.
pub fn bits_per_rb(mcs: u8) -> u64 {
    (SPECTRAL_EFFICIENCY[mcs as usize] * DATA_RE_PER_RB).round() as u64
}

/// SINR at which an initial transmission at `mcs` fails half the time.
pub fn threshold_db(mcs: u8) -> f64 {
    THRESHOLD_BASE_DB + THRESHOLD_SPACING_DB * mcs as f64
}

/// Instantaneous CQI: clamp((sinr + 6) / 2, 0, 15).
pub fn sinr_to_cqi(sinr_db: f64) -> f64 {
    ((sinr_db + 6.0) / 2.0).clamp(0.0, MAX_CQI)
}

/// Inverse of [`sinr_to_cqi`] on its unclamped range.
pub fn cqi_to_sinr(cqi: f64) -> f64 {
    2.0 * cqi - 6.0
}

/// Highest MCS whose threshold is met by `sinr_db`; 0 when none is.
pub fn mcs_for_sinr(sinr_db: f64) -> u8 {
    // Thresholds are evenly spaced, but a scan keeps this exact at the edges.
    (0..=MAX_MCS)
        .rev()
        .find(|&m| threshold_db(m) <= sinr_db)
        .unwrap_or(0)
}

fn rank_penalty(rank: u8, cfg: &SimConfig) -> f64 {
    (rank.saturating_sub(1)) as f64 * cfg.rank_penalty_db
}

/// SINR the scheduler believes a UE has on each layer at `rank`.
pub fn estimated_sinr(ue: &UeState, rank: u8, cfg: &SimConfig) -> f64 {
    cqi_to_sinr(ue.filtered_cqi) + ue.olla_offset_db - rank_penalty(rank, cfg)
}

/// Rank in `1..=cap` with the highest estimated rate; a rank above one is
/// only eligible if its per-layer estimate clears the lowest MCS threshold.
pub fn select_rank(ue: &UeState, cap: u8, cfg: &SimConfig) -> u8 {
    let mut best = (1u8, 0u64);
    for r in 1..=cap.max(1) {
        let est = estimated_sinr(ue, r, cfg);
        if r > 1 && est < threshold_db(0) {
            break;
        }
        let rate = bits_per_rb(mcs_for_sinr(est)) * r as u64;
        if rate > best.1 {
            best = (r, rate);
        }
    }
    best.0
}

/// Result of MCS selection; the smoother state is committed only for UEs
/// that actually get scheduled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McsChoice {
    pub mcs: u8,
    pub smoothed: f64,
}

/// Picks the MCS for a new transmission at the UE's current rank.
pub fn select_mcs(ue: &UeState, params: &ParameterSet, cfg: &SimConfig) -> McsChoice {
    let mut target = mcs_for_sinr(estimated_sinr(ue, ue.rank, cfg)) as f64;
    if params.adaptive_mcs_selection()
        && ue.initial_error_rate() > 2.0 * params.ibler_target()
        && target > 0.0
    {
        target -= 1.0;
    }
    let alpha = params.mcs_filter() / 2.0;
    let smoothed = match ue.mcs_smoothed {
        Some(prev) if alpha > 0.0 => alpha * prev + (1.0 - alpha) * target,
        _ => target,
    };
    let mcs = (smoothed.round() as u8).min(params.max_mcs_cap()).min(MAX_MCS);
    McsChoice { mcs, smoothed }
}

/// Step applied on an ACK so that the walk's fixed point sits at `ibler_target`.
pub fn olla_step_up(step_down_db: f64, ibler_target: f64) -> f64 {
    step_down_db * ibler_target / (1.0 - ibler_target)
}

/// One outer-loop step for an initial-transmission outcome.
pub fn olla_update(
    offset_db: f64,
    outcome: Outcome,
    ibler_target: f64,
    step_down_db: f64,
    clamp_db: f64,
) -> f64 {
    let next = match outcome {
        Outcome::Ack => offset_db + olla_step_up(step_down_db, ibler_target),
        Outcome::Nack | Outcome::Dtx => offset_db - step_down_db,
        Outcome::NotScheduled => offset_db,
    };
    next.clamp(-clamp_db, clamp_db)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Ack,
    Nack,
    Dtx,
    NotScheduled,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Ack => "ACK",
            Outcome::Nack => "NACK",
            Outcome::Dtx => "DTX",
            Outcome::NotScheduled => "-",
        }
    }
}

/// Block error probability of a transmission at `mcs`.
pub fn bler(
    mcs: u8,
    sinr_db: f64,
    rank: u8,
    pmi_enhancement: bool,
    attempt: u8,
    cfg: &SimConfig,
) -> f64 {
    let pmi = if pmi_enhancement { cfg.pmi_gain_db } else { 0.0 };
    let effective = sinr_db + pmi - rank_penalty(rank, cfg)
        + attempt as f64 * cfg.harq_combining_gain_db;
    1.0 / (1.0 + ((effective - threshold_db(mcs)) / cfg.bler_slope_db).exp())
}

/// Draws the HARQ feedback for one transmission. Two uniforms are consumed
/// on every call so the stream position is independent of the outcome.
#[allow(clippy::too_many_arguments)]
pub fn transmit_outcome<R: Rng + ?Sized>(
    mcs: u8,
    sinr_db: f64,
    rank: u8,
    pmi_enhancement: bool,
    attempt: u8,
    cfg: &SimConfig,
    rng: &mut R,
) -> Outcome {
    let dtx_draw: f64 = rng.random();
    let err_draw: f64 = rng.random();
    if dtx_draw < cfg.p_dtx {
        Outcome::Dtx
    } else if err_draw < bler(mcs, sinr_db, rank, pmi_enhancement, attempt, cfg) {
        Outcome::Nack
    } else {
        Outcome::Ack
    }
}
