use rand::Rng;

use super::channel::{report_cqi, sinr_evolve, sinr_init};
use super::link::{self, bits_per_rb, olla_update, select_mcs, select_rank, transmit_outcome};
use super::scenario::AppKind;
use super::trace::{SlotKind, TtiTrace, UeRecord};
use super::{
    slot_kind, HarqState, Outcome, Scenario, SimConfig, SimError, UeState, SLOTS_PER_SECOND,
};
use crate::action::ParameterSet;
use crate::rng::{self, label, Stream};

/// Aggregation level index (0..4 for levels 2, 4, 8, 16) and its CCE cost.
fn aggregation_level(cqi: f64, adaptive: bool) -> (usize, u16) {
    if !adaptive {
        return (2, 8);
    }
    match cqi {
        c if c >= 12.0 => (0, 2),
        c if c >= 8.0 => (1, 4),
        c if c >= 4.0 => (2, 8),
        _ => (3, 16),
    }
}

/// Complete mutable state of one simulated cell.
pub struct CellState<'a> {
    scenario: &'a Scenario,
    pub ues: Vec<UeState>,
    slot: u64,
    channel_streams: Vec<Stream>,
    outcome_streams: Vec<Stream>,
    uplink_stream: Stream,
    in_full_buffer: Vec<bool>,
}

impl<'a> CellState<'a> {
    pub fn new(scenario: &'a Scenario, params: &ParameterSet, seed: u64) -> Self {
        let cfg = &scenario.sim;
        let n = scenario.ues.len() as u64;
        let mut channel_streams: Vec<Stream> =
            (0..n).map(|i| rng::stream(seed, &[label::CHANNEL, i])).collect();
        let ues = scenario
            .ues
            .iter()
            .zip(channel_streams.iter_mut())
            .map(|(profile, r)| {
                let mut ue = UeState::new(profile, params.initial_rank(), cfg);
                sinr_init(&mut ue, profile, r);
                ue.filtered_cqi = link::sinr_to_cqi(ue.sinr_db);
                ue
            })
            .collect();
        Self {
            scenario,
            ues,
            slot: 0,
            channel_streams,
            outcome_streams: (0..n).map(|i| rng::stream(seed, &[label::OUTCOME, i])).collect(),
            uplink_stream: rng::stream(seed, &[label::UPLINK]),
            in_full_buffer: vec![false; n as usize],
        }
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    fn cfg(&self) -> &'a SimConfig {
        &self.scenario.sim
    }

    /// Simulates the next slot and returns its trace.
    pub fn step(&mut self, params: &ParameterSet) -> Result<TtiTrace, SimError> {
        let slot = self.slot;
        let mut drops = 0u8;
        let rho = self.cfg().ar_coefficient;
        for i in 0..self.ues.len() {
            let profile = &self.scenario.ues[i];
            sinr_evolve(
                &mut self.ues[i],
                profile,
                rho,
                &mut self.channel_streams[i],
            );
            report_cqi(&mut self.ues[i], params.cqi_filter_coeff())?;
            self.arrivals(i, slot);
            drops = drops.saturating_add(self.feedback(i, slot, params));
        }
        let mut trace = match slot_kind(slot) {
            SlotKind::Downlink => allocate_tti(self, params),
            SlotKind::Other => self.uplink_slot(params),
        };
        trace.harq_drops = drops;
        self.slot += 1;
        Ok(trace)
    }

    fn arrivals(&mut self, i: usize, slot: u64) {
        let cfg = self.cfg();
        let phase = self.scenario.active_phase(i, slot);
        let ue = &mut self.ues[i];
        let full = matches!(phase, Some(p) if p.kind == AppKind::SpeedTest);
        if full {
            ue.buffer_bits = ue.buffer_bits.max(ue.inflight_bits + cfg.full_buffer_bits);
        } else if self.in_full_buffer[i] {
            // The speed test ended: unsent backlog is abandoned.
            ue.buffer_bits = ue.inflight_bits;
        }
        self.in_full_buffer[i] = full;
        let Some(p) = phase else { return };
        let sps = SLOTS_PER_SECOND as f64;
        match p.kind {
            AppKind::VideoStream => {
                let period = ((cfg.video_period_s * sps).round() as u64).max(1);
                let on = (cfg.video_duty_cycle * period as f64).round() as u64;
                if p.slot_in_phase % period < on {
                    ue.arrival_carry += p.rate_bps / cfg.video_duty_cycle / sps;
                    let bits = ue.arrival_carry.floor();
                    ue.arrival_carry -= bits;
                    ue.buffer_bits += bits as u64;
                }
            }
            AppKind::Messaging => {
                let period = ((cfg.messaging_period_s * sps).round() as u64).max(1);
                if p.slot_in_phase % period == 0 {
                    ue.buffer_bits += (p.rate_bps * cfg.messaging_period_s).round() as u64;
                }
            }
            AppKind::SpeedTest | AppKind::Idle => {}
        }
    }

    /// Reveals HARQ feedback due at `slot`; returns the number of dropped TBs.
    fn feedback(&mut self, i: usize, slot: u64, params: &ParameterSet) -> u8 {
        let cfg = self.cfg();
        let ue = &mut self.ues[i];
        let mut drops = 0u8;
        for k in 0..ue.harq_processes.len() {
            let p = &ue.harq_processes[k];
            if p.state != HarqState::AwaitingFeedback || p.feedback_slot > slot {
                continue;
            }
            let (outcome, tb, initial) = (p.pending, p.tb_bits, p.retx_count == 0);
            if initial {
                ue.olla_offset_db = olla_update(
                    ue.olla_offset_db,
                    outcome,
                    params.ibler_target(),
                    cfg.olla_step_down_db,
                    cfg.olla_clamp_db,
                );
                ue.record_initial(outcome != Outcome::Ack);
            }
            let p = &mut ue.harq_processes[k];
            match outcome {
                Outcome::Ack => {
                    ue.buffer_bits = ue.buffer_bits.saturating_sub(tb);
                    ue.inflight_bits = ue.inflight_bits.saturating_sub(tb);
                    p.state = HarqState::Idle;
                    p.tb_bits = 0;
                }
                _ if p.retx_count < cfg.max_retx => p.state = HarqState::PendingRetx,
                _ => {
                    // Bits go back to the queue for a fresh attempt.
                    ue.inflight_bits = ue.inflight_bits.saturating_sub(tb);
                    p.state = HarqState::Idle;
                    p.tb_bits = 0;
                    drops = drops.saturating_add(1);
                }
            }
        }
        drops
    }

    fn idle_record(ue: &UeState) -> UeRecord {
        UeRecord {
            scheduled: false,
            mcs: 0,
            rbs: 0,
            tb_bits: 0,
            outcome: Outcome::NotScheduled,
            is_retx: false,
            cqi: ue.filtered_cqi,
            rank: ue.rank,
            buffer_bits: ue.buffer_bits,
            olla_offset_db: ue.olla_offset_db,
        }
    }

    fn uplink_slot(&mut self, params: &ParameterSet) -> TtiTrace {
        let cfg = self.cfg();
        let shift = if params.pmi_enhancement() { cfg.ul_pmi_shift } else { 0.0 }
            + cfg.ul_low_rank_shift * (8 - params.initial_rank()) as f64 / 7.0;
        let (mut ack, mut nack) = (0u8, 0u8);
        for (i, profile) in self.scenario.ues.iter().enumerate() {
            let active = matches!(
                self.scenario.active_phase(i, self.slot),
                Some(p) if p.kind != AppKind::Idle
            );
            let draw: f64 = self.uplink_stream.random();
            if active {
                if draw < (profile.ul_ack_probability() + shift).min(1.0) {
                    ack += 1;
                } else {
                    nack += 1;
                }
            }
        }
        TtiTrace {
            tti_index: self.slot,
            slot_kind: SlotKind::Other,
            ues: self.ues.iter().map(Self::idle_record).collect(),
            cce_usage: [0; 4],
            total_rbs_used: 0,
            ul_ack: ack,
            ul_nack: nack,
            harq_drops: 0,
        }
    }
}

struct NewTxCandidate {
    ue: usize,
    rank: u8,
    choice: link::McsChoice,
    bits_per_rb: u64,
    metric: f64,
    demand: u64,
}

/// Schedules one downlink slot.
///
/// Pending retransmissions go first, each needing a PDCCH grant and enough RBs
/// for its unchanged TB. The remaining UEs with data and a free HARQ process
/// are ranked by the proportional-fair metric, admitted to the CCE budget in
/// that order, and share the leftover RBs in proportion to their metric.
pub fn allocate_tti(cell: &mut CellState<'_>, params: &ParameterSet) -> TtiTrace {
    let cfg = cell.cfg();
    let slot = cell.slot;
    let n = cell.ues.len();
    let mut records: Vec<UeRecord> = cell.ues.iter().map(CellState::idle_record).collect();
    let mut remaining = cfg.n_rbs as u64;
    let mut cce_used = 0u16;
    let mut cce_usage = [0u16; 4];
    let mut served = vec![0u64; n];
    let mut busy = vec![false; n];
    let adaptive_pdcch = params.pdcch_adaptive();

    for i in 0..n {
        let ue = &mut cell.ues[i];
        let Some(k) = ue
            .harq_processes
            .iter()
            .position(|p| p.state == HarqState::PendingRetx)
        else {
            continue;
        };
        busy[i] = true;
        let (lvl, cost) = aggregation_level(ue.filtered_cqi, adaptive_pdcch);
        let p = &ue.harq_processes[k];
        let need_at = |m: u8| p.tb_bits.div_ceil(bits_per_rb(m) * p.rank as u64).max(1);
        // The enhanced (one step lower) MCS is used only when the larger
        // allocation still fits; otherwise the TB could never be resent.
        let mcs = match p.mcs.checked_sub(1) {
            Some(lower) if params.harq_enhancement() && need_at(lower) <= remaining => lower,
            _ => p.mcs,
        };
        let need = need_at(mcs);
        if need > remaining || cce_used + cost > cfg.cce_budget {
            continue;
        }
        let attempt = p.retx_count + 1;
        let outcome = transmit_outcome(
            mcs,
            ue.sinr_db,
            p.rank,
            params.pmi_enhancement(),
            attempt,
            cfg,
            &mut cell.outcome_streams[i],
        );
        remaining -= need;
        cce_used += cost;
        cce_usage[lvl] += 1;
        let p = &mut ue.harq_processes[k];
        p.mcs = mcs;
        p.retx_count = attempt;
        p.state = HarqState::AwaitingFeedback;
        p.pending = outcome;
        p.feedback_slot = slot + cfg.feedback_delay_slots;
        served[i] = p.tb_bits;
        records[i] = UeRecord {
            scheduled: true,
            mcs,
            rbs: need as u16,
            tb_bits: p.tb_bits,
            outcome,
            is_retx: true,
            rank: p.rank,
            ..records[i].clone()
        };
    }

    let fe = params.fairness_exponent();
    let mut cands: Vec<NewTxCandidate> = Vec::with_capacity(n);
    for i in 0..n {
        if busy[i] {
            continue;
        }
        let ue = &mut cell.ues[i];
        ue.rank = select_rank(ue, params.initial_rank(), cfg);
        records[i].rank = ue.rank;
        let want = ue.schedulable_bits();
        if want == 0 || !ue.harq_processes.iter().any(|p| p.state == HarqState::Idle) {
            continue;
        }
        let choice = select_mcs(ue, params, cfg);
        let per_rb = bits_per_rb(choice.mcs) * ue.rank as u64;
        cands.push(NewTxCandidate {
            ue: i,
            rank: ue.rank,
            choice,
            bits_per_rb: per_rb,
            metric: per_rb as f64 / ue.avg_throughput.max(1.0).powf(fe),
            demand: want.div_ceil(per_rb),
        });
    }
    cands.sort_by(|a, b| b.metric.total_cmp(&a.metric).then(a.ue.cmp(&b.ue)));

    let mut budget = cce_used;
    cands.retain(|c| {
        let (_, cost) = aggregation_level(cell.ues[c.ue].filtered_cqi, adaptive_pdcch);
        if budget + cost <= cfg.cce_budget {
            budget += cost;
            true
        } else {
            false
        }
    });

    let alloc = split_rbs(&cands, remaining);
    for (c, &rbs) in cands.iter().zip(&alloc) {
        if rbs == 0 {
            continue;
        }
        let i = c.ue;
        let ue = &mut cell.ues[i];
        let (lvl, _) = aggregation_level(ue.filtered_cqi, adaptive_pdcch);
        cce_usage[lvl] += 1;
        remaining -= rbs;
        let tb = (rbs * c.bits_per_rb).min(ue.schedulable_bits());
        let outcome = transmit_outcome(
            c.choice.mcs,
            ue.sinr_db,
            c.rank,
            params.pmi_enhancement(),
            0,
            cfg,
            &mut cell.outcome_streams[i],
        );
        let k = ue
            .harq_processes
            .iter()
            .position(|p| p.state == HarqState::Idle)
            .expect("candidate has an idle process");
        let p = &mut ue.harq_processes[k];
        p.state = HarqState::AwaitingFeedback;
        p.tb_bits = tb;
        p.mcs = c.choice.mcs;
        p.rank = c.rank;
        p.retx_count = 0;
        p.pending = outcome;
        p.feedback_slot = slot + cfg.feedback_delay_slots;
        ue.inflight_bits += tb;
        ue.mcs_smoothed = Some(c.choice.smoothed);
        served[i] = tb;
        records[i] = UeRecord {
            scheduled: true,
            mcs: c.choice.mcs,
            rbs: rbs as u16,
            tb_bits: tb,
            outcome,
            is_retx: false,
            rank: c.rank,
            ..records[i].clone()
        };
    }

    let tc = cfg.pf_time_constant;
    for (ue, s) in cell.ues.iter_mut().zip(&served) {
        ue.avg_throughput += (*s as f64 - ue.avg_throughput) / tc;
    }

    TtiTrace {
        tti_index: slot,
        slot_kind: SlotKind::Downlink,
        ues: records,
        cce_usage,
        total_rbs_used: (cfg.n_rbs as u64 - remaining) as u16,
        ul_ack: 0,
        ul_nack: 0,
        harq_drops: 0,
    }
}

/// Water-filling split of `pool` RBs in proportion to each candidate's PF
/// metric, never exceeding a candidate's demand. Rounding crumbs go one RB at
/// a time in PF order.
fn split_rbs(cands: &[NewTxCandidate], pool: u64) -> Vec<u64> {
    let mut alloc = vec![0u64; cands.len()];
    let mut remaining = pool;
    loop {
        let active: Vec<usize> = (0..cands.len())
            .filter(|&j| alloc[j] < cands[j].demand)
            .collect();
        if active.is_empty() || remaining == 0 {
            break;
        }
        let total: f64 = active.iter().map(|&j| cands[j].metric).sum();
        let round_pool = remaining;
        let mut given = 0;
        for &j in &active {
            let share = (round_pool as f64 * cands[j].metric / total).floor() as u64;
            let g = share.min(cands[j].demand - alloc[j]).min(remaining);
            alloc[j] += g;
            remaining -= g;
            given += g;
        }
        if given == 0 {
            for &j in &active {
                if remaining == 0 {
                    break;
                }
                alloc[j] += 1;
                remaining -= 1;
            }
        }
    }
    alloc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{AppPhase, CoverageClass, UeProfile};

    fn full_buffer_ues(classes: &[CoverageClass]) -> Scenario {
        let ues = classes
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let mut p = UeProfile::default_for(i as u8, c);
                p.traffic_profile = vec![AppPhase::new(AppKind::SpeedTest, 0.0, 1e6, 0.0)];
                p
            })
            .collect();
        Scenario {
            name: "fb".into(),
            ues,
            cycle_s: None,
            sim: SimConfig::default(),
        }
    }

    fn first_dl(cell: &mut CellState<'_>, params: &ParameterSet) -> TtiTrace {
        loop {
            let t = cell.step(params).unwrap();
            if t.slot_kind == SlotKind::Downlink {
                return t;
            }
        }
    }

    #[test]
    fn idle_cell_schedules_nothing() {
        let s = Scenario::idle();
        let params = ParameterSet::sme_default();
        let mut cell = CellState::new(&s, &params, 1);
        for _ in 0..100 {
            let t = cell.step(&params).unwrap();
            assert_eq!(t.scheduled_count(), 0);
            assert_eq!(t.cce_usage, [0; 4]);
            assert_eq!(t.total_rbs_used, 0);
        }
    }

    #[test]
    fn single_full_buffer_ue_takes_all_rbs() {
        let s = full_buffer_ues(&[CoverageClass::Medium]);
        let params = ParameterSet::sme_default();
        let mut cell = CellState::new(&s, &params, 4);
        let t = first_dl(&mut cell, &params);
        assert_eq!(t.ues[0].rbs, 273);
        assert_eq!(t.total_rbs_used, 273);
    }

    #[test]
    fn split_respects_demand_and_pool() {
        let mk = |metric: f64, demand: u64| NewTxCandidate {
            ue: 0,
            rank: 1,
            choice: link::McsChoice {
                mcs: 0,
                smoothed: 0.0,
            },
            bits_per_rb: 1,
            metric,
            demand,
        };
        let cands = vec![mk(3.0, 1000), mk(1.0, 5), mk(1.0, 1000)];
        let a = split_rbs(&cands, 273);
        assert_eq!(a.iter().sum::<u64>(), 273);
        assert_eq!(a[1], 5);
        assert!(a[0] > a[2]);
    }

    #[test]
    fn pdcch_levels_follow_cqi_bands() {
        assert_eq!(aggregation_level(12.0, true), (0, 2));
        assert_eq!(aggregation_level(11.9, true), (1, 4));
        assert_eq!(aggregation_level(4.0, true), (2, 8));
        assert_eq!(aggregation_level(3.0, true), (3, 16));
        assert_eq!(aggregation_level(15.0, false), (2, 8));
    }

    #[test]
    fn cce_budget_drops_excess_ues() {
        // Seven poor UEs need level 16 each: only three fit in 48 CCEs.
        let s = full_buffer_ues(&[CoverageClass::Poor; 7]);
        let mut s = s;
        for u in &mut s.ues {
            u.mean_sinr_db = -6.0;
            u.sinr_stddev_db = 0.0;
        }
        let params = ParameterSet::sme_default();
        let mut cell = CellState::new(&s, &params, 9);
        let t = first_dl(&mut cell, &params);
        assert_eq!(t.scheduled_count(), 3);
        assert_eq!(t.cce_usage, [0, 0, 0, 3]);
    }
}
