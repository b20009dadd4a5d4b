use serde::{Deserialize, Serialize};

use crate::sim::{Outcome, SlotKind, TtiTrace, DL_SLOTS_PER_SECOND};

/// Slots per aggregation bin (one second at 2000 slots/s).
pub const BIN_TTIS: usize = 2000;
/// Header overhead removed from RLC bits to get PDCP bits.
pub const PDCP_HEADER_FRACTION: f64 = 0.02;
/// UEs covered by the per-UE part of every bin and feature vector.
pub const UE_SLOTS: usize = 3;

macro_rules! counters {
    ($name:ident, $count:ident, [$($var:ident => $label:literal),+ $(,)?]) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        pub enum $name { $($var),+ }
        impl $name {
            pub const ALL: [$name; $count] = [$($name::$var),+];
            pub fn name(self) -> &'static str {
                match self { $($name::$var => $label),+ }
            }
        }
    };
}

pub const CELL_COUNTER_COUNT: usize = 36;
pub const UE_SERIES_COUNT: usize = 8;

counters!(CellCounter, CELL_COUNTER_COUNT, [
    DlMacBits => "dl_mac_bits",
    DlRlcBits => "dl_rlc_bits",
    DlPdcpBits => "dl_pdcp_bits",
    UlAckCount => "ul_ack_count",
    UlNackCount => "ul_nack_count",
    DlAckCount => "dl_ack_count",
    DlNackCount => "dl_nack_count",
    DlDtxCount => "dl_dtx_count",
    ScheduledDlTtis => "scheduled_dl_ttis",
    RbUsed => "rb_used",
    Cce2 => "cce_2",
    Cce4 => "cce_4",
    Cce8 => "cce_8",
    Cce16 => "cce_16",
    MeanMcs => "mean_mcs",
    MeanCqi => "mean_cqi",
    MeanRank => "mean_rank",
    BufferBitsEnd => "buffer_bits_end",
    RetxCount => "retx_count",
    DlTbCount => "dl_tb_count",
    DlInitialTxCount => "dl_initial_tx_count",
    DlInitialFailCount => "dl_initial_fail_count",
    DlRetxAckedBits => "dl_retx_acked_bits",
    HarqDropCount => "harq_drop_count",
    DlAckRatio => "dl_ack_ratio",
    DlNackRatio => "dl_nack_ratio",
    DlDtxRatio => "dl_dtx_ratio",
    UlAckRatio => "ul_ack_ratio",
    InitialBler => "initial_bler",
    RbUtilization => "rb_utilization",
    MeanUesPerTti => "mean_ues_per_tti",
    CceTotal => "cce_total",
    MeanOllaOffsetDb => "mean_olla_offset_db",
    MaxMcs => "max_mcs",
    MeanTbBits => "mean_tb_bits",
    FullRbTtis => "full_rb_ttis",
]);

counters!(UeSeries, UE_SERIES_COUNT, [
    MacBits => "mac_bits",
    AckRatio => "ack_ratio",
    DtxRatio => "dtx_ratio",
    MeanCqi => "mean_cqi",
    MeanMcs => "mean_mcs",
    RbShare => "rb_share",
    BufferBits => "buffer_bits",
    ScheduledTtis => "scheduled_ttis",
]);

/// Per-UE sub-record of a bin.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UeBin {
    pub values: [f64; UE_SERIES_COUNT],
}

impl UeBin {
    pub fn get(&self, s: UeSeries) -> f64 {
        self.values[s as usize]
    }
}

/// Cell counters over 2000 consecutive slots.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedBin {
    pub bin_index: usize,
    pub cell: [f64; CELL_COUNTER_COUNT],
    pub ues: [UeBin; UE_SLOTS],
    /// Exact sums behind the per-bin means, for session-level weighting.
    pub mcs_sum: u64,
}

impl AggregatedBin {
    pub fn get(&self, c: CellCounter) -> f64 {
        self.cell[c as usize]
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Default, Clone)]
struct UeAcc {
    acked_bits: u64,
    ack: u64,
    dtx: u64,
    tbs: u64,
    cqi_sum: f64,
    dl_slots: u64,
    mcs_sum: u64,
    rbs: u64,
    buffer_end: u64,
}

/// Streaming binner: feed slot traces in order; completed bins are returned
/// by [`BinAccumulator::finish`]. A trailing partial bin is discarded.
#[derive(Default)]
pub struct BinAccumulator {
    bins: Vec<AggregatedBin>,
    slots: usize,
    acked_bits: u64,
    retx_acked_bits: u64,
    ul_ack: u64,
    ul_nack: u64,
    ack: u64,
    nack: u64,
    dtx: u64,
    sched_ttis: u64,
    rb_used: u64,
    cce: [u64; 4],
    mcs_sum: u64,
    cqi_sum: f64,
    cqi_n: u64,
    rank_sum: u64,
    buffer_end: u64,
    retx: u64,
    initial: u64,
    initial_fail: u64,
    drops: u64,
    dl_slots: u64,
    olla_sum: f64,
    max_mcs: u8,
    tb_bits_sum: u64,
    full_rb: u64,
    n_rbs: u64,
    ues: Vec<UeAcc>,
}

impl BinAccumulator {
    pub fn new(n_rbs: u16) -> Self {
        Self {
            n_rbs: n_rbs as u64,
            ..Self::default()
        }
    }

    pub fn push(&mut self, t: &TtiTrace) {
        if self.ues.len() < t.ues.len() {
            self.ues.resize(t.ues.len(), UeAcc::default());
        }
        self.ul_ack += t.ul_ack as u64;
        self.ul_nack += t.ul_nack as u64;
        self.drops += t.harq_drops as u64;
        if t.slot_kind == SlotKind::Downlink {
            self.dl_slots += 1;
            let mut any = false;
            for (u, acc) in t.ues.iter().zip(self.ues.iter_mut()) {
                self.cqi_sum += u.cqi;
                self.cqi_n += 1;
                self.olla_sum += u.olla_offset_db;
                acc.cqi_sum += u.cqi;
                acc.dl_slots += 1;
                if !u.scheduled {
                    continue;
                }
                any = true;
                acc.tbs += 1;
                acc.mcs_sum += u.mcs as u64;
                acc.rbs += u.rbs as u64;
                self.mcs_sum += u.mcs as u64;
                self.rank_sum += u.rank as u64;
                self.tb_bits_sum += u.tb_bits;
                self.max_mcs = self.max_mcs.max(u.mcs);
                if u.is_retx {
                    self.retx += 1;
                } else {
                    self.initial += 1;
                }
                match u.outcome {
                    Outcome::Ack => {
                        self.ack += 1;
                        acc.ack += 1;
                        self.acked_bits += u.tb_bits;
                        acc.acked_bits += u.tb_bits;
                        if u.is_retx {
                            self.retx_acked_bits += u.tb_bits;
                        }
                    }
                    Outcome::Nack | Outcome::Dtx => {
                        if u.outcome == Outcome::Nack {
                            self.nack += 1;
                        } else {
                            self.dtx += 1;
                            acc.dtx += 1;
                        }
                        if !u.is_retx {
                            self.initial_fail += 1;
                        }
                    }
                    Outcome::NotScheduled => {}
                }
            }
            if any {
                self.sched_ttis += 1;
            }
            for (k, c) in t.cce_usage.iter().enumerate() {
                self.cce[k] += *c as u64;
            }
            self.rb_used += t.total_rbs_used as u64;
            if t.total_rbs_used as u64 == self.n_rbs {
                self.full_rb += 1;
            }
        }
        for (u, acc) in t.ues.iter().zip(self.ues.iter_mut()) {
            acc.buffer_end = u.buffer_bits;
        }
        self.buffer_end = t.ues.iter().map(|u| u.buffer_bits).sum();
        self.slots += 1;
        if self.slots == BIN_TTIS {
            self.close();
        }
    }

    fn close(&mut self) {
        use CellCounter::*;
        let mut cell = [0.0; CELL_COUNTER_COUNT];
        let tbs = self.ack + self.nack + self.dtx;
        let cce_total: u64 = self.cce.iter().sum();
        let rlc = self.acked_bits - self.retx_acked_bits;
        let mut set = |c: CellCounter, v: f64| cell[c as usize] = v;
        set(DlMacBits, self.acked_bits as f64);
        set(DlRlcBits, rlc as f64);
        set(DlPdcpBits, rlc as f64 * (1.0 - PDCP_HEADER_FRACTION));
        set(UlAckCount, self.ul_ack as f64);
        set(UlNackCount, self.ul_nack as f64);
        set(DlAckCount, self.ack as f64);
        set(DlNackCount, self.nack as f64);
        set(DlDtxCount, self.dtx as f64);
        set(ScheduledDlTtis, self.sched_ttis as f64);
        set(RbUsed, self.rb_used as f64);
        set(Cce2, self.cce[0] as f64);
        set(Cce4, self.cce[1] as f64);
        set(Cce8, self.cce[2] as f64);
        set(Cce16, self.cce[3] as f64);
        set(MeanMcs, ratio(self.mcs_sum, tbs));
        set(MeanCqi, if self.cqi_n == 0 { 0.0 } else { self.cqi_sum / self.cqi_n as f64 });
        set(MeanRank, ratio(self.rank_sum, tbs));
        set(BufferBitsEnd, self.buffer_end as f64);
        set(RetxCount, self.retx as f64);
        set(DlTbCount, tbs as f64);
        set(DlInitialTxCount, self.initial as f64);
        set(DlInitialFailCount, self.initial_fail as f64);
        set(DlRetxAckedBits, self.retx_acked_bits as f64);
        set(HarqDropCount, self.drops as f64);
        set(DlAckRatio, ratio(self.ack, tbs));
        set(DlNackRatio, ratio(self.nack, tbs));
        set(DlDtxRatio, ratio(self.dtx, tbs));
        set(UlAckRatio, ratio(self.ul_ack, self.ul_ack + self.ul_nack));
        set(InitialBler, ratio(self.initial_fail, self.initial));
        set(RbUtilization, ratio(self.rb_used, self.n_rbs * self.dl_slots));
        set(MeanUesPerTti, ratio(tbs, self.sched_ttis));
        set(CceTotal, cce_total as f64);
        set(MeanOllaOffsetDb, if self.cqi_n == 0 { 0.0 } else { self.olla_sum / self.cqi_n as f64 });
        set(MaxMcs, self.max_mcs as f64);
        set(MeanTbBits, ratio(self.tb_bits_sum, tbs));
        set(FullRbTtis, self.full_rb as f64);

        let mut ues = [UeBin::default(); UE_SLOTS];
        for (slot, acc) in ues.iter_mut().zip(&self.ues) {
            use UeSeries as S;
            let v = &mut slot.values;
            v[S::MacBits as usize] = acc.acked_bits as f64;
            v[S::AckRatio as usize] = ratio(acc.ack, acc.tbs);
            v[S::DtxRatio as usize] = ratio(acc.dtx, acc.tbs);
            v[S::MeanCqi as usize] = if acc.dl_slots == 0 { 0.0 } else { acc.cqi_sum / acc.dl_slots as f64 };
            v[S::MeanMcs as usize] = ratio(acc.mcs_sum, acc.tbs);
            v[S::RbShare as usize] = ratio(acc.rbs, self.rb_used);
            v[S::BufferBits as usize] = acc.buffer_end as f64;
            v[S::ScheduledTtis as usize] = acc.tbs as f64;
        }

        self.bins.push(AggregatedBin {
            bin_index: self.bins.len(),
            cell,
            ues,
            mcs_sum: self.mcs_sum,
        });
        let bins = std::mem::take(&mut self.bins);
        let n_rbs = self.n_rbs;
        let n_ues = self.ues.len();
        *self = Self::new(n_rbs as u16);
        self.ues = vec![UeAcc::default(); n_ues];
        self.bins = bins;
    }

    pub fn finish(self) -> Vec<AggregatedBin> {
        self.bins
    }
}

/// Bins a complete, in-order session trace.
pub fn aggregate(traces: &[TtiTrace]) -> Vec<AggregatedBin> {
    aggregate_with_rbs(traces, 273)
}

/// [`aggregate`] for a cell with `n_rbs` resource blocks.
pub fn aggregate_with_rbs(traces: &[TtiTrace], n_rbs: u16) -> Vec<AggregatedBin> {
    let mut acc = BinAccumulator::new(n_rbs);
    for t in traces {
        acc.push(t);
    }
    acc.finish()
}

/// Scheduled-DL-TTI band a one-second bin falls in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadBand {
    /// More than 80% of the second's 1600 DL TTIs scheduled.
    High,
    /// Between 20% and 80% inclusive.
    Mid,
    Low,
}

pub const HIGH_LOAD_TTIS: u64 = DL_SLOTS_PER_SECOND * 8 / 10;
pub const MID_LOAD_TTIS: u64 = DL_SLOTS_PER_SECOND * 2 / 10;

pub fn load_band(scheduled_dl_ttis: u64) -> LoadBand {
    if scheduled_dl_ttis > HIGH_LOAD_TTIS {
        LoadBand::High
    } else if scheduled_dl_ttis >= MID_LOAD_TTIS {
        LoadBand::Mid
    } else {
        LoadBand::Low
    }
}

/// Counts of (high, mid, low) seconds.
pub fn load_seconds(bins: &[AggregatedBin]) -> (u64, u64, u64) {
    bins.iter().fold((0, 0, 0), |(h, m, l), b| {
        match load_band(b.get(CellCounter::ScheduledDlTtis) as u64) {
            LoadBand::High => (h + 1, m, l),
            LoadBand::Mid => (h, m + 1, l),
            LoadBand::Low => (h, m, l + 1),
        }
    })
}

/// Session validity: at least `x_seconds` high-load seconds and at least
/// `y_seconds` mid-load seconds.
pub fn check_constraints(bins: &[AggregatedBin], x_seconds: u64, y_seconds: u64) -> bool {
    let (high, mid, _) = load_seconds(bins);
    high >= x_seconds && mid >= y_seconds
}
