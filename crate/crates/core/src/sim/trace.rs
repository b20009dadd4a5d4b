use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{Outcome, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SlotKind {
    Downlink,
    Other,
}

/// One UE's view of a slot.
#[derive(Debug, Clone, PartialEq)]
pub struct UeRecord {
    pub scheduled: bool,
    pub mcs: u8,
    pub rbs: u16,
    pub tb_bits: u64,
    pub outcome: Outcome,
    pub is_retx: bool,
    /// Filtered CQI at the time of the slot.
    pub cqi: f64,
    pub rank: u8,
    pub buffer_bits: u64,
    pub olla_offset_db: f64,
}

/// Scheduler outcome of one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct TtiTrace {
    pub tti_index: u64,
    pub slot_kind: SlotKind,
    pub ues: Vec<UeRecord>,
    /// Grants by aggregation level 2, 4, 8, 16.
    pub cce_usage: [u16; 4],
    pub total_rbs_used: u16,
    pub ul_ack: u8,
    pub ul_nack: u8,
    /// Transport blocks abandoned this slot after the last retransmission failed.
    pub harq_drops: u8,
}

impl TtiTrace {
    pub fn scheduled_count(&self) -> usize {
        self.ues.iter().filter(|u| u.scheduled).count()
    }
}

const CELL_COLUMNS: [&str; 10] = [
    "tti_index",
    "slot_kind",
    "total_rbs_used",
    "cce_al2",
    "cce_al4",
    "cce_al8",
    "cce_al16",
    "ul_ack",
    "ul_nack",
    "harq_drops",
];

const UE_COLUMNS: [&str; 10] = [
    "scheduled",
    "mcs",
    "rbs",
    "tb_bits",
    "outcome",
    "is_retx",
    "cqi",
    "rank",
    "buffer_bits",
    "olla_offset_db",
];

/// Header of the trace dump for a cell with `n_ues` UEs: the cell columns,
/// then `ue<i>_<field>` for each UE in scenario order.
pub fn trace_header(n_ues: usize) -> Vec<String> {
    let mut h: Vec<String> = CELL_COLUMNS.iter().map(|s| s.to_string()).collect();
    for i in 0..n_ues {
        h.extend(UE_COLUMNS.iter().map(|c| format!("ue{i}_{c}")));
    }
    h
}

/// Writes one row per slot. Floats use Rust's shortest round-trip format, so
/// identical traces give identical bytes.
pub fn write_trace_csv<W: Write>(traces: &[TtiTrace], out: W) -> Result<(), SimError> {
    let n_ues = traces.first().map_or(0, |t| t.ues.len());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(trace_header(n_ues))?;
    let mut row: Vec<String> = Vec::with_capacity(CELL_COLUMNS.len() + UE_COLUMNS.len() * n_ues);
    for t in traces {
        row.clear();
        row.push(t.tti_index.to_string());
        row.push(match t.slot_kind {
            SlotKind::Downlink => "D".into(),
            SlotKind::Other => "U".into(),
        });
        row.push(t.total_rbs_used.to_string());
        row.extend(t.cce_usage.iter().map(|c| c.to_string()));
        row.push(t.ul_ack.to_string());
        row.push(t.ul_nack.to_string());
        row.push(t.harq_drops.to_string());
        for u in &t.ues {
            row.push(u8::from(u.scheduled).to_string());
            row.push(u.mcs.to_string());
            row.push(u.rbs.to_string());
            row.push(u.tb_bits.to_string());
            row.push(u.outcome.as_str().into());
            row.push(u8::from(u.is_retx).to_string());
            row.push(u.cqi.to_string());
            row.push(u.rank.to_string());
            row.push(u.buffer_bits.to_string());
            row.push(u.olla_offset_db.to_string());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
