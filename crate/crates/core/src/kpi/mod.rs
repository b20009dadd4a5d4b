//! Trace aggregation, policy features, session KPIs and validity checks.

mod bins;
mod features;

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bins::{
    aggregate, aggregate_with_rbs, check_constraints, load_band, load_seconds, AggregatedBin,
    BinAccumulator, CellCounter, LoadBand, UeBin, UeSeries, BIN_TTIS, CELL_COUNTER_COUNT,
    HIGH_LOAD_TTIS, MID_LOAD_TTIS, PDCP_HEADER_FRACTION, UE_SERIES_COUNT, UE_SLOTS,
};
pub use features::{
    feature_schema, feature_schema_json, features, raw_features, FeatureField, FeatureVector,
    SessionMeta, FEATURE_LEN, FEATURE_SCHEMA_VERSION,
};

#[derive(Debug, Error)]
pub enum KpiError {
    #[error("session too short: no complete 2000-TTI bin")]
    SessionTooShort,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Session-level KPI summary; the reward inputs.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KpiVector {
    pub dl_mac_throughput_bps: f64,
    pub dl_rlc_throughput_bps: f64,
    pub dl_ack_ratio: f64,
    pub ul_ack_ratio: f64,
    pub dl_mean_mcs: f64,
    pub cce2_utilization: f64,
}

impl KpiVector {
    pub const NAMES: [&'static str; 6] = [
        "dl_mac_throughput_bps",
        "dl_rlc_throughput_bps",
        "dl_ack_ratio",
        "ul_ack_ratio",
        "dl_mean_mcs",
        "cce2_utilization",
    ];

    pub fn values(&self) -> [f64; 6] {
        [
            self.dl_mac_throughput_bps,
            self.dl_rlc_throughput_bps,
            self.dl_ack_ratio,
            self.ul_ack_ratio,
            self.dl_mean_mcs,
            self.cce2_utilization,
        ]
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        Self::NAMES
            .iter()
            .position(|n| *n == name)
            .map(|i| self.values()[i])
    }

    /// Element-wise mean; zero for an empty slice.
    pub fn mean_of(kpis: &[KpiVector]) -> KpiVector {
        if kpis.is_empty() {
            return KpiVector::default();
        }
        let n = kpis.len() as f64;
        let mut acc = [0.0; 6];
        for k in kpis {
            for (a, v) in acc.iter_mut().zip(k.values()) {
                *a += v;
            }
        }
        KpiVector {
            dl_mac_throughput_bps: acc[0] / n,
            dl_rlc_throughput_bps: acc[1] / n,
            dl_ack_ratio: acc[2] / n,
            ul_ack_ratio: acc[3] / n,
            dl_mean_mcs: acc[4] / n,
            cce2_utilization: acc[5] / n,
        }
    }
}

/// Reduces a session's bins to its KPI vector. Each bin is one second, so
/// throughputs are total bits over the bin count; ratios and the mean MCS are
/// weighted by transport-block counts.
pub fn summarize(bins: &[AggregatedBin]) -> KpiVector {
    let sum = |c: CellCounter| bins.iter().map(|b| b.get(c)).sum::<f64>();
    if bins.is_empty() || sum(CellCounter::ScheduledDlTtis) == 0.0 {
        return KpiVector::default();
    }
    let seconds = bins.len() as f64;
    let tbs = sum(CellCounter::DlAckCount) + sum(CellCounter::DlNackCount) + sum(CellCounter::DlDtxCount);
    let ul = sum(CellCounter::UlAckCount) + sum(CellCounter::UlNackCount);
    let mcs_sum: u64 = bins.iter().map(|b| b.mcs_sum).sum();
    let frac = |a: f64, b: f64| if b > 0.0 { a / b } else { 0.0 };
    KpiVector {
        dl_mac_throughput_bps: sum(CellCounter::DlMacBits) / seconds,
        dl_rlc_throughput_bps: sum(CellCounter::DlRlcBits) / seconds,
        dl_ack_ratio: frac(sum(CellCounter::DlAckCount), tbs),
        ul_ack_ratio: frac(sum(CellCounter::UlAckCount), ul),
        dl_mean_mcs: frac(mcs_sum as f64, tbs),
        cce2_utilization: frac(sum(CellCounter::Cce2), sum(CellCounter::CceTotal)),
    }
}

/// Header of the bin CSV: `bin_index`, the 36 cell counters, then
/// `ue<i>_<series>` for the three UE slots.
pub fn bin_csv_header() -> Vec<String> {
    let mut h = vec!["bin_index".to_string()];
    h.extend(CellCounter::ALL.iter().map(|c| c.name().to_string()));
    for u in 0..UE_SLOTS {
        h.extend(UeSeries::ALL.iter().map(|s| format!("ue{u}_{}", s.name())));
    }
    h
}

pub fn write_bins_csv<W: Write>(bins: &[AggregatedBin], out: W) -> Result<(), KpiError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(bin_csv_header())?;
    for b in bins {
        let mut row = vec![b.bin_index.to_string()];
        row.extend(b.cell.iter().map(f64::to_string));
        for u in &b.ues {
            row.extend(u.values.iter().map(f64::to_string));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// One row per session: an identifier followed by the six KPI columns.
pub fn write_kpi_csv<W: Write>(rows: &[(String, KpiVector)], out: W) -> Result<(), KpiError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["session".to_string()];
    header.extend(KpiVector::NAMES.iter().map(|s| s.to_string()));
    w.write_record(&header)?;
    for (id, k) in rows {
        let mut row = vec![id.clone()];
        row.extend(k.values().iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
