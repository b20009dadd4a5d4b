//! The 312-entry policy input.
//!
//! Layout, in order:
//! * 36 cell counters x {mean, stddev, min, max, p90} over the session's bins
//!   (counter-major), 180 entries;
//! * 3 UEs x 8 series x the same five statistics (UE-major, then series), 120
//!   entries; a scenario with fewer UEs leaves the rest at 0;
//! * 12 session descriptors.
//!
//! Every entry is normalised by fixed schema bounds and clamped to [0, 1].

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::bins::{
    load_seconds, AggregatedBin, CellCounter, UeSeries, CELL_COUNTER_COUNT, UE_SERIES_COUNT,
    UE_SLOTS,
};
use super::KpiError;
use crate::stats;

pub const FEATURE_LEN: usize = 312;
pub const FEATURE_SCHEMA_VERSION: u32 = 1;
const STAT_NAMES: [&str; 5] = ["mean", "stddev", "min", "max", "p90"];
const DESCRIPTOR_COUNT: usize = 12;

const _: () = assert!(
    CELL_COUNTER_COUNT * 5 + UE_SLOTS * UE_SERIES_COUNT * 5 + DESCRIPTOR_COUNT == FEATURE_LEN
);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub schema_version: u32,
}

impl FeatureVector {
    pub fn zeros() -> Self {
        Self {
            values: vec![0.0; FEATURE_LEN],
            schema_version: FEATURE_SCHEMA_VERSION,
        }
    }
}

/// Session-level context that is not derivable from the bins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SessionMeta {
    pub duration_s: f64,
    /// Mean rate-limited offered load per coverage class (bits/s).
    pub offered_bps: [f64; 3],
    pub full_buffer_fraction: f64,
}

fn cell_bounds(c: CellCounter) -> (f64, f64) {
    use CellCounter::*;
    match c {
        DlMacBits | DlRlcBits | DlPdcpBits | DlRetxAckedBits => (0.0, 2e9),
        UlAckCount | UlNackCount => (0.0, 1200.0),
        DlAckCount | DlNackCount | DlDtxCount | RetxCount | DlTbCount | DlInitialTxCount
        | DlInitialFailCount | Cce2 | Cce4 | Cce8 | Cce16 | CceTotal => (0.0, 4800.0),
        ScheduledDlTtis | HarqDropCount | FullRbTtis => (0.0, 1600.0),
        RbUsed => (0.0, 273.0 * 1600.0),
        MeanMcs | MaxMcs => (0.0, 27.0),
        MeanCqi => (0.0, 15.0),
        MeanRank => (0.0, 8.0),
        BufferBitsEnd => (0.0, 6e7),
        DlAckRatio | DlNackRatio | DlDtxRatio | UlAckRatio | InitialBler | RbUtilization => {
            (0.0, 1.0)
        }
        MeanUesPerTti => (0.0, 3.0),
        MeanOllaOffsetDb => (-10.0, 10.0),
        MeanTbBits => (0.0, 2.2e6),
    }
}

fn ue_bounds(s: UeSeries) -> (f64, f64) {
    use UeSeries::*;
    match s {
        MacBits => (0.0, 2e9),
        AckRatio | DtxRatio | RbShare => (0.0, 1.0),
        MeanCqi => (0.0, 15.0),
        MeanMcs => (0.0, 27.0),
        BufferBits => (0.0, 2e7),
        ScheduledTtis => (0.0, 1600.0),
    }
}

const DESCRIPTORS: [(&str, f64, f64); DESCRIPTOR_COUNT] = [
    ("duration_s", 0.0, 120.0),
    ("bin_count", 0.0, 120.0),
    ("offered_load_excellent_bps", 0.0, 2e8),
    ("offered_load_medium_bps", 0.0, 2e8),
    ("offered_load_poor_bps", 0.0, 2e8),
    ("full_buffer_fraction", 0.0, 1.0),
    ("high_load_second_fraction", 0.0, 1.0),
    ("mid_load_second_fraction", 0.0, 1.0),
    ("low_load_second_fraction", 0.0, 1.0),
    ("session_dl_ack_ratio", 0.0, 1.0),
    ("session_initial_bler", 0.0, 1.0),
    ("session_rb_utilization", 0.0, 1.0),
];

/// One entry of the published feature schema.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureField {
    pub index: usize,
    pub name: String,
    pub lo: f64,
    pub hi: f64,
}

fn stat_bounds(stat: usize, (lo, hi): (f64, f64)) -> (f64, f64) {
    if stat == 1 {
        (0.0, (hi - lo) / 2.0)
    } else {
        (lo, hi)
    }
}

/// Names and normalisation bounds of all 312 entries, in vector order.
pub fn feature_schema() -> Vec<FeatureField> {
    let mut out = Vec::with_capacity(FEATURE_LEN);
    let mut push = |name: String, (lo, hi): (f64, f64)| {
        out.push(FeatureField {
            index: out.len(),
            name,
            lo,
            hi,
        })
    };
    for c in CellCounter::ALL {
        for (k, s) in STAT_NAMES.iter().enumerate() {
            push(format!("cell.{}.{s}", c.name()), stat_bounds(k, cell_bounds(c)));
        }
    }
    for u in 0..UE_SLOTS {
        for series in UeSeries::ALL {
            for (k, s) in STAT_NAMES.iter().enumerate() {
                push(
                    format!("ue{u}.{}.{s}", series.name()),
                    stat_bounds(k, ue_bounds(series)),
                );
            }
        }
    }
    for (name, lo, hi) in DESCRIPTORS {
        push(format!("session.{name}"), (lo, hi));
    }
    out
}

/// Schema as a JSON document for audit.
pub fn feature_schema_json() -> String {
    #[derive(Serialize)]
    struct Doc {
        schema_version: u32,
        length: usize,
        fields: Vec<FeatureField>,
    }
    serde_json::to_string_pretty(&Doc {
        schema_version: FEATURE_SCHEMA_VERSION,
        length: FEATURE_LEN,
        fields: feature_schema(),
    })
    .expect("schema serialises")
}

fn five_stats(series: &[f64]) -> [f64; 5] {
    let mut sorted = series.to_vec();
    sorted.sort_by(f64::total_cmp);
    [
        stats::mean(series),
        stats::stddev(series),
        sorted[0],
        sorted[sorted.len() - 1],
        stats::percentile_sorted(&sorted, 0.9),
    ]
}

fn normalise(v: f64, lo: f64, hi: f64) -> f64 {
    let k = (v - lo) / (hi - lo);
    if k.is_finite() {
        k.clamp(0.0, 1.0)
    } else {
        0.0
    }
}

/// Un-normalised feature values in schema order.
pub fn raw_features(bins: &[AggregatedBin], meta: &SessionMeta) -> Result<Vec<f64>, KpiError> {
    if bins.is_empty() {
        return Err(KpiError::SessionTooShort);
    }
    let mut out = Vec::with_capacity(FEATURE_LEN);
    let mut series = Vec::with_capacity(bins.len());
    for c in CellCounter::ALL {
        series.clear();
        series.extend(bins.iter().map(|b| b.get(c)));
        out.extend(five_stats(&series));
    }
    for u in 0..UE_SLOTS {
        for s in UeSeries::ALL {
            series.clear();
            series.extend(bins.iter().map(|b| b.ues[u].get(s)));
            out.extend(five_stats(&series));
        }
    }
    let n = bins.len() as f64;
    let (high, mid, low) = load_seconds(bins);
    let sum = |c: CellCounter| bins.iter().map(|b| b.get(c)).sum::<f64>();
    let frac = |a: f64, b: f64| if b > 0.0 { a / b } else { 0.0 };
    let tbs = sum(CellCounter::DlTbCount);
    let dl_slots = n * crate::sim::DL_SLOTS_PER_SECOND as f64;
    out.extend([
        meta.duration_s,
        n,
        meta.offered_bps[0],
        meta.offered_bps[1],
        meta.offered_bps[2],
        meta.full_buffer_fraction,
        high as f64 / n,
        mid as f64 / n,
        low as f64 / n,
        frac(sum(CellCounter::DlAckCount), tbs),
        frac(sum(CellCounter::DlInitialFailCount), sum(CellCounter::DlInitialTxCount)),
        frac(sum(CellCounter::RbUsed), 273.0 * dl_slots),
    ]);
    debug_assert_eq!(out.len(), FEATURE_LEN);
    Ok(out)
}

/// Normalised 312-entry state vector.
pub fn features(bins: &[AggregatedBin], meta: &SessionMeta) -> Result<FeatureVector, KpiError> {
    static SCHEMA: OnceLock<Vec<FeatureField>> = OnceLock::new();
    let schema = SCHEMA.get_or_init(feature_schema);
    let raw = raw_features(bins, meta)?;
    let values = raw
        .iter()
        .zip(schema)
        .map(|(&v, f)| normalise(v, f.lo, f.hi))
        .collect();
    Ok(FeatureVector {
        values,
        schema_version: FEATURE_SCHEMA_VERSION,
    })
}
