//! Weighted KPI reward.
//!
//! Weights are held in integer hundredths so that "weights sum to one" is an
//! exact check. The reward is `Σ wᵢ·kᵢ` with each `kᵢ` normalised to [0, 1].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kpi::KpiVector;

#[derive(Debug, Error, PartialEq)]
pub enum ObjectiveError {
    #[error("objective has no entries")]
    Empty,
    #[error("weight {weight} of `{kpi}` is not a whole number of hundredths in [0, 1]")]
    BadWeight { kpi: String, weight: f64 },
    #[error("weights sum to {0}/100, expected 100/100")]
    WeightSum(u32),
    #[error("normalisation of `{kpi}` needs lo < hi, got [{lo}, {hi}]")]
    BadBounds { kpi: String, lo: f64, hi: f64 },
    #[error("kpi `{0}` is not part of the KPI vector")]
    MissingKpi(String),
    #[error("expected {expected} normalised values, got {got}")]
    Arity { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Normalization {
    pub lo: f64,
    pub hi: f64,
    pub direction: Direction,
}

/// One weighted KPI. `weight` is given as a fraction but must be a whole
/// number of hundredths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveEntry {
    pub kpi_name: String,
    pub weight: f64,
    pub normalization: Normalization,
}

impl ObjectiveEntry {
    fn maximize(kpi: &str, weight: f64, lo: f64, hi: f64) -> Self {
        Self {
            kpi_name: kpi.to_string(),
            weight,
            normalization: Normalization {
                lo,
                hi,
                direction: Direction::Maximize,
            },
        }
    }

    /// Weight in hundredths.
    pub fn hundredths(&self) -> Result<u32, ObjectiveError> {
        let scaled = self.weight * 100.0;
        let rounded = scaled.round();
        if !(0.0..=100.0).contains(&rounded) || (scaled - rounded).abs() > 1e-9 {
            return Err(ObjectiveError::BadWeight {
                kpi: self.kpi_name.clone(),
                weight: self.weight,
            });
        }
        Ok(rounded as u32)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveConfig {
    pub entries: Vec<ObjectiveEntry>,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        let tput = 1.2e9;
        Self {
            entries: vec![
                ObjectiveEntry::maximize("dl_mac_throughput_bps", 0.22, 0.0, tput),
                ObjectiveEntry::maximize("dl_rlc_throughput_bps", 0.29, 0.0, tput),
                ObjectiveEntry::maximize("dl_ack_ratio", 0.28, 0.0, 1.0),
                ObjectiveEntry::maximize("ul_ack_ratio", 0.15, 0.0, 1.0),
                ObjectiveEntry::maximize("dl_mean_mcs", 0.06, 0.0, 27.0),
                ObjectiveEntry::maximize("cce2_utilization", 0.0, 0.0, 1.0),
            ],
        }
    }
}

/// `clamp((value - lo) / (hi - lo), 0, 1)`, mirrored for `Minimize`.
pub fn normalize_kpi(value: f64, n: &Normalization) -> f64 {
    let k = ((value - n.lo) / (n.hi - n.lo)).clamp(0.0, 1.0);
    let k = if k.is_nan() { 0.0 } else { k };
    match n.direction {
        Direction::Maximize => k,
        Direction::Minimize => 1.0 - k,
    }
}

impl ObjectiveConfig {
    pub fn validate(&self) -> Result<(), ObjectiveError> {
        if self.entries.is_empty() {
            return Err(ObjectiveError::Empty);
        }
        let mut total = 0u32;
        for e in &self.entries {
            total += e.hundredths()?;
            let n = &e.normalization;
            if !(n.lo < n.hi) || !n.lo.is_finite() || !n.hi.is_finite() {
                return Err(ObjectiveError::BadBounds {
                    kpi: e.kpi_name.clone(),
                    lo: n.lo,
                    hi: n.hi,
                });
            }
        }
        if total != 100 {
            return Err(ObjectiveError::WeightSum(total));
        }
        Ok(())
    }

    /// Weighted sum of already-normalised values, one per entry in order.
    pub fn weighted_sum(&self, normalised: &[f64]) -> Result<f64, ObjectiveError> {
        if normalised.len() != self.entries.len() {
            return Err(ObjectiveError::Arity {
                expected: self.entries.len(),
                got: normalised.len(),
            });
        }
        let mut acc = 0.0;
        for (e, &k) in self.entries.iter().zip(normalised) {
            acc += f64::from(e.hundredths()?) * k;
        }
        Ok(acc / 100.0)
    }

    /// Normalised value of every entry, in entry order.
    pub fn normalised(&self, kpis: &KpiVector) -> Result<Vec<f64>, ObjectiveError> {
        self.entries
            .iter()
            .map(|e| {
                kpis.get(&e.kpi_name)
                    .map(|v| normalize_kpi(v, &e.normalization))
                    .ok_or_else(|| ObjectiveError::MissingKpi(e.kpi_name.clone()))
            })
            .collect()
    }

    pub fn reward(&self, kpis: &KpiVector) -> Result<f64, ObjectiveError> {
        self.weighted_sum(&self.normalised(kpis)?)
    }
}

pub fn reward(kpis: &KpiVector, cfg: &ObjectiveConfig) -> Result<f64, ObjectiveError> {
    cfg.reward(kpis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn five() -> ObjectiveConfig {
        let mut c = ObjectiveConfig::default();
        c.entries.truncate(5);
        c
    }

    #[test]
    fn default_is_valid() {
        ObjectiveConfig::default().validate().unwrap();
        five().validate().unwrap();
    }

    #[test]
    fn normalisation_edges() {
        let max = Normalization { lo: 2.0, hi: 4.0, direction: Direction::Maximize };
        let min = Normalization { direction: Direction::Minimize, ..max };
        assert_eq!(normalize_kpi(2.0, &max), 0.0);
        assert_eq!(normalize_kpi(4.0, &min), 0.0);
        assert_eq!(normalize_kpi(9.0, &max), 1.0);
        assert_eq!(normalize_kpi(-9.0, &max), 0.0);
        assert_eq!(normalize_kpi(3.0, &max), 0.5);
    }

    #[test]
    fn weighted_sum_examples() {
        let c = five();
        assert_eq!(c.weighted_sum(&[1.0; 5]).unwrap(), 1.0);
        assert_eq!(c.weighted_sum(&[1.0, 0.0, 0.0, 0.0, 0.0]).unwrap(), 0.22);
        assert_eq!(c.weighted_sum(&[0.0; 5]).unwrap(), 0.0);
        assert!(matches!(c.weighted_sum(&[1.0; 4]), Err(ObjectiveError::Arity { .. })));
    }

    #[test]
    fn invalid_configs() {
        let mut c = five();
        c.entries[0].weight = 0.23;
        assert_eq!(c.validate(), Err(ObjectiveError::WeightSum(101)));
        c.entries[0].weight = 0.225;
        assert!(matches!(c.validate(), Err(ObjectiveError::BadWeight { .. })));
        let mut c = five();
        c.entries[2].normalization.hi = 0.0;
        assert!(matches!(c.validate(), Err(ObjectiveError::BadBounds { .. })));
        let mut c = five();
        c.entries[0].kpi_name = "latency".into();
        assert_eq!(
            c.reward(&KpiVector::default()),
            Err(ObjectiveError::MissingKpi("latency".into()))
        );
    }

    #[test]
    fn reward_from_kpis() {
        let k = KpiVector {
            dl_mac_throughput_bps: 0.6e9,
            dl_rlc_throughput_bps: 2.0e9,
            dl_ack_ratio: 0.9,
            ul_ack_ratio: 0.5,
            dl_mean_mcs: 27.0,
            cce2_utilization: 0.3,
        };
        let r = ObjectiveConfig::default().reward(&k).unwrap();
        let oracle = 0.22 * 0.5 + 0.29 + 0.28 * 0.9 + 0.15 * 0.5 + 0.06;
        assert!((r - oracle).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn reward_in_unit_interval_and_monotone(
            v in proptest::array::uniform6(-1e9f64..3e9),
            bump in 0.0f64..1e9,
            which in 0usize..6,
        ) {
            let c = ObjectiveConfig::default();
            let mk = |v: [f64; 6]| KpiVector {
                dl_mac_throughput_bps: v[0],
                dl_rlc_throughput_bps: v[1],
                dl_ack_ratio: v[2],
                ul_ack_ratio: v[3],
                dl_mean_mcs: v[4],
                cce2_utilization: v[5],
            };
            let r = c.reward(&mk(v)).unwrap();
            prop_assert!((0.0..=1.0).contains(&r));
            let mut w = v;
            w[which] += bump;
            prop_assert!(c.reward(&mk(w)).unwrap() >= r);
        }
    }
}
