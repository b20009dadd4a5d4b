//! The ten tunable scheduler parameters: ranges, quantisation grids,
//! validation, and the mapping between policy outputs and parameter sets.
//!
//! Six parameters come straight from the operator's tuning sheet (IBLER
//! target, adaptive MCS, PMI enhancement, UE MCS filter, initial rank, HARQ
//! enhancement). The remaining four are reconstructions with a simulator hook
//! each: `cqi_filter_coeff`, `pdcch_adaptive`, `fairness_exponent` and
//! `max_mcs_cap`.
//!
//! Quantised values are held as integer grid indices, so equality and hashing
//! are exact and the real value is only ever a derived view.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const GRID_EPS: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ActionError {
    #[error("parameter `{name}` = {value} is outside [{min}, {max}]")]
    OutOfRange {
        name: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("parameter `{name}` = {value} is not on its grid (step {step})")]
    OffGrid {
        name: &'static str,
        value: f64,
        step: f64,
    },
    #[error("ibler_target = 1.0 is degenerate (outer-loop step would divide by zero)")]
    DegenerateIbler,
    #[error("parameter `{0}` has no SME recommended range")]
    MissingRecommendedRange(&'static str),
    #[error("invalid recommended range for `{name}`: {reason}")]
    BadRecommendedRange { name: String, reason: String },
    #[error("raw action component {index} = {value} is outside [-1, 1]")]
    SquashViolation { index: usize, value: f64 },
    #[error("raw action has {0} components, expected 10")]
    WrongArity(usize),
    #[error("invalid parameter spec `{name}`: {reason}")]
    BadSpec { name: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParamKind {
    QuantizedReal,
    Boolean,
    IntegerRange,
}

/// Range and grid of one tunable parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpec {
    pub name: String,
    pub kind: ParamKind,
    pub min: f64,
    pub max: f64,
    /// Grid step; 1 for booleans and integer ranges.
    pub step: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sme_recommended_range: Option<[f64; 2]>,
}

impl ParameterSpec {
    pub fn quantized(name: &str, min: f64, max: f64, step: f64) -> Self {
        Self {
            name: name.to_string(),
            kind: ParamKind::QuantizedReal,
            min,
            max,
            step,
            sme_recommended_range: None,
        }
    }

    pub fn boolean(name: &str) -> Self {
        Self {
            name: name.to_string(),
            kind: ParamKind::Boolean,
            min: 0.0,
            max: 1.0,
            step: 1.0,
            sme_recommended_range: None,
        }
    }

    pub fn integer(name: &str, min: i64, max: i64) -> Self {
        Self {
            name: name.to_string(),
            kind: ParamKind::IntegerRange,
            min: min as f64,
            max: max as f64,
            step: 1.0,
            sme_recommended_range: None,
        }
    }

    pub fn with_recommended(mut self, lo: f64, hi: f64) -> Self {
        self.sme_recommended_range = Some([lo, hi]);
        self
    }

    pub fn check(&self) -> Result<(), ActionError> {
        let bad = |reason: &str| ActionError::BadSpec {
            name: self.name.clone(),
            reason: reason.to_string(),
        };
        if !(self.min <= self.max) {
            return Err(bad("min > max"));
        }
        if !(self.step > 0.0) {
            return Err(bad("step must be positive"));
        }
        let steps = (self.max - self.min) / self.step;
        if (steps - steps.round()).abs() > GRID_EPS {
            return Err(bad("(max - min) / step is not an integer"));
        }
        Ok(())
    }

    /// Number of grid points.
    pub fn value_count(&self) -> u64 {
        match self.kind {
            ParamKind::Boolean => 2,
            _ => ((self.max - self.min) / self.step).round() as u64 + 1,
        }
    }

    pub fn value_at(&self, index: u32) -> f64 {
        // Decimal steps divide rather than multiply so 6 * 0.05 prints as 0.3.
        let inv = (1.0 / self.step).round();
        if self.step < 1.0 && ((1.0 / self.step) - inv).abs() < GRID_EPS {
            self.min + index as f64 / inv
        } else {
            self.min + index as f64 * self.step
        }
    }

    /// Grid index of `value`, or the reason it has none.
    fn index_of(&self, name: &'static str, value: f64) -> Result<u32, ActionError> {
        let tol = GRID_EPS * self.step;
        if !value.is_finite() || value < self.min - tol || value > self.max + tol {
            return Err(ActionError::OutOfRange {
                name,
                value,
                min: self.min,
                max: self.max,
            });
        }
        let pos = (value - self.min) / self.step;
        if (pos - pos.round()).abs() > GRID_EPS {
            return Err(ActionError::OffGrid {
                name,
                value,
                step: self.step,
            });
        }
        Ok(pos.round() as u32)
    }
}

/// Product of per-parameter value counts (1 for an empty list).
pub fn cardinality(specs: &[ParameterSpec]) -> u128 {
    specs.iter().map(|s| s.value_count() as u128).product()
}

/// Identifies one of the ten parameters; the discriminant is its position in
/// every fixed-order representation (raw action vector, JSON, CSV).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Param {
    IblerTarget = 0,
    AdaptiveMcsSelection,
    PmiEnhancement,
    McsFilter,
    InitialRank,
    HarqEnhancement,
    CqiFilterCoeff,
    PdcchAdaptive,
    FairnessExponent,
    MaxMcsCap,
}

pub const PARAM_COUNT: usize = 10;

impl Param {
    pub const ALL: [Param; PARAM_COUNT] = [
        Param::IblerTarget,
        Param::AdaptiveMcsSelection,
        Param::PmiEnhancement,
        Param::McsFilter,
        Param::InitialRank,
        Param::HarqEnhancement,
        Param::CqiFilterCoeff,
        Param::PdcchAdaptive,
        Param::FairnessExponent,
        Param::MaxMcsCap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Param::IblerTarget => "ibler_target",
            Param::AdaptiveMcsSelection => "adaptive_mcs_selection",
            Param::PmiEnhancement => "pmi_enhancement",
            Param::McsFilter => "mcs_filter",
            Param::InitialRank => "initial_rank",
            Param::HarqEnhancement => "harq_enhancement",
            Param::CqiFilterCoeff => "cqi_filter_coeff",
            Param::PdcchAdaptive => "pdcch_adaptive",
            Param::FairnessExponent => "fairness_exponent",
            Param::MaxMcsCap => "max_mcs_cap",
        }
    }

    pub fn from_name(name: &str) -> Option<Param> {
        Param::ALL.into_iter().find(|p| p.name() == name)
    }

    /// The fixed range and grid of this parameter.
    pub fn spec(self) -> ParameterSpec {
        let name = self.name();
        match self {
            Param::IblerTarget => ParameterSpec::quantized(name, 0.0, 1.0, 0.01),
            Param::AdaptiveMcsSelection | Param::PmiEnhancement | Param::HarqEnhancement => {
                ParameterSpec::boolean(name)
            }
            Param::PdcchAdaptive => ParameterSpec::boolean(name),
            Param::McsFilter => ParameterSpec::quantized(name, 0.0, 2.0, 0.01),
            Param::InitialRank => ParameterSpec::integer(name, 1, 8),
            Param::CqiFilterCoeff => ParameterSpec::quantized(name, 0.0, 1.0, 0.05),
            Param::FairnessExponent => ParameterSpec::quantized(name, 0.0, 2.0, 0.1),
            Param::MaxMcsCap => ParameterSpec::integer(name, 0, 27),
        }
    }

    fn is_boolean(self) -> bool {
        matches!(
            self,
            Param::AdaptiveMcsSelection
                | Param::PmiEnhancement
                | Param::HarqEnhancement
                | Param::PdcchAdaptive
        )
    }

    /// Largest grid index a valid set may hold.
    fn max_valid_index(self) -> u32 {
        let top = self.spec().value_count() as u32 - 1;
        if self == Param::IblerTarget {
            top - 1
        } else {
            top
        }
    }
}

/// The six parameters published on the tuning sheet, in sheet order.
pub fn table2_specs() -> Vec<ParameterSpec> {
    [
        Param::IblerTarget,
        Param::AdaptiveMcsSelection,
        Param::PmiEnhancement,
        Param::McsFilter,
        Param::InitialRank,
        Param::HarqEnhancement,
    ]
    .into_iter()
    .map(Param::spec)
    .collect()
}

/// One validated point of the action space.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParameterSet {
    idx: [u32; PARAM_COUNT],
}

impl ParameterSet {
    /// The SME-recommended configuration used for the baseline.
    pub fn sme_default() -> Self {
        RawParameterSet {
            ibler_target: 0.10,
            adaptive_mcs_selection: true,
            pmi_enhancement: false,
            mcs_filter: 0.50,
            initial_rank: 2,
            harq_enhancement: false,
            cqi_filter_coeff: 0.30,
            pdcch_adaptive: true,
            fairness_exponent: 1.0,
            max_mcs_cap: 27,
        }
        .validate()
        .expect("SME defaults are on grid")
    }

    /// Every parameter at its minimum.
    pub fn minimum() -> Self {
        Self {
            idx: [0; PARAM_COUNT],
        }
    }

    pub fn index(&self, p: Param) -> u32 {
        self.idx[p as usize]
    }

    pub fn value(&self, p: Param) -> f64 {
        p.spec().value_at(self.index(p))
    }

    fn flag(&self, p: Param) -> bool {
        self.index(p) == 1
    }

    pub fn ibler_target(&self) -> f64 {
        self.value(Param::IblerTarget)
    }
    pub fn adaptive_mcs_selection(&self) -> bool {
        self.flag(Param::AdaptiveMcsSelection)
    }
    pub fn pmi_enhancement(&self) -> bool {
        self.flag(Param::PmiEnhancement)
    }
    pub fn mcs_filter(&self) -> f64 {
        self.value(Param::McsFilter)
    }
    pub fn initial_rank(&self) -> u8 {
        self.index(Param::InitialRank) as u8 + 1
    }
    pub fn harq_enhancement(&self) -> bool {
        self.flag(Param::HarqEnhancement)
    }
    pub fn cqi_filter_coeff(&self) -> f64 {
        self.value(Param::CqiFilterCoeff)
    }
    pub fn pdcch_adaptive(&self) -> bool {
        self.flag(Param::PdcchAdaptive)
    }
    pub fn fairness_exponent(&self) -> f64 {
        self.value(Param::FairnessExponent)
    }
    pub fn max_mcs_cap(&self) -> u8 {
        self.index(Param::MaxMcsCap) as u8
    }

    /// Returns a copy with one parameter replaced, validating the new value.
    pub fn with(&self, p: Param, value: f64) -> Result<Self, ActionError> {
        let mut idx = self.idx;
        idx[p as usize] = grid_index(p, value)?;
        Ok(Self { idx })
    }

    pub fn to_raw(&self) -> RawParameterSet {
        RawParameterSet {
            ibler_target: self.ibler_target(),
            adaptive_mcs_selection: self.adaptive_mcs_selection(),
            pmi_enhancement: self.pmi_enhancement(),
            mcs_filter: self.mcs_filter(),
            initial_rank: self.initial_rank() as i64,
            harq_enhancement: self.harq_enhancement(),
            cqi_filter_coeff: self.cqi_filter_coeff(),
            pdcch_adaptive: self.pdcch_adaptive(),
            fairness_exponent: self.fairness_exponent(),
            max_mcs_cap: self.max_mcs_cap() as i64,
        }
    }

    /// Canonical single-line JSON with fixed key order.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string(&self.to_raw()).expect("plain struct serialises")
    }

    /// Maps each parameter onto [-1, 1]: the inverse of [`decode_action`] on
    /// grid points. Booleans encode to +-0.5.
    pub fn encode(&self) -> [f64; PARAM_COUNT] {
        let mut out = [0.0; PARAM_COUNT];
        for p in Param::ALL {
            let i = self.index(p);
            out[p as usize] = if p.is_boolean() {
                if i == 1 {
                    0.5
                } else {
                    -0.5
                }
            } else {
                let top = (p.spec().value_count() - 1) as f64;
                -1.0 + 2.0 * i as f64 / top
            };
        }
        out
    }
}

fn grid_index(p: Param, value: f64) -> Result<u32, ActionError> {
    let i = p.spec().index_of(p.name(), value)?;
    if p == Param::IblerTarget && i > p.max_valid_index() {
        return Err(ActionError::DegenerateIbler);
    }
    Ok(i)
}

impl fmt::Debug for ParameterSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_canonical_json())
    }
}

impl fmt::Display for ParameterSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_canonical_json())
    }
}

/// Unvalidated parameter values as they appear in config files and logs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawParameterSet {
    pub ibler_target: f64,
    pub adaptive_mcs_selection: bool,
    pub pmi_enhancement: bool,
    pub mcs_filter: f64,
    pub initial_rank: i64,
    pub harq_enhancement: bool,
    pub cqi_filter_coeff: f64,
    pub pdcch_adaptive: bool,
    pub fairness_exponent: f64,
    pub max_mcs_cap: i64,
}

impl RawParameterSet {
    /// Checks every field against its range and grid.
    pub fn validate(&self) -> Result<ParameterSet, ActionError> {
        let b = |v: bool| if v { 1.0 } else { 0.0 };
        let values = [
            self.ibler_target,
            b(self.adaptive_mcs_selection),
            b(self.pmi_enhancement),
            self.mcs_filter,
            self.initial_rank as f64,
            b(self.harq_enhancement),
            self.cqi_filter_coeff,
            b(self.pdcch_adaptive),
            self.fairness_exponent,
            self.max_mcs_cap as f64,
        ];
        let mut idx = [0u32; PARAM_COUNT];
        for p in Param::ALL {
            idx[p as usize] = grid_index(p, values[p as usize])?;
        }
        Ok(ParameterSet { idx })
    }
}

/// Free-function form of [`RawParameterSet::validate`].
pub fn validate(raw: &RawParameterSet) -> Result<ParameterSet, ActionError> {
    raw.validate()
}

impl Serialize for ParameterSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_raw().serialize(s)
    }
}

impl<'de> Deserialize<'de> for ParameterSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        RawParameterSet::deserialize(d)?
            .validate()
            .map_err(serde::de::Error::custom)
    }
}

/// Maps a squashed policy output onto the parameter grid.
///
/// Each component is mapped affinely onto its range and snapped to the
/// nearest grid point (halves round up); booleans are true iff the component
/// is strictly positive. An IBLER of 1.0 snaps down to 0.99.
pub fn decode_action(raw: &[f64]) -> Result<ParameterSet, ActionError> {
    if raw.len() != PARAM_COUNT {
        return Err(ActionError::WrongArity(raw.len()));
    }
    let mut idx = [0u32; PARAM_COUNT];
    for p in Param::ALL {
        let r = raw[p as usize];
        if !(-1.0..=1.0).contains(&r) {
            return Err(ActionError::SquashViolation {
                index: p as usize,
                value: r,
            });
        }
        idx[p as usize] = if p.is_boolean() {
            u32::from(r > 0.0)
        } else {
            let top = (p.spec().value_count() - 1) as f64;
            let t = (r + 1.0) / 2.0;
            ((t * top + 0.5).floor() as u32).min(p.max_valid_index())
        };
    }
    Ok(ParameterSet { idx })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SampleMode {
    ManualRange,
    UniformRandom,
}

/// The ten parameter specs in [`Param`] order, with SME recommended
/// sub-ranges used for manual seeding.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSpace {
    specs: Vec<ParameterSpec>,
}

impl Default for ActionSpace {
    fn default() -> Self {
        let rec: [(f64, f64); PARAM_COUNT] = [
            (0.05, 0.20),
            (0.0, 1.0),
            (0.0, 1.0),
            (0.0, 1.0),
            (1.0, 4.0),
            (0.0, 1.0),
            (0.2, 0.6),
            (1.0, 1.0),
            (0.5, 1.5),
            (20.0, 27.0),
        ];
        let specs = Param::ALL
            .into_iter()
            .map(|p| {
                let (lo, hi) = rec[p as usize];
                p.spec().with_recommended(lo, hi)
            })
            .collect();
        Self { specs }
    }
}

impl ActionSpace {
    /// Full grids with no recommended ranges.
    pub fn unconstrained() -> Self {
        Self {
            specs: Param::ALL.into_iter().map(Param::spec).collect(),
        }
    }

    pub fn specs(&self) -> &[ParameterSpec] {
        &self.specs
    }

    pub fn spec(&self, p: Param) -> &ParameterSpec {
        &self.specs[p as usize]
    }

    /// Replaces (or with `None`, removes) the recommended range of `p`.
    pub fn set_recommended(&mut self, p: Param, range: Option<[f64; 2]>) -> Result<(), ActionError> {
        if let Some([lo, hi]) = range {
            let bad = |reason: String| ActionError::BadRecommendedRange {
                name: p.name().to_string(),
                reason,
            };
            let lo_i = grid_index(p, lo).map_err(|e| bad(e.to_string()))?;
            let hi_i = grid_index(p, hi).map_err(|e| bad(e.to_string()))?;
            if lo_i > hi_i {
                return Err(bad(format!("lo {lo} > hi {hi}")));
            }
        }
        self.specs[p as usize].sme_recommended_range = range;
        Ok(())
    }

    /// Applies recommended-range overrides keyed by parameter name.
    pub fn with_overrides(
        mut self,
        overrides: &BTreeMap<String, Option<[f64; 2]>>,
    ) -> Result<Self, ActionError> {
        for (name, range) in overrides {
            let p = Param::from_name(name).ok_or_else(|| ActionError::BadRecommendedRange {
                name: name.clone(),
                reason: "unknown parameter".into(),
            })?;
            self.set_recommended(p, *range)?;
        }
        Ok(self)
    }

    fn index_bounds(&self, p: Param, mode: SampleMode) -> Result<(u32, u32), ActionError> {
        match mode {
            SampleMode::UniformRandom => Ok((0, p.max_valid_index())),
            SampleMode::ManualRange => {
                let [lo, hi] = self.specs[p as usize]
                    .sme_recommended_range
                    .ok_or(ActionError::MissingRecommendedRange(p.name()))?;
                Ok((grid_index(p, lo)?, grid_index(p, hi)?))
            }
        }
    }

    /// Draws a parameter set uniformly over either the full grids or the SME
    /// recommended sub-grids.
    pub fn sample_candidate<R: Rng + ?Sized>(
        &self,
        mode: SampleMode,
        rng: &mut R,
    ) -> Result<ParameterSet, ActionError> {
        let mut idx = [0u32; PARAM_COUNT];
        for p in Param::ALL {
            let (lo, hi) = self.index_bounds(p, mode)?;
            idx[p as usize] = rng.random_range(lo..=hi);
        }
        Ok(ParameterSet { idx })
    }

    /// Whether every parameter of `ps` lies inside its recommended range.
    pub fn within_recommended(&self, ps: &ParameterSet) -> bool {
        Param::ALL.into_iter().all(|p| {
            self.index_bounds(p, SampleMode::ManualRange)
                .map(|(lo, hi)| (lo..=hi).contains(&ps.index(p)))
                .unwrap_or(true)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;

    #[test]
    fn minimum_values_validate() {
        let raw = ParameterSet::minimum().to_raw();
        assert_eq!(raw.initial_rank, 1);
        assert_eq!(raw.validate().unwrap(), ParameterSet::minimum());
    }

    #[test]
    fn degenerate_ibler_rejected() {
        let mut raw = ParameterSet::sme_default().to_raw();
        raw.ibler_target = 1.0;
        assert_eq!(raw.validate(), Err(ActionError::DegenerateIbler));
    }

    #[test]
    fn off_grid_mcs_filter_rejected() {
        let mut raw = ParameterSet::sme_default().to_raw();
        raw.mcs_filter = 0.005;
        assert!(matches!(
            raw.validate(),
            Err(ActionError::OffGrid { name: "mcs_filter", .. })
        ));
    }

    #[test]
    fn out_of_range_names_field() {
        let mut raw = ParameterSet::sme_default().to_raw();
        raw.initial_rank = 9;
        assert!(matches!(
            raw.validate(),
            Err(ActionError::OutOfRange { name: "initial_rank", .. })
        ));
        raw.initial_rank = 2;
        raw.fairness_exponent = -0.1;
        assert!(matches!(
            raw.validate(),
            Err(ActionError::OutOfRange { name: "fairness_exponent", .. })
        ));
    }

    #[test]
    fn table2_cardinality() {
        assert_eq!(cardinality(&table2_specs()), 1_299_264);
        assert_eq!(cardinality(&[ParameterSpec::boolean("b")]), 2);
        assert_eq!(cardinality(&[]), 1);
        let full: Vec<_> = Param::ALL.into_iter().map(Param::spec).collect();
        assert!(cardinality(&full) >= cardinality(&table2_specs()));
        for s in &full {
            s.check().unwrap();
        }
    }

    #[test]
    fn decode_saturation() {
        let lo = decode_action(&[-1.0; 10]).unwrap();
        assert_eq!(lo, ParameterSet::minimum());
        let hi = decode_action(&[1.0; 10]).unwrap();
        assert_eq!(hi.ibler_target(), 0.99);
        assert!(hi.adaptive_mcs_selection() && hi.pmi_enhancement());
        assert_eq!(hi.mcs_filter(), 2.0);
        assert_eq!(hi.initial_rank(), 8);
        assert_eq!(hi.cqi_filter_coeff(), 1.0);
        assert_eq!(hi.fairness_exponent(), 2.0);
        assert_eq!(hi.max_mcs_cap(), 27);
    }

    #[test]
    fn decode_midpoint_rank_rounds_half_up() {
        // Enumeration oracle: the affine image of 0.0 on ranks 1..=8 is 4.5;
        // its nearest ranks are 4 and 5, equidistant, and the tie goes up.
        let image = 1.0 + (0.0 + 1.0) / 2.0 * 7.0;
        let mut best = (f64::INFINITY, 0);
        for rank in 1..=8 {
            let d = (rank as f64 - image).abs();
            if d < best.0 - 1e-12 || ((d - best.0).abs() <= 1e-12 && rank > best.1) {
                best = (d, rank);
            }
        }
        assert_eq!(best.1, 5);
        let ps = decode_action(&[0.0; 10]).unwrap();
        assert_eq!(ps.initial_rank(), 5);
        assert!(!ps.pmi_enhancement(), "ties decode to false");
    }

    #[test]
    fn decode_rejects_unsquashed() {
        let mut raw = [0.0; 10];
        raw[3] = 1.2;
        assert!(matches!(
            decode_action(&raw),
            Err(ActionError::SquashViolation { index: 3, .. })
        ));
        assert_eq!(decode_action(&[0.0; 3]), Err(ActionError::WrongArity(3)));
    }

    #[test]
    fn canonical_json_key_order() {
        let json = ParameterSet::sme_default().to_canonical_json();
        assert_eq!(
            json,
            "{\"ibler_target\":0.1,\"adaptive_mcs_selection\":true,\"pmi_enhancement\":false,\
             \"mcs_filter\":0.5,\"initial_rank\":2,\"harq_enhancement\":false,\
             \"cqi_filter_coeff\":0.3,\"pdcch_adaptive\":true,\
             \"fairness_exponent\":1.0,\"max_mcs_cap\":27}"
        );
        let back: ParameterSet = serde_json::from_str(&json).unwrap();
        assert_eq!(back, ParameterSet::sme_default());
    }

    #[test]
    fn uniform_boolean_fraction() {
        let space = ActionSpace::default();
        let mut r = rng::stream(11, &[]);
        let n = 100_000;
        let trues = (0..n)
            .filter(|_| {
                space
                    .sample_candidate(SampleMode::UniformRandom, &mut r)
                    .unwrap()
                    .harq_enhancement()
            })
            .count();
        let frac = trues as f64 / n as f64;
        assert!((frac - 0.5).abs() < 0.01, "{frac}");
    }

    #[test]
    fn manual_samples_stay_in_range() {
        let mut space = ActionSpace::default();
        space
            .set_recommended(Param::IblerTarget, Some([0.08, 0.12]))
            .unwrap();
        space
            .set_recommended(Param::FairnessExponent, Some([0.7, 0.7]))
            .unwrap();
        let mut r = rng::stream(3, &[]);
        for _ in 0..2000 {
            let ps = space.sample_candidate(SampleMode::ManualRange, &mut r).unwrap();
            let i = ps.index(Param::IblerTarget);
            assert!((8..=12).contains(&i));
            assert_eq!(ps.index(Param::FairnessExponent), 7);
            assert!(space.within_recommended(&ps));
        }
    }

    #[test]
    fn manual_without_ranges_is_config_error() {
        let space = ActionSpace::unconstrained();
        let mut r = rng::stream(3, &[]);
        assert!(matches!(
            space.sample_candidate(SampleMode::ManualRange, &mut r),
            Err(ActionError::MissingRecommendedRange("ibler_target"))
        ));
    }

    proptest! {
        #[test]
        fn decode_is_total_and_reencodes(raw in proptest::collection::vec(-1.0f64..=1.0, 10)) {
            let ps = decode_action(&raw).unwrap();
            prop_assert_eq!(ps.to_raw().validate().unwrap(), ps);
            prop_assert_eq!(decode_action(&ps.encode()).unwrap(), ps);
        }

        #[test]
        fn random_samples_validate(seed in any::<u64>()) {
            let mut r = rng::stream(seed, &[]);
            let space = ActionSpace::default();
            for mode in [SampleMode::UniformRandom, SampleMode::ManualRange] {
                let ps = space.sample_candidate(mode, &mut r).unwrap();
                prop_assert_eq!(ps.to_raw().validate().unwrap(), ps);
            }
        }
    }
}
