//! Cell scenarios: UE coverage profiles and their application traffic.

use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{SimConfig, SimError, SLOTS_PER_SECOND};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CoverageClass {
    Excellent,
    Medium,
    Poor,
}

impl CoverageClass {
    pub const ALL: [CoverageClass; 3] =
        [CoverageClass::Excellent, CoverageClass::Medium, CoverageClass::Poor];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn default_mean_sinr_db(self) -> f64 {
        match self {
            CoverageClass::Excellent => 25.0,
            CoverageClass::Medium => 12.0,
            CoverageClass::Poor => 0.0,
        }
    }

    /// Probability that an uplink transport block is acknowledged.
    pub fn default_ul_ack_probability(self) -> f64 {
        match self {
            CoverageClass::Excellent => 0.98,
            CoverageClass::Medium => 0.95,
            CoverageClass::Poor => 0.88,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AppKind {
    VideoStream,
    Messaging,
    SpeedTest,
    Idle,
}

/// Offered rate of an application phase; full-buffer phases are `Unbounded`,
/// written as the string `"unbounded"` in scenario files.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OfferedRate {
    Bps(f64),
    Unbounded,
}

impl OfferedRate {
    pub fn bps(self) -> Option<f64> {
        match self {
            OfferedRate::Bps(v) => Some(v),
            OfferedRate::Unbounded => None,
        }
    }
}

impl Serialize for OfferedRate {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            OfferedRate::Bps(v) => s.serialize_f64(*v),
            OfferedRate::Unbounded => s.serialize_str("unbounded"),
        }
    }
}

impl<'de> Deserialize<'de> for OfferedRate {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Tag(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(OfferedRate::Bps(v)),
            Repr::Tag(t) if t == "unbounded" => Ok(OfferedRate::Unbounded),
            Repr::Tag(t) => Err(serde::de::Error::custom(format!(
                "offered_rate_bps must be a number or \"unbounded\", got {t:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppPhase {
    pub app_kind: AppKind,
    pub start_s: f64,
    pub duration_s: f64,
    pub offered_rate_bps: OfferedRate,
}

impl AppPhase {
    pub fn new(app_kind: AppKind, start_s: f64, duration_s: f64, rate_bps: f64) -> Self {
        let offered_rate_bps = match app_kind {
            AppKind::SpeedTest => OfferedRate::Unbounded,
            AppKind::Idle => OfferedRate::Bps(0.0),
            _ => OfferedRate::Bps(rate_bps),
        };
        Self {
            app_kind,
            start_s,
            duration_s,
            offered_rate_bps,
        }
    }

    fn end_s(&self) -> f64 {
        self.start_s + self.duration_s
    }

    fn start_slot(&self) -> u64 {
        (self.start_s * SLOTS_PER_SECOND as f64).round() as u64
    }

    fn end_slot(&self) -> u64 {
        (self.end_s() * SLOTS_PER_SECOND as f64).round() as u64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UeProfile {
    pub ue_id: u8,
    pub coverage_class: CoverageClass,
    pub mean_sinr_db: f64,
    pub sinr_stddev_db: f64,
    pub traffic_profile: Vec<AppPhase>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ul_ack_probability: Option<f64>,
}

impl UeProfile {
    pub fn new(
        ue_id: u8,
        coverage_class: CoverageClass,
        mean_sinr_db: f64,
        sinr_stddev_db: f64,
        traffic_profile: Vec<AppPhase>,
    ) -> Self {
        Self {
            ue_id,
            coverage_class,
            mean_sinr_db,
            sinr_stddev_db,
            traffic_profile,
            ul_ack_probability: None,
        }
    }

    /// Class-default channel with no traffic.
    pub fn default_for(ue_id: u8, class: CoverageClass) -> Self {
        Self::new(ue_id, class, class.default_mean_sinr_db(), 3.0, vec![])
    }

    pub fn ul_ack_probability(&self) -> f64 {
        self.ul_ack_probability
            .unwrap_or_else(|| self.coverage_class.default_ul_ack_probability())
    }
}

/// What a UE's application is doing in a given slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActivePhase {
    pub kind: AppKind,
    pub rate_bps: f64,
    /// Slot offset from the start of the phase.
    pub slot_in_phase: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub ues: Vec<UeProfile>,
    /// When set, every traffic profile repeats with this period.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cycle_s: Option<f64>,
    #[serde(default)]
    pub sim: SimConfig,
}

impl Scenario {
    /// Three UEs (excellent, medium, poor) on a repeating 10 s traffic cycle:
    /// five seconds of full-buffer speed tests and five seconds of paced video
    /// with background messaging.
    pub fn default_three_ue() -> Self {
        use AppKind::*;
        let excellent = UeProfile::new(
            0,
            CoverageClass::Excellent,
            25.0,
            3.0,
            vec![
                AppPhase::new(SpeedTest, 0.0, 3.0, 0.0),
                AppPhase::new(VideoStream, 3.0, 2.0, 40e6),
                AppPhase::new(Messaging, 5.0, 2.0, 0.2e6),
                AppPhase::new(Idle, 7.0, 1.0, 0.0),
                AppPhase::new(Messaging, 8.0, 2.0, 0.2e6),
            ],
        );
        let medium = UeProfile::new(
            1,
            CoverageClass::Medium,
            12.0,
            3.0,
            vec![
                AppPhase::new(Messaging, 0.0, 3.0, 0.2e6),
                AppPhase::new(Idle, 3.0, 2.0, 0.0),
                AppPhase::new(SpeedTest, 5.0, 2.0, 0.0),
                AppPhase::new(Messaging, 7.0, 3.0, 0.2e6),
            ],
        );
        let poor = UeProfile::new(
            2,
            CoverageClass::Poor,
            0.0,
            3.0,
            vec![
                AppPhase::new(Messaging, 0.0, 7.0, 0.1e6),
                AppPhase::new(VideoStream, 7.0, 3.0, 4e6),
            ],
        );
        Self {
            name: "default-three-ue".into(),
            ues: vec![excellent, medium, poor],
            cycle_s: Some(10.0),
            sim: SimConfig::default(),
        }
    }

    /// Default channels with no traffic at all.
    pub fn idle() -> Self {
        Self {
            name: "idle".into(),
            ues: CoverageClass::ALL
                .iter()
                .enumerate()
                .map(|(i, &c)| UeProfile::default_for(i as u8, c))
                .collect(),
            cycle_s: None,
            sim: SimConfig::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let s: Scenario =
            serde_json::from_str(text).map_err(|e| SimError::Scenario(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::Scenario(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Scenario(m));
        if self.ues.is_empty() {
            return bad("scenario has no UEs".into());
        }
        if self.ues.len() > u8::MAX as usize {
            return bad("too many UEs".into());
        }
        if let Some(c) = self.cycle_s {
            if !(c > 0.0) {
                return bad(format!("cycle_s must be positive, got {c}"));
            }
        }
        let mut ids: Vec<u8> = self.ues.iter().map(|u| u.ue_id).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != self.ues.len() {
            return bad("duplicate ue_id".into());
        }
        for ue in &self.ues {
            if !(ue.sinr_stddev_db >= 0.0) || !ue.mean_sinr_db.is_finite() {
                return bad(format!("UE {}: invalid channel statistics", ue.ue_id));
            }
            if let Some(p) = ue.ul_ack_probability {
                if !(0.0..=1.0).contains(&p) {
                    return bad(format!("UE {}: ul_ack_probability outside [0, 1]", ue.ue_id));
                }
            }
            let mut phases: Vec<&AppPhase> = ue.traffic_profile.iter().collect();
            phases.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
            for ph in &phases {
                if !(ph.duration_s > 0.0) || !(ph.start_s >= 0.0) {
                    return bad(format!("UE {}: phase durations must be > 0", ue.ue_id));
                }
                match (ph.app_kind, ph.offered_rate_bps) {
                    (AppKind::SpeedTest, OfferedRate::Unbounded) => {}
                    (AppKind::SpeedTest, _) => {
                        return bad(format!("UE {}: SpeedTest must be \"unbounded\"", ue.ue_id))
                    }
                    (_, OfferedRate::Unbounded) => {
                        return bad(format!("UE {}: only SpeedTest may be unbounded", ue.ue_id))
                    }
                    (_, OfferedRate::Bps(r)) if !(r >= 0.0) || !r.is_finite() => {
                        return bad(format!("UE {}: negative offered rate", ue.ue_id))
                    }
                    _ => {}
                }
                if let Some(c) = self.cycle_s {
                    if ph.end_s() > c + 1e-9 {
                        return bad(format!("UE {}: phase extends past the cycle", ue.ue_id));
                    }
                }
            }
            for w in phases.windows(2) {
                if w[0].end_s() > w[1].start_s + 1e-9 {
                    return bad(format!("UE {}: overlapping phases", ue.ue_id));
                }
            }
        }
        self.sim.validate()
    }

    /// The phase UE `ue` is in at `slot`, if any.
    pub fn active_phase(&self, ue: usize, slot: u64) -> Option<ActivePhase> {
        let slot = match self.cycle_s {
            Some(c) => slot % (c * SLOTS_PER_SECOND as f64).round() as u64,
            None => slot,
        };
        self.ues[ue]
            .traffic_profile
            .iter()
            .find(|ph| ph.start_slot() <= slot && slot < ph.end_slot())
            .map(|ph| ActivePhase {
                kind: ph.app_kind,
                rate_bps: ph.offered_rate_bps.bps().unwrap_or(f64::INFINITY),
                slot_in_phase: slot - ph.start_slot(),
            })
    }

    /// Mean offered rate of rate-limited traffic per coverage class, and the
    /// fraction of UE-time spent in full-buffer phases, over `duration_s`.
    pub fn offered_load(&self, duration_s: f64) -> ([f64; 3], f64) {
        let slots = (duration_s * SLOTS_PER_SECOND as f64).ceil() as u64;
        let mut per_class = [0.0; 3];
        let mut full = 0u64;
        if slots == 0 {
            return (per_class, 0.0);
        }
        for (i, ue) in self.ues.iter().enumerate() {
            let mut bits = 0.0;
            for s in 0..slots {
                match self.active_phase(i, s) {
                    Some(p) if p.kind == AppKind::SpeedTest => full += 1,
                    Some(p) if p.kind != AppKind::Idle => bits += p.rate_bps,
                    _ => {}
                }
            }
            per_class[ue.coverage_class.index()] += bits / slots as f64;
        }
        let full_frac = full as f64 / (slots as f64 * self.ues.len() as f64);
        (per_class, full_frac)
    }
}
