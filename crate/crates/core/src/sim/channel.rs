//! Per-UE channel: AR(1) SINR fading around the coverage-class mean and the
//! exponentially filtered CQI report derived from it.

use rand::Rng;
use rand_distr::StandardNormal;

use super::link::sinr_to_cqi;
use super::{SimError, UeProfile, UeState};

/// Advances the UE's SINR by one slot.
///
/// The deviation from the profile mean follows
/// `d' = rho * d + sqrt(1 - rho^2) * sigma * z`, which keeps its stationary
/// standard deviation at `sigma` for every `rho` in [0, 1).
pub fn sinr_evolve<R: Rng + ?Sized>(ue: &mut UeState, profile: &UeProfile, rho: f64, rng: &mut R) {
    let z: f64 = rng.sample(StandardNormal);
    let innovation = (1.0 - rho * rho).max(0.0).sqrt() * profile.sinr_stddev_db;
    ue.sinr_deviation_db = rho * ue.sinr_deviation_db + innovation * z;
    ue.sinr_db = profile.mean_sinr_db + ue.sinr_deviation_db;
}

/// Draws the starting deviation from the stationary distribution.
pub fn sinr_init<R: Rng + ?Sized>(ue: &mut UeState, profile: &UeProfile, rng: &mut R) {
    let z: f64 = rng.sample(StandardNormal);
    ue.sinr_deviation_db = profile.sinr_stddev_db * z;
    ue.sinr_db = profile.mean_sinr_db + ue.sinr_deviation_db;
}

/// Folds the current instantaneous CQI into the filtered report and returns
/// the new filtered value.
pub fn report_cqi(ue: &mut UeState, cqi_filter_coeff: f64) -> Result<f64, SimError> {
    if !(0.0..=1.0).contains(&cqi_filter_coeff) {
        return Err(SimError::Config(format!(
            "cqi filter coefficient {cqi_filter_coeff} outside [0, 1]"
        )));
    }
    let inst = sinr_to_cqi(ue.sinr_db);
    ue.filtered_cqi = (1.0 - cqi_filter_coeff) * ue.filtered_cqi + cqi_filter_coeff * inst;
    Ok(ue.filtered_cqi)
}
