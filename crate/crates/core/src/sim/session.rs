use super::{CellState, Scenario, SimError, TtiTrace, SLOTS_PER_SECOND};
use crate::action::ParameterSet;

/// Number of slots in a session of `duration_s` seconds.
pub fn session_slots(duration_s: f64) -> Result<u64, SimError> {
    if !(duration_s > 0.0) || !duration_s.is_finite() {
        return Err(SimError::Config(format!(
            "session duration must be positive, got {duration_s}"
        )));
    }
    // The epsilon keeps 0.3 s at 600 slots rather than 601.
    Ok(((duration_s * SLOTS_PER_SECOND as f64) - 1e-9).ceil() as u64)
}

/// Runs a session, handing each slot's trace to `sink` as it is produced.
pub fn simulate<F: FnMut(&TtiTrace)>(
    scenario: &Scenario,
    params: &ParameterSet,
    seed: u64,
    duration_s: f64,
    mut sink: F,
) -> Result<(), SimError> {
    let slots = session_slots(duration_s)?;
    scenario.validate()?;
    let mut cell = CellState::new(scenario, params, seed);
    for _ in 0..slots {
        let t = cell.step(params)?;
        sink(&t);
    }
    Ok(())
}

/// Runs a session and collects every slot trace. Fully determined by
/// `(scenario, params, seed, duration_s)`.
pub fn run_session(
    scenario: &Scenario,
    params: &ParameterSet,
    seed: u64,
    duration_s: f64,
) -> Result<Vec<TtiTrace>, SimError> {
    let mut out = Vec::with_capacity(session_slots(duration_s)? as usize);
    simulate(scenario, params, seed, duration_s, |t| out.push(t.clone()))?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{write_trace_csv, SlotKind};

    #[test]
    fn one_second_has_1600_dl_slots() {
        let s = Scenario::default_three_ue();
        let t = run_session(&s, &ParameterSet::sme_default(), 1, 1.0).unwrap();
        assert_eq!(t.len(), 2000);
        let dl = t.iter().filter(|x| x.slot_kind == SlotKind::Downlink).count();
        assert_eq!(dl, 1600);
        for x in &t {
            if x.slot_kind == SlotKind::Other {
                assert_eq!(x.scheduled_count(), 0);
            }
        }
    }

    #[test]
    fn slot_counts() {
        assert_eq!(session_slots(30.0).unwrap(), 60_000);
        assert_eq!(session_slots(0.3).unwrap(), 600);
        assert!(session_slots(0.0).is_err());
        assert!(session_slots(-1.0).is_err());
    }

    #[test]
    fn identical_inputs_give_identical_bytes() {
        let s = Scenario::default_three_ue();
        let p = ParameterSet::sme_default();
        let dump = |seed| {
            let mut buf = Vec::new();
            write_trace_csv(&run_session(&s, &p, seed, 2.0).unwrap(), &mut buf).unwrap();
            buf
        };
        assert_eq!(dump(5), dump(5));
        assert_ne!(dump(5), dump(6));
    }
}
