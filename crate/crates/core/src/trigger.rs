//! Trigger-level baseline: each pump switches on at or below its ON level and
//! off at or above its OFF level, latching in between.

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::model::ControlVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriggerBand {
    pub pump_id: String,
    /// Index of the station the pump belongs to.
    pub station: usize,
    pub on_below_m: f64,
    pub off_above_m: f64,
}

impl TriggerBand {
    pub fn new(
        pump_id: impl Into<String>,
        station: usize,
        on_below_m: f64,
        off_above_m: f64,
    ) -> Result<Self, ModelError> {
        let band = TriggerBand {
            pump_id: pump_id.into(),
            station,
            on_below_m,
            off_above_m,
        };
        band.validate()?;
        Ok(band)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.on_below_m.is_finite() && self.off_above_m.is_finite()) {
            return Err(ModelError::invariant("bands", "trigger levels must be finite"));
        }
        if self.on_below_m >= self.off_above_m {
            return Err(ModelError::invariant(
                "bands",
                format!(
                    "pump {}: on level {} must be below off level {}",
                    self.pump_id, self.on_below_m, self.off_above_m
                ),
            ));
        }
        Ok(())
    }

    fn next_flag(&self, on: bool, depth_m: f64) -> bool {
        if depth_m <= self.on_below_m {
            true
        } else if depth_m >= self.off_above_m {
            false
        } else {
            on
        }
    }
}

/// Default bands for pumps 1A and 2A (station 0) and booster 3A (station 1).
pub fn richmond_pruned_bands() -> Vec<TriggerBand> {
    vec![
        TriggerBand {
            pump_id: "1A".into(),
            station: 0,
            on_below_m: 2.37,
            off_above_m: 2.98,
        },
        TriggerBand {
            pump_id: "2A".into(),
            station: 0,
            on_below_m: 1.40,
            off_above_m: 3.25,
        },
        TriggerBand {
            pump_id: "3A".into(),
            station: 1,
            on_below_m: 1.90,
            off_above_m: 3.11,
        },
    ]
}

/// Latched on/off flag per band.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriggerState {
    pub on_flags: Vec<bool>,
}

impl TriggerState {
    pub fn all_off(pumps: usize) -> Self {
        TriggerState {
            on_flags: vec![false; pumps],
        }
    }
}

/// Aggregates the flags into pump counts per station.
pub fn control_from_flags(flags: &[bool], bands: &[TriggerBand], stations: usize) -> ControlVector {
    let mut counts = vec![0u32; stations];
    for (band, &on) in bands.iter().zip(flags) {
        if on {
            counts[band.station] += 1;
        }
    }
    ControlVector::new(counts)
}

pub fn trigger_step(
    state: &TriggerState,
    depth_m: f64,
    bands: &[TriggerBand],
    stations: usize,
) -> (TriggerState, ControlVector) {
    let on_flags: Vec<bool> = bands
        .iter()
        .zip(&state.on_flags)
        .map(|(band, &on)| band.next_flag(on, depth_m))
        .collect();
    let u = control_from_flags(&on_flags, bands, stations);
    (TriggerState { on_flags }, u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn state(a: bool, b: bool, c: bool) -> TriggerState {
        TriggerState {
            on_flags: vec![a, b, c],
        }
    }

    #[test]
    fn switches_off_above_band() {
        let bands = richmond_pruned_bands();
        let (s, _) = trigger_step(&state(false, true, false), 3.30, &bands, 2);
        assert!(!s.on_flags[1]);
    }

    #[test]
    fn switches_on_below_band() {
        let bands = richmond_pruned_bands();
        let (s, u) = trigger_step(&state(false, false, false), 2.30, &bands, 2);
        assert_eq!(s.on_flags, vec![true, false, false]);
        assert_eq!(u, ControlVector::from([1, 0]));
    }

    #[test]
    fn inside_bands_only_1a_reacts() {
        let bands = richmond_pruned_bands();
        for prev in [state(false, false, false), state(false, true, true), state(true, false, true)] {
            let (s, _) = trigger_step(&prev, 2.00, &bands, 2);
            assert!(s.on_flags[0]);
            assert_eq!(s.on_flags[1], prev.on_flags[1]);
            assert_eq!(s.on_flags[2], prev.on_flags[2]);
        }
    }

    #[test]
    fn can_produce_excluded_combination() {
        let bands = richmond_pruned_bands();
        let (_, u) = trigger_step(&state(true, true, false), 2.5, &bands, 2);
        assert_eq!(u, ControlVector::from([2, 0]));
    }

    #[test]
    fn band_validation() {
        assert!(TriggerBand::new("X", 0, 3.0, 2.0).is_err());
        assert!(TriggerBand::new("X", 0, 2.0, 2.0).is_err());
        assert!(TriggerBand::new("X", 0, 1.0, 2.0).is_ok());
    }

    proptest! {
        #[test]
        fn hysteresis_and_monotonicity(
            flags in proptest::collection::vec(any::<bool>(), 3),
            x in 0.0f64..4.0,
            dx in 0.0f64..2.0,
        ) {
            let bands = richmond_pruned_bands();
            let s = TriggerState { on_flags: flags.clone() };
            let (hi, _) = trigger_step(&s, x + dx, &bands, 2);
            let (lo, _) = trigger_step(&s, x, &bands, 2);
            for (i, band) in bands.iter().enumerate() {
                if x > band.on_below_m && x < band.off_above_m {
                    prop_assert_eq!(lo.on_flags[i], flags[i]);
                }
                // lowering the depth never turns a pump off
                prop_assert!(lo.on_flags[i] || !hi.on_flags[i]);
            }
            prop_assert_eq!(trigger_step(&s, x, &bands, 2), trigger_step(&s, x, &bands, 2));
        }
    }
}
