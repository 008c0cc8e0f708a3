use serde::{Deserialize, Serialize};

use crate::error::ModelError;

pub const PERIOD_HOURS: usize = 24;

/// Two-rate time-of-use tariff repeating every 24 hours.
///
/// The off-peak window is the half-open hour interval `[start, end)`; a window
/// with `start > end` wraps past midnight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TariffSchedule {
    pub price_offpeak: f64,
    pub price_peak: f64,
    pub offpeak_start_h: u32,
    pub offpeak_end_h: u32,
}

impl TariffSchedule {
    pub fn new(
        price_offpeak: f64,
        price_peak: f64,
        offpeak_start_h: u32,
        offpeak_end_h: u32,
    ) -> Result<Self, ModelError> {
        let t = TariffSchedule {
            price_offpeak,
            price_peak,
            offpeak_start_h,
            offpeak_end_h,
        };
        t.validate()?;
        Ok(t)
    }

    /// UK two-rate prices (pence/kWh), off-peak 00:00-07:00.
    pub fn richmond_pruned() -> Self {
        TariffSchedule {
            price_offpeak: 2.41,
            price_peak: 6.79,
            offpeak_start_h: 0,
            offpeak_end_h: 7,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (field, p) in [("price_offpeak", self.price_offpeak), ("price_peak", self.price_peak)] {
            if !(p.is_finite() && p > 0.0) {
                return Err(ModelError::invariant(field, "must be finite and > 0"));
            }
        }
        let h = PERIOD_HOURS as u32;
        if self.offpeak_start_h >= h {
            return Err(ModelError::invariant("offpeak_start_h", "must lie in [0, 24)"));
        }
        if self.offpeak_end_h > h {
            return Err(ModelError::invariant("offpeak_end_h", "must lie in [0, 24]"));
        }
        if self.offpeak_start_h == self.offpeak_end_h {
            return Err(ModelError::invariant("offpeak_end_h", "off-peak window is empty"));
        }
        Ok(())
    }

    pub fn is_offpeak(&self, hour: usize) -> bool {
        let h = (hour % PERIOD_HOURS) as u32;
        if self.offpeak_start_h < self.offpeak_end_h {
            h >= self.offpeak_start_h && h < self.offpeak_end_h
        } else {
            h >= self.offpeak_start_h || h < self.offpeak_end_h
        }
    }

    /// Price (pence/kWh) during hour `hour`.
    pub fn tariff_at(&self, hour: usize) -> f64 {
        if self.is_offpeak(hour) {
            self.price_offpeak
        } else {
            self.price_peak
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        TariffSchedule {
            price_offpeak: self.price_offpeak * factor,
            price_peak: self.price_peak * factor,
            ..self.clone()
        }
    }
}
