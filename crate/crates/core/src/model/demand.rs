use serde::{Deserialize, Serialize};

use super::tariff::PERIOD_HOURS;
use crate::error::ModelError;

/// Hourly demand: a base flow scaled by a 24-value multiplier curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandProfile {
    pub base_demand_m3s: f64,
    pub multipliers: Vec<f64>,
}

/// Diurnal double-peak curve (morning and evening peaks, night trough),
/// mean exactly 1.0.
pub const RICHMOND_MULTIPLIERS: [f64; 24] = [
    0.45, 0.35, 0.30, 0.30, 0.35, 0.55, 0.95, 1.45, 1.70, 1.55, 1.25, 1.10, //
    1.10, 1.15, 0.95, 0.95, 1.05, 1.30, 1.60, 1.65, 1.40, 1.10, 0.85, 0.60,
];

impl DemandProfile {
    pub fn new(base_demand_m3s: f64, multipliers: Vec<f64>) -> Result<Self, ModelError> {
        let p = DemandProfile {
            base_demand_m3s,
            multipliers,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn richmond_pruned(base_demand_m3s: f64) -> Self {
        DemandProfile {
            base_demand_m3s,
            multipliers: RICHMOND_MULTIPLIERS.to_vec(),
        }
    }

    /// Constant demand at `base_demand_m3s`.
    pub fn flat(base_demand_m3s: f64) -> Self {
        DemandProfile {
            base_demand_m3s,
            multipliers: vec![1.0; PERIOD_HOURS],
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.base_demand_m3s.is_finite() && self.base_demand_m3s >= 0.0) {
            return Err(ModelError::invariant("base_demand", "must be finite and >= 0"));
        }
        if self.multipliers.len() != PERIOD_HOURS {
            return Err(ModelError::invariant(
                "multipliers",
                format!("expected {PERIOD_HOURS} values, got {}", self.multipliers.len()),
            ));
        }
        if self.multipliers.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(ModelError::invariant("multipliers", "values must be finite and >= 0"));
        }
        let mean = self.mean_multiplier();
        if (mean - 1.0).abs() > 1e-9 {
            return Err(ModelError::invariant(
                "multipliers",
                format!("mean must be 1.0 (got {mean:.12})"),
            ));
        }
        Ok(())
    }

    pub fn mean_multiplier(&self) -> f64 {
        self.multipliers.iter().sum::<f64>() / self.multipliers.len() as f64
    }

    /// Demand (m³/s) during hour `hour`.
    pub fn demand_at(&self, hour: usize) -> f64 {
        self.base_demand_m3s * self.multipliers[hour % PERIOD_HOURS]
    }

    pub fn with_base(&self, base_demand_m3s: f64) -> Self {
        DemandProfile {
            base_demand_m3s,
            multipliers: self.multipliers.clone(),
        }
    }
}
