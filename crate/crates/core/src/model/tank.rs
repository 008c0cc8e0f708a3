use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// A storage tank with a constant plan area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TankSpec {
    pub id: String,
    pub area_m2: f64,
    pub depth_min_m: f64,
    pub depth_max_m: f64,
    pub depth_init_m: f64,
}

impl TankSpec {
    pub fn new(
        id: impl Into<String>,
        area_m2: f64,
        depth_min_m: f64,
        depth_max_m: f64,
        depth_init_m: f64,
    ) -> Result<Self, ModelError> {
        let tank = TankSpec {
            id: id.into(),
            area_m2,
            depth_min_m,
            depth_max_m,
            depth_init_m,
        };
        tank.validate()?;
        Ok(tank)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.area_m2.is_finite() && self.area_m2 > 0.0) {
            return Err(ModelError::invariant("area_m2", "must be finite and > 0"));
        }
        if !(self.depth_min_m.is_finite() && self.depth_min_m >= 0.0) {
            return Err(ModelError::invariant("depth_min_m", "must be finite and >= 0"));
        }
        if !(self.depth_max_m.is_finite() && self.depth_max_m > self.depth_min_m) {
            return Err(ModelError::invariant(
                "depth_max_m",
                "must be finite and > depth_min_m",
            ));
        }
        if !(self.depth_init_m >= self.depth_min_m && self.depth_init_m <= self.depth_max_m) {
            return Err(ModelError::invariant(
                "depth_init_m",
                "must lie within [depth_min_m, depth_max_m]",
            ));
        }
        Ok(())
    }

    /// Inclusive bound check.
    pub fn depth_in_bounds(&self, depth_m: f64) -> bool {
        depth_m >= self.depth_min_m && depth_m <= self.depth_max_m
    }

    /// Usable water volume between the depth bounds (m³).
    pub fn usable_volume_m3(&self) -> f64 {
        (self.depth_max_m - self.depth_min_m) * self.area_m2
    }
}

/// Volume balance over one step: `x + dt/area * (q_in - q_out)`. No clamping.
pub fn tank_update(
    depth_m: f64,
    q_in_m3s: f64,
    q_out_m3s: f64,
    dt_s: f64,
    area_m2: f64,
) -> Result<f64, ModelError> {
    let inputs = [depth_m, q_in_m3s, q_out_m3s, dt_s, area_m2];
    if inputs.iter().any(|v| !v.is_finite()) {
        return Err(ModelError::InvalidInput(format!(
            "non-finite tank update input {inputs:?}"
        )));
    }
    if area_m2 <= 0.0 || dt_s <= 0.0 {
        return Err(ModelError::InvalidInput(format!(
            "tank update needs area > 0 and dt > 0 (area={area_m2}, dt={dt_s})"
        )));
    }
    if q_in_m3s < 0.0 || q_out_m3s < 0.0 {
        return Err(ModelError::InvalidInput(format!(
            "negative flow (in={q_in_m3s}, out={q_out_m3s})"
        )));
    }
    Ok(depth_m + dt_s / area_m2 * (q_in_m3s - q_out_m3s))
}

/// Junction balance: sum of inflows minus sum of outflows (m³/s).
pub fn node_balance_residual(inflows: &[f64], outflows: &[f64]) -> f64 {
    inflows.iter().sum::<f64>() - outflows.iter().sum::<f64>()
}
