//! Physical and economic model of a single-tank water distribution network.

mod costs;
mod demand;
mod pumps;
mod tank;
mod tariff;

pub use costs::{stage_cost_economic, stage_cost_switching, CostWeights, SwitchingWeights};
pub use demand::{DemandProfile, RICHMOND_MULTIPLIERS};
pub use pumps::{
    ControlVector, LinearConstraint, PowerMode, PumpComboRecord, PumpStationGroup, StationSpec,
};
pub use tank::{node_balance_residual, tank_update, TankSpec};
pub use tariff::{TariffSchedule, PERIOD_HOURS};

use serde::Serialize;

use crate::error::ModelError;

/// One tank fed by a group of pump stations and drained by one demand node.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkModel {
    pub tank: TankSpec,
    pub pumps: PumpStationGroup,
    pub tariff: TariffSchedule,
    pub demand: DemandProfile,
}

impl NetworkModel {
    pub fn new(
        tank: TankSpec,
        pumps: PumpStationGroup,
        tariff: TariffSchedule,
        demand: DemandProfile,
    ) -> Result<Self, ModelError> {
        tank.validate()?;
        tariff.validate()?;
        demand.validate()?;
        Ok(NetworkModel {
            tank,
            pumps,
            tariff,
            demand,
        })
    }

    /// Richmond Pruned case study with a 500 m² tank and the given base demand.
    pub fn richmond_pruned(base_demand_m3s: f64) -> Self {
        NetworkModel {
            tank: TankSpec {
                id: "A".into(),
                area_m2: 500.0,
                depth_min_m: 1.4,
                depth_max_m: 3.37,
                depth_init_m: 3.12,
            },
            pumps: PumpStationGroup::richmond_pruned(),
            tariff: TariffSchedule::richmond_pruned(),
            demand: DemandProfile::richmond_pruned(base_demand_m3s),
        }
    }

    /// Average demand (m³/s) over `[t0_s, t0_s + dt_s)`.
    pub fn mean_demand(&self, t0_s: f64, dt_s: f64) -> f64 {
        hourly_average(t0_s, dt_s, |h| self.demand.demand_at(h))
    }

    /// Average price (pence/kWh) over `[t0_s, t0_s + dt_s)`.
    pub fn mean_price(&self, t0_s: f64, dt_s: f64) -> f64 {
        hourly_average(t0_s, dt_s, |h| self.tariff.tariff_at(h))
    }
}

/// Time-weighted average of an hourly piecewise-constant signal.
pub fn hourly_average(t0_s: f64, dt_s: f64, f: impl Fn(usize) -> f64) -> f64 {
    let end = t0_s + dt_s;
    let mut t = t0_s;
    let mut acc = 0.0;
    while t < end - 1e-9 {
        let hour = (t / 3600.0 + 1e-9).floor();
        let next = ((hour + 1.0) * 3600.0).min(end);
        acc += f(hour as usize) * (next - t);
        t = next;
    }
    acc / dt_s
}
