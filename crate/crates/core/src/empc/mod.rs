//! Economic MPC: finite-horizon pump scheduling solved by dynamic programming
//! over a quantized depth grid, applied in receding-horizon fashion.

mod dp;
mod oracle;

pub use dp::solve;
pub use oracle::{brute_force_oracle, brute_force_ranked, OracleOutcome, ORACLE_MAX_HORIZON};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::ModelError;
use crate::model::{ControlVector, CostWeights, NetworkModel};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmpcError {
    /// No admissible control sequence keeps the depth within bounds; `step`
    /// is the first horizon step whose successor depth cannot be kept feasible.
    #[error("infeasible: no admissible control keeps the tank depth within bounds at horizon step {step}")]
    Infeasible { step: usize },
    #[error("mean demand {mean_demand_m3s:.5} m3/s exceeds pumping capacity {capacity_m3s:.5} m3/s")]
    CapacityExceeded {
        mean_demand_m3s: f64,
        capacity_m3s: f64,
    },
    #[error("invalid solve context: {0}")]
    InvalidContext(String),
    #[error("invalid EMPC configuration: {0}")]
    InvalidConfig(String),
    #[error("horizon {requested} exceeds the enumeration limit of {limit} steps")]
    HorizonTooLong { requested: usize, limit: usize },
    #[error("plan is empty")]
    EmptyPlan,
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpcConfig {
    pub horizon_steps: usize,
    pub dt_control_s: f64,
    pub depth_grid_resolution_m: f64,
    /// Leading steps solved over integer pump counts; the remaining tail is
    /// relaxed to time-shared blends of neighbouring combinations.
    pub integer_prefix_steps: usize,
    pub weights: CostWeights,
}

impl EmpcConfig {
    /// 24 one-hour steps, 5 mm grid, full-integer horizon.
    pub fn new(weights: CostWeights) -> Self {
        EmpcConfig {
            horizon_steps: 24,
            dt_control_s: 3600.0,
            depth_grid_resolution_m: 0.005,
            integer_prefix_steps: 24,
            weights,
        }
    }

    pub fn with_horizon(mut self, n: usize) -> Self {
        self.horizon_steps = n;
        self.integer_prefix_steps = n;
        self
    }

    pub fn validate(&self) -> Result<(), EmpcError> {
        if self.horizon_steps == 0 {
            return Err(EmpcError::InvalidConfig("horizon_steps must be >= 1".into()));
        }
        if !(self.dt_control_s.is_finite() && self.dt_control_s > 0.0) {
            return Err(EmpcError::InvalidConfig("dt_control_s must be > 0".into()));
        }
        if !(self.depth_grid_resolution_m.is_finite() && self.depth_grid_resolution_m > 0.0) {
            return Err(EmpcError::InvalidConfig(
                "depth_grid_resolution_m must be > 0".into(),
            ));
        }
        if self.integer_prefix_steps == 0 || self.integer_prefix_steps > self.horizon_steps {
            return Err(EmpcError::InvalidConfig(format!(
                "integer_prefix_steps must lie in [1, {}]",
                self.horizon_steps
            )));
        }
        if !(self.weights.per_pump_kw.is_finite() && self.weights.per_pump_kw >= 0.0) {
            return Err(EmpcError::InvalidConfig("per_pump_kw must be >= 0".into()));
        }
        Ok(())
    }

    pub fn dt_control_h(&self) -> f64 {
        self.dt_control_s / 3600.0
    }
}

/// Inputs of one finite-horizon solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveContext {
    pub x_measured: f64,
    pub u_prev: ControlVector,
    /// Demand per horizon step (m³/s).
    pub demand_forecast: Vec<f64>,
    /// Price per horizon step (pence/kWh).
    pub tariff_forecast: Vec<f64>,
}

impl SolveContext {
    /// Perfect forecasts starting at control step `step`.
    pub fn from_model(
        model: &NetworkModel,
        cfg: &EmpcConfig,
        step: usize,
        x_measured: f64,
        u_prev: ControlVector,
    ) -> Self {
        Self::from_provider(cfg, step, x_measured, u_prev, model)
    }

    pub fn from_provider(
        cfg: &EmpcConfig,
        step: usize,
        x_measured: f64,
        u_prev: ControlVector,
        forecast: &dyn ForecastProvider,
    ) -> Self {
        let (demand_forecast, tariff_forecast) = (0..cfg.horizon_steps)
            .map(|i| {
                let t0 = (step + i) as f64 * cfg.dt_control_s;
                (
                    forecast.demand(t0, cfg.dt_control_s),
                    forecast.price(t0, cfg.dt_control_s),
                )
            })
            .unzip();
        SolveContext {
            x_measured,
            u_prev,
            demand_forecast,
            tariff_forecast,
        }
    }

    pub(crate) fn check(&self, model: &NetworkModel, cfg: &EmpcConfig) -> Result<(), EmpcError> {
        let n = cfg.horizon_steps;
        if self.demand_forecast.len() != n || self.tariff_forecast.len() != n {
            return Err(EmpcError::InvalidContext(format!(
                "forecast lengths ({}, {}) must equal the horizon {n}",
                self.demand_forecast.len(),
                self.tariff_forecast.len()
            )));
        }
        if self
            .demand_forecast
            .iter()
            .chain(&self.tariff_forecast)
            .any(|v| !(v.is_finite() && *v >= 0.0))
        {
            return Err(EmpcError::InvalidContext(
                "forecasts must be finite and non-negative".into(),
            ));
        }
        if self.u_prev.len() != model.pumps.station_count() {
            return Err(EmpcError::InvalidContext(format!(
                "u_prev has {} entries, expected {}",
                self.u_prev.len(),
                model.pumps.station_count()
            )));
        }
        let eps = cfg.depth_grid_resolution_m;
        let tank = &model.tank;
        if !(self.x_measured >= tank.depth_min_m - eps && self.x_measured <= tank.depth_max_m + eps)
        {
            return Err(EmpcError::InvalidContext(format!(
                "measured depth {:.4} m is outside [{:.4}, {:.4}] by more than one grid cell",
                self.x_measured, tank.depth_min_m, tank.depth_max_m
            )));
        }
        Ok(())
    }
}

/// Source of demand and price forecasts over a time window.
pub trait ForecastProvider {
    /// Mean demand (m³/s) over `[t0_s, t0_s + dt_s)`.
    fn demand(&self, t0_s: f64, dt_s: f64) -> f64;
    /// Mean price (pence/kWh) over `[t0_s, t0_s + dt_s)`.
    fn price(&self, t0_s: f64, dt_s: f64) -> f64;
}

impl ForecastProvider for NetworkModel {
    fn demand(&self, t0_s: f64, dt_s: f64) -> f64 {
        self.mean_demand(t0_s, dt_s)
    }

    fn price(&self, t0_s: f64, dt_s: f64) -> f64 {
        self.mean_price(t0_s, dt_s)
    }
}

/// Externally supplied per-control-step forecasts, wrapped periodically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalForecast {
    pub dt_s: f64,
    pub demand_m3s: Vec<f64>,
    pub price_p_per_kwh: Vec<f64>,
}

impl ForecastProvider for ExternalForecast {
    fn demand(&self, t0_s: f64, _dt_s: f64) -> f64 {
        let i = (t0_s / self.dt_s + 1e-9).floor() as usize;
        self.demand_m3s[i % self.demand_m3s.len()]
    }

    fn price(&self, t0_s: f64, _dt_s: f64) -> f64 {
        let i = (t0_s / self.dt_s + 1e-9).floor() as usize;
        self.price_p_per_kwh[i % self.price_p_per_kwh.len()]
    }
}

/// Optimal finite-horizon schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub controls: Vec<ControlVector>,
    /// Fractional pump counts on relaxed steps, `None` on integer steps.
    pub relaxed_counts: Vec<Option<Vec<f64>>>,
    pub predicted_depths: Vec<f64>,
    pub total_cost: f64,
    pub economic_cost: f64,
    pub switching_cost: f64,
}

impl Plan {
    pub fn horizon(&self) -> usize {
        self.controls.len()
    }

    /// Number of steps whose control differs from the one before it
    /// (the first step is compared with `u_prev`).
    pub fn switch_count(&self, u_prev: &ControlVector) -> usize {
        let mut prev = u_prev;
        let mut n = 0;
        for u in &self.controls {
            if u != prev {
                n += 1;
            }
            prev = u;
        }
        n
    }
}

/// The control applied now: the first element of the optimal sequence.
pub fn first_action(plan: &Plan) -> Result<ControlVector, EmpcError> {
    plan.controls.first().cloned().ok_or(EmpcError::EmptyPlan)
}

/// Closed-loop controller state between control steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerState {
    pub step: usize,
    pub depth_m: f64,
    pub u_prev: ControlVector,
}

/// One iteration of the receding-horizon loop with perfect forecasts.
pub fn receding_horizon_step(
    state: &ControllerState,
    model: &NetworkModel,
    cfg: &EmpcConfig,
) -> Result<(ControlVector, Plan), EmpcError> {
    receding_horizon_step_with(state, model, cfg, model)
}

/// As [`receding_horizon_step`], with forecasts from `forecast`.
pub fn receding_horizon_step_with(
    state: &ControllerState,
    model: &NetworkModel,
    cfg: &EmpcConfig,
    forecast: &dyn ForecastProvider,
) -> Result<(ControlVector, Plan), EmpcError> {
    let ctx = SolveContext::from_provider(
        cfg,
        state.step,
        state.depth_m,
        state.u_prev.clone(),
        forecast,
    );
    let plan = solve(&ctx, model, cfg)?;
    let action = first_action(&plan)?;
    Ok((action, plan))
}

/// Rejects demand profiles whose daily mean exceeds the largest admissible
/// pumping flow: no schedule can sustain them indefinitely.
pub fn capacity_check(model: &NetworkModel) -> Result<(), EmpcError> {
    let mean_demand_m3s = model.demand.base_demand_m3s * model.demand.mean_multiplier();
    let capacity_m3s = model.pumps.max_admissible_flow();
    if mean_demand_m3s > capacity_m3s {
        return Err(EmpcError::CapacityExceeded {
            mean_demand_m3s,
            capacity_m3s,
        });
    }
    Ok(())
}

/// Cost (pence) of replacing one metre of tank depth at the most expensive
/// forecast price with the least energy-efficient admissible combination.
/// Multiplied by the grid resolution and the horizon it bounds the cost
/// lost to depth quantization.
pub fn cost_lipschitz_bound(ctx: &SolveContext, model: &NetworkModel, cfg: &EmpcConfig) -> f64 {
    let max_price = ctx.tariff_forecast.iter().cloned().fold(0.0, f64::max);
    let worst_kwh_per_m3 = model
        .pumps
        .combos()
        .filter(|r| r.flow_m3s > 0.0)
        .filter_map(|r| {
            let p = model.pumps.pump_power(&r.counts, &cfg.weights).ok()?;
            Some(p / (r.flow_m3s * 3600.0))
        })
        .fold(0.0, f64::max);
    model.tank.area_m2 * worst_kwh_per_m3 * max_price
}
