//! Closed-loop simulation: a control loop at the EMPC interval driving a
//! plant loop at a finer substep, with state feedback at every control step.

mod compare;
mod metrics;

pub use compare::{compare, cost_ratio, ComparisonReport, COMPARISON_DAY};
pub use metrics::{PeriodMetrics, RunMetrics, SimulationTrace, TraceRecord};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::empc::{self, capacity_check, ControllerState, EmpcConfig, EmpcError, Plan};
use crate::error::ModelError;
use crate::model::{tank_update, ControlVector, CostWeights, NetworkModel};
use crate::trigger::{richmond_pruned_bands, trigger_step, TriggerBand, TriggerState};

/// Absolute slack (m) on substep bound checks, absorbing the rounding
/// difference between one control-step update and its substep accumulation.
pub const DEPTH_TOLERANCE_M: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    Empc,
    Trigger,
}

impl std::str::FromStr for ControllerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "empc" => Ok(ControllerKind::Empc),
            "trigger" => Ok(ControllerKind::Trigger),
            other => Err(format!("unknown controller `{other}` (expected empc or trigger)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub model: NetworkModel,
    pub controller: ControllerKind,
    pub empc: EmpcConfig,
    /// Pump state assumed before the first control step.
    pub u_prev_init: ControlVector,
    pub trigger_bands: Vec<TriggerBand>,
    pub trigger_initial_on: Vec<bool>,
    pub sim_hours: usize,
    pub dt_plant_s: f64,
    /// Multiplies every plant flow relative to the controller's model.
    pub plant_mismatch: f64,
    /// Relative standard deviation of hourly demand noise applied to the
    /// plant only (0 = plant demand equals the forecast).
    pub demand_noise_std: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Empc(#[from] EmpcError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl ScenarioConfig {
    /// Richmond Pruned defaults: 96 h, 5-minute plant step, pump 2A latched on
    /// for the trigger controller.
    pub fn richmond_pruned(base_demand_m3s: f64, controller: ControllerKind) -> Self {
        ScenarioConfig {
            model: NetworkModel::richmond_pruned(base_demand_m3s),
            controller,
            empc: EmpcConfig::new(CostWeights::richmond_pruned()),
            u_prev_init: ControlVector::zeros(2),
            trigger_bands: richmond_pruned_bands(),
            trigger_initial_on: vec![false, true, false],
            sim_hours: 96,
            dt_plant_s: 300.0,
            plant_mismatch: 1.0,
            demand_noise_std: 0.0,
            seed: 0,
        }
    }

    pub fn substeps_per_control(&self) -> usize {
        (self.empc.dt_control_s / self.dt_plant_s).round() as usize
    }

    pub fn control_steps(&self) -> usize {
        (self.sim_hours as f64 * 3600.0 / self.empc.dt_control_s).round() as usize
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidConfig(m));
        self.empc.validate()?;
        if self.sim_hours < 24 {
            return bad(format!("sim_hours must be >= 24, got {}", self.sim_hours));
        }
        if !(self.dt_plant_s.is_finite() && self.dt_plant_s > 0.0) {
            return bad("dt_plant_s must be > 0".into());
        }
        let ratio = self.empc.dt_control_s / self.dt_plant_s;
        if (ratio - ratio.round()).abs() > 1e-9 || ratio.round() < 1.0 {
            return bad(format!(
                "control interval {} s is not an integer multiple of the plant step {} s",
                self.empc.dt_control_s, self.dt_plant_s
            ));
        }
        let steps = self.sim_hours as f64 * 3600.0 / self.empc.dt_control_s;
        if (steps - steps.round()).abs() > 1e-9 {
            return bad("simulation length is not a whole number of control steps".into());
        }
        if !(self.plant_mismatch.is_finite() && self.plant_mismatch > 0.0) {
            return bad("plant_mismatch must be > 0".into());
        }
        if !(self.demand_noise_std.is_finite() && self.demand_noise_std >= 0.0) {
            return bad("demand_noise_std must be >= 0".into());
        }
        let ps = self.model.pumps.station_count();
        if !self.model.pumps.is_admissible(&self.u_prev_init) {
            return bad(format!("initial control {} is not admissible", self.u_prev_init));
        }
        for band in &self.trigger_bands {
            band.validate()?;
            if band.station >= ps {
                return bad(format!("trigger band {} refers to station {}", band.pump_id, band.station));
            }
        }
        if self.trigger_initial_on.len() != self.trigger_bands.len() {
            return bad("one initial flag per trigger band is required".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundViolation {
    pub time_s: f64,
    pub depth_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    /// Hour at which the failure was first detected.
    pub hour: usize,
    pub reason: String,
    /// Control steps on which the optimizer found no feasible plan.
    pub infeasible_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanLog {
    pub step: usize,
    pub plan: Plan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub trace: SimulationTrace,
    pub metrics: RunMetrics,
    pub violations: Vec<BoundViolation>,
    pub failure: Option<RunFailure>,
    pub plans: Vec<PlanLog>,
}

impl RunOutcome {
    pub fn is_failed(&self) -> bool {
        self.failure.is_some()
    }
}

/// Per-hour multiplicative demand noise, reproducible from the seed.
fn demand_noise(cfg: &ScenarioConfig) -> Vec<f64> {
    let hours = cfg.sim_hours + 1;
    if cfg.demand_noise_std == 0.0 {
        return vec![1.0; hours];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let normal = Normal::new(0.0, cfg.demand_noise_std).expect("validated std");
    (0..hours)
        .map(|_| (1.0 + normal.sample(&mut rng)).max(0.0))
        .collect()
}

/// Runs the closed loop for `sim_hours`.
///
/// On an infeasible EMPC solve the hour is run at maximum admissible flow and
/// the run is marked failed; the trace always covers the full duration.
pub fn run_closed_loop(cfg: &ScenarioConfig) -> Result<RunOutcome, SimError> {
    cfg.validate()?;
    let model = &cfg.model;
    let tank = &model.tank;
    let pumps = &model.pumps;
    let stations = pumps.station_count();
    let noise = demand_noise(cfg);
    let substeps = cfg.substeps_per_control();

    let mut failure: Option<RunFailure> = None;
    let mut fail = |hour: usize, reason: String, infeasible: bool| match &mut failure {
        None => {
            failure = Some(RunFailure {
                hour,
                reason,
                infeasible_steps: usize::from(infeasible),
            })
        }
        Some(f) => f.infeasible_steps += usize::from(infeasible),
    };
    if cfg.controller == ControllerKind::Empc {
        if let Err(e) = capacity_check(model) {
            fail(0, e.to_string(), false);
        }
    }

    let mut x = tank.depth_init_m;
    let mut u_prev = cfg.u_prev_init.clone();
    let mut trigger_state = TriggerState {
        on_flags: cfg.trigger_initial_on.clone(),
    };
    let mut records = Vec::with_capacity(cfg.control_steps() * substeps);
    let mut violations = Vec::new();
    let mut plans = Vec::new();

    for k in 0..cfg.control_steps() {
        let t_control = k as f64 * cfg.empc.dt_control_s;
        let mut u = u_prev.clone();
        if cfg.controller == ControllerKind::Empc {
            let state = ControllerState {
                step: k,
                depth_m: x,
                u_prev: u_prev.clone(),
            };
            match empc::receding_horizon_step(&state, model, &cfg.empc) {
                Ok((action, plan)) => {
                    u = action;
                    plans.push(PlanLog { step: k, plan });
                }
                Err(e) => {
                    fail((t_control / 3600.0).floor() as usize, e.to_string(), true);
                    u = pumps.max_flow_control();
                }
            }
        }

        for s in 0..substeps {
            let t0 = t_control + s as f64 * cfg.dt_plant_s;
            if cfg.controller == ControllerKind::Trigger {
                let (next, action) = trigger_step(&trigger_state, x, &cfg.trigger_bands, stations);
                trigger_state = next;
                u = pumps.effective_control(&action)?;
            }
            let hour = (t0 / 3600.0 + 1e-9).floor() as usize;
            let demand = model.demand.demand_at(hour) * noise[hour.min(noise.len() - 1)];
            let price = model.tariff.tariff_at(hour);
            let inflow = pumps.plant_flow(&u)? * cfg.plant_mismatch;
            let power = pumps.plant_power(&u)?;
            x = tank_update(x, inflow, demand, cfg.dt_plant_s, tank.area_m2)?;
            let energy = power * cfg.dt_plant_s / 3600.0;
            let time_s = t0 + cfg.dt_plant_s;
            if x < tank.depth_min_m - DEPTH_TOLERANCE_M || x > tank.depth_max_m + DEPTH_TOLERANCE_M {
                violations.push(BoundViolation { time_s, depth_m: x });
            }
            records.push(TraceRecord {
                time_s,
                depth_m: x,
                control: u.clone(),
                inflow_m3s: inflow,
                demand_m3s: demand,
                power_kw: power,
                price_p_per_kwh: price,
                energy_kwh: energy,
                cost_pence: price * energy,
            });
        }
        u_prev = u;
    }

    let trace = SimulationTrace {
        dt_plant_s: cfg.dt_plant_s,
        initial_depth_m: tank.depth_init_m,
        records,
    };
    let metrics = RunMetrics::from_trace(&trace, pumps);
    Ok(RunOutcome {
        trace,
        metrics,
        violations,
        failure,
        plans,
    })
}

/// Runs the same scenario under both controllers and compares them.
pub fn run_comparison(
    cfg: &ScenarioConfig,
) -> Result<(RunOutcome, RunOutcome, ComparisonReport), SimError> {
    let mut empc_cfg = cfg.clone();
    empc_cfg.controller = ControllerKind::Empc;
    let mut trigger_cfg = cfg.clone();
    trigger_cfg.controller = ControllerKind::Trigger;
    let empc = run_closed_loop(&empc_cfg)?;
    let trigger = run_closed_loop(&trigger_cfg)?;
    let report = compare(&empc.metrics, &trigger.metrics);
    Ok((empc, trigger, report))
}
