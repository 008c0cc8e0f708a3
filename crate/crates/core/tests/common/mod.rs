//! Shared generators for the integration tests.
#![allow(dead_code)]

use empc_wds::empc::{EmpcConfig, SolveContext};
use empc_wds::model::{CostWeights, NetworkModel, SwitchingWeights};
use rand::Rng;

pub struct Instance {
    pub model: NetworkModel,
    pub cfg: EmpcConfig,
    pub ctx: SolveContext,
}

/// Random short-horizon problem on the Richmond Pruned pump set: random tank
/// area, start depth, previous control, demands, two-rate prices and weights.
pub fn random_instance(rng: &mut impl Rng, max_horizon: usize) -> Instance {
    let n = rng.random_range(1..=max_horizon);
    let mut model = NetworkModel::richmond_pruned(0.0);
    model.tank.area_m2 = rng.random_range(200.0..1500.0);
    let weights = match rng.random_range(0..3) {
        0 => CostWeights::richmond_pruned(),
        1 => CostWeights::richmond_pruned().without_switching_penalty(),
        _ => CostWeights {
            switching: SwitchingWeights::diagonal(&[
                rng.random_range(1.0..300.0),
                rng.random_range(1.0..300.0),
            ])
            .unwrap(),
            per_pump_kw: 40.21,
        },
    };
    let cfg = EmpcConfig::new(weights).with_horizon(n);
    let combos: Vec<_> = model.pumps.combos().map(|r| r.counts.clone()).collect();
    let ctx = SolveContext {
        x_measured: rng.random_range(model.tank.depth_min_m..model.tank.depth_max_m),
        u_prev: combos[rng.random_range(0..combos.len())].clone(),
        demand_forecast: (0..n).map(|_| rng.random_range(0.0..0.06)).collect(),
        tariff_forecast: (0..n)
            .map(|_| if rng.random_bool(0.5) { 2.41 } else { 6.79 })
            .collect(),
    };
    Instance { model, cfg, ctx }
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}
