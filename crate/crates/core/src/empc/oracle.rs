//! Exhaustive enumeration of every admissible control sequence, with exact
//! depth propagation. Ground truth for the DP solver on short horizons.

use super::dp::{integer_candidates, rank, switching_row, Candidate};
use super::{EmpcConfig, EmpcError, Plan, SolveContext};
use crate::model::{tank_update, NetworkModel};

pub const ORACLE_MAX_HORIZON: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleOutcome {
    pub plan: Plan,
    /// Cost of the second-best feasible sequence, if there is one.
    pub runner_up_cost: Option<f64>,
    pub feasible_sequences: usize,
}

impl OracleOutcome {
    /// Cost gap between the optimum and the runner-up (infinite when unique).
    pub fn margin(&self) -> f64 {
        self.runner_up_cost
            .map_or(f64::INFINITY, |c| c - self.plan.total_cost)
    }
}

pub fn brute_force_oracle(
    ctx: &SolveContext,
    model: &NetworkModel,
    cfg: &EmpcConfig,
) -> Result<Plan, EmpcError> {
    brute_force_ranked(ctx, model, cfg).map(|o| o.plan)
}

/// Full enumeration over integer controls on every step (the configured
/// integer prefix is ignored).
pub fn brute_force_ranked(
    ctx: &SolveContext,
    model: &NetworkModel,
    cfg: &EmpcConfig,
) -> Result<OracleOutcome, EmpcError> {
    if cfg.horizon_steps > ORACLE_MAX_HORIZON {
        return Err(EmpcError::HorizonTooLong {
            requested: cfg.horizon_steps,
            limit: ORACLE_MAX_HORIZON,
        });
    }
    cfg.validate()?;
    ctx.check(model, cfg)?;

    let cands = integer_candidates(model, cfg)?;
    let mut switching = Vec::with_capacity(cands.len());
    for c in &cands {
        switching.push(switching_row(&c.counts, &cands, cfg)?);
    }
    let root_switching = switching_row(&ctx.u_prev.as_f64(), &cands, cfg)?;

    let mut search = Search {
        model,
        cfg,
        ctx,
        cands: &cands,
        switching: &switching,
        root_switching: &root_switching,
        path: Vec::with_capacity(cfg.horizon_steps),
        depths: vec![ctx.x_measured],
        best: None,
        runner_up: None,
        deepest: 0,
        count: 0,
    };
    search.descend(0, None, 0.0, 0.0, 0.0)?;

    let Some(best) = search.best else {
        return Err(EmpcError::Infeasible {
            step: search.deepest,
        });
    };
    let plan = Plan {
        controls: best.path.iter().map(|&c| cands[c].control.clone()).collect(),
        relaxed_counts: vec![None; cfg.horizon_steps],
        predicted_depths: best.depths,
        total_cost: best.economic + best.switching,
        economic_cost: best.economic,
        switching_cost: best.switching,
    };
    Ok(OracleOutcome {
        plan,
        runner_up_cost: search.runner_up,
        feasible_sequences: search.count,
    })
}

/// Tie-break between equal-cost sequences: the one whose latest differing
/// control comes first in preference order.
fn later_preferred(a: &[usize], b: &[usize]) -> bool {
    a.iter().zip(b).rev().find(|(x, y)| x != y).is_some_and(|(x, y)| x < y)
}

struct Best {
    cost: f64,
    pumps: f64,
    economic: f64,
    switching: f64,
    path: Vec<usize>,
    depths: Vec<f64>,
}

struct Search<'a> {
    model: &'a NetworkModel,
    cfg: &'a EmpcConfig,
    ctx: &'a SolveContext,
    cands: &'a [Candidate],
    switching: &'a [Vec<f64>],
    root_switching: &'a [f64],
    path: Vec<usize>,
    depths: Vec<f64>,
    best: Option<Best>,
    runner_up: Option<f64>,
    deepest: usize,
    count: usize,
}

impl Search<'_> {
    fn descend(
        &mut self,
        t: usize,
        prev: Option<usize>,
        economic: f64,
        switching: f64,
        pumps: f64,
    ) -> Result<(), EmpcError> {
        let n = self.cfg.horizon_steps;
        self.deepest = self.deepest.max(t);
        if t == n {
            self.record(economic, switching, pumps);
            return Ok(());
        }
        let tank = &self.model.tank;
        let x = *self.depths.last().expect("depth stack is never empty");
        for (c, cand) in self.cands.iter().enumerate() {
            let next = tank_update(
                x,
                cand.flow_m3s,
                self.ctx.demand_forecast[t],
                self.cfg.dt_control_s,
                tank.area_m2,
            )?;
            if !(next >= tank.depth_min_m && next <= tank.depth_max_m) {
                continue;
            }
            let econ = self.ctx.tariff_forecast[t] * cand.power_kw * self.cfg.dt_control_h();
            let sw = match prev {
                None => self.root_switching[c],
                Some(p) => self.switching[p][c],
            };
            self.path.push(c);
            self.depths.push(next);
            self.descend(t + 1, Some(c), economic + econ, switching + sw, pumps + cand.pumps)?;
            self.path.pop();
            self.depths.pop();
        }
        Ok(())
    }

    fn record(&mut self, economic: f64, switching: f64, pumps: f64) {
        self.count += 1;
        // accumulated in the same order as the DP labels
        let cost = self.path_cost();
        let candidate = Best {
            cost,
            pumps,
            economic,
            switching,
            path: self.path.clone(),
            depths: self.depths.clone(),
        };
        match &self.best {
            None => self.best = Some(candidate),
            Some(best) => {
                let better = rank(cost, pumps, best.cost, best.pumps)
                    .unwrap_or_else(|| later_preferred(&candidate.path, &best.path));
                if better {
                    let old = best.cost;
                    self.runner_up = Some(self.runner_up.map_or(old, |r| r.min(old)));
                    self.best = Some(candidate);
                } else {
                    self.runner_up = Some(self.runner_up.map_or(cost, |r| r.min(cost)));
                }
            }
        }
    }

    fn path_cost(&self) -> f64 {
        let mut cost = 0.0;
        let mut prev: Option<usize> = None;
        for (t, &c) in self.path.iter().enumerate() {
            let econ =
                self.ctx.tariff_forecast[t] * self.cands[c].power_kw * self.cfg.dt_control_h();
            let sw = match prev {
                None => self.root_switching[c],
                Some(p) => self.switching[p][c],
            };
            cost = cost + econ + sw;
            prev = Some(c);
        }
        cost
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::empc::solve;
    use crate::model::{ControlVector, CostWeights, DemandProfile, TariffSchedule};

    fn cfg(n: usize) -> EmpcConfig {
        EmpcConfig::new(CostWeights::richmond_pruned()).with_horizon(n)
    }

    #[test]
    fn idle_at_peak_without_demand() {
        let model = NetworkModel::richmond_pruned(0.0);
        let cfg = cfg(1);
        let ctx = SolveContext::from_model(&model, &cfg, 12, 2.4, ControlVector::zeros(2));
        let plan = brute_force_oracle(&ctx, &model, &cfg).unwrap();
        assert_eq!(plan.controls, vec![ControlVector::zeros(2)]);
        assert_eq!(plan.total_cost, 0.0);
    }

    #[test]
    fn refuses_long_horizons() {
        let model = NetworkModel::richmond_pruned(0.0);
        let cfg = cfg(11);
        let ctx = SolveContext::from_model(&model, &cfg, 0, 2.4, ControlVector::zeros(2));
        assert_eq!(
            brute_force_oracle(&ctx, &model, &cfg),
            Err(EmpcError::HorizonTooLong {
                requested: 11,
                limit: 10
            })
        );
    }

    #[test]
    fn agrees_with_dp_on_two_step_instance() {
        let model = NetworkModel::richmond_pruned(0.030);
        let cfg = cfg(2);
        let ctx = SolveContext::from_model(&model, &cfg, 6, 1.5, ControlVector::zeros(2));
        let oracle = brute_force_ranked(&ctx, &model, &cfg).unwrap();
        let dp = solve(&ctx, &model, &cfg).unwrap();
        assert_eq!(oracle.plan.controls, dp.controls);
        assert!((oracle.plan.total_cost - dp.total_cost).abs() < 1e-9);
        assert!(oracle.feasible_sequences <= 16);
    }

    #[test]
    fn both_report_capacity_infeasibility() {
        let mut model = NetworkModel::richmond_pruned(0.060);
        model.demand = DemandProfile::flat(0.060);
        model.tank.area_m2 = 20.0;
        model.tariff = TariffSchedule::richmond_pruned();
        let cfg = cfg(6);
        let ctx = SolveContext::from_model(&model, &cfg, 0, 3.0, ControlVector::zeros(2));
        let a = brute_force_oracle(&ctx, &model, &cfg).unwrap_err();
        let b = solve(&ctx, &model, &cfg).unwrap_err();
        assert_eq!(a, EmpcError::Infeasible { step: 4 });
        assert_eq!(a, b);
    }
}
