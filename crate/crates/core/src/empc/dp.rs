//! Forward dynamic programming over `(step, depth bin, previous control)`.
//!
//! Each bin keeps the exact depth of its surviving path, so feasibility is
//! always checked on unquantized depths and every returned plan is exactly
//! feasible. Quantization only decides which paths are merged.

use std::cmp::Ordering;

use super::{EmpcConfig, EmpcError, Plan, SolveContext};
use crate::model::{tank_update, ControlVector, NetworkModel};

/// Equal-cost threshold used for tie-breaking.
pub(crate) const COST_EPS: f64 = 1e-9;

/// One control option available at a horizon step.
#[derive(Debug, Clone)]
pub(crate) struct Candidate {
    /// Integer combination (nearest endpoint for blends).
    pub control: ControlVector,
    pub counts: Vec<f64>,
    pub flow_m3s: f64,
    pub power_kw: f64,
    pub pumps: f64,
    pub relaxed: bool,
}

/// Admissible combinations in preference order.
pub(crate) fn integer_candidates(
    model: &NetworkModel,
    cfg: &EmpcConfig,
) -> Result<Vec<Candidate>, EmpcError> {
    model
        .pumps
        .combos()
        .map(|r| {
            Ok(Candidate {
                control: r.counts.clone(),
                counts: r.counts.as_f64(),
                flow_m3s: model.pumps.pump_flow(&r.counts)?,
                power_kw: model.pumps.pump_power(&r.counts, &cfg.weights)?,
                pumps: f64::from(r.counts.total_pumps()),
                relaxed: false,
            })
        })
        .collect()
}

const BLEND_FRACTIONS: [f64; 3] = [0.25, 0.5, 0.75];

/// Time-shared blends between flow-adjacent admissible combinations. Flow,
/// power and pump counts interpolate linearly.
fn blend_candidates(ints: &[Candidate]) -> Vec<Candidate> {
    let mut chain: Vec<&Candidate> = ints.iter().collect();
    chain.sort_by(|a, b| a.flow_m3s.total_cmp(&b.flow_m3s));
    let mut out = Vec::new();
    for pair in chain.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        for &f in &BLEND_FRACTIONS {
            let lerp = |x: f64, y: f64| (1.0 - f) * x + f * y;
            out.push(Candidate {
                control: if f <= 0.5 { a.control.clone() } else { b.control.clone() },
                counts: a.counts.iter().zip(&b.counts).map(|(&x, &y)| lerp(x, y)).collect(),
                flow_m3s: lerp(a.flow_m3s, b.flow_m3s),
                power_kw: lerp(a.power_kw, b.power_kw),
                pumps: lerp(a.pumps, b.pumps),
                relaxed: true,
            });
        }
    }
    out
}

/// `costs[i][j]`: switching penalty from candidate `i` to candidate `j`.
fn switching_table(cands: &[Candidate], cfg: &EmpcConfig) -> Result<Vec<Vec<f64>>, EmpcError> {
    cands
        .iter()
        .map(|from| switching_row(&from.counts, cands, cfg))
        .collect()
}

pub(crate) fn switching_row(
    from: &[f64],
    cands: &[Candidate],
    cfg: &EmpcConfig,
) -> Result<Vec<f64>, EmpcError> {
    cands
        .iter()
        .map(|to| {
            let delta: Vec<f64> = to.counts.iter().zip(from).map(|(a, b)| a - b).collect();
            Ok(cfg.weights.switching.quadratic_form(&delta)?)
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
struct Label {
    cost: f64,
    pumps: f64,
    depth: f64,
    economic: f64,
    switching: f64,
    parent: u32,
}

const ROOT: u32 = u32::MAX;

/// Orders two stage-`t` labels by their control sequences in candidate
/// (preference) order, deciding on the latest step where they differ.
fn path_cmp(stages: &[Vec<Option<Label>>], t: usize, mut a: u32, mut b: u32, nc: usize) -> Ordering {
    for stage in stages[..=t].iter().rev() {
        if a == b {
            break;
        }
        let (ca, cb) = (a as usize % nc, b as usize % nc);
        if ca != cb {
            return ca.cmp(&cb);
        }
        a = stage[a as usize].expect("parent exists").parent;
        b = stage[b as usize].expect("parent exists").parent;
    }
    Ordering::Equal
}

/// Lower cost wins; equal cost falls back to fewer pumps in total. `None`
/// when tied on both.
pub(crate) fn rank(cost: f64, pumps: f64, other_cost: f64, other_pumps: f64) -> Option<bool> {
    if cost < other_cost - COST_EPS {
        Some(true)
    } else if cost > other_cost + COST_EPS {
        Some(false)
    } else if (pumps - other_pumps).abs() > COST_EPS {
        Some(pumps < other_pumps)
    } else {
        None
    }
}

impl Label {
    fn compare(&self, other: &Label) -> Option<bool> {
        rank(self.cost, self.pumps, other.cost, other.pumps)
    }
}

/// Solves the finite-horizon problem exactly up to depth quantization.
pub fn solve(ctx: &SolveContext, model: &NetworkModel, cfg: &EmpcConfig) -> Result<Plan, EmpcError> {
    cfg.validate()?;
    ctx.check(model, cfg)?;

    let n = cfg.horizon_steps;
    let ints = integer_candidates(model, cfg)?;
    let n_int = ints.len();
    let mut cands = ints;
    if cfg.integer_prefix_steps < n {
        let blends = blend_candidates(&cands);
        cands.extend(blends);
    }
    let nc = cands.len();
    let switching = switching_table(&cands, cfg)?;
    let root_switching = switching_row(&ctx.u_prev.as_f64(), &cands, cfg)?;

    let tank = &model.tank;
    let (lo, hi) = (tank.depth_min_m, tank.depth_max_m);
    let delta = cfg.depth_grid_resolution_m;
    let nbins = ((hi - lo) / delta).round() as usize + 1;
    let bin_of = |x: f64| (((x - lo) / delta).round().max(0.0) as usize).min(nbins - 1);
    let dt_h = cfg.dt_control_h();

    // stages[t] holds the labels after t + 1 steps, indexed by bin * nc + candidate.
    let mut stages: Vec<Vec<Option<Label>>> = Vec::with_capacity(n);
    for t in 0..n {
        let allowed = if t < cfg.integer_prefix_steps { n_int } else { nc };
        let demand = ctx.demand_forecast[t];
        let price = ctx.tariff_forecast[t];
        let mut next: Vec<Option<Label>> = vec![None; nbins * nc];
        let mut any = false;

        let mut expand = |src: &Label, src_idx: u32, sw_row: &[f64]| -> Result<(), EmpcError> {
            for (c, cand) in cands.iter().enumerate().take(allowed) {
                let x = tank_update(src.depth, cand.flow_m3s, demand, cfg.dt_control_s, tank.area_m2)?;
                if !(x >= lo && x <= hi) {
                    continue;
                }
                let econ = price * cand.power_kw * dt_h;
                let sw = sw_row[c];
                let label = Label {
                    cost: src.cost + econ + sw,
                    pumps: src.pumps + cand.pumps,
                    depth: x,
                    economic: src.economic + econ,
                    switching: src.switching + sw,
                    parent: src_idx,
                };
                let slot = &mut next[bin_of(x) * nc + c];
                let replace = match slot {
                    None => true,
                    Some(existing) => label.compare(existing).unwrap_or_else(|| {
                        t > 0 && path_cmp(&stages, t - 1, src_idx, existing.parent, nc).is_lt()
                    }),
                };
                if replace {
                    *slot = Some(label);
                }
                any = true;
            }
            Ok(())
        };

        if t == 0 {
            let root = Label {
                cost: 0.0,
                pumps: 0.0,
                depth: ctx.x_measured,
                economic: 0.0,
                switching: 0.0,
                parent: ROOT,
            };
            expand(&root, ROOT, &root_switching)?;
        } else {
            for (idx, label) in stages[t - 1].iter().enumerate() {
                if let Some(label) = label {
                    expand(label, idx as u32, &switching[idx % nc])?;
                }
            }
        }
        if !any {
            return Err(EmpcError::Infeasible { step: t });
        }
        stages.push(next);
    }

    let (mut idx, best) = stages[n - 1]
        .iter()
        .enumerate()
        .filter_map(|(i, l)| l.map(|l| (i, l)))
        .reduce(|acc, cur| {
            let wins = cur.1.compare(&acc.1).unwrap_or_else(|| {
                path_cmp(&stages, n - 1, cur.0 as u32, acc.0 as u32, nc).is_lt()
            });
            if wins {
                cur
            } else {
                acc
            }
        })
        .expect("last stage has at least one label");

    let mut controls = Vec::with_capacity(n);
    let mut relaxed_counts = Vec::with_capacity(n);
    let mut depths = Vec::with_capacity(n + 1);
    for t in (0..n).rev() {
        let label = stages[t][idx].expect("backtracked label exists");
        let cand = &cands[idx % nc];
        controls.push(cand.control.clone());
        relaxed_counts.push(cand.relaxed.then(|| cand.counts.clone()));
        depths.push(label.depth);
        idx = label.parent as usize;
    }
    depths.push(ctx.x_measured);
    controls.reverse();
    relaxed_counts.reverse();
    depths.reverse();

    Ok(Plan {
        controls,
        relaxed_counts,
        predicted_depths: depths,
        total_cost: best.economic + best.switching,
        economic_cost: best.economic,
        switching_cost: best.switching,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CostWeights, DemandProfile, TariffSchedule};

    fn cfg(n: usize) -> EmpcConfig {
        EmpcConfig::new(CostWeights::richmond_pruned()).with_horizon(n)
    }

    #[test]
    fn full_tank_without_demand_stays_idle() {
        let mut model = NetworkModel::richmond_pruned(0.0);
        model.tank.depth_init_m = model.tank.depth_max_m;
        model.tariff = TariffSchedule::new(5.0, 5.0, 0, 7).unwrap();
        let cfg = cfg(24);
        let ctx = SolveContext::from_model(&model, &cfg, 0, 3.37, ControlVector::zeros(2));
        let plan = solve(&ctx, &model, &cfg).unwrap();
        assert!(plan.controls.iter().all(|u| u.is_zero()));
        assert_eq!(plan.total_cost, 0.0);
        assert!(plan.predicted_depths.iter().all(|&x| x == 3.37));
    }

    #[test]
    fn plan_invariants_hold() {
        let model = NetworkModel::richmond_pruned(0.035);
        let cfg = cfg(24);
        let ctx = SolveContext::from_model(&model, &cfg, 0, 3.12, ControlVector::zeros(2));
        let plan = solve(&ctx, &model, &cfg).unwrap();
        assert_eq!(plan.controls.len(), 24);
        assert_eq!(plan.predicted_depths.len(), 25);
        assert_eq!(plan.predicted_depths[0], 3.12);
        assert!(plan.predicted_depths.iter().all(|&x| model.tank.depth_in_bounds(x)));
        assert!(plan.controls.iter().all(|u| model.pumps.is_admissible(u)));
        assert_eq!(plan.total_cost, plan.economic_cost + plan.switching_cost);
        // replay the plan through the model
        let mut x = 3.12;
        for (t, u) in plan.controls.iter().enumerate() {
            let q = model.pumps.pump_flow(u).unwrap();
            x = tank_update(x, q, ctx.demand_forecast[t], 3600.0, model.tank.area_m2).unwrap();
            assert_eq!(x, plan.predicted_depths[t + 1]);
        }
    }

    #[test]
    fn excessive_demand_is_infeasible_at_first_failing_step() {
        let mut model = NetworkModel::richmond_pruned(0.060);
        model.demand = DemandProfile::flat(0.060);
        model.tank.area_m2 = 20.0;
        let cfg = cfg(8);
        let ctx = SolveContext::from_model(&model, &cfg, 0, 1.5, ControlVector::zeros(2));
        // deficit 2.12 L/s drains 0.38 m per hour from 1.5 m: step 0 already fails
        assert_eq!(solve(&ctx, &model, &cfg), Err(EmpcError::Infeasible { step: 0 }));
        let ctx = SolveContext::from_model(&model, &cfg, 0, 3.0, ControlVector::zeros(2));
        // 1.6 m of headroom lasts four full steps
        assert_eq!(solve(&ctx, &model, &cfg), Err(EmpcError::Infeasible { step: 4 }));
    }

    #[test]
    fn relaxed_tail_never_costs_more() {
        let model = NetworkModel::richmond_pruned(0.025);
        let full = cfg(12);
        let mut relaxed = full.clone();
        relaxed.integer_prefix_steps = 4;
        let ctx = SolveContext::from_model(&model, &full, 5, 2.5, ControlVector::from([1, 0]));
        let a = solve(&ctx, &model, &full).unwrap();
        let b = solve(&ctx, &model, &relaxed).unwrap();
        assert!(b.total_cost <= a.total_cost + 1e-6, "{} > {}", b.total_cost, a.total_cost);
        assert!(b.relaxed_counts[..4].iter().all(Option::is_none));
        assert!(a.relaxed_counts.iter().all(Option::is_none));
        assert!(b.controls.iter().all(|u| model.pumps.is_admissible(u)));
    }

    #[test]
    fn rejects_inconsistent_context() {
        let model = NetworkModel::richmond_pruned(0.025);
        let cfg = cfg(4);
        let mut ctx = SolveContext::from_model(&model, &cfg, 0, 2.5, ControlVector::zeros(2));
        ctx.demand_forecast.pop();
        assert!(matches!(solve(&ctx, &model, &cfg), Err(EmpcError::InvalidContext(_))));
        let ctx = SolveContext::from_model(&model, &cfg, 0, 0.5, ControlVector::zeros(2));
        assert!(matches!(solve(&ctx, &model, &cfg), Err(EmpcError::InvalidContext(_))));
    }
}
