use std::fmt;

use serde::{Deserialize, Serialize};

use super::metrics::{PeriodMetrics, RunMetrics};

/// Day compared in the daily breakdown (hours 72-96).
pub const COMPARISON_DAY: usize = 3;

/// EMPC against trigger-level control on the same scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub empc_total: PeriodMetrics,
    pub trigger_total: PeriodMetrics,
    /// Trigger cost per m³ over EMPC cost per m³; `None` when undefined.
    pub cost_ratio: Option<f64>,
    pub empc_day: Option<PeriodMetrics>,
    pub trigger_day: Option<PeriodMetrics>,
}

fn totals(m: &RunMetrics) -> PeriodMetrics {
    PeriodMetrics {
        volume_m3: m.total_volume_m3,
        energy_kwh: m.total_energy_kwh,
        cost_pounds: m.total_cost_pounds,
        cost_per_m3: m.cost_per_m3,
    }
}

pub fn cost_ratio(trigger_cost_per_m3: Option<f64>, empc_cost_per_m3: Option<f64>) -> Option<f64> {
    match (trigger_cost_per_m3, empc_cost_per_m3) {
        (Some(t), Some(e)) if e > 0.0 => Some(t / e),
        _ => None,
    }
}

pub fn compare(empc: &RunMetrics, trigger: &RunMetrics) -> ComparisonReport {
    ComparisonReport {
        empc_total: totals(empc),
        trigger_total: totals(trigger),
        cost_ratio: cost_ratio(trigger.cost_per_m3, empc.cost_per_m3),
        empc_day: empc.day(COMPARISON_DAY).cloned(),
        trigger_day: trigger.day(COMPARISON_DAY).cloned(),
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |x| format!("{x:.4}"))
}

impl fmt::Display for ComparisonReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<10} {:>12} {:>12} {:>12} {:>12}",
            "", "volume m3", "energy kWh", "cost GBP", "GBP/m3"
        )?;
        let mut row = |name: &str, m: &PeriodMetrics| {
            writeln!(
                f,
                "{:<10} {:>12.1} {:>12.1} {:>12.2} {:>12}",
                name,
                m.volume_m3,
                m.energy_kwh,
                m.cost_pounds,
                fmt_opt(m.cost_per_m3)
            )
        };
        row("EMPC", &self.empc_total)?;
        row("trigger", &self.trigger_total)?;
        if let (Some(e), Some(t)) = (&self.empc_day, &self.trigger_day) {
            row("EMPC D4", e)?;
            row("trig. D4", t)?;
        }
        writeln!(f, "cost ratio {}", fmt_opt(self.cost_ratio))
    }
}
