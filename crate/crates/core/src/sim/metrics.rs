use serde::{Deserialize, Serialize};

use crate::model::{ControlVector, PumpStationGroup};

/// State and flows over one plant substep; `time_s` and `depth_m` refer to
/// the end of the substep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub time_s: f64,
    pub depth_m: f64,
    pub control: ControlVector,
    pub inflow_m3s: f64,
    pub demand_m3s: f64,
    pub power_kw: f64,
    pub price_p_per_kwh: f64,
    pub energy_kwh: f64,
    pub cost_pence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationTrace {
    pub dt_plant_s: f64,
    pub initial_depth_m: f64,
    pub records: Vec<TraceRecord>,
}

impl SimulationTrace {
    /// Depth at time `t_s` (the initial depth at t = 0).
    pub fn depth_at(&self, t_s: f64) -> Option<f64> {
        if t_s.abs() < 1e-9 {
            return Some(self.initial_depth_m);
        }
        self.records
            .iter()
            .find(|r| (r.time_s - t_s).abs() < 1e-6)
            .map(|r| r.depth_m)
    }

    pub fn final_depth_m(&self) -> f64 {
        self.records.last().map_or(self.initial_depth_m, |r| r.depth_m)
    }

    /// Hours (start of hour index) during which any pump was running.
    pub fn pumping_hours(&self) -> Vec<usize> {
        let mut hours: Vec<usize> = self
            .records
            .iter()
            .filter(|r| !r.control.is_zero())
            .map(|r| ((r.time_s - self.dt_plant_s) / 3600.0 + 1e-9).floor() as usize)
            .collect();
        hours.dedup();
        hours
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodMetrics {
    pub volume_m3: f64,
    pub energy_kwh: f64,
    pub cost_pounds: f64,
    /// £/m³, undefined when no water was delivered.
    pub cost_per_m3: Option<f64>,
}

impl PeriodMetrics {
    fn from_records<'a>(records: impl Iterator<Item = &'a TraceRecord>, dt_s: f64) -> Self {
        let (mut volume, mut energy, mut pence) = (0.0, 0.0, 0.0);
        for r in records {
            volume += r.inflow_m3s * dt_s;
            energy += r.energy_kwh;
            pence += r.cost_pence;
        }
        let cost_pounds = pence / 100.0;
        PeriodMetrics {
            volume_m3: volume,
            energy_kwh: energy,
            cost_pounds,
            cost_per_m3: (volume > 0.0).then(|| cost_pounds / volume),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub total_volume_m3: f64,
    pub total_energy_kwh: f64,
    pub total_cost_pounds: f64,
    pub cost_per_m3: Option<f64>,
    pub per_day: Vec<PeriodMetrics>,
    /// Time-averaged tabulated efficiency per station while it runs.
    pub avg_station_efficiency: Vec<Option<f64>>,
    pub switch_count: usize,
    pub initial_depth_m: f64,
    pub final_depth_m: f64,
    pub min_depth_m: f64,
    pub max_depth_m: f64,
    pub total_demand_m3: f64,
}

impl RunMetrics {
    pub fn from_trace(trace: &SimulationTrace, pumps: &PumpStationGroup) -> Self {
        let dt = trace.dt_plant_s;
        let total = PeriodMetrics::from_records(trace.records.iter(), dt);

        let per_day_records = (86_400.0 / dt).round() as usize;
        let per_day = trace
            .records
            .chunks(per_day_records.max(1))
            .map(|day| PeriodMetrics::from_records(day.iter(), dt))
            .collect();

        let ps = pumps.station_count();
        let mut eff_sum = vec![0.0; ps];
        let mut eff_n = vec![0usize; ps];
        for r in &trace.records {
            let Some(row) = pumps.row(&r.control) else {
                continue;
            };
            for (j, &n) in r.control.counts().iter().enumerate() {
                if n > 0 {
                    if let Some(e) = row.efficiency[j] {
                        eff_sum[j] += e;
                        eff_n[j] += 1;
                    }
                }
            }
        }
        let avg_station_efficiency = eff_sum
            .iter()
            .zip(&eff_n)
            .map(|(&s, &n)| (n > 0).then(|| s / n as f64))
            .collect();

        let switch_count = trace
            .records
            .windows(2)
            .filter(|w| w[0].control != w[1].control)
            .count();
        let depths = trace
            .records
            .iter()
            .map(|r| r.depth_m)
            .chain(std::iter::once(trace.initial_depth_m));
        let (min_depth_m, max_depth_m) = depths.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
            (lo.min(x), hi.max(x))
        });

        RunMetrics {
            total_volume_m3: total.volume_m3,
            total_energy_kwh: total.energy_kwh,
            total_cost_pounds: total.cost_pounds,
            cost_per_m3: total.cost_per_m3,
            per_day,
            avg_station_efficiency,
            switch_count,
            initial_depth_m: trace.initial_depth_m,
            final_depth_m: trace.final_depth_m(),
            min_depth_m,
            max_depth_m,
            total_demand_m3: trace.records.iter().map(|r| r.demand_m3s * dt).sum(),
        }
    }

    /// Day `index` (0-based), if the run covered it.
    pub fn day(&self, index: usize) -> Option<&PeriodMetrics> {
        self.per_day.get(index)
    }
}
