//! CSV / JSON writers for traces, metrics and sweep summaries.
//!
//! Numbers are written with Rust's locale-independent formatting, so the
//! decimal separator is always `.`.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::sim::{ComparisonReport, PlanLog, RunOutcome, SimulationTrace, TraceRecord};

pub fn trace_header(stations: usize) -> Vec<String> {
    let mut h = vec!["time_s".to_string(), "depth_m".to_string()];
    h.extend((1..=stations).map(|j| format!("n{j}")));
    h.extend(
        [
            "inflow_m3s",
            "demand_m3s",
            "power_kw",
            "price_p_per_kwh",
            "energy_kwh",
            "cost_pence",
        ]
        .map(String::from),
    );
    h
}

fn trace_row(r: &TraceRecord) -> Vec<String> {
    let mut row = vec![r.time_s.to_string(), r.depth_m.to_string()];
    row.extend(r.control.counts().iter().map(|n| n.to_string()));
    row.extend(
        [
            r.inflow_m3s,
            r.demand_m3s,
            r.power_kw,
            r.price_p_per_kwh,
            r.energy_kwh,
            r.cost_pence,
        ]
        .map(|v| v.to_string()),
    );
    row
}

/// One row per plant substep; the header is written even for an empty trace.
pub fn write_trace_csv<W: Write>(out: W, trace: &SimulationTrace, stations: usize) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(trace_header(stations))?;
    for r in &trace.records {
        w.write_record(trace_row(r))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace_jsonl<W: Write>(mut out: W, trace: &SimulationTrace) -> io::Result<()> {
    for r in &trace.records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_plans_jsonl<W: Write>(mut out: W, plans: &[PlanLog]) -> io::Result<()> {
    for p in plans {
        serde_json::to_writer(&mut out, p)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Run metrics plus failure / violation status, as written to `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub controller: String,
    pub status: String,
    pub failure: Option<crate::sim::RunFailure>,
    pub bound_violations: usize,
    pub metrics: crate::sim::RunMetrics,
}

impl MetricsReport {
    pub fn new(controller: &str, outcome: &RunOutcome) -> Self {
        MetricsReport {
            controller: controller.to_string(),
            status: status(outcome).to_string(),
            failure: outcome.failure.clone(),
            bound_violations: outcome.violations.len(),
            metrics: outcome.metrics.clone(),
        }
    }
}

pub fn status(outcome: &RunOutcome) -> &'static str {
    if outcome.is_failed() {
        "infeasible"
    } else if !outcome.violations.is_empty() {
        "bound_violation"
    } else {
        "ok"
    }
}

pub fn write_metrics_json<W: Write>(out: W, report: &MetricsReport) -> serde_json::Result<()> {
    serde_json::to_writer_pretty(out, report)
}

/// One sweep case; money in pounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub demand_l_s: f64,
    pub empc_status: String,
    pub empc_volume_m3: Option<f64>,
    pub empc_energy_kwh: Option<f64>,
    pub empc_cost_gbp: Option<f64>,
    pub empc_cost_per_m3: Option<f64>,
    pub trigger_status: String,
    pub trigger_volume_m3: Option<f64>,
    pub trigger_energy_kwh: Option<f64>,
    pub trigger_cost_gbp: Option<f64>,
    pub trigger_cost_per_m3: Option<f64>,
    pub cost_ratio: Option<f64>,
    pub empc_day4_cost_per_m3: Option<f64>,
    pub trigger_day4_cost_per_m3: Option<f64>,
    pub error: Option<String>,
}

impl SummaryRow {
    pub fn from_runs(demand_l_s: f64, empc: &RunOutcome, trigger: &RunOutcome, report: &ComparisonReport) -> Self {
        let e = &empc.metrics;
        let t = &trigger.metrics;
        SummaryRow {
            demand_l_s,
            empc_status: status(empc).into(),
            empc_volume_m3: Some(e.total_volume_m3),
            empc_energy_kwh: Some(e.total_energy_kwh),
            empc_cost_gbp: Some(e.total_cost_pounds),
            empc_cost_per_m3: e.cost_per_m3,
            trigger_status: status(trigger).into(),
            trigger_volume_m3: Some(t.total_volume_m3),
            trigger_energy_kwh: Some(t.total_energy_kwh),
            trigger_cost_gbp: Some(t.total_cost_pounds),
            trigger_cost_per_m3: t.cost_per_m3,
            cost_ratio: report.cost_ratio,
            empc_day4_cost_per_m3: report.empc_day.as_ref().and_then(|d| d.cost_per_m3),
            trigger_day4_cost_per_m3: report.trigger_day.as_ref().and_then(|d| d.cost_per_m3),
            error: None,
        }
    }

    /// A case that could not be run at all.
    pub fn errored(demand_l_s: f64, error: String) -> Self {
        SummaryRow {
            demand_l_s,
            empc_status: "error".into(),
            empc_volume_m3: None,
            empc_energy_kwh: None,
            empc_cost_gbp: None,
            empc_cost_per_m3: None,
            trigger_status: "error".into(),
            trigger_volume_m3: None,
            trigger_energy_kwh: None,
            trigger_cost_gbp: None,
            trigger_cost_per_m3: None,
            cost_ratio: None,
            empc_day4_cost_per_m3: None,
            trigger_day4_cost_per_m3: None,
            error: Some(error),
        }
    }
}

pub fn write_summary_csv<W: Write>(out: W, rows: &[SummaryRow]) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record([
        "demand_l_s",
        "empc_status",
        "empc_volume_m3",
        "empc_energy_kwh",
        "empc_cost_gbp",
        "empc_cost_per_m3",
        "trigger_status",
        "trigger_volume_m3",
        "trigger_energy_kwh",
        "trigger_cost_gbp",
        "trigger_cost_per_m3",
        "cost_ratio",
        "empc_day4_cost_per_m3",
        "trigger_day4_cost_per_m3",
        "error",
    ])?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_jsonl<W: Write>(mut out: W, rows: &[SummaryRow]) -> io::Result<()> {
    for r in rows {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{run_closed_loop, ControllerKind, ScenarioConfig};

    fn short_run() -> RunOutcome {
        let mut cfg = ScenarioConfig::richmond_pruned(0.015, ControllerKind::Trigger);
        cfg.sim_hours = 24;
        run_closed_loop(&cfg).unwrap()
    }

    #[test]
    fn trace_csv_round_trips_through_reader() {
        let out = short_run();
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &out.trace, 2).unwrap();
        let mut rdr = csv::Reader::from_reader(buf.as_slice());
        let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
        assert_eq!(header, trace_header(2));
        let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
        assert_eq!(rows.len(), out.trace.records.len());
        for (row, rec) in rows.iter().zip(&out.trace.records) {
            assert_eq!(row[1].parse::<f64>().unwrap(), rec.depth_m);
            assert_eq!(row[9].parse::<f64>().unwrap(), rec.cost_pence);
        }
    }

    #[test]
    fn empty_trace_still_has_header() {
        let trace = SimulationTrace {
            dt_plant_s: 300.0,
            initial_depth_m: 3.0,
            records: vec![],
        };
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &trace, 2).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1);
    }

    #[test]
    fn summary_csv_columns_line_up() {
        let out = short_run();
        let report = crate::sim::compare(&out.metrics, &out.metrics);
        let rows = vec![
            SummaryRow::from_runs(15.0, &out, &out, &report),
            SummaryRow::errored(99.0, "boom, with comma".into()),
        ];
        let mut buf = Vec::new();
        write_summary_csv(&mut buf, &rows).unwrap();
        let mut rdr = csv::Reader::from_reader(buf.as_slice());
        let n = rdr.headers().unwrap().len();
        let parsed: Vec<SummaryRow> = rdr.deserialize().map(Result::unwrap).collect();
        assert_eq!(n, 15);
        assert_eq!(parsed, rows);
    }
}
