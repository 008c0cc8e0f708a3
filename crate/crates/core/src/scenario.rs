//! Versioned scenario file (TOML).
//!
//! Unknown keys are rejected at parse time; invariant checks run afterwards
//! and report every problem with its dotted field path and, where it can be
//! located, the source line.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::empc::EmpcConfig;
use crate::error::ModelError;
use crate::model::{
    ControlVector, CostWeights, DemandProfile, LinearConstraint, NetworkModel, PowerMode,
    PumpComboRecord, PumpStationGroup, StationSpec, SwitchingWeights, TankSpec, TariffSchedule,
    RICHMOND_MULTIPLIERS,
};
use crate::sim::{ControllerKind, ScenarioConfig};
use crate::trigger::TriggerBand;

pub const SCHEMA_VERSION: u32 = 1;

/// The bundled Richmond Pruned scenario file.
pub const RICHMOND_PRUNED_SCN: &str = include_str!("../../../scenarios/richmond_pruned.scn");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub version: u32,
    pub tanks: Vec<TankSection>,
    pub stations: Vec<StationSection>,
    pub pumps: PumpsSection,
    pub tariff: TariffSection,
    pub demand: DemandSection,
    pub controller: ControllerSection,
    pub simulation: SimulationSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TankSection {
    pub id: String,
    pub area_m2: f64,
    pub depth_min_m: f64,
    pub depth_max_m: f64,
    pub depth_init_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationSection {
    pub id: String,
    pub max_count: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpsSection {
    pub power_mode: PowerMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_pump_kw: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub constraints: Vec<LinearConstraint>,
    pub combos: Vec<ComboRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComboRow {
    pub counts: Vec<u32>,
    pub flow_l_s: f64,
    pub power_kw: f64,
    /// Per-station reporting metadata, one entry per station.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub stations: Vec<ComboStationMeta>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComboStationMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_kw: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub head_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub efficiency: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TariffSection {
    pub price_offpeak: f64,
    pub price_peak: f64,
    pub offpeak_start_h: u32,
    pub offpeak_end_h: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandSection {
    pub base_l_s: f64,
    pub multipliers: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_std: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSection {
    pub kind: ControllerKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_prev_init: Option<Vec<u32>>,
    pub empc: EmpcSection,
    pub trigger: TriggerSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmpcSection {
    pub horizon_steps: usize,
    pub dt_control_s: f64,
    pub depth_grid_resolution_m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integer_prefix_steps: Option<usize>,
    pub switching_weights: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TriggerSection {
    pub bands: Vec<BandRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandRow {
    pub pump: String,
    pub station: usize,
    pub on_below_m: f64,
    pub off_above_m: f64,
    #[serde(default)]
    pub initially_on: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    pub hours: usize,
    pub dt_plant_s: f64,
    #[serde(default = "one")]
    pub plant_mismatch: f64,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}

/// A single validation finding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Issue {
    pub field: String,
    pub message: String,
    pub line: Option<usize>,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "{} (line {}): {}", self.field, l, self.message),
            None => write!(f, "{}: {}", self.field, self.message),
        }
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Parse { line: Option<usize>, message: String },
    #[error("{} validation error(s):\n{}", .0.len(), .0.iter().map(|i| format!("  {i}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Issue>),
}

impl ScenarioFile {
    pub fn from_toml_str(src: &str) -> Result<Self, ScenarioError> {
        toml::from_str(src).map_err(|e| ScenarioError::Parse {
            line: e.span().map(|s| line_of_offset(src, s.start)),
            message: e.message().to_string(),
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serializes to TOML")
    }

    pub fn load(path: &Path) -> Result<(Self, String), ScenarioError> {
        let src = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok((Self::from_toml_str(&src)?, src))
    }

    /// Parses, validates and converts a scenario file.
    pub fn load_config(path: &Path) -> Result<ScenarioConfig, ScenarioError> {
        let (file, src) = Self::load(path)?;
        file.to_config(Some(&src))
    }

    pub fn richmond_pruned() -> Self {
        let group = PumpStationGroup::richmond_pruned();
        let combos = group
            .rows()
            .iter()
            .map(|r| ComboRow {
                counts: r.counts.counts().to_vec(),
                flow_l_s: (r.flow_m3s * 1e9).round() / 1e6,
                power_kw: r.power_kw,
                stations: (0..group.station_count())
                    .map(|j| ComboStationMeta {
                        power_kw: r.station_power_kw[j],
                        head_m: r.head_m[j],
                        efficiency: r.efficiency[j],
                    })
                    .collect(),
            })
            .collect();
        ScenarioFile {
            version: SCHEMA_VERSION,
            tanks: vec![TankSection {
                id: "A".into(),
                area_m2: 500.0,
                depth_min_m: 1.4,
                depth_max_m: 3.37,
                depth_init_m: 3.12,
            }],
            stations: group
                .stations()
                .iter()
                .map(|s| StationSection {
                    id: s.id.clone(),
                    max_count: s.max_count,
                })
                .collect(),
            pumps: PumpsSection {
                power_mode: PowerMode::PerPumpConstant,
                per_pump_kw: Some(40.21),
                constraints: group.constraints().to_vec(),
                combos,
            },
            tariff: TariffSection {
                price_offpeak: 2.41,
                price_peak: 6.79,
                offpeak_start_h: 0,
                offpeak_end_h: 7,
            },
            demand: DemandSection {
                base_l_s: 5.0,
                multipliers: RICHMOND_MULTIPLIERS.to_vec(),
                noise_std: None,
            },
            controller: ControllerSection {
                kind: ControllerKind::Empc,
                u_prev_init: Some(vec![0, 0]),
                empc: EmpcSection {
                    horizon_steps: 24,
                    dt_control_s: 3600.0,
                    depth_grid_resolution_m: 0.005,
                    integer_prefix_steps: None,
                    switching_weights: vec![vec![100.0, 0.0], vec![0.0, 50.0]],
                },
                trigger: TriggerSection {
                    bands: crate::trigger::richmond_pruned_bands()
                        .into_iter()
                        .map(|b| BandRow {
                            initially_on: b.pump_id == "2A",
                            pump: b.pump_id,
                            station: b.station,
                            on_below_m: b.on_below_m,
                            off_above_m: b.off_above_m,
                        })
                        .collect(),
                },
            },
            simulation: SimulationSection {
                hours: 96,
                dt_plant_s: 300.0,
                plant_mismatch: 1.0,
                seed: 0,
            },
        }
    }

    /// Every invariant violation in the file; empty when clean.
    pub fn validate(&self, src: Option<&str>) -> Vec<Issue> {
        match self.build(src) {
            Ok(_) => Vec::new(),
            Err(issues) => issues,
        }
    }

    pub fn to_config(&self, src: Option<&str>) -> Result<ScenarioConfig, ScenarioError> {
        self.build(src).map_err(ScenarioError::Invalid)
    }

    fn build(&self, src: Option<&str>) -> Result<ScenarioConfig, Vec<Issue>> {
        let mut issues = Issues {
            src,
            list: Vec::new(),
        };

        if self.version != SCHEMA_VERSION {
            issues.push(
                "version",
                format!("unsupported schema version {} (expected {SCHEMA_VERSION})", self.version),
            );
        }

        let tank = match self.tanks.as_slice() {
            [t] => issues.model(
                "tanks",
                TankSpec::new(t.id.clone(), t.area_m2, t.depth_min_m, t.depth_max_m, t.depth_init_m),
            ),
            other => {
                issues.push(
                    "tanks",
                    format!("exactly one tank is supported, found {}", other.len()),
                );
                None
            }
        };

        let ps = self.stations.len();
        let mut seen = std::collections::HashSet::new();
        for s in &self.stations {
            if !seen.insert(&s.id) {
                issues.push("stations.id", format!("duplicate station id `{}`", s.id));
            }
        }
        let rows: Vec<PumpComboRecord> = self
            .pumps
            .combos
            .iter()
            .map(|c| {
                let meta = |f: fn(&ComboStationMeta) -> Option<f64>| -> Vec<Option<f64>> {
                    if c.stations.is_empty() {
                        vec![None; c.counts.len()]
                    } else {
                        c.stations.iter().map(f).collect()
                    }
                };
                PumpComboRecord {
                    counts: ControlVector::new(c.counts.clone()),
                    flow_m3s: c.flow_l_s / 1000.0,
                    power_kw: c.power_kw,
                    station_power_kw: meta(|m| m.power_kw),
                    head_m: meta(|m| m.head_m),
                    efficiency: meta(|m| m.efficiency),
                }
            })
            .collect();
        let group = issues.model(
            "pumps",
            PumpStationGroup::new(
                self.stations
                    .iter()
                    .map(|s| StationSpec {
                        id: s.id.clone(),
                        max_count: s.max_count,
                    })
                    .collect(),
                rows,
                self.pumps.constraints.clone(),
                self.pumps.power_mode,
            ),
        );
        let per_pump_kw = match (self.pumps.power_mode, self.pumps.per_pump_kw) {
            (_, Some(p)) if !(p.is_finite() && p >= 0.0) => {
                issues.push("pumps.per_pump_kw", "must be finite and >= 0");
                0.0
            }
            (PowerMode::PerPumpConstant, None) => {
                issues.push("pumps.per_pump_kw", "required when power_mode = per_pump_constant");
                0.0
            }
            (_, p) => p.unwrap_or(0.0),
        };

        let t = &self.tariff;
        let tariff = issues.model(
            "tariff",
            TariffSchedule::new(t.price_offpeak, t.price_peak, t.offpeak_start_h, t.offpeak_end_h),
        );

        let d = &self.demand;
        if !(d.base_l_s.is_finite() && d.base_l_s >= 0.0) {
            issues.push("demand.base_l_s", "must be finite and >= 0");
        }
        let demand = issues.model(
            "demand",
            DemandProfile::new(d.base_l_s.max(0.0) / 1000.0, d.multipliers.clone()),
        );

        let e = &self.controller.empc;
        let switching = issues.model(
            "controller.empc",
            SwitchingWeights::new(&e.switching_weights),
        );
        if let Some(sw) = &switching {
            if sw.dim() != ps {
                issues.push(
                    "controller.empc.switching_weights",
                    format!("matrix is {0}x{0} but there are {ps} stations", sw.dim()),
                );
            }
        }

        let model = match (tank, group, tariff, demand) {
            (Some(tank), Some(pumps), Some(tariff), Some(demand)) => Some(NetworkModel {
                tank,
                pumps,
                tariff,
                demand,
            }),
            _ => None,
        };
        let (Some(model), Some(switching)) = (model, switching) else {
            return Err(issues.list);
        };

        let empc = EmpcConfig {
            horizon_steps: e.horizon_steps,
            dt_control_s: e.dt_control_s,
            depth_grid_resolution_m: e.depth_grid_resolution_m,
            integer_prefix_steps: e.integer_prefix_steps.unwrap_or(e.horizon_steps),
            weights: CostWeights {
                switching,
                per_pump_kw,
            },
        };

        let bands: Vec<TriggerBand> = self
            .controller
            .trigger
            .bands
            .iter()
            .map(|b| TriggerBand {
                pump_id: b.pump.clone(),
                station: b.station,
                on_below_m: b.on_below_m,
                off_above_m: b.off_above_m,
            })
            .collect();

        let cfg = ScenarioConfig {
            u_prev_init: self
                .controller
                .u_prev_init
                .clone()
                .map(ControlVector::new)
                .unwrap_or_else(|| ControlVector::zeros(ps)),
            controller: self.controller.kind,
            empc,
            trigger_initial_on: self.controller.trigger.bands.iter().map(|b| b.initially_on).collect(),
            trigger_bands: bands,
            sim_hours: self.simulation.hours,
            dt_plant_s: self.simulation.dt_plant_s,
            plant_mismatch: self.simulation.plant_mismatch,
            demand_noise_std: self.demand.noise_std.unwrap_or(0.0),
            seed: self.simulation.seed,
            model,
        };
        if let Err(err) = cfg.validate() {
            issues.push(sim_field(&err.to_string()), err.to_string());
        }
        if issues.list.is_empty() {
            Ok(cfg)
        } else {
            Err(issues.list)
        }
    }
}

/// Best-effort mapping of a harness validation message to a field path.
fn sim_field(msg: &str) -> &'static str {
    if msg.contains("sim_hours") || msg.contains("simulation length") {
        "simulation.hours"
    } else if msg.contains("plant step") || msg.contains("dt_plant") {
        "simulation.dt_plant_s"
    } else if msg.contains("plant_mismatch") {
        "simulation.plant_mismatch"
    } else if msg.contains("noise") {
        "demand.noise_std"
    } else if msg.contains("initial control") {
        "controller.u_prev_init"
    } else if msg.contains("trigger") || msg.contains("band") || msg.contains("pump ") {
        "controller.trigger.bands"
    } else {
        "controller.empc"
    }
}

struct Issues<'a> {
    src: Option<&'a str>,
    list: Vec<Issue>,
}

impl Issues<'_> {
    fn push(&mut self, field: impl Into<String>, message: impl Into<String>) {
        let field = field.into();
        let line = self.src.and_then(|s| locate_field(s, &field));
        self.list.push(Issue {
            field,
            message: message.into(),
            line,
        });
    }

    fn model<T>(&mut self, section: &str, r: Result<T, ModelError>) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(ModelError::Invariant { field, reason }) => {
                self.push(format!("{section}.{field}"), reason);
                None
            }
            Err(other) => {
                self.push(section, other.to_string());
                None
            }
        }
    }
}

fn line_of_offset(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].matches('\n').count() + 1
}

/// Line of `key` inside the table named by the dotted `field` prefix.
fn locate_field(src: &str, field: &str) -> Option<usize> {
    let (section, key) = match field.rsplit_once('.') {
        Some((s, k)) => (s, k),
        None => ("", field),
    };
    let is_key_line = |line: &str| {
        let l = line.trim_start();
        l.strip_prefix(key)
            .map(|rest| rest.trim_start().starts_with('='))
            .unwrap_or(false)
    };
    let mut in_section = section.is_empty();
    for (i, line) in src.lines().enumerate() {
        let t = line.trim();
        if t.starts_with('[') {
            let name = t.trim_matches(|c| c == '[' || c == ']').trim();
            in_section = name == section || name.starts_with(&format!("{section}."));
            if section.is_empty() {
                in_section = false;
            }
            if name == field {
                return Some(i + 1);
            }
            continue;
        }
        if in_section && is_key_line(line) {
            return Some(i + 1);
        }
    }
    src.lines().position(is_key_line).map(|i| i + 1)
}
