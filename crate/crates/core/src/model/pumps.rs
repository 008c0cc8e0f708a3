//! Pump stations, tabulated pump combinations and the admissible control set.
//!
//! Flows and powers are looked up per combination rather than evaluated from a
//! fitted polynomial, so every operating point reproduces the tabulated data
//! exactly.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::costs::CostWeights;
use crate::error::ModelError;

/// Number of operating pumps per station, `[n_1, ..., n_Ps]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ControlVector(Vec<u32>);

impl ControlVector {
    pub fn new(counts: impl Into<Vec<u32>>) -> Self {
        ControlVector(counts.into())
    }

    pub fn zeros(stations: usize) -> Self {
        ControlVector(vec![0; stations])
    }

    pub fn counts(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total_pumps(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&n| n == 0)
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&n| f64::from(n)).collect()
    }

    /// Preference order used for tie-breaking: fewer pumps in total, then
    /// lexicographically smaller counts (lower `n_1`, then lower `n_2`, ...).
    pub fn preference_cmp(&self, other: &Self) -> Ordering {
        self.total_pumps()
            .cmp(&other.total_pumps())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl fmt::Display for ControlVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, n) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{n}")?;
        }
        write!(f, ")")
    }
}

impl From<&[u32]> for ControlVector {
    fn from(counts: &[u32]) -> Self {
        ControlVector(counts.to_vec())
    }
}

impl<const N: usize> From<[u32; N]> for ControlVector {
    fn from(counts: [u32; N]) -> Self {
        ControlVector(counts.to_vec())
    }
}

/// One tabulated operating point of the station group.
///
/// Per-station heads and efficiencies are carried for reporting only; they do
/// not enter the dynamics or the cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PumpComboRecord {
    pub counts: ControlVector,
    /// Flow delivered into the receiving tank (m³/s).
    pub flow_m3s: f64,
    /// Total electrical power (kW).
    pub power_kw: f64,
    pub station_power_kw: Vec<Option<f64>>,
    pub head_m: Vec<Option<f64>>,
    pub efficiency: Vec<Option<f64>>,
}

impl PumpComboRecord {
    /// A row without per-station metadata.
    pub fn new(counts: impl Into<ControlVector>, flow_m3s: f64, power_kw: f64) -> Self {
        let counts = counts.into();
        let n = counts.len();
        PumpComboRecord {
            counts,
            flow_m3s,
            power_kw,
            station_power_kw: vec![None; n],
            head_m: vec![None; n],
            efficiency: vec![None; n],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationSpec {
    pub id: String,
    pub max_count: u32,
}

/// Linear restriction `coeffs · n <= bound` on the pump counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinearConstraint {
    pub coeffs: Vec<i64>,
    pub bound: i64,
}

impl LinearConstraint {
    pub fn holds(&self, u: &ControlVector) -> bool {
        let lhs: i64 = self
            .coeffs
            .iter()
            .zip(u.counts())
            .map(|(c, &n)| c * i64::from(n))
            .sum();
        lhs <= self.bound
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerMode {
    /// Total power straight from the tabulated row.
    Table,
    /// `(Σ n_j) · p` with a single per-pump constant `p`.
    PerPumpConstant,
}

/// The pump stations feeding one tank, with every tabulated combination.
///
/// `rows` may include combinations that are tabulated but excluded from the
/// admissible set (the plant can still run them under rule-based control).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PumpStationGroup {
    stations: Vec<StationSpec>,
    rows: Vec<PumpComboRecord>,
    constraints: Vec<LinearConstraint>,
    power_mode: PowerMode,
}

impl PumpStationGroup {
    pub fn new(
        stations: Vec<StationSpec>,
        mut rows: Vec<PumpComboRecord>,
        constraints: Vec<LinearConstraint>,
        power_mode: PowerMode,
    ) -> Result<Self, ModelError> {
        let ps = stations.len();
        if ps == 0 {
            return Err(ModelError::invariant("stations", "at least one station required"));
        }
        for c in &constraints {
            if c.coeffs.len() != ps {
                return Err(ModelError::invariant(
                    "constraints",
                    format!("expected {ps} coefficients, got {}", c.coeffs.len()),
                ));
            }
        }
        for row in &rows {
            let label = row.counts.to_string();
            if row.counts.len() != ps {
                return Err(ModelError::invariant(
                    "combos.counts",
                    format!("row {label} has {} entries, expected {ps}", row.counts.len()),
                ));
            }
            for (n, st) in row.counts.counts().iter().zip(&stations) {
                if *n > st.max_count {
                    return Err(ModelError::invariant(
                        "combos.counts",
                        format!("row {label} exceeds max_count {} of {}", st.max_count, st.id),
                    ));
                }
            }
            if !(row.flow_m3s.is_finite() && row.flow_m3s >= 0.0) {
                return Err(ModelError::invariant(
                    "combos.flow",
                    format!("row {label} must have a finite flow >= 0"),
                ));
            }
            if !(row.power_kw.is_finite() && row.power_kw >= 0.0) {
                return Err(ModelError::invariant(
                    "combos.power_kw",
                    format!("row {label} must have a finite power >= 0"),
                ));
            }
            if row.counts.is_zero() && (row.flow_m3s != 0.0 || row.power_kw != 0.0) {
                return Err(ModelError::invariant(
                    "combos",
                    "the all-zero row must have zero flow and zero power",
                ));
            }
            for meta in [&row.station_power_kw, &row.head_m, &row.efficiency] {
                if meta.len() != ps {
                    return Err(ModelError::invariant(
                        "combos",
                        format!("row {label} metadata must have {ps} entries"),
                    ));
                }
            }
        }
        rows.sort_by(|a, b| a.counts.preference_cmp(&b.counts));
        if let Some(w) = rows.windows(2).find(|w| w[0].counts == w[1].counts) {
            return Err(ModelError::invariant(
                "combos",
                format!("duplicate row {}", w[0].counts),
            ));
        }
        if !rows.iter().any(|r| r.counts.is_zero()) {
            return Err(ModelError::invariant("combos", "missing the all-zero row"));
        }

        let group = PumpStationGroup {
            stations,
            rows,
            constraints,
            power_mode,
        };
        for u in group.box_vectors() {
            if group.is_admissible(&u) && group.row(&u).is_none() {
                return Err(ModelError::invariant(
                    "combos",
                    format!("admissible combination {u} has no row"),
                ));
            }
        }
        Ok(group)
    }

    pub fn stations(&self) -> &[StationSpec] {
        &self.stations
    }

    pub fn station_count(&self) -> usize {
        self.stations.len()
    }

    pub fn max_counts(&self) -> ControlVector {
        ControlVector(self.stations.iter().map(|s| s.max_count).collect())
    }

    pub fn constraints(&self) -> &[LinearConstraint] {
        &self.constraints
    }

    pub fn power_mode(&self) -> PowerMode {
        self.power_mode
    }

    pub fn with_power_mode(mut self, mode: PowerMode) -> Self {
        self.power_mode = mode;
        self
    }

    /// All tabulated rows, admissible or not, in preference order.
    pub fn rows(&self) -> &[PumpComboRecord] {
        &self.rows
    }

    pub fn row(&self, u: &ControlVector) -> Option<&PumpComboRecord> {
        self.rows.iter().find(|r| &r.counts == u)
    }

    /// Admissible combinations in preference order (fewest pumps first).
    pub fn combos(&self) -> impl Iterator<Item = &PumpComboRecord> + '_ {
        self.rows.iter().filter(|r| self.is_admissible(&r.counts))
    }

    /// Every vector inside the box `0 <= u <= max_counts`.
    pub fn box_vectors(&self) -> Vec<ControlVector> {
        let mut out = vec![Vec::new()];
        for st in &self.stations {
            out = out
                .into_iter()
                .flat_map(|prefix: Vec<u32>| {
                    (0..=st.max_count).map(move |n| {
                        let mut v = prefix.clone();
                        v.push(n);
                        v
                    })
                })
                .collect();
        }
        out.into_iter().map(ControlVector).collect()
    }

    /// Box bounds plus every configured linear constraint.
    pub fn is_admissible(&self, u: &ControlVector) -> bool {
        u.len() == self.stations.len()
            && u
                .counts()
                .iter()
                .zip(&self.stations)
                .all(|(&n, st)| n <= st.max_count)
            && self.constraints.iter().all(|c| c.holds(u))
    }

    fn admissible_row(&self, u: &ControlVector) -> Result<&PumpComboRecord, ModelError> {
        if !self.is_admissible(u) {
            return Err(ModelError::InadmissibleControl(u.to_string()));
        }
        self.row(u)
            .ok_or_else(|| ModelError::UntabulatedControl(u.to_string()))
    }

    fn tabulated_row(&self, u: &ControlVector) -> Result<&PumpComboRecord, ModelError> {
        if u.len() != self.stations.len() {
            return Err(ModelError::DimensionMismatch {
                expected: self.stations.len(),
                got: u.len(),
            });
        }
        self.row(u)
            .ok_or_else(|| ModelError::UntabulatedControl(u.to_string()))
    }

    /// Delivered flow (m³/s) for an admissible control.
    pub fn pump_flow(&self, u: &ControlVector) -> Result<f64, ModelError> {
        Ok(self.admissible_row(u)?.flow_m3s)
    }

    /// Power (kW) the optimizer charges for an admissible control.
    pub fn pump_power(&self, u: &ControlVector, weights: &CostWeights) -> Result<f64, ModelError> {
        let row = self.admissible_row(u)?;
        Ok(match self.power_mode {
            PowerMode::Table => row.power_kw,
            PowerMode::PerPumpConstant => f64::from(u.total_pumps()) * weights.per_pump_kw,
        })
    }

    /// Flow of any tabulated combination, including ones excluded from the
    /// admissible set. This is what the plant delivers.
    pub fn plant_flow(&self, u: &ControlVector) -> Result<f64, ModelError> {
        Ok(self.tabulated_row(u)?.flow_m3s)
    }

    /// Tabulated total power of any tabulated combination.
    pub fn plant_power(&self, u: &ControlVector) -> Result<f64, ModelError> {
        Ok(self.tabulated_row(u)?.power_kw)
    }

    /// The combination that actually runs when `u` is requested.
    ///
    /// An untabulated request (e.g. a booster with no upstream pump) falls
    /// back to the highest-flow tabulated row that no station exceeds; pumps
    /// outside that row cannot deliver and stay idle.
    pub fn effective_control(&self, u: &ControlVector) -> Result<ControlVector, ModelError> {
        if u.len() != self.stations.len() {
            return Err(ModelError::DimensionMismatch {
                expected: self.stations.len(),
                got: u.len(),
            });
        }
        if self.row(u).is_some() {
            return Ok(u.clone());
        }
        let mut best: Option<&PumpComboRecord> = None;
        for r in &self.rows {
            let dominated = r.counts.counts().iter().zip(u.counts()).all(|(a, b)| a <= b);
            if dominated && best.is_none_or(|b| r.flow_m3s > b.flow_m3s) {
                best = Some(r);
            }
        }
        best.map(|r| r.counts.clone())
            .ok_or_else(|| ModelError::UntabulatedControl(u.to_string()))
    }

    pub fn max_admissible_flow(&self) -> f64 {
        self.combos().map(|r| r.flow_m3s).fold(0.0, f64::max)
    }

    /// Admissible control with the largest flow (ties go to the preferred one).
    pub fn max_flow_control(&self) -> ControlVector {
        let mut best = ControlVector::zeros(self.stations.len());
        let mut best_flow = -1.0;
        for r in self.combos() {
            if r.flow_m3s > best_flow {
                best_flow = r.flow_m3s;
                best = r.counts.clone();
            }
        }
        best
    }

    /// Richmond Pruned pump data: PS1 with two identical pumps, booster PS2
    /// with one pump, the (2,0) combination excluded from the admissible set.
    pub fn richmond_pruned() -> Self {
        fn row(
            counts: [u32; 2],
            flow_l_s: f64,
            head: [Option<f64>; 2],
            eff: [Option<f64>; 2],
            power: [f64; 2],
            total: f64,
        ) -> PumpComboRecord {
            PumpComboRecord {
                counts: counts.into(),
                flow_m3s: flow_l_s / 1000.0,
                power_kw: total,
                station_power_kw: power.iter().map(|&p| Some(p)).collect(),
                head_m: head.to_vec(),
                efficiency: eff.to_vec(),
            }
        }
        let rows = vec![
            row([0, 0], 0.0, [None, None], [None, None], [0.0, 0.0], 0.0),
            row([1, 0], 25.21, [Some(123.88), None], [Some(0.66), None], [46.32, 0.0], 46.32),
            row([2, 0], 30.82, [Some(126.92), None], [Some(0.44), None], [87.03, 0.0], 87.03),
            row(
                [1, 1],
                43.23,
                [Some(105.48), Some(30.35)],
                [Some(0.75), Some(0.60)],
                [59.52, 21.41],
                80.93,
            ),
            row(
                [2, 1],
                57.88,
                [Some(121.63), Some(27.42)],
                [Some(0.70), Some(0.70)],
                [98.45, 22.19],
                120.64,
            ),
        ];
        let stations = vec![
            StationSpec {
                id: "PS1".into(),
                max_count: 2,
            },
            StationSpec {
                id: "PS2".into(),
                max_count: 1,
            },
        ];
        let constraints = vec![
            // n_1 >= n_2
            LinearConstraint {
                coeffs: vec![-1, 1],
                bound: 0,
            },
            // n_1 - n_2 <= 1
            LinearConstraint {
                coeffs: vec![1, -1],
                bound: 1,
            },
        ];
        PumpStationGroup::new(stations, rows, constraints, PowerMode::PerPumpConstant)
            .expect("bundled pump data is valid")
    }
}
