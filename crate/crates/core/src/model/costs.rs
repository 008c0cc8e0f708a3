use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::pumps::{ControlVector, PumpStationGroup};
use crate::error::ModelError;

/// Symmetric weighting matrix of the switching penalty `Δuᵀ R Δu`.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchingWeights(DMatrix<f64>);

impl SwitchingWeights {
    /// Requires a symmetric positive-definite matrix.
    pub fn new(rows: &[Vec<f64>]) -> Result<Self, ModelError> {
        let m = Self::from_rows(rows)?;
        let eig = m.0.clone().symmetric_eigenvalues();
        if eig.iter().any(|&l| l <= 0.0) {
            return Err(ModelError::invariant(
                "switching_weights",
                format!("matrix must be positive definite (eigenvalues {:?})", eig.as_slice()),
            ));
        }
        Ok(m)
    }

    pub fn diagonal(diag: &[f64]) -> Result<Self, ModelError> {
        let n = diag.len();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { diag[i] } else { 0.0 }).collect())
            .collect();
        Self::new(&rows)
    }

    /// All-zero weights, used to switch the penalty off in experiments.
    pub fn zero(n: usize) -> Self {
        SwitchingWeights(DMatrix::zeros(n, n))
    }

    fn from_rows(rows: &[Vec<f64>]) -> Result<Self, ModelError> {
        let n = rows.len();
        if n == 0 {
            return Err(ModelError::invariant("switching_weights", "empty matrix"));
        }
        if let Some(r) = rows.iter().find(|r| r.len() != n) {
            return Err(ModelError::DimensionMismatch {
                expected: n,
                got: r.len(),
            });
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(ModelError::invariant("switching_weights", "non-finite entry"));
        }
        let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        for i in 0..n {
            for j in 0..i {
                if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * (1.0 + m[(i, j)].abs()) {
                    return Err(ModelError::invariant("switching_weights", "matrix must be symmetric"));
                }
            }
        }
        Ok(SwitchingWeights(m))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim())
            .map(|i| (0..self.dim()).map(|j| self.0[(i, j)]).collect())
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    /// `Δuᵀ R Δu` for a (possibly fractional) difference vector.
    pub fn quadratic_form(&self, delta: &[f64]) -> Result<f64, ModelError> {
        if delta.len() != self.dim() {
            return Err(ModelError::DimensionMismatch {
                expected: self.dim(),
                got: delta.len(),
            });
        }
        let d = DVector::from_column_slice(delta);
        Ok(d.dot(&(&self.0 * &d)))
    }
}

impl Serialize for SwitchingWeights {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for SwitchingWeights {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        SwitchingWeights::new(&rows).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostWeights {
    pub switching: SwitchingWeights,
    /// Per-pump power constant (kW) used in `PerPumpConstant` power mode.
    pub per_pump_kw: f64,
}

impl CostWeights {
    /// `R = diag(100, 50)`, `p = 40.21 kW`.
    pub fn richmond_pruned() -> Self {
        CostWeights {
            switching: SwitchingWeights::diagonal(&[100.0, 50.0]).expect("positive diagonal"),
            per_pump_kw: 40.21,
        }
    }

    pub fn without_switching_penalty(&self) -> Self {
        CostWeights {
            switching: SwitchingWeights::zero(self.switching.dim()),
            per_pump_kw: self.per_pump_kw,
        }
    }
}

/// Energy cost of one step (pence): `price · power(u) · dt`.
pub fn stage_cost_economic(
    u: &ControlVector,
    price_p_per_kwh: f64,
    dt_h: f64,
    group: &PumpStationGroup,
    weights: &CostWeights,
) -> Result<f64, ModelError> {
    if !(dt_h > 0.0 && dt_h.is_finite()) {
        return Err(ModelError::InvalidInput(format!("dt must be > 0, got {dt_h}")));
    }
    Ok(price_p_per_kwh * group.pump_power(u, weights)? * dt_h)
}

/// Switching penalty `Δuᵀ R Δu` with `Δu = u - u_prev`.
pub fn stage_cost_switching(
    u: &ControlVector,
    u_prev: &ControlVector,
    r: &SwitchingWeights,
) -> Result<f64, ModelError> {
    if u.len() != u_prev.len() {
        return Err(ModelError::DimensionMismatch {
            expected: u.len(),
            got: u_prev.len(),
        });
    }
    let delta: Vec<f64> = u
        .counts()
        .iter()
        .zip(u_prev.counts())
        .map(|(&a, &b)| f64::from(a) - f64::from(b))
        .collect();
    r.quadratic_form(&delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PowerMode;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn cv(a: u32, b: u32) -> ControlVector {
        ControlVector::from([a, b])
    }

    #[test]
    fn economic_stage_cost() {
        let w = CostWeights::richmond_pruned();
        let constant = PumpStationGroup::richmond_pruned();
        let table = constant.clone().with_power_mode(PowerMode::Table);
        // 3 · 40.21 · 2.41
        assert_relative_eq!(
            stage_cost_economic(&cv(2, 1), 2.41, 1.0, &constant, &w).unwrap(),
            290.7183,
            epsilon = 1e-9
        );
        assert_eq!(stage_cost_economic(&cv(0, 0), 6.79, 1.0, &constant, &w).unwrap(), 0.0);
        assert_eq!(stage_cost_economic(&cv(0, 0), 2.41, 1.0, &table, &w).unwrap(), 0.0);
        // 46.32 · 6.79
        assert_relative_eq!(
            stage_cost_economic(&cv(1, 0), 6.79, 1.0, &table, &w).unwrap(),
            314.5128,
            epsilon = 1e-9
        );
        assert!(stage_cost_economic(&cv(1, 0), 6.79, 0.0, &table, &w).is_err());
        assert!(stage_cost_economic(&cv(2, 0), 6.79, 1.0, &table, &w).is_err());
    }

    #[test]
    fn switching_stage_cost() {
        let r = CostWeights::richmond_pruned().switching;
        assert_eq!(stage_cost_switching(&cv(1, 0), &cv(1, 0), &r).unwrap(), 0.0);
        assert_eq!(stage_cost_switching(&cv(1, 1), &cv(0, 0), &r).unwrap(), 150.0);
        assert_eq!(stage_cost_switching(&cv(0, 0), &cv(1, 0), &r).unwrap(), 100.0);
        assert!(matches!(
            stage_cost_switching(&cv(0, 0), &ControlVector::new(vec![1]), &r),
            Err(ModelError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn weights_must_be_positive_definite_and_symmetric() {
        assert!(SwitchingWeights::diagonal(&[100.0, 0.0]).is_err());
        assert!(SwitchingWeights::new(&[vec![1.0, 2.0], vec![2.0, 1.0]]).is_err());
        assert!(SwitchingWeights::new(&[vec![2.0, 1.0], vec![0.0, 2.0]]).is_err());
        assert!(SwitchingWeights::new(&[vec![2.0, 1.0], vec![1.0, 2.0]]).is_ok());
        assert!(SwitchingWeights::new(&[vec![1.0, 0.0]]).is_err());
    }

    proptest! {
        #[test]
        fn switching_penalty_symmetric_and_zero_on_diagonal(
            a in 0u32..3, b in 0u32..2, c in 0u32..3, d in 0u32..2,
            r1 in 0.1f64..500.0, r2 in 0.1f64..500.0,
        ) {
            let r = SwitchingWeights::diagonal(&[r1, r2]).unwrap();
            let u = cv(a, b);
            let v = cv(c, d);
            prop_assert_eq!(stage_cost_switching(&u, &u, &r).unwrap(), 0.0);
            prop_assert_eq!(
                stage_cost_switching(&u, &v, &r).unwrap(),
                stage_cost_switching(&v, &u, &r).unwrap()
            );
        }
    }
}
