//! DC power-flow sensitivities.
//!
//! Line flows follow `F = PTDF · P` where `P` is the nodal injection vector in MW
//! and the slack bus absorbs any imbalance (its PTDF column is zero). Positive
//! flow runs from `from_bus` to `to_bus`.

use nalgebra::DMatrix;

use crate::error::LinearizeError;
use crate::grid_model::{DispatchLayout, DispatchVector, GridCase, RenewableScenario};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityModel<T: Real> {
    /// Branches by buses.
    pub ptdf: DMatrix<T>,
    pub slack_bus: usize,
    /// Operating point of the last refresh. Flows under the DC model do not depend on it.
    pub base_point: DispatchVector<T>,
}

/// Builds the PTDF from branch and reduced nodal susceptances.
///
/// The factorization always runs in `f64`; the result is cast to `T`.
pub fn build_ptdf<T: Real>(case: &GridCase) -> Result<SensitivityModel<T>, LinearizeError> {
    let slack = case.slack_bus().ok_or(LinearizeError::NoSlack)?;
    let ptdf = ptdf_f64(case, slack)?;
    Ok(SensitivityModel {
        ptdf: ptdf.map(T::of),
        slack_bus: slack,
        base_point: DispatchVector::zeros(DispatchLayout::for_case(case)),
    })
}

fn ptdf_f64(case: &GridCase, slack: usize) -> Result<DMatrix<f64>, LinearizeError> {
    let nb = case.num_buses();
    let nl = case.branches.len();
    let disconnected = case.disconnected_buses();
    if !disconnected.is_empty() {
        return Err(LinearizeError::Disconnected { buses: disconnected });
    }
    // reduced index: skip the slack bus
    let red = |b: usize| if b < slack { Some(b) } else if b == slack { None } else { Some(b - 1) };
    let mut b_red = DMatrix::<f64>::zeros(nb - 1, nb - 1);
    for br in &case.branches {
        let y = 1.0 / br.reactance;
        let (f, t) = (red(br.from_bus), red(br.to_bus));
        if let Some(f) = f {
            b_red[(f, f)] += y;
        }
        if let Some(t) = t {
            b_red[(t, t)] += y;
        }
        if let (Some(f), Some(t)) = (f, t) {
            b_red[(f, t)] -= y;
            b_red[(t, f)] -= y;
        }
    }
    let x_red = if nb > 1 {
        b_red.try_inverse().ok_or(LinearizeError::Singular)?
    } else {
        b_red
    };
    // X padded with a zero row/column at the slack
    let x_at = |i: usize, j: usize| match (red(i), red(j)) {
        (Some(i), Some(j)) => x_red[(i, j)],
        _ => 0.0,
    };
    let mut ptdf = DMatrix::<f64>::zeros(nl, nb);
    for (l, br) in case.branches.iter().enumerate() {
        for b in 0..nb {
            ptdf[(l, b)] = (x_at(br.from_bus, b) - x_at(br.to_bus, b)) / br.reactance;
        }
    }
    Ok(ptdf)
}

impl<T: Real> SensitivityModel<T> {
    pub fn num_branches(&self) -> usize {
        self.ptdf.nrows()
    }

    /// Flows for an arbitrary injection vector (one entry per bus).
    pub fn flows_from_injections(&self, injections: &[T]) -> Vec<T> {
        assert_eq!(injections.len(), self.ptdf.ncols(), "one injection per bus");
        (0..self.ptdf.nrows())
            .map(|l| (0..self.ptdf.ncols()).map(|b| self.ptdf[(l, b)] * injections[b]).sum())
            .collect()
    }

    /// Sensitivity of line `l` flow to one MW injected at `bus`.
    pub fn factor(&self, l: usize, bus: usize) -> T {
        self.ptdf[(l, bus)]
    }
}

/// Line flows in MW at timestep `t` for a dispatch under one renewable scenario.
pub fn line_flows<T: Real>(
    model: &SensitivityModel<T>,
    case: &GridCase,
    dispatch: &DispatchVector<T>,
    scenario: &RenewableScenario,
    t: usize,
) -> Vec<T> {
    assert_eq!(dispatch.layout, DispatchLayout::for_case(case), "dispatch does not match case");
    let renewable = crate::grid_model::scenario_renewable_by_bus(case, scenario, t);
    model.flows_from_injections(&dispatch.injections(case, t, &renewable))
}

/// Records a new operating point. Under the DC model the PTDF is unchanged.
pub fn refresh_sensitivities<T: Real>(model: &SensitivityModel<T>, new_base: &DispatchVector<T>) -> SensitivityModel<T> {
    SensitivityModel {
        ptdf: model.ptdf.clone(),
        slack_bus: model.slack_bus,
        base_point: new_base.clone(),
    }
}
