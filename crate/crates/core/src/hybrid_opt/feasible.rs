use serde::{Deserialize, Serialize};

use crate::error::OptError;
use crate::grid_model::{
    expected_renewable_by_bus, scenario_renewable_by_bus, DispatchLayout, DispatchVector, GridCase, RenewableScenario, VarKind,
};
use crate::linearize::SensitivityModel;
use crate::scalar::Real;

/// Which physical constraint a row comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintFamily {
    Box,
    Balance,
    Flow,
    Ramp,
    Soc,
}

/// Sparse linear row `a . x` compared against `rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRow {
    pub family: ConstraintFamily,
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
    norm_sq: f64,
}

impl LinearRow {
    pub fn new(family: ConstraintFamily, mut coeffs: Vec<(usize, f64)>, rhs: f64) -> Self {
        coeffs.sort_by_key(|c| c.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(coeffs.len());
        for (i, a) in coeffs {
            match merged.last_mut() {
                Some(last) if last.0 == i => last.1 += a,
                _ => merged.push((i, a)),
            }
        }
        merged.retain(|c| c.1 != 0.0);
        let norm_sq = merged.iter().map(|c| c.1 * c.1).sum();
        Self { family, coeffs: merged, rhs, norm_sq }
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(i, a)| a * x[i]).sum()
    }

    fn shift(&self, x: &mut [f64], step: f64) {
        for &(i, a) in &self.coeffs {
            x[i] += step * a;
        }
    }
}

/// Intersection of the dispatch box, balance hyperplanes and flow/ramp/SOC halfspaces.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleSet {
    pub layout: DispatchLayout,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// `a . x = rhs`.
    pub equalities: Vec<LinearRow>,
    /// `a . x <= rhs`.
    pub inequalities: Vec<LinearRow>,
}

/// Largest violation per constraint family.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstraintResiduals {
    pub box_bounds: f64,
    pub balance: f64,
    pub flow: f64,
    pub ramp: f64,
    pub soc: f64,
}

impl ConstraintResiduals {
    pub fn max(&self) -> f64 {
        [self.box_bounds, self.balance, self.flow, self.ramp, self.soc].into_iter().fold(0.0, f64::max)
    }

    fn record(&mut self, family: ConstraintFamily, v: f64) {
        let slot = match family {
            ConstraintFamily::Box => &mut self.box_bounds,
            ConstraintFamily::Balance => &mut self.balance,
            ConstraintFamily::Flow => &mut self.flow,
            ConstraintFamily::Ramp => &mut self.ramp,
            ConstraintFamily::Soc => &mut self.soc,
        };
        *slot = slot.max(v);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionConfig {
    /// Stop when successive sweeps move the iterate by at most this (max norm).
    pub tol: f64,
    pub max_sweeps: usize,
    /// Residual accepted as feasible after convergence.
    pub feasibility_tol: f64,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        Self { tol: 1e-8, max_sweeps: 500, feasibility_tol: 1e-6 }
    }
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn injection_rows(case: &GridCase, layout: &DispatchLayout, t: usize) -> Vec<(usize, usize, f64)> {
    let n = layout.per_step();
    (t * n..(t + 1) * n)
        .map(|i| {
            let slot = layout.slot(i);
            (i, layout.bus_of(case, slot), DispatchLayout::injection_sign(slot.kind))
        })
        .collect()
}

impl FeasibleSet {
    /// Balance holds at expected renewable availability; line limits hold under every scenario.
    pub fn from_case<T: Real>(case: &GridCase, model: &SensitivityModel<T>, scenarios: &[RenewableScenario]) -> Self {
        let layout = DispatchLayout::for_case(case);
        let (lower, upper): (Vec<f64>, Vec<f64>) = layout.slots().map(|s| layout.bounds(case, s)).unzip();
        let mut equalities = Vec::new();
        let mut inequalities = Vec::new();
        let nb = case.num_buses();
        for t in 0..case.horizon {
            let inj = injection_rows(case, &layout, t);
            let renewable = expected_renewable_by_bus(case, t);
            let net: f64 = (0..nb).map(|b| renewable[b] - case.fixed_load_at(b, t)).sum();
            equalities.push(LinearRow::new(ConstraintFamily::Balance, inj.iter().map(|&(i, _, s)| (i, s)).collect(), -net));

            for (l, br) in case.branches.iter().enumerate() {
                let coeffs: Vec<(usize, f64)> =
                    inj.iter().map(|&(i, b, s)| (i, s * model.factor(l, b).to_f64_lossy())).collect();
                let mut offsets: Vec<f64> = scenarios
                    .iter()
                    .map(|sc| {
                        let w = scenario_renewable_by_bus(case, sc, t);
                        (0..nb).map(|b| model.factor(l, b).to_f64_lossy() * (w[b] - case.fixed_load_at(b, t))).sum()
                    })
                    .collect();
                if offsets.is_empty() {
                    offsets.push(
                        (0..nb).map(|b| model.factor(l, b).to_f64_lossy() * (renewable[b] - case.fixed_load_at(b, t))).sum(),
                    );
                }
                // the tightest scenario on each side
                let hi = offsets.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let lo = offsets.iter().cloned().fold(f64::INFINITY, f64::min);
                let up = LinearRow::new(ConstraintFamily::Flow, coeffs.clone(), br.flow_limit - hi);
                if !up.coeffs.is_empty() {
                    inequalities.push(up);
                    let neg = coeffs.iter().map(|&(i, a)| (i, -a)).collect();
                    inequalities.push(LinearRow::new(ConstraintFamily::Flow, neg, br.flow_limit + lo));
                }
            }
        }
        for (g, gen) in case.generators.iter().enumerate() {
            for t in 1..case.horizon {
                let (now, prev) = (layout.index(VarKind::Gen, g, t), layout.index(VarKind::Gen, g, t - 1));
                inequalities.push(LinearRow::new(ConstraintFamily::Ramp, vec![(now, 1.0), (prev, -1.0)], gen.ramp_limit));
                inequalities.push(LinearRow::new(ConstraintFamily::Ramp, vec![(now, -1.0), (prev, 1.0)], gen.ramp_limit));
            }
        }
        for (u, st) in case.storage_units.iter().enumerate() {
            for t in 1..=case.horizon {
                let coeffs: Vec<(usize, f64)> = (0..t)
                    .flat_map(|tau| {
                        [
                            (layout.index(VarKind::Charge, u, tau), st.charge_eff),
                            (layout.index(VarKind::Discharge, u, tau), -1.0 / st.discharge_eff),
                        ]
                    })
                    .collect();
                let neg = coeffs.iter().map(|&(i, a)| (i, -a)).collect();
                inequalities.push(LinearRow::new(ConstraintFamily::Soc, coeffs, st.capacity - st.soc_init));
                inequalities.push(LinearRow::new(ConstraintFamily::Soc, neg, st.soc_init));
            }
        }
        equalities.retain(|r| !r.coeffs.is_empty() || r.rhs.abs() > 0.0);
        Self { layout, lower, upper, equalities, inequalities }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn residuals(&self, x: &[f64]) -> ConstraintResiduals {
        let mut r = ConstraintResiduals::default();
        for ((&v, &lo), &hi) in x.iter().zip(&self.lower).zip(&self.upper) {
            r.record(ConstraintFamily::Box, (lo - v).max(v - hi).max(0.0));
        }
        for row in &self.equalities {
            r.record(row.family, (row.dot(x) - row.rhs).abs());
        }
        for row in &self.inequalities {
            r.record(row.family, (row.dot(x) - row.rhs).max(0.0));
        }
        r
    }

    pub fn residuals_of<T: Real>(&self, x: &DispatchVector<T>) -> ConstraintResiduals {
        self.residuals(&x.to_f64().values)
    }

    /// Euclidean projection by Dykstra's algorithm.
    pub fn project<T: Real>(&self, z: &DispatchVector<T>, config: &ProjectionConfig) -> Result<DispatchVector<T>, OptError> {
        let x = self.project_values(&z.to_f64().values, config)?;
        Ok(DispatchVector::from_values(z.layout.clone(), x.into_iter().map(T::of).collect()))
    }

    pub fn project_values(&self, z: &[f64], config: &ProjectionConfig) -> Result<Vec<f64>, OptError> {
        assert_eq!(z.len(), self.dim(), "point does not match the feasible set");
        let mut x = z.to_vec();
        let rows: Vec<(&LinearRow, bool)> =
            self.equalities.iter().map(|r| (r, true)).chain(self.inequalities.iter().map(|r| (r, false))).collect();
        // Dykstra increments: one vector for the box, one scalar multiplier per row
        let mut p_box = vec![0.0; x.len()];
        let mut p_row = vec![0.0; rows.len()];
        let mut prev = x.clone();
        let mut prev_box = p_box.clone();
        let mut prev_row = p_row.clone();
        for sweep in 1..=config.max_sweeps {
            for i in 0..x.len() {
                let y = x[i] + p_box[i];
                let c = y.clamp(self.lower[i], self.upper[i]);
                p_box[i] = y - c;
                x[i] = c;
            }
            for ((row, is_eq), p) in rows.iter().zip(p_row.iter_mut()) {
                if row.norm_sq == 0.0 {
                    continue;
                }
                // y = x + p * a; project y onto the row
                row.shift(&mut x, *p);
                let v = (row.dot(&x) - row.rhs) / row.norm_sq;
                let step = if *is_eq { v } else { v.max(0.0) };
                row.shift(&mut x, -step);
                *p = step;
            }
            // the iterate can stall while increments still move, so both must settle
            let change = max_diff(&x, &prev).max(max_diff(&p_box, &prev_box)).max(
                rows.iter().zip(p_row.iter().zip(&prev_row)).map(|((r, _), (a, b))| (a - b).abs() * r.norm_sq.sqrt()).fold(0.0, f64::max),
            );
            if change <= config.tol {
                let res = self.residuals(&x).max();
                if res > config.feasibility_tol {
                    return Err(OptError::EmptyFeasibleSet(format!(
                        "alternating projections stalled after {sweep} sweeps with residual {res:e}"
                    )));
                }
                return Ok(x);
            }
            prev.copy_from_slice(&x);
            prev_box.copy_from_slice(&p_box);
            prev_row.copy_from_slice(&p_row);
        }
        Err(OptError::ProjectionDiverged { sweeps: config.max_sweeps, residual: self.residuals(&x).max() })
    }

    /// A feasible point, found by projecting the box midpoint.
    pub fn feasible_point(&self, config: &ProjectionConfig) -> Result<Vec<f64>, OptError> {
        let mid: Vec<f64> = self.lower.iter().zip(&self.upper).map(|(a, b)| 0.5 * (a + b)).collect();
        self.project_values(&mid, config)
    }
}
