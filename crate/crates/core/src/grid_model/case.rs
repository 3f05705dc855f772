use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::CaseError;

/// Per-unit power base in MVA. Reactances in case files are per-unit on this base.
pub const BASE_MVA: f64 = 100.0;

const PROBABILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: usize,
    #[serde(default)]
    pub is_slack: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub from_bus: usize,
    pub to_bus: usize,
    /// Series reactance, per-unit.
    pub reactance: f64,
    /// Thermal limit `F^max` in MW, applied to both flow directions.
    pub flow_limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub bus: usize,
    pub p_min: f64,
    pub p_max: f64,
    /// $/MW^2 per timestep.
    pub cost_quad: f64,
    /// $/MW per timestep.
    pub cost_lin: f64,
    /// Maximum change in output between consecutive timesteps, MW.
    pub ramp_limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorageUnit {
    pub bus: usize,
    /// MWh.
    pub capacity: f64,
    /// MWh at the start of the horizon.
    pub soc_init: f64,
    pub charge_eff: f64,
    pub discharge_eff: f64,
    /// Bound on both charge and discharge power, MW.
    pub power_limit: f64,
    /// $/MWh charged or discharged. Optional, defaults to zero.
    #[serde(default)]
    pub throughput_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandProfile {
    pub bus: usize,
    /// Inflexible load per timestep, MW.
    pub fixed_load: Vec<f64>,
    /// Controllable extra consumption band `[d_min, d_max]` per timestep, MW.
    pub flexible_band: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenewableScenario {
    pub bus: usize,
    /// Available renewable power per timestep, MW.
    pub available_power: Vec<f64>,
    pub probability: f64,
    /// Whether the plant may be curtailed. Must-take plants inject everything
    /// available. Optional, defaults to `true`.
    #[serde(default = "default_true")]
    pub curtailable: bool,
}

fn default_true() -> bool {
    true
}

/// A complete dispatch problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCase {
    pub name: String,
    pub horizon: usize,
    pub buses: Vec<Bus>,
    #[serde(default)]
    pub branches: Vec<Branch>,
    #[serde(default)]
    pub generators: Vec<Generator>,
    #[serde(default, rename = "storage")]
    pub storage_units: Vec<StorageUnit>,
    #[serde(default, rename = "demand")]
    pub demand_profiles: Vec<DemandProfile>,
    #[serde(default)]
    pub scenarios: Vec<RenewableScenario>,
}

/// Reads, parses and validates a case file.
pub fn load_case(path: impl AsRef<Path>) -> Result<GridCase, CaseError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| CaseError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_case(&text)
}

/// Parses and validates case-file text.
pub fn parse_case(text: &str) -> Result<GridCase, CaseError> {
    let case: GridCase = serde_json::from_str(text).map_err(|e| CaseError::Parse(e.to_string()))?;
    case.validate()?;
    Ok(case)
}

fn invalid(msg: impl Into<String>) -> CaseError {
    CaseError::Validation(msg.into())
}

fn finite(name: &str, x: f64) -> Result<(), CaseError> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} is not finite")))
    }
}

impl GridCase {
    pub fn num_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn slack_bus(&self) -> Option<usize> {
        self.buses.iter().find(|b| b.is_slack).map(|b| b.id)
    }

    /// Checks every structural and physical invariant, naming the first one violated.
    pub fn validate(&self) -> Result<(), CaseError> {
        if self.horizon == 0 {
            return Err(invalid("horizon must be at least 1"));
        }
        if self.buses.is_empty() {
            return Err(invalid("case has no buses"));
        }
        for (i, bus) in self.buses.iter().enumerate() {
            if bus.id != i {
                return Err(invalid(format!("bus ids must be contiguous from 0 (found {} at position {i})", bus.id)));
            }
        }
        match self.buses.iter().filter(|b| b.is_slack).count() {
            0 => return Err(invalid("no slack bus")),
            1 => {}
            _ => return Err(invalid("multiple slack buses")),
        }
        let nb = self.num_buses();
        let bus_ok = |what: &str, bus: usize| {
            if bus < nb {
                Ok(())
            } else {
                Err(invalid(format!("{what} references unknown bus {bus}")))
            }
        };
        for (l, br) in self.branches.iter().enumerate() {
            bus_ok(&format!("branch {l}"), br.from_bus)?;
            bus_ok(&format!("branch {l}"), br.to_bus)?;
            if br.from_bus == br.to_bus {
                return Err(invalid(format!("branch {l} connects bus {} to itself", br.from_bus)));
            }
            finite("branch reactance", br.reactance)?;
            finite("branch flow_limit", br.flow_limit)?;
            if br.reactance <= 0.0 {
                return Err(invalid(format!("branch {l} reactance must be positive")));
            }
            if br.flow_limit <= 0.0 {
                return Err(invalid(format!("branch {l} flow_limit must be positive")));
            }
        }
        if let Some(island) = self.disconnected_buses().first() {
            return Err(invalid(format!("network is not connected (bus {island} unreachable from slack)")));
        }
        for (g, gen) in self.generators.iter().enumerate() {
            bus_ok(&format!("generator {g}"), gen.bus)?;
            for (name, x) in [
                ("p_min", gen.p_min),
                ("p_max", gen.p_max),
                ("cost_quad", gen.cost_quad),
                ("cost_lin", gen.cost_lin),
                ("ramp_limit", gen.ramp_limit),
            ] {
                finite(&format!("generator {g} {name}"), x)?;
            }
            if !(0.0 <= gen.p_min && gen.p_min <= gen.p_max) {
                return Err(invalid(format!("generator {g} requires 0 <= p_min <= p_max")));
            }
            if gen.ramp_limit <= 0.0 {
                return Err(invalid(format!("generator {g} ramp_limit must be positive")));
            }
            if gen.cost_quad < 0.0 {
                return Err(invalid(format!("generator {g} cost_quad must be non-negative")));
            }
        }
        for (s, st) in self.storage_units.iter().enumerate() {
            bus_ok(&format!("storage {s}"), st.bus)?;
            for (name, x) in [
                ("capacity", st.capacity),
                ("soc_init", st.soc_init),
                ("charge_eff", st.charge_eff),
                ("discharge_eff", st.discharge_eff),
                ("power_limit", st.power_limit),
                ("throughput_cost", st.throughput_cost),
            ] {
                finite(&format!("storage {s} {name}"), x)?;
            }
            if !(0.0 <= st.soc_init && st.soc_init <= st.capacity) {
                return Err(invalid(format!("storage {s} requires 0 <= soc_init <= capacity")));
            }
            for (name, eff) in [("charge_eff", st.charge_eff), ("discharge_eff", st.discharge_eff)] {
                if !(eff > 0.0 && eff <= 1.0) {
                    return Err(invalid(format!("storage {s} {name} must lie in (0, 1]")));
                }
            }
            if st.power_limit < 0.0 {
                return Err(invalid(format!("storage {s} power_limit must be non-negative")));
            }
        }
        for (d, dp) in self.demand_profiles.iter().enumerate() {
            bus_ok(&format!("demand {d}"), dp.bus)?;
            if dp.fixed_load.len() != self.horizon || dp.flexible_band.len() != self.horizon {
                return Err(invalid(format!("demand {d} profile length differs from horizon {}", self.horizon)));
            }
            for (t, (&load, band)) in dp.fixed_load.iter().zip(&dp.flexible_band).enumerate() {
                finite(&format!("demand {d} fixed_load[{t}]"), load)?;
                finite(&format!("demand {d} flexible_band[{t}]"), band[0])?;
                finite(&format!("demand {d} flexible_band[{t}]"), band[1])?;
                if band[0] > band[1] {
                    return Err(invalid(format!("demand {d} at t={t} has d_min > d_max")));
                }
            }
        }
        if !self.scenarios.is_empty() {
            let mut curtail_flag: BTreeMap<usize, bool> = BTreeMap::new();
            for (s, sc) in self.scenarios.iter().enumerate() {
                bus_ok(&format!("scenario {s}"), sc.bus)?;
                if sc.available_power.len() != self.horizon {
                    return Err(invalid(format!("scenario {s} trace length differs from horizon {}", self.horizon)));
                }
                if sc.available_power.iter().any(|&w| !w.is_finite() || w < 0.0) {
                    return Err(invalid(format!("scenario {s} available_power must be finite and non-negative")));
                }
                if !(sc.probability > 0.0 && sc.probability <= 1.0) {
                    return Err(invalid(format!("scenario {s} probability must lie in (0, 1]")));
                }
                if let Some(&prev) = curtail_flag.get(&sc.bus) {
                    if prev != sc.curtailable {
                        return Err(invalid(format!("scenarios at bus {} disagree on curtailable", sc.bus)));
                    }
                }
                curtail_flag.insert(sc.bus, sc.curtailable);
            }
            let total: f64 = self.scenarios.iter().map(|s| s.probability).sum();
            if (total - 1.0).abs() > PROBABILITY_TOL {
                return Err(invalid(format!("scenario probabilities sum to {total}, expected 1")));
            }
        }
        Ok(())
    }

    /// Buses not reachable from the slack bus through branches, ascending.
    pub fn disconnected_buses(&self) -> Vec<usize> {
        let nb = self.num_buses();
        let Some(slack) = self.slack_bus().filter(|&s| s < nb) else {
            return (0..nb).collect();
        };
        let mut adj = vec![Vec::new(); nb];
        for br in &self.branches {
            if br.from_bus < nb && br.to_bus < nb {
                adj[br.from_bus].push(br.to_bus);
                adj[br.to_bus].push(br.from_bus);
            }
        }
        let mut seen = vec![false; nb];
        seen[slack] = true;
        let mut queue = VecDeque::from([slack]);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        (0..nb).filter(|&b| !seen[b]).collect()
    }

    /// Buses hosting curtailable renewables, ascending.
    pub fn curtailable_buses(&self) -> Vec<usize> {
        self.scenarios
            .iter()
            .filter(|s| s.curtailable)
            .map(|s| s.bus)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// Probability-weighted renewable availability at `bus` and timestep `t`.
    pub fn expected_renewable(&self, bus: usize, t: usize) -> f64 {
        self.scenarios
            .iter()
            .filter(|s| s.bus == bus)
            .map(|s| s.probability * s.available_power[t])
            .sum()
    }

    /// Renewable availability of a single scenario at `bus`, `t`.
    pub fn scenario_renewable(scenario: &RenewableScenario, bus: usize, t: usize) -> f64 {
        if scenario.bus == bus {
            scenario.available_power[t]
        } else {
            0.0
        }
    }

    /// Total inflexible load at timestep `t`, MW.
    pub fn fixed_load(&self, t: usize) -> f64 {
        self.demand_profiles.iter().map(|d| d.fixed_load[t]).sum()
    }

    /// Inflexible load at `bus`, `t`.
    pub fn fixed_load_at(&self, bus: usize, t: usize) -> f64 {
        self.demand_profiles.iter().filter(|d| d.bus == bus).map(|d| d.fixed_load[t]).sum()
    }

    /// Expected renewable energy over the horizon, MWh.
    pub fn expected_renewable_energy(&self) -> f64 {
        self.scenarios.iter().map(|s| s.probability * s.available_power.iter().sum::<f64>()).sum()
    }

    /// Inflexible load energy over the horizon, MWh.
    pub fn load_energy(&self) -> f64 {
        (0..self.horizon).map(|t| self.fixed_load(t)).sum()
    }

    /// Serializes in the case-file format.
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("GridCase serializes")
    }
}
