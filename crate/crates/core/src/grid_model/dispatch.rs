use serde::{Deserialize, Serialize};

use super::case::GridCase;
use crate::scalar::Real;

/// Kind of a continuous per-timestep decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarKind {
    Gen,
    Charge,
    Discharge,
    Demand,
    Curtail,
}

impl VarKind {
    pub fn as_str(self) -> &'static str {
        match self {
            VarKind::Gen => "gen",
            VarKind::Charge => "charge",
            VarKind::Discharge => "discharge",
            VarKind::Demand => "demand",
            VarKind::Curtail => "curtail",
        }
    }
}

/// One slot of the flattened dispatch vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Slot {
    pub kind: VarKind,
    /// Index within its device list (curtailment: index into the curtailable-bus list).
    pub device: usize,
    pub t: usize,
}

/// Flattened ordering of `x = [g, s+, s-, d, curtailment]` repeated per timestep.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DispatchLayout {
    pub generators: usize,
    pub storage: usize,
    pub demand: usize,
    /// Buses that carry a curtailment decision.
    pub curtail_buses: Vec<usize>,
    pub horizon: usize,
}

impl DispatchLayout {
    pub fn for_case(case: &GridCase) -> Self {
        Self {
            generators: case.generators.len(),
            storage: case.storage_units.len(),
            demand: case.demand_profiles.len(),
            curtail_buses: case.curtailable_buses(),
            horizon: case.horizon,
        }
    }

    /// Decisions per timestep (`n`).
    pub fn per_step(&self) -> usize {
        self.generators + 2 * self.storage + self.demand + self.curtail_buses.len()
    }

    pub fn len(&self) -> usize {
        self.per_step() * self.horizon
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn kind_offset(&self, kind: VarKind) -> usize {
        match kind {
            VarKind::Gen => 0,
            VarKind::Charge => self.generators,
            VarKind::Discharge => self.generators + self.storage,
            VarKind::Demand => self.generators + 2 * self.storage,
            VarKind::Curtail => self.generators + 2 * self.storage + self.demand,
        }
    }

    fn kind_count(&self, kind: VarKind) -> usize {
        match kind {
            VarKind::Gen => self.generators,
            VarKind::Charge | VarKind::Discharge => self.storage,
            VarKind::Demand => self.demand,
            VarKind::Curtail => self.curtail_buses.len(),
        }
    }

    pub fn index(&self, kind: VarKind, device: usize, t: usize) -> usize {
        debug_assert!(device < self.kind_count(kind) && t < self.horizon);
        t * self.per_step() + self.kind_offset(kind) + device
    }

    pub fn slot(&self, index: usize) -> Slot {
        let n = self.per_step();
        let t = index / n;
        let r = index % n;
        for kind in [VarKind::Gen, VarKind::Charge, VarKind::Discharge, VarKind::Demand, VarKind::Curtail] {
            let off = self.kind_offset(kind);
            if r < off + self.kind_count(kind) {
                return Slot { kind, device: r - off, t };
            }
        }
        unreachable!("index {index} outside layout")
    }

    pub fn slots(&self) -> impl Iterator<Item = Slot> + '_ {
        (0..self.len()).map(move |i| self.slot(i))
    }

    /// Bus a slot's device sits on.
    pub fn bus_of(&self, case: &GridCase, slot: Slot) -> usize {
        match slot.kind {
            VarKind::Gen => case.generators[slot.device].bus,
            VarKind::Charge | VarKind::Discharge => case.storage_units[slot.device].bus,
            VarKind::Demand => case.demand_profiles[slot.device].bus,
            VarKind::Curtail => self.curtail_buses[slot.device],
        }
    }

    /// Box bounds `[x_min, x_max]` of a slot in MW.
    pub fn bounds(&self, case: &GridCase, slot: Slot) -> (f64, f64) {
        match slot.kind {
            VarKind::Gen => {
                let g = &case.generators[slot.device];
                (g.p_min, g.p_max)
            }
            VarKind::Charge | VarKind::Discharge => (0.0, case.storage_units[slot.device].power_limit),
            VarKind::Demand => {
                let band = case.demand_profiles[slot.device].flexible_band[slot.t];
                (band[0], band[1])
            }
            VarKind::Curtail => (0.0, case.expected_renewable(self.curtail_buses[slot.device], slot.t)),
        }
    }

    /// Sign of a slot in the nodal injection: +1 supplies power, -1 consumes.
    pub fn injection_sign(kind: VarKind) -> f64 {
        match kind {
            VarKind::Gen | VarKind::Discharge => 1.0,
            VarKind::Charge | VarKind::Demand | VarKind::Curtail => -1.0,
        }
    }
}

/// Continuous dispatch decisions in MW, laid out by [`DispatchLayout`].
#[derive(Debug, Clone, PartialEq)]
pub struct DispatchVector<T: Real> {
    pub layout: DispatchLayout,
    pub values: Vec<T>,
}

impl<T: Real> DispatchVector<T> {
    pub fn zeros(layout: DispatchLayout) -> Self {
        let values = vec![T::zero(); layout.len()];
        Self { layout, values }
    }

    pub fn from_values(layout: DispatchLayout, values: Vec<T>) -> Self {
        assert_eq!(layout.len(), values.len(), "dispatch length must equal n*T");
        Self { layout, values }
    }

    pub fn get(&self, kind: VarKind, device: usize, t: usize) -> T {
        self.values[self.layout.index(kind, device, t)]
    }

    pub fn set(&mut self, kind: VarKind, device: usize, t: usize, value: T) {
        let i = self.layout.index(kind, device, t);
        self.values[i] = value;
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn to_f64(&self) -> DispatchVector<f64> {
        DispatchVector {
            layout: self.layout.clone(),
            values: self.values.iter().map(|v| v.to_f64_lossy()).collect(),
        }
    }

    /// Nodal net injection at timestep `t` under inflexible load and the given
    /// renewable availability per bus: generation + discharge - charge - demand
    /// + (renewable - curtailment).
    pub fn injections(&self, case: &GridCase, t: usize, renewable: &[f64]) -> Vec<T> {
        let mut inj: Vec<T> = (0..case.num_buses())
            .map(|b| T::of(renewable[b] - case.fixed_load_at(b, t)))
            .collect();
        let n = self.layout.per_step();
        for i in t * n..(t + 1) * n {
            let slot = self.layout.slot(i);
            let bus = self.layout.bus_of(case, slot);
            inj[bus] += T::of(DispatchLayout::injection_sign(slot.kind)) * self.values[i];
        }
        inj
    }
}

/// Operating cost of a dispatch in $: quadratic generation cost plus storage throughput cost.
pub fn dispatch_cost<T: Real>(case: &GridCase, x: &DispatchVector<T>) -> T {
    let mut total = T::zero();
    for t in 0..case.horizon {
        for (g, gen) in case.generators.iter().enumerate() {
            let p = x.get(VarKind::Gen, g, t);
            total += T::of(gen.cost_quad) * p * p + T::of(gen.cost_lin) * p;
        }
        for (s, st) in case.storage_units.iter().enumerate() {
            let flow = x.get(VarKind::Charge, s, t) + x.get(VarKind::Discharge, s, t);
            total += T::of(st.throughput_cost) * flow;
        }
    }
    total
}

/// Renewable availability per bus at timestep `t`, expected over scenarios.
pub fn expected_renewable_by_bus(case: &GridCase, t: usize) -> Vec<f64> {
    (0..case.num_buses()).map(|b| case.expected_renewable(b, t)).collect()
}

/// Renewable availability per bus at timestep `t` in one scenario.
pub fn scenario_renewable_by_bus(case: &GridCase, scenario: &super::RenewableScenario, t: usize) -> Vec<f64> {
    (0..case.num_buses()).map(|b| GridCase::scenario_renewable(scenario, b, t)).collect()
}
