use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::encode::{BitKind, Encoding};
use crate::error::SimError;
use crate::grid_model::GridCase;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnsatzFamily {
    Topology,
    LinearChain,
    AllToAll,
}

impl AnsatzFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            AnsatzFamily::Topology => "topology",
            AnsatzFamily::LinearChain => "linear_chain",
            AnsatzFamily::AllToAll => "all_to_all",
        }
    }
}

impl std::str::FromStr for AnsatzFamily {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "topology" => Ok(AnsatzFamily::Topology),
            "linear_chain" => Ok(AnsatzFamily::LinearChain),
            "all_to_all" => Ok(AnsatzFamily::AllToAll),
            other => Err(format!("unknown ansatz family {other:?} (expected topology, linear_chain or all_to_all)")),
        }
    }
}

/// Layered RY + RZZ circuit. Each layer applies RY on every qubit, then RZZ on every edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnsatzSpec {
    pub num_qubits: usize,
    pub depth: usize,
    /// Sorted, deduplicated pairs `(i, j)` with `i < j`.
    pub entangler_edges: Vec<(usize, usize)>,
    pub family: AnsatzFamily,
}

impl AnsatzSpec {
    pub fn new(
        num_qubits: usize,
        depth: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        family: AnsatzFamily,
    ) -> Result<Self, SimError> {
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a == b || a >= num_qubits || b >= num_qubits {
                return Err(SimError::BadEdge(a, b));
            }
            set.insert((a.min(b), a.max(b)));
        }
        Ok(Self { num_qubits, depth, entangler_edges: set.into_iter().collect(), family })
    }

    pub fn linear_chain(n: usize, depth: usize) -> Self {
        Self::new(n, depth, (1..n).map(|i| (i - 1, i)), AnsatzFamily::LinearChain).expect("chain edges are valid")
    }

    pub fn all_to_all(n: usize, depth: usize) -> Self {
        let edges = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j)));
        Self::new(n, depth, edges, AnsatzFamily::AllToAll).expect("complete graph edges are valid")
    }

    /// Parameters per layer: `N + |edges|`.
    pub fn layer_size(&self) -> usize {
        self.num_qubits + self.entangler_edges.len()
    }

    pub fn num_params(&self) -> usize {
        self.depth * self.layer_size()
    }

    /// Index of the RY angle on `qubit` in `layer`.
    pub fn rotation_index(&self, layer: usize, qubit: usize) -> usize {
        layer * self.layer_size() + qubit
    }

    /// Maximum vertex degree of the entangler graph.
    pub fn max_degree(&self) -> usize {
        let mut deg = vec![0usize; self.num_qubits];
        for &(a, b) in &self.entangler_edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg.into_iter().max().unwrap_or(0)
    }

    /// Same qubits and depth with a different entangler family.
    pub fn with_family(&self, family: AnsatzFamily) -> Self {
        match family {
            AnsatzFamily::LinearChain => Self::linear_chain(self.num_qubits, self.depth),
            AnsatzFamily::AllToAll => Self::all_to_all(self.num_qubits, self.depth),
            AnsatzFamily::Topology => self.clone(),
        }
    }
}

/// Entanglers follow the grid: chains inside each variable's bit group, bit-k
/// links between variables on adjacent buses at the same timestep, and bit-k
/// links between consecutive timesteps of each storage variable.
pub fn topology_ansatz(case: &GridCase, encoding: &Encoding, depth: usize) -> AnsatzSpec {
    let mut edges = Vec::new();
    let vars = &encoding.variables;
    for v in vars {
        for k in 1..v.bits {
            edges.push((v.first_qubit + k - 1, v.first_qubit + k));
        }
    }
    for br in &case.branches {
        for a in vars.iter().filter(|v| v.bus == Some(br.from_bus)) {
            for b in vars.iter().filter(|v| v.bus == Some(br.to_bus) && v.owner.t == a.owner.t) {
                for k in 0..a.bits.min(b.bits) {
                    edges.push((a.first_qubit + k, b.first_qubit + k));
                }
            }
        }
    }
    for a in vars.iter().filter(|v| matches!(v.owner.kind, BitKind::Charge | BitKind::Discharge)) {
        for b in vars.iter().filter(|v| v.owner.kind == a.owner.kind && v.owner.device == a.owner.device && v.owner.t == a.owner.t + 1) {
            for k in 0..a.bits.min(b.bits) {
                edges.push((a.first_qubit + k, b.first_qubit + k));
            }
        }
    }
    AnsatzSpec::new(encoding.num_qubits(), depth, edges, AnsatzFamily::Topology).expect("encoding qubits are in range")
}

/// Builds the ansatz of `family` for an encoded case.
pub fn ansatz_for(family: AnsatzFamily, case: &GridCase, encoding: &Encoding, depth: usize) -> AnsatzSpec {
    match family {
        AnsatzFamily::Topology => topology_ansatz(case, encoding, depth),
        AnsatzFamily::LinearChain => AnsatzSpec::linear_chain(encoding.num_qubits(), depth),
        AnsatzFamily::AllToAll => AnsatzSpec::all_to_all(encoding.num_qubits(), depth),
    }
}
