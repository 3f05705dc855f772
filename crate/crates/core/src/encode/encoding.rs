use serde::{Deserialize, Serialize};

use crate::error::EncodeError;
use crate::grid_model::{DispatchLayout, DispatchVector, GridCase, VarKind};
use crate::scalar::Real;

use super::qubo::LinearExpr;

/// What a register of bits encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BitKind {
    Gen,
    Charge,
    Discharge,
    Demand,
    Curtail,
    Slack,
}

impl From<VarKind> for BitKind {
    fn from(k: VarKind) -> Self {
        match k {
            VarKind::Gen => BitKind::Gen,
            VarKind::Charge => BitKind::Charge,
            VarKind::Discharge => BitKind::Discharge,
            VarKind::Demand => BitKind::Demand,
            VarKind::Curtail => BitKind::Curtail,
        }
    }
}

/// Inequality a slack register belongs to. The register value `s` turns
/// `g(x) <= 0` into the penalty `(g(x) + s)^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "constraint", rename_all = "snake_case")]
pub enum SlackKey {
    /// `sign * F_l,t - F^max <= 0`.
    Flow { line: usize, t: usize, upper: bool },
    /// `sign * (g_t - g_{t-1}) - R_g <= 0`.
    Ramp { generator: usize, t: usize, upper: bool },
    /// `SOC_t <= capacity` (upper) or `-SOC_t <= 0`.
    Soc { unit: usize, t: usize, upper: bool },
}

/// Owner tuple of a bit: device (or constraint ordinal for slack), kind, timestep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Owner {
    pub device: usize,
    pub kind: BitKind,
    pub t: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BitVariable {
    pub owner: Owner,
    /// Index of the encoded variable this bit belongs to.
    pub variable: usize,
    pub bit_index: usize,
    pub weight: u64,
    pub delta: f64,
    pub offset: f64,
}

/// A continuous variable written as `offset + delta * sum_k 2^k q_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedVariable {
    pub owner: Owner,
    /// Position in the dispatch vector, `None` for slack registers.
    pub dispatch_index: Option<usize>,
    pub slack: Option<SlackKey>,
    pub bus: Option<usize>,
    pub offset: f64,
    pub max: f64,
    pub delta: f64,
    pub first_qubit: usize,
    pub bits: usize,
}

impl EncodedVariable {
    pub fn qubits(&self) -> std::ops::Range<usize> {
        self.first_qubit..self.first_qubit + self.bits
    }

    pub fn levels(&self) -> u64 {
        (1u64 << self.bits) - 1
    }
}

/// Binary expansion of the dispatch vector plus any slack registers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoding {
    pub layout: DispatchLayout,
    pub bits_per_variable: usize,
    pub variables: Vec<EncodedVariable>,
    /// Dispatch slots with zero range, fixed at their only value.
    pub constants: Vec<(usize, f64)>,
    pub total_qubits: usize,
}

/// A measured or enumerated qubit assignment; `bits[i]` is qubit `i`.
pub type Bitstring = Vec<bool>;

pub fn index_to_bits(index: usize, n: usize) -> Bitstring {
    (0..n).map(|i| (index >> i) & 1 == 1).collect()
}

pub fn bits_to_index(bits: &[bool]) -> usize {
    bits.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| 1usize << i).sum()
}

/// Lays out `b` bits per non-constant dispatch decision, grouped by bus then timestep.
pub fn build_encoding(case: &GridCase, b: usize) -> Result<Encoding, EncodeError> {
    if b == 0 {
        return Err(EncodeError::ZeroBits);
    }
    let layout = DispatchLayout::for_case(case);
    let mut order: Vec<(usize, usize, usize)> = (0..layout.len())
        .map(|i| {
            let slot = layout.slot(i);
            (layout.bus_of(case, slot), slot.t, i)
        })
        .collect();
    order.sort_unstable();

    let mut variables = Vec::new();
    let mut constants = Vec::new();
    let mut next = 0;
    for (bus, t, i) in order {
        let slot = layout.slot(i);
        let (lo, hi) = layout.bounds(case, slot);
        if hi - lo <= 0.0 {
            log::debug!("dropping constant {} {} at t={t} (value {lo})", slot.kind.as_str(), slot.device);
            constants.push((i, lo));
            continue;
        }
        variables.push(EncodedVariable {
            owner: Owner { device: slot.device, kind: slot.kind.into(), t },
            dispatch_index: Some(i),
            slack: None,
            bus: Some(bus),
            offset: lo,
            max: hi,
            delta: (hi - lo) / ((1u64 << b) - 1) as f64,
            first_qubit: next,
            bits: b,
        });
        next += b;
    }
    constants.sort_by_key(|c| c.0);
    Ok(Encoding { layout, bits_per_variable: b, variables, constants, total_qubits: next })
}

impl Encoding {
    pub fn num_qubits(&self) -> usize {
        self.total_qubits
    }

    /// Qubits that encode dispatch decisions (excludes slack registers).
    pub fn core_qubits(&self) -> usize {
        self.variables.iter().filter(|v| v.slack.is_none()).map(|v| v.bits).sum()
    }

    pub fn bit_variables(&self) -> Vec<BitVariable> {
        self.variables
            .iter()
            .enumerate()
            .flat_map(|(vi, v)| {
                (0..v.bits).map(move |k| BitVariable {
                    owner: v.owner,
                    variable: vi,
                    bit_index: k,
                    weight: 1 << k,
                    delta: v.delta,
                    offset: v.offset,
                })
            })
            .collect()
    }

    pub fn slack_register(&self, key: SlackKey) -> Option<&EncodedVariable> {
        self.variables.iter().find(|v| v.slack == Some(key))
    }

    /// Appends a `b`-bit slack register covering `[0, range]` and returns its index.
    /// An existing register for `key` is reused.
    pub fn add_slack_register(&mut self, key: SlackKey, range: f64, b: usize) -> usize {
        if let Some(i) = self.variables.iter().position(|v| v.slack == Some(key)) {
            return i;
        }
        let ordinal = self.variables.iter().filter(|v| v.slack.is_some()).count();
        let t = match key {
            SlackKey::Flow { t, .. } | SlackKey::Ramp { t, .. } | SlackKey::Soc { t, .. } => t,
        };
        self.variables.push(EncodedVariable {
            owner: Owner { device: ordinal, kind: BitKind::Slack, t },
            dispatch_index: None,
            slack: Some(key),
            bus: None,
            offset: 0.0,
            max: range,
            delta: range / ((1u64 << b) - 1) as f64,
            first_qubit: self.total_qubits,
            bits: b,
        });
        self.total_qubits += b;
        self.variables.len() - 1
    }

    fn variable_for_slot(&self, index: usize) -> Option<&EncodedVariable> {
        self.variables.iter().find(|v| v.dispatch_index == Some(index))
    }

    /// Affine expression of encoded variable `v` in its bits.
    pub fn variable_expr(&self, v: usize) -> LinearExpr {
        let var = &self.variables[v];
        let mut e = LinearExpr::constant(var.offset);
        for k in 0..var.bits {
            e.add_term(var.first_qubit + k, var.delta * (1u64 << k) as f64);
        }
        e
    }

    /// Affine expression of dispatch slot `index`; constant if the slot was dropped.
    pub fn slot_expr(&self, index: usize) -> LinearExpr {
        match self.variables.iter().position(|v| v.dispatch_index == Some(index)) {
            Some(v) => self.variable_expr(v),
            None => {
                let value = self.constants.iter().find(|c| c.0 == index).map(|c| c.1).unwrap_or(0.0);
                LinearExpr::constant(value)
            }
        }
    }

    pub fn kind_expr(&self, kind: VarKind, device: usize, t: usize) -> LinearExpr {
        self.slot_expr(self.layout.index(kind, device, t))
    }

    fn check_len(&self, bits: &[bool]) -> Result<(), EncodeError> {
        if bits.len() != self.total_qubits {
            return Err(EncodeError::LengthMismatch { expected: self.total_qubits, found: bits.len() });
        }
        Ok(())
    }

    /// Value of encoded variable `v` under `bits`.
    pub fn variable_value(&self, v: usize, bits: &[bool]) -> f64 {
        let var = &self.variables[v];
        let level: u64 = var.qubits().enumerate().filter(|(_, q)| bits[*q]).map(|(k, _)| 1u64 << k).sum();
        var.offset + var.delta * level as f64
    }

    /// Reconstructs the dispatch vector; slack bits are ignored.
    pub fn decode<T: Real>(&self, bits: &[bool]) -> Result<DispatchVector<T>, EncodeError> {
        self.check_len(bits)?;
        let mut x = DispatchVector::zeros(self.layout.clone());
        for &(i, value) in &self.constants {
            x.values[i] = T::of(value);
        }
        for (v, var) in self.variables.iter().enumerate() {
            if let Some(i) = var.dispatch_index {
                x.values[i] = T::of(self.variable_value(v, bits));
            }
        }
        Ok(x)
    }

    /// Nearest lattice point of `x`, clipped to the variable ranges. Slack bits are left at 0.
    pub fn encode_nearest<T: Real>(&self, x: &DispatchVector<T>) -> Bitstring {
        let mut bits = vec![false; self.total_qubits];
        for var in &self.variables {
            let Some(i) = var.dispatch_index else { continue };
            let value = x.values[i].to_f64_lossy().clamp(var.offset, var.max);
            let level = ((value - var.offset) / var.delta).round().clamp(0.0, var.levels() as f64) as u64;
            for k in 0..var.bits {
                bits[var.first_qubit + k] = (level >> k) & 1 == 1;
            }
        }
        bits
    }

    /// Lattice step of dispatch slot `index` (0 for constants).
    pub fn slot_delta(&self, index: usize) -> f64 {
        self.variable_for_slot(index).map(|v| v.delta).unwrap_or(0.0)
    }
}
