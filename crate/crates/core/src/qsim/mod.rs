//! Statevector simulation of layered RY + RZZ circuits.

mod ansatz;
mod gradient;
mod measure;
mod probe;
mod state;

pub use ansatz::*;
pub use gradient::*;
pub use measure::*;
pub use probe::*;
pub use state::{build_state, check_qubits, StateVector, MAX_QUBITS};

#[cfg(test)]
mod tests;
