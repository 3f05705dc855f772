//! Physics-informed hybrid quantum-classical dispatch.
//!
//! The pipeline: a [`grid_model::GridCase`] is linearized into DC sensitivities,
//! encoded as a diagonal Ising Hamiltonian, minimized with a variational circuit
//! on an embedded statevector simulator, and the decoded sample is projected back
//! onto the feasible dispatch set.

pub mod error;
pub mod grid_model;
pub mod hybrid_opt;
pub mod baselines;
pub mod encode;
pub mod linearize;
pub mod qsim;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Real;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type IsingHamiltonian64 = encode::IsingHamiltonian<f64>;
pub type IsingHamiltonian32 = encode::IsingHamiltonian<f32>;
pub type StateVector64 = qsim::StateVector<f64>;
pub type StateVector32 = qsim::StateVector<f32>;
pub type SensitivityModel64 = linearize::SensitivityModel<f64>;
pub type SensitivityModel32 = linearize::SensitivityModel<f32>;
pub type DispatchVector64 = grid_model::DispatchVector<f64>;
pub type DispatchVector32 = grid_model::DispatchVector<f32>;
pub type DispatchSolution64 = hybrid_opt::DispatchSolution<f64>;
pub type DispatchSolution32 = hybrid_opt::DispatchSolution<f32>;
