//! Noise-adaptive projected SGD over circuit angles with classical feasibility projection.

mod driver;
mod feasible;
mod objective;

pub use driver::*;
pub use feasible::*;
pub use objective::*;
