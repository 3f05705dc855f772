//! Scalar abstraction shared by every numeric kernel.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real floating-point scalar the simulator, encoder and optimizer are generic over.
///
/// Implemented for `f32` and `f64`. Case files are always read as `f64` and
/// converted with [`Real::of`] at the boundary.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Default
    + Debug
    + Display
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Send
    + Sync
    + 'static
{
    /// Tolerance used when an algorithm iterates "until converged".
    const CONVERGENCE_TOL: f64;
    /// Tolerance used to accept a constraint as satisfied.
    const FEASIBILITY_TOL: f64;

    /// Converts an `f64` literal or case value.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable in every Real")
    }

    #[inline]
    fn of_usize(x: usize) -> Self {
        Self::from_usize(x).expect("usize is representable in every Real")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f64 {
    const CONVERGENCE_TOL: f64 = 1e-8;
    const FEASIBILITY_TOL: f64 = 1e-6;
}

impl Real for f32 {
    const CONVERGENCE_TOL: f64 = 1e-4;
    const FEASIBILITY_TOL: f64 = 1e-3;
}
