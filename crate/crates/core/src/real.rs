//! Scalar abstraction for the closed-form numerics.
//!
//! The solver and bound formulas are ordinary field arithmetic plus square
//! roots, so they are written once over any IEEE float. The crate root pins
//! `f64` aliases for downstream use; `f32` instantiations exist mainly to
//! keep the code honest about precision assumptions.

use num_traits::{Float, FromPrimitive};
use std::fmt::{Debug, Display};

pub trait Real: Float + FromPrimitive + Debug + Display + Send + Sync + 'static {
    /// Lossy conversion from an `f64` literal.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 converts to any Real")
    }
}

impl Real for f32 {}
impl Real for f64 {}
