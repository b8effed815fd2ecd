//! Scalar abstraction for the phase-space core.
//!
//! The geometric primitives (phase points, frame vectors, 2x2 matrices and
//! their exponentials) are generic over the floating-point type through this
//! trait; the simulation engines pin the concrete aliases exported from the
//! crate root.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar: f32 or f64.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + NumAssign + Debug + Display + Send + Sync + 'static
{
    /// Lossless-enough conversion from an f64 literal.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("scalar conversion")
    }
}

impl Real for f32 {}
impl Real for f64 {}
