//! Scalar abstractions shared by the geometric and statistical kernels.
//!
//! Box geometry, correlation and the exact metric oracle are written once
//! against [`Real`]; the assignment solver only needs an ordered additive
//! group and is written against [`Cost`], which also admits integers and
//! exact rationals.

use std::fmt::Debug;
use std::ops::{Add, Sub};

use num_rational::Ratio;
use num_traits::{Float, FromPrimitive, Zero};

/// floating point: f32 or f64
pub trait Real: Float + FromPrimitive + Cost + Debug + Send + Sync + 'static {
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 is representable")
    }

    fn half() -> Self {
        Self::of(0.5)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Entry type of an assignment cost matrix.
///
/// Only ordering, addition and subtraction are used, so the solver is exact
/// for integer and rational costs.
pub trait Cost: Copy + PartialOrd + Zero + Add<Output = Self> + Sub<Output = Self> + Debug {
    /// Finite and non-negative. Types must be signed: dual potentials go negative.
    fn is_admissible(&self) -> bool;
}

macro_rules! float_cost {
    ($($t:ty),*) => {$(
        impl Cost for $t {
            fn is_admissible(&self) -> bool {
                self.is_finite() && *self >= 0.0
            }
        }
    )*};
}

macro_rules! int_cost {
    ($($t:ty),*) => {$(
        impl Cost for $t {
            fn is_admissible(&self) -> bool {
                *self >= 0
            }
        }
    )*};
}

float_cost!(f32, f64);
int_cost!(i32, i64, i128);

macro_rules! ratio_cost {
    ($($t:ty),*) => {$(
        impl Cost for Ratio<$t> {
            fn is_admissible(&self) -> bool {
                *self >= Ratio::zero()
            }
        }
    )*};
}

ratio_cost!(i32, i64, i128);
