//! Scalar abstraction shared by the numeric stages.
//!
//! Scoring, allocation, attention and the evaluation metrics are written
//! against [`Scalar`] so they run unchanged on `f32` and `f64`. The pipeline
//! itself is instantiated at `f64` (see the aliases in the crate root).

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point scalar: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Lossy conversion from `f64`, used for literal constants.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable in scalar")
    }

    fn from_usize_lossy(v: usize) -> Self {
        Self::from_usize(v).expect("usize representable in scalar")
    }

    /// Floor that snaps values within a few ulps of an integer onto it, so
    /// that e.g. `100 * 0.29` lands on 29 and not 28.
    fn snapped_floor(self) -> Self {
        let nearest = self.round();
        let tol = Self::epsilon() * Self::lit(64.0) * self.abs().max(Self::one());
        if (self - nearest).abs() <= tol {
            nearest
        } else {
            self.floor()
        }
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
