use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumAssign};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point scalar the transform algebra is generic over.
///
/// Implemented for `f32` and `f64`. Double precision is the reference
/// configuration; single precision is usable with the relaxed tolerance
/// below.
pub trait Real:
    Float
    + FromPrimitive
    + NumAssign
    + Debug
    + Display
    + Default
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Per-joint relative Frobenius tolerance for comparing a re-associated
    /// chain product (pointer jumping, block scans) against the sequential
    /// reference: 1e-9 for `f64`, 1e-3 for `f32`.
    const SCAN_REL_TOL: Self;

    /// Raw IEEE bits widened to `u64`. Bit equality is the executor's
    /// write-conflict criterion and the strictest output comparison.
    fn bits(self) -> u64;

    /// Converts an `f64` constant; intended for finite literals.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("finite scalar literal")
    }
}

impl Real for f32 {
    const SCAN_REL_TOL: Self = 1e-3;

    fn bits(self) -> u64 {
        u64::from(self.to_bits())
    }
}

impl Real for f64 {
    const SCAN_REL_TOL: Self = 1e-9;

    fn bits(self) -> u64 {
        self.to_bits()
    }
}
