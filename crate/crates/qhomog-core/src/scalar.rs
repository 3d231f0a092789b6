//! Floating point abstraction shared by the emulator and the classical oracle.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

/// Real scalar usable for amplitudes and classical fields.
///
/// Circuit parameters (angles, fit coefficients) are always built in `f64`;
/// the scalar only governs the precision of state and field storage.
pub trait Real:
    Float + FloatConst + FromPrimitive + NumAssign + rustfft::FftNum + Debug + Display + Default
{
    /// Lossy conversion from an `f64` parameter.
    fn from_f64_lossy(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("finite f64 converts to scalar")
    }

    /// Widening conversion used by diagnostics and tolerance checks.
    fn to_f64_lossy(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}
