//! Scalar abstraction shared by the network, solver and decoherence code.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar the thermal and decoherence numerics are generic over.
///
/// Implemented for `f32` and `f64`. Geometry and ray tracing stay in `f64`;
/// values cross into the generic code through [`Real::lit`].
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Sum
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal or measurement into this scalar.
    fn lit(x: f64) -> Self;

    fn to_f64_lossy(self) -> f64;
}

macro_rules! impl_real {
    ($t:ty) => {
        impl Real for $t {
            #[inline]
            fn lit(x: f64) -> Self {
                x as $t
            }

            #[inline]
            fn to_f64_lossy(self) -> f64 {
                self as f64
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);

/// Stefan-Boltzmann constant, W m^-2 K^-4 (CODATA 2018, exact in SI).
pub const STEFAN_BOLTZMANN: f64 = 5.670_374_419e-8;

#[inline]
pub fn sigma<R: Real>() -> R {
    R::lit(STEFAN_BOLTZMANN)
}

#[inline]
pub(crate) fn pow4<R: Real>(t: R) -> R {
    let t2 = t * t;
    t2 * t2
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literals_round_trip() {
        assert_eq!(<f64 as Real>::lit(0.25), 0.25);
        assert_eq!(<f32 as Real>::lit(0.25), 0.25f32);
        assert_eq!(pow4(3.0f64), 81.0);
    }
}
