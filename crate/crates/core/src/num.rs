//! Scalar abstraction for the simulator.
//!
//! All numerical modules are generic over [`Real`], which is implemented for
//! `f32` and `f64`. The trait bundles the float arithmetic the solvers need
//! plus seeded sampling of the two distributions used throughout (standard
//! normal and uniform on `[0, 1)`), so channel generation and noise injection
//! stay deterministic per scalar type.

use num_traits::{Float, FromPrimitive, NumAssign};
use rand::Rng;
use rand_distr::StandardNormal;
use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Scalar type for all simulator math.
pub trait Real:
    Float + FromPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Draw from the standard normal distribution.
    fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Draw uniformly from `[0, 1)`.
    fn uniform01<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Lossy conversion from `f64`, for literals and config values.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal not representable")
    }
}

impl Real for f32 {
    #[inline]
    fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }
    #[inline]
    fn uniform01<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.gen::<f32>()
    }
}

impl Real for f64 {
    #[inline]
    fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }
    #[inline]
    fn uniform01<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.gen::<f64>()
    }
}

/// Convert dB to a linear power ratio.
#[inline]
pub fn db_to_linear<T: Real>(db: T) -> T {
    T::lit(10.0).powf(db / T::lit(10.0))
}

/// Convert a linear power ratio to dB.
#[inline]
pub fn linear_to_db<T: Real>(lin: T) -> T {
    T::lit(10.0) * lin.log10()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn db_round_trip() {
        let x = 3.7e-9f64;
        assert!((db_to_linear(linear_to_db(x)) - x).abs() < 1e-22);
    }

    #[test]
    fn ten_db_is_factor_ten() {
        assert!((db_to_linear(10.0f64) - 10.0).abs() < 1e-12);
        assert!((db_to_linear(10.0f32) - 10.0).abs() < 1e-5);
    }
}
