//! Floating point abstraction shared by the charge model, the array simulator
//! and the Monte Carlo engine.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Voltages, time constants and energies: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal. Never fails for the supported types.
    fn of(x: f64) -> Self;

    /// Converts an integer nanosecond count.
    fn ns(t: u64) -> Self;

    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;
}

macro_rules! impl_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            #[inline]
            fn of(x: f64) -> Self {
                x as $t
            }

            #[inline]
            fn ns(t: u64) -> Self {
                t as $t
            }

            #[inline]
            fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
                <StandardNormal as Distribution<$t>>::sample(&StandardNormal, rng)
            }
        }
    };
}

impl_scalar!(f32);
impl_scalar!(f64);

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn conversions() {
        assert_eq!(<f32 as Scalar>::of(0.5), 0.5f32);
        assert_eq!(<f64 as Scalar>::ns(15_000), 15_000.0);
    }

    #[test]
    fn normal_draws_are_seeded() {
        let mut a = ChaCha8Rng::seed_from_u64(7);
        let mut b = ChaCha8Rng::seed_from_u64(7);
        let x: f64 = Scalar::standard_normal(&mut a);
        let y: f64 = Scalar::standard_normal(&mut b);
        assert_eq!(x, y);
    }
}
