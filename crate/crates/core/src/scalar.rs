//! Numeric traits the library is generic over.
//!
//! Alignment kernels run over any [`AlignScalar`] (integers for plain
//! sequences, floats for profiles). Everything that carries fractional
//! quantities (distances, frequencies, conservation scores, search
//! statistics) is generic over [`Real`].

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Bounded, Float, FromPrimitive, Num, NumCast, ToPrimitive};

/// Scalar usable as a dynamic-programming score.
pub trait AlignScalar:
    Num + Copy + PartialOrd + Bounded + NumCast + Debug + Display + Send + Sync + 'static
{
    /// A large negative sentinel that survives a few thousand subtractions
    /// of small penalties without overflowing.
    fn neg_inf() -> Self {
        let four = Self::one() + Self::one() + Self::one() + Self::one();
        Self::min_value() / four
    }

    fn from_score(v: i32) -> Self {
        <Self as NumCast>::from(v).expect("score fits scalar")
    }
}

impl<T> AlignScalar for T where
    T: Num + Copy + PartialOrd + Bounded + NumCast + Debug + Display + Send + Sync + 'static
{
}

/// Floating-point scalar for fractional quantities.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + AlignScalar + Default + Sum + Debug + Display
{
    fn lit(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("literal fits scalar")
    }

    fn from_count(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("count fits scalar")
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neg_inf_survives_penalties() {
        let x = <i32 as AlignScalar>::neg_inf() - 100_000;
        assert!(x < 0);
        let y = <f64 as AlignScalar>::neg_inf() - 1e6;
        assert!(y.is_finite());
    }

    #[test]
    fn literal_conversion() {
        assert_eq!(f32::lit(0.5), 0.5f32);
        assert_eq!(f64::from_count(7), 7.0);
    }
}
