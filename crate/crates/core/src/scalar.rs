//! Scalar abstraction shared by the numeric modules.
//!
//! Embedding storage, metric values and matrices are generic over
//! [`Scalar`]; `f32` and `f64` are the two implementations used in practice.
//! Inner products and entropy sums are always accumulated in `f64`
//! regardless of the storage type.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossless widening (or identity) to `f64`.
    #[inline]
    fn to_f64_lossless(self) -> f64 {
        // Float::to_f64 never fails for f32/f64.
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).unwrap_or_else(Self::nan)
    }

    #[inline]
    fn from_usize_lossy(v: usize) -> Self {
        Self::from_usize(v).unwrap_or_else(Self::nan)
    }

    /// Bit pattern of the value narrowed to IEEE-754 binary32.
    fn to_f32_bits(self) -> u32;

    fn from_f32_bits(bits: u32) -> Self;
}

impl Scalar for f32 {
    #[inline]
    fn to_f32_bits(self) -> u32 {
        self.to_bits()
    }

    #[inline]
    fn from_f32_bits(bits: u32) -> Self {
        f32::from_bits(bits)
    }
}

impl Scalar for f64 {
    #[inline]
    fn to_f32_bits(self) -> u32 {
        (self as f32).to_bits()
    }

    #[inline]
    fn from_f32_bits(bits: u32) -> Self {
        f64::from(f32::from_bits(bits))
    }
}
