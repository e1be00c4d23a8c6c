//! Scalar abstractions shared by the exact solver and the transfer matrix.
//!
//! [`Field`] covers anything the Markov-chain solver can run on: IEEE floats
//! and exact rationals. [`Real`] is the narrower floating-point bound used by
//! the transfer-matrix code, which needs `powi`, `sqrt` and friends.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::Ratio;
use num_traits::{Float, FromPrimitive, Num, Signed, ToPrimitive};

/// Exact rational scalar.
pub type Rational = Ratio<BigInt>;

/// A number type closed under the four field operations.
pub trait Field:
    Num + Signed + Clone + Debug + PartialOrd + FromPrimitive + ToPrimitive + Send + Sync
{
    /// `true` when arithmetic is exact (no rounding).
    const EXACT: bool;

    /// 2^-k, exactly representable in every implementation for the
    /// exponents used here.
    fn dyadic(k: u32) -> Self {
        let mut out = Self::one();
        let two = Self::one() + Self::one();
        for _ in 0..k {
            out = out / two.clone();
        }
        out
    }

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Field for f32 {
    const EXACT: bool = false;
}

impl Field for f64 {
    const EXACT: bool = false;
}

impl Field for Rational {
    const EXACT: bool = true;
}

/// Floating point: f32 or f64.
pub trait Real: Float + FromPrimitive + Debug + Send + Sync + 'static {
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable")
    }
}

impl Real for f32 {}
impl Real for f64 {}
