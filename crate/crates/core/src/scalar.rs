//! Scalar abstraction: the crate is generic over `f32`/`f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, NumAssignOps, NumCast};

/// Floating-point scalar the morphological operators are defined over.
///
/// `Float` supplies `max`, `exp`, `ln`, `neg_infinity`, and friends;
/// the extra bounds let values move across threads and into error messages.
pub trait Real:
    Float + NumAssignOps + Sum + Debug + Display + Send + Sync + 'static
{
    /// Convert a literal; every constant in this crate is expressible in f64.
    #[inline]
    fn of(v: f64) -> Self {
        <Self as NumCast>::from(v).expect("finite f64 literal converts to Real")
    }

    /// Widen to f64 (used for reporting and for seeding RNG-driven draws).
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("Real converts to f64")
    }

    /// Cast a count; panics only for counts beyond 2^53 which never occur here.
    #[inline]
    fn of_usize(n: usize) -> Self {
        Self::of(n as f64)
    }
}

impl Real for f32 {}
impl Real for f64 {}
