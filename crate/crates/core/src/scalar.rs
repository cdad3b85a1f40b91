//! Scalar abstraction: the numerical core is written against `Real`
//! so fields and solvers work for `f32` and `f64` alike.

use std::fmt::{Debug, Display, LowerExp};
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

/// Floating-point scalar used throughout the crate.
pub trait Real:
    num_traits::Float
    + num_traits::FloatConst
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Shorthand for converting an `f64` literal into `Self`.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("literal not representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("scalar not convertible to f64")
    }

    fn half() -> Self {
        Self::of(0.5)
    }

    fn two() -> Self {
        Self::of(2.0)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Deterministic pairwise summation over an index range.
///
/// The reduction tree depends only on the range, never on thread
/// scheduling, so sums are bit-reproducible.
pub fn pairwise_sum<T: Real, F: Fn(usize) -> T>(lo: usize, hi: usize, f: &F) -> T {
    const LEAF: usize = 64;
    if hi <= lo {
        return T::zero();
    }
    if hi - lo <= LEAF {
        let mut acc = T::zero();
        for i in lo..hi {
            acc += f(i);
        }
        return acc;
    }
    let mid = lo + (hi - lo) / 2;
    pairwise_sum(lo, mid, f) + pairwise_sum(mid, hi, f)
}

/// Pairwise sum of a slice.
pub fn pairwise_sum_slice<T: Real>(xs: &[T]) -> T {
    pairwise_sum(0, xs.len(), &|i| xs[i])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_sequential_on_ints() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum_slice(&xs), 499_500.0);
    }

    #[test]
    fn pairwise_is_deterministic() {
        let xs: Vec<f64> = (0..4097u64).map(|i| ((i * 2654435761) % 1000) as f64 * 1e-3).collect();
        let a = pairwise_sum_slice(&xs);
        let b = pairwise_sum_slice(&xs);
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
