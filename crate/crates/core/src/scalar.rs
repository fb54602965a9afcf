//! Scalar abstractions for the algebraic layer.
//!
//! The symmetric-function algebra (elementary symmetric polynomials, Newton
//! transformations, Maclaurin bounds) only needs ring operations, so it is
//! written against [`Scalar`] and runs unchanged on `f32`, `f64` or exact
//! rationals. Anything that takes roots or eigenvalues needs [`RealScalar`].
//! Grid and PDE code is concrete `f64`.

use std::fmt::Debug;

use num_traits::{Float, FloatConst, FromPrimitive, Num};

/// Ring-like scalar: exact rationals and floats both qualify.
pub trait Scalar: Num + Clone + PartialOrd + FromPrimitive + Debug {
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }
}

impl<T> Scalar for T where T: Num + Clone + PartialOrd + FromPrimitive + Debug {}

/// Floating-point scalar.
pub trait RealScalar: Scalar + Float + FloatConst + Copy {}

impl<T> RealScalar for T where T: Scalar + Float + FloatConst + Copy {}

/// Binomial coefficient `n choose k` in the target scalar type.
pub fn binomial<T: Scalar>(n: usize, k: usize) -> T {
    if k > n {
        return T::zero();
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    T::from_u128(acc).expect("binomial representable in scalar type")
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;

    #[test]
    fn binomials() {
        assert_eq!(binomial::<f64>(4, 2), 6.0);
        assert_eq!(binomial::<f64>(3, 0), 1.0);
        assert_eq!(binomial::<f64>(3, 4), 0.0);
        assert_eq!(binomial::<Ratio<i64>>(4, 3), Ratio::from_integer(4));
    }
}
