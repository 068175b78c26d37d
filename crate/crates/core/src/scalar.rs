use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumCast};

/// Floating point element type used by the dense linear algebra, the tape
/// and the model. Implemented for `f32` (training) and `f64` (verification).
pub trait Scalar:
    Float + FromPrimitive + NumCast + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Lossy conversion from `f64`, used for constants and initialisation.
    fn of(x: f64) -> Self {
        <Self as NumCast>::from(x).expect("f64 is representable")
    }

    fn as_f64(self) -> f64 {
        <f64 as NumCast>::from(self).expect("scalar converts to f64")
    }

    fn of_usize(x: usize) -> Self {
        Self::from_usize(x).expect("count is representable")
    }

    /// Short tag stored in checkpoints.
    const NAME: &'static str;
}

impl Scalar for f32 {
    const NAME: &'static str = "f32";
}

impl Scalar for f64 {
    const NAME: &'static str = "f64";
}

/// Sum that does not depend on the order of `values`: the terms are sorted
/// by total order before a left fold.
pub fn sorted_sum<F: Scalar>(values: &mut [F]) -> F {
    values.sort_by(|a, b| a.as_f64().total_cmp(&b.as_f64()));
    values.iter().fold(F::zero(), |acc, &v| acc + v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sorted_sum_is_order_free() {
        let mut a = [1e16f64, 1.0, -1e16, 1.0, 3.5];
        let mut b = [1.0f64, 3.5, -1e16, 1e16, 1.0];
        assert_eq!(sorted_sum(&mut a).to_bits(), sorted_sum(&mut b).to_bits());
    }
}
