//! Floating-point scalar abstraction shared by features, metrics, neighbor
//! search and embedding training.

use std::fmt::{Debug, Display};
use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// A real scalar usable as a feature component or model parameter.
///
/// Implemented for `f32` (compact storage, the on-disk binary format) and
/// `f64` (reference precision, used by gradient checks).
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Default + Debug + Display + Send + Sync + 'static
{
    /// Lock-free cell holding one value, used for racy multi-worker training.
    type Atomic: AtomicCell<Self>;

    /// Lossy conversion from `f64`.
    fn of(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("f64 converts to every float type")
    }

    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).expect("float converts to f64")
    }
}

/// Relaxed-ordering load/store cell; concurrent writers may overwrite each
/// other's updates but never tear a value.
pub trait AtomicCell<T>: Send + Sync {
    fn with(v: T) -> Self;
    fn get(&self) -> T;
    fn set(&self, v: T);
}

impl AtomicCell<f32> for AtomicU32 {
    fn with(v: f32) -> Self {
        AtomicU32::new(v.to_bits())
    }
    fn get(&self) -> f32 {
        f32::from_bits(AtomicU32::load(self, Ordering::Relaxed))
    }
    fn set(&self, v: f32) {
        AtomicU32::store(self, v.to_bits(), Ordering::Relaxed)
    }
}

impl AtomicCell<f64> for AtomicU64 {
    fn with(v: f64) -> Self {
        AtomicU64::new(v.to_bits())
    }
    fn get(&self) -> f64 {
        f64::from_bits(AtomicU64::load(self, Ordering::Relaxed))
    }
    fn set(&self, v: f64) {
        AtomicU64::store(self, v.to_bits(), Ordering::Relaxed)
    }
}

impl Scalar for f32 {
    type Atomic = AtomicU32;
}

impl Scalar for f64 {
    type Atomic = AtomicU64;
}

/// Total order on scalars for sorting distances; NaN sorts last.
pub(crate) fn cmp_scalar<T: Scalar>(a: T, b: T) -> std::cmp::Ordering {
    a.partial_cmp(&b).unwrap_or_else(|| a.is_nan().cmp(&b.is_nan()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_cells_round_trip_bits() {
        let c = <f32 as Scalar>::Atomic::with(1.5);
        c.set(-0.25);
        assert_eq!(c.get(), -0.25f32);
        let d = <f64 as Scalar>::Atomic::with(f64::MIN_POSITIVE);
        assert_eq!(d.get(), f64::MIN_POSITIVE);
    }

    #[test]
    fn nan_sorts_last() {
        let mut v = [f64::NAN, 1.0, -2.0];
        v.sort_by(|a, b| cmp_scalar(*a, *b));
        assert_eq!(&v[..2], &[-2.0, 1.0]);
        assert!(v[2].is_nan());
    }
}
