//! Scalar abstraction shared by the model, bound and filter code.

use nalgebra::{Matrix5, RealField, RowVector5, Vector5};
use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar usable by every generic routine in this crate (`f32`, `f64`).
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive {}

impl<T> Real for T where T: RealField + Copy + FromPrimitive + ToPrimitive {}

pub type Mat5<T> = Matrix5<T>;
pub type Vec5<T> = Vector5<T>;
pub type Row5<T> = RowVector5<T>;

/// Converts an `f64` constant into `T`.
#[inline]
pub fn lit<T: Real>(v: f64) -> T {
    T::from_f64(v).expect("f64 literal representable in scalar type")
}

#[inline]
pub fn to_f64<T: Real>(v: T) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

/// `(M + Mᵀ) / 2`.
pub fn symmetrize<T: Real>(m: &Mat5<T>) -> Mat5<T> {
    (m + m.transpose()) * lit::<T>(0.5)
}

/// Largest `|M_ij - M_ji|` relative to the largest `|M_ij|`.
pub fn relative_asymmetry<T: Real>(m: &Mat5<T>) -> T {
    let scale = m.amax();
    if scale == T::zero() {
        return T::zero();
    }
    (m - m.transpose()).amax() / scale
}
