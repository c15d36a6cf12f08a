//! Deterministic dense linear algebra, seeded randomness, and SGD stepping.

mod grad_check;
mod matrix;
mod rng;
mod sgd;

pub use grad_check::finite_diff_grad;
pub use matrix::{orthonormal_columns, Matrix};
pub use rng::RngStream;
pub use sgd::{sgd_step, sgd_step_in_place, SgdConfig};

/// Float helpers that route through libm so std and no_std builds share one
/// code path (and therefore one bit pattern per result).
pub(crate) mod fmath {
    #[inline]
    pub fn sqrt(x: f64) -> f64 {
        libm::sqrt(x)
    }
    #[inline]
    pub fn abs(x: f64) -> f64 {
        libm::fabs(x)
    }
    #[inline]
    pub fn powf(x: f64, y: f64) -> f64 {
        libm::pow(x, y)
    }
    #[inline]
    pub fn exp(x: f64) -> f64 {
        libm::exp(x)
    }
    #[inline]
    pub fn ln(x: f64) -> f64 {
        libm::log(x)
    }
    #[inline]
    pub fn acos(x: f64) -> f64 {
        libm::acos(x)
    }
    #[inline]
    pub fn round(x: f64) -> f64 {
        libm::round(x)
    }
    #[inline]
    pub fn floor(x: f64) -> f64 {
        libm::floor(x)
    }
    pub const PI: f64 = core::f64::consts::PI;

    #[inline]
    pub fn to_degrees(rad: f64) -> f64 {
        rad * (180.0 / PI)
    }
}
