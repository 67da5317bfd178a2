//! Float math that works both with `std` and with `libm` under `no_std`.
//!
//! Inherent `f64` methods win method resolution when `std` is available, so
//! importing [`FloatExt`] is a no-op there; without `std` the trait supplies
//! the same names via `libm`.

#![allow(dead_code)]

pub(crate) trait FloatExt {
    fn exp(self) -> f64;
    fn ln(self) -> f64;
    fn sqrt(self) -> f64;
    fn cos(self) -> f64;
    fn sin(self) -> f64;
    fn floor(self) -> f64;
    fn ceil(self) -> f64;
    fn round(self) -> f64;
    fn powi(self, n: i32) -> f64;
    fn powf(self, p: f64) -> f64;
}

#[cfg(not(feature = "std"))]
impl FloatExt for f64 {
    fn exp(self) -> f64 {
        libm::exp(self)
    }
    fn ln(self) -> f64 {
        libm::log(self)
    }
    fn sqrt(self) -> f64 {
        libm::sqrt(self)
    }
    fn cos(self) -> f64 {
        libm::cos(self)
    }
    fn sin(self) -> f64 {
        libm::sin(self)
    }
    fn floor(self) -> f64 {
        libm::floor(self)
    }
    fn ceil(self) -> f64 {
        libm::ceil(self)
    }
    fn round(self) -> f64 {
        libm::round(self)
    }
    fn powi(self, n: i32) -> f64 {
        libm::pow(self, n as f64)
    }
    fn powf(self, p: f64) -> f64 {
        libm::pow(self, p)
    }
}
