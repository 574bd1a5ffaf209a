//! Compactly supported polynomial kernels on `[-1, 1]`.
//!
//! Kernels take an already scaled argument `u = (z - z0) / h`; bandwidth
//! scaling is left to the caller.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    /// `(15/16)(1 - u^2)^2`, also called biweight.
    #[default]
    Quartic,
    /// `(3/4)(1 - u^2)`. Its second derivative jumps at `u = ±1`, so it is
    /// only accepted as a regression kernel.
    Epanechnikov,
    /// `(35/32)(1 - u^2)^3`.
    Triweight,
}

impl Kernel {
    pub const ALL: [Kernel; 3] = [Kernel::Quartic, Kernel::Epanechnikov, Kernel::Triweight];

    pub fn name(self) -> &'static str {
        match self {
            Kernel::Quartic => "quartic",
            Kernel::Epanechnikov => "epanechnikov",
            Kernel::Triweight => "triweight",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "quartic" | "biweight" => Some(Kernel::Quartic),
            "epanechnikov" => Some(Kernel::Epanechnikov),
            "triweight" => Some(Kernel::Triweight),
            _ => None,
        }
    }

    /// True when the second derivative is continuous and bounded on the
    /// whole real line, which the conditional censoring estimator needs.
    pub fn has_smooth_second_derivative(self) -> bool {
        !matches!(self, Kernel::Epanechnikov)
    }

    #[inline]
    pub fn eval(self, u: f64) -> f64 {
        if !(u.abs() < 1.0) {
            return 0.0;
        }
        let s = 1.0 - u * u;
        match self {
            Kernel::Quartic => 0.9375 * s * s,
            Kernel::Epanechnikov => 0.75 * s,
            Kernel::Triweight => 1.09375 * s * s * s,
        }
    }

    /// First derivative, the hot-path companion of [`Kernel::derivative`].
    #[inline]
    pub fn d1(self, u: f64) -> f64 {
        if !(u.abs() < 1.0) {
            return 0.0;
        }
        let s = 1.0 - u * u;
        match self {
            Kernel::Quartic => -3.75 * u * s,
            Kernel::Epanechnikov => -1.5 * u,
            Kernel::Triweight => -6.5625 * u * s * s,
        }
    }

    #[inline]
    pub fn d2(self, u: f64) -> f64 {
        if !(u.abs() < 1.0) {
            return 0.0;
        }
        let s = 1.0 - u * u;
        match self {
            Kernel::Quartic => -3.75 * (1.0 - 3.0 * u * u),
            // piecewise constant, discontinuous at ±1
            Kernel::Epanechnikov => -1.5,
            Kernel::Triweight => -6.5625 * s * (1.0 - 5.0 * u * u),
        }
    }

    pub fn derivative(self, u: f64, order: u32) -> Result<f64> {
        match order {
            1 => Ok(self.d1(u)),
            2 => Ok(self.d2(u)),
            other => Err(Error::UnsupportedOrder(other)),
        }
    }
}
