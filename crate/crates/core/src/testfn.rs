//! Test functions paired against the empirical measures.
//!
//! Two families: Gaussian bumps (smooth, rapidly decaying, closed-form
//! integral and Fourier transform) and the inverse-power family
//! `1/(1 + |x|^m)` used throughout the moment estimates. Amplitudes may be
//! negative, so signed combinations are expressible even though the
//! verification suite sticks to nonnegative bumps.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    GaussianBump { center: f64, width: f64, amplitude: f64 },
    /// `1/(1 + |x|^m)`; requires `m >= 2` for integrability margins.
    InversePower { m: f64 },
}

impl TestFunction {
    pub fn gaussian(center: f64, width: f64, amplitude: f64) -> Result<Self> {
        if width <= 0.0 || !width.is_finite() {
            return Err(Error::InvalidParameter {
                name: "width",
                reason: format!("must be positive, got {width}"),
            });
        }
        if !amplitude.is_finite() {
            return Err(Error::InvalidParameter {
                name: "amplitude",
                reason: "must be finite".into(),
            });
        }
        Ok(Self::GaussianBump { center, width, amplitude })
    }

    /// Unit-mass Gaussian bump centred at `center` with shape width `width`.
    pub fn gaussian_unit_mass(center: f64, width: f64) -> Self {
        let amplitude = 1.0 / (width * (2.0 * PI).sqrt());
        Self::GaussianBump { center, width, amplitude }
    }

    pub fn inverse_power(m: f64) -> Result<Self> {
        if m < 2.0 {
            return Err(Error::InvalidParameter {
                name: "m",
                reason: format!("inverse-power family needs m >= 2, got {m}"),
            });
        }
        Ok(Self::InversePower { m })
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Self::GaussianBump { center, width, amplitude } => {
                let u = (x - center) / width;
                amplitude * (-0.5 * u * u).exp()
            }
            Self::InversePower { m } => 1.0 / (1.0 + x.abs().powf(m)),
        }
    }

    /// Lebesgue integral, in closed form.
    pub fn integral(&self) -> f64 {
        match *self {
            Self::GaussianBump { width, amplitude, .. } => {
                amplitude * width * (2.0 * PI).sqrt()
            }
            Self::InversePower { m } => 2.0 * PI / (m * (PI / m).sin()),
        }
    }

    /// Radius around the center beyond which `|phi| < tol * |amplitude scale|`.
    pub fn support_radius(&self, tol: f64) -> f64 {
        match *self {
            Self::GaussianBump { width, .. } => width * (-2.0 * tol.ln()).max(0.0).sqrt(),
            Self::InversePower { m } => (1.0 / tol).powf(1.0 / m),
        }
    }

    pub fn center(&self) -> f64 {
        match *self {
            Self::GaussianBump { center, .. } => center,
            Self::InversePower { .. } => 0.0,
        }
    }

    /// Fourier transform `int phi(x) e^{-i omega x} dx`, when available in
    /// closed form. Gaussian bumps always; `m = 2` inverse power as well.
    /// Returns `(modulus, phase_center)` where the transform equals
    /// `modulus * e^{-i omega center}`.
    pub fn fourier_modulus(&self, omega: f64) -> Option<f64> {
        match *self {
            Self::GaussianBump { width, amplitude, .. } => {
                Some(amplitude * width * (2.0 * PI).sqrt() * (-0.5 * (width * omega).powi(2)).exp())
            }
            Self::InversePower { m } => {
                if m == 2.0 {
                    Some(PI * (-omega.abs()).exp())
                } else {
                    None
                }
            }
        }
    }

    /// Hull `[lo, hi]` outside which `|phi| <= tol`.
    pub fn support_hull(&self, tol: f64) -> (f64, f64) {
        let r = self.support_radius(tol);
        (self.center() - r, self.center() + r)
    }
}

/// Union support hull of a family of test functions.
pub fn family_hull(phis: &[TestFunction], tol: f64) -> (f64, f64) {
    assert!(!phis.is_empty());
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for p in phis {
        let (a, b) = p.support_hull(tol);
        lo = lo.min(a);
        hi = hi.max(b);
    }
    (lo, hi)
}
