//! The compactly supported bump `c exp(-1/(1-|x|²))` and its Fourier
//! transform.

use crate::error::{invalid, Error, Result};
use crate::quadrature::GaussLegendre;
use core::f64::consts::PI;

/// Mollification scale and whether it grows like `sqrt(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MollifierSpec {
    pub eps: f64,
    pub time_dependent: bool,
}

impl MollifierSpec {
    pub fn new(eps: f64, time_dependent: bool) -> Result<Self> {
        if !(eps >= 0.0) || !eps.is_finite() {
            return Err(invalid("eps", "must be non-negative"));
        }
        Ok(Self { eps, time_dependent })
    }

    pub fn fixed(eps: f64) -> Result<Self> {
        Self::new(eps, false)
    }

    /// Effective length scale at time `t`: `eps` or `eps sqrt(t)`.
    pub fn scale(&self, t: Option<f64>) -> Result<f64> {
        if !self.time_dependent {
            return Ok(self.eps);
        }
        match t {
            Some(t) if t > 0.0 => Ok(self.eps * libm::sqrt(t)),
            _ => Err(Error::MollifierTime),
        }
    }
}

/// Unit-radius bump normalised to unit mass.
#[derive(Debug, Clone)]
pub struct Bump {
    norm: f64,
    rule: GaussLegendre,
}

const PANELS: usize = 24;

impl Default for Bump {
    fn default() -> Self {
        Self::new()
    }
}

impl Bump {
    pub fn new() -> Self {
        let rule = GaussLegendre::new(16);
        let mass = 4.0 * PI * rule.integrate(0.0, 1.0, PANELS, |r| r * r * shape(r));
        Self { norm: 1.0 / mass, rule }
    }

    /// Profile value at radius `r`.
    pub fn value(&self, r: f64) -> f64 {
        self.norm * shape(r)
    }

    /// Radial Fourier transform at wavenumber `kappa`, equal to 1 at 0.
    pub fn transform(&self, kappa: f64) -> f64 {
        4.0 * PI
            * self.norm
            * self.rule.integrate(0.0, 1.0, PANELS, |r| {
                let z = kappa * r;
                let j0 = if z.abs() < 1e-4 { 1.0 - z * z / 6.0 } else { libm::sin(z) / z };
                r * r * shape(r) * j0
            })
    }

    /// Total mass by quadrature, for checking the normalisation.
    pub fn mass(&self) -> f64 {
        4.0 * PI * self.rule.integrate(0.0, 1.0, PANELS, |r| r * r * self.value(r))
    }
}

#[inline]
fn shape(r: f64) -> f64 {
    if r >= 1.0 {
        0.0
    } else {
        libm::exp(-1.0 / (1.0 - r * r))
    }
}
