//! Discretized angular-frequency axes and wavelength conversions.

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use thiserror::Error;

/// Speed of light in nm/ps.
pub const SPEED_OF_LIGHT_NM_PER_PS: f64 = 299_792.458;

/// Speed of light in mm/ps, used for delay-stage conversions.
pub const SPEED_OF_LIGHT_MM_PER_PS: f64 = 0.299_792_458;

/// Angular frequency (rad/ps) of light with vacuum wavelength `nm`.
#[inline]
pub fn wavelength_to_omega(nm: f64) -> f64 {
    TAU * SPEED_OF_LIGHT_NM_PER_PS / nm
}

/// Vacuum wavelength (nm) of light with angular frequency `omega` (rad/ps).
#[inline]
pub fn omega_to_wavelength(omega: f64) -> f64 {
    TAU * SPEED_OF_LIGHT_NM_PER_PS / omega
}

/// Converts a wavelength interval `width_nm` around `center_nm` to an
/// angular-frequency interval, to first order.
#[inline]
pub fn wavelength_width_to_omega(center_nm: f64, width_nm: f64) -> f64 {
    TAU * SPEED_OF_LIGHT_NM_PER_PS * width_nm / (center_nm * center_nm)
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum GridError {
    #[error("grid span must be positive (got {0} nm)")]
    NonPositiveSpan(f64),
    #[error("grid needs at least 2 points (got {0})")]
    TooFewPoints(usize),
    #[error("center wavelength {center} nm must exceed half the span ({half_span} nm)")]
    InvalidCenter { center: f64, half_span: f64 },
}

/// Uniform angular-frequency axis for one photon.
///
/// The axis covers `[center - span/2, center + span/2]` in wavelength and is
/// increasing in frequency (so decreasing in wavelength). Step and nodes are
/// snapped to a common binary quantum so that every consecutive difference
/// equals `step` exactly; the endpoints land within a few ulps of the exact
/// converted wavelengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    center_wavelength: f64,
    span: f64,
    axis: Vec<f64>,
    step: f64,
}

impl FrequencyGrid {
    pub fn new(center_wavelength: f64, span: f64, n_points: usize) -> Result<Self, GridError> {
        if !(span > 0.0) || !span.is_finite() {
            return Err(GridError::NonPositiveSpan(span));
        }
        if n_points < 2 {
            return Err(GridError::TooFewPoints(n_points));
        }
        if !(center_wavelength > span / 2.0) || !center_wavelength.is_finite() {
            return Err(GridError::InvalidCenter {
                center: center_wavelength,
                half_span: span / 2.0,
            });
        }
        let lo = wavelength_to_omega(center_wavelength + span / 2.0);
        let hi = wavelength_to_omega(center_wavelength - span / 2.0);

        // A power of two no smaller than ulp(hi): multiples of it up to hi are
        // exact, so lo + k*step never rounds.
        let quantum = 2f64.powi(hi.log2().floor() as i32 - 52);
        let lo_q = (lo / quantum).round() * quantum;
        let raw_step = (hi - lo_q) / (n_points - 1) as f64;
        let step = ((raw_step / quantum).round().max(1.0)) * quantum;
        let axis = (0..n_points).map(|k| lo_q + k as f64 * step).collect();
        Ok(Self {
            center_wavelength,
            span,
            axis,
            step,
        })
    }

    pub fn center_wavelength(&self) -> f64 {
        self.center_wavelength
    }

    pub fn span(&self) -> f64 {
        self.span
    }

    pub fn len(&self) -> usize {
        self.axis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.axis.is_empty()
    }

    /// Angular frequencies in rad/ps, strictly increasing.
    pub fn axis(&self) -> &[f64] {
        &self.axis
    }

    /// Grid spacing in rad/ps.
    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn center_omega(&self) -> f64 {
        wavelength_to_omega(self.center_wavelength)
    }

    /// Node wavelengths in nm (decreasing).
    pub fn wavelengths(&self) -> Vec<f64> {
        self.axis.iter().map(|&w| omega_to_wavelength(w)).collect()
    }

    /// Wavelength interval `(short, long)` in nm covered by cell `k`.
    pub fn cell_wavelength_bounds(&self, k: usize) -> (f64, f64) {
        let w = self.axis[k];
        (
            omega_to_wavelength(w + self.step / 2.0),
            omega_to_wavelength(w - self.step / 2.0),
        )
    }

    /// Same center, span and resolution.
    pub fn same_axis(&self, other: &Self) -> bool {
        self.axis.len() == other.axis.len()
            && self.step == other.step
            && self.axis.first() == other.axis.first()
    }
}

/// Builds the grid for one photon; see [`FrequencyGrid::new`].
pub fn make_grid(
    center_wavelength: f64,
    span: f64,
    n_points: usize,
) -> Result<FrequencyGrid, GridError> {
    FrequencyGrid::new(center_wavelength, span, n_points)
}
