//! Pump envelope, phase matching, JSA composition and the two state
//! transformations (anti-diagonal displacement and the polarization-to-bin
//! mapping).

use crate::grid::{
    make_grid, wavelength_to_omega, wavelength_width_to_omega, FrequencyGrid, GridError,
};
use crate::jsa::{JsaError, JsaMatrix};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2};
use thiserror::Error;

/// Time-bandwidth product of a transform-limited sech² pulse.
pub const SECH2_TIME_BANDWIDTH: f64 = 0.315;
/// Time-bandwidth product of a transform-limited Gaussian pulse.
pub const GAUSSIAN_TIME_BANDWIDTH: f64 = 0.441;

/// Default HG1 width (rad/ps): gives ~3 nm marginal bins at 1550 nm with the
/// default pump.
pub const DEFAULT_PMF_WIDTH: f64 = 0.6;

const SUPPORT_FLOOR: f64 = 1e-12;

/// Intensity mass that must stay on the grid after displacement.
const MIN_MASS_IN_GRID: f64 = 0.99;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("{field}: {reason} (got {value})")]
    InvalidParameter {
        field: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("unsupported Hermite-Gauss order {0} (expected 0 or 1)")]
    UnsupportedOrder(u32),
    #[error("grids do not overlap the downconversion band (empty support)")]
    GridMismatch,
    #[error(
        "displaced lobes leave the grid: only {mass_fraction:.4} of the intensity remains inside"
    )]
    ShiftOutOfGrid { mass_fraction: f64 },
    #[error("operation needs identical photon grids")]
    NonSquareGrid,
    #[error("transformation cancelled the state completely")]
    VanishingState,
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Jsa(#[from] JsaError),
}

fn positive(field: &'static str, value: f64) -> Result<(), SpectralError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(SpectralError::InvalidParameter {
            field,
            value,
            reason: "must be positive",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PulseShape {
    SechSquared,
    Gaussian,
}

/// Pump laser parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpSpec {
    /// nm
    #[serde(default = "PumpSpec::default_center")]
    pub center_wavelength: f64,
    /// Intensity FWHM in ps.
    #[serde(default = "PumpSpec::default_duration")]
    pub pulse_duration_fwhm: f64,
    /// ns
    #[serde(default = "PumpSpec::default_period")]
    pub repetition_period: f64,
    #[serde(default = "PumpSpec::default_shape")]
    pub shape: PulseShape,
}

impl PumpSpec {
    fn default_center() -> f64 {
        775.0
    }
    fn default_duration() -> f64 {
        1.27
    }
    fn default_period() -> f64 {
        12.5
    }
    fn default_shape() -> PulseShape {
        PulseShape::SechSquared
    }

    pub fn validate(&self) -> Result<(), SpectralError> {
        positive("pump.center_wavelength", self.center_wavelength)?;
        positive("pump.pulse_duration_fwhm", self.pulse_duration_fwhm)?;
        positive("pump.repetition_period", self.repetition_period)
    }

    /// ω₃ in rad/ps.
    pub fn center_omega(&self) -> f64 {
        wavelength_to_omega(self.center_wavelength)
    }

    /// Spectral intensity FWHM in rad/ps implied by the time-bandwidth product.
    pub fn omega_fwhm(&self) -> f64 {
        let tbp = match self.shape {
            PulseShape::SechSquared => SECH2_TIME_BANDWIDTH,
            PulseShape::Gaussian => GAUSSIAN_TIME_BANDWIDTH,
        };
        2.0 * PI * tbp / self.pulse_duration_fwhm
    }

    /// Width parameter of the amplitude profile in rad/ps: `B` in `sech(Ω/B)`
    /// or `b` in `exp(-Ω²/2b²)`.
    pub fn width_parameter(&self) -> f64 {
        let half = self.omega_fwhm() / 2.0;
        match self.shape {
            // sech²(x) = 1/2 at x = acosh(√2)
            PulseShape::SechSquared => half / SQRT_2.acosh(),
            // exp(-x²/b²) = 1/2 at x = b·√ln2
            PulseShape::Gaussian => half / std::f64::consts::LN_2.sqrt(),
        }
    }
}

impl Default for PumpSpec {
    fn default() -> Self {
        Self {
            center_wavelength: Self::default_center(),
            pulse_duration_fwhm: Self::default_duration(),
            repetition_period: Self::default_period(),
            shape: Self::default_shape(),
        }
    }
}

/// Pump envelope `α` at `omega_sum = ω₁ + ω₂`; unit peak at `Ω = 0`.
pub fn pump_envelope(pump: &PumpSpec, omega_sum: f64) -> f64 {
    let detuning = omega_sum - pump.center_omega();
    let x = detuning / pump.width_parameter();
    match pump.shape {
        PulseShape::SechSquared => 1.0 / x.cosh(),
        PulseShape::Gaussian => (-0.5 * x * x).exp(),
    }
}

/// Hermite-Gauss phase-matching profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PmfSpec {
    #[serde(default = "PmfSpec::default_order")]
    pub order: u32,
    /// Gaussian width `w` in rad/ps.
    #[serde(default = "PmfSpec::default_width")]
    pub width: f64,
    /// Center of the profile in the difference coordinate, rad/ps.
    #[serde(default)]
    pub mismatch_offset: f64,
}

impl PmfSpec {
    fn default_order() -> u32 {
        1
    }
    fn default_width() -> f64 {
        DEFAULT_PMF_WIDTH
    }

    pub fn validate(&self) -> Result<(), SpectralError> {
        if self.order > 1 {
            return Err(SpectralError::UnsupportedOrder(self.order));
        }
        positive("pmf.width", self.width)?;
        if !self.mismatch_offset.is_finite() {
            return Err(SpectralError::InvalidParameter {
                field: "pmf.mismatch_offset",
                value: self.mismatch_offset,
                reason: "must be finite",
            });
        }
        Ok(())
    }
}

impl Default for PmfSpec {
    fn default() -> Self {
        Self {
            order: Self::default_order(),
            width: Self::default_width(),
            mismatch_offset: 0.0,
        }
    }
}

/// `(√2·x/w)·exp(−x²/2w²)` for order 1, `exp(−x²/2w²)` for order 0, with
/// `x = omega_diff − mismatch_offset`. Both have unit peak magnitude.
pub fn pmf_hermite_gauss(pmf: &PmfSpec, omega_diff: f64) -> Result<f64, SpectralError> {
    let x = (omega_diff - pmf.mismatch_offset) / pmf.width;
    let gauss = (-0.5 * x * x).exp();
    match pmf.order {
        0 => Ok(gauss),
        // peak of x·e^{-x²/2} is e^{-1/2} at x = 1
        1 => Ok(SQRT_2 * x * gauss),
        n => Err(SpectralError::UnsupportedOrder(n)),
    }
}

/// Grids plus analytic pump and PMF: enough to re-evaluate the JSA anywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct JsaModel {
    pub grid1: FrequencyGrid,
    pub grid2: FrequencyGrid,
    pub pump: PumpSpec,
    pub pmf: PmfSpec,
}

impl JsaModel {
    pub fn new(
        grid1: FrequencyGrid,
        grid2: FrequencyGrid,
        pump: PumpSpec,
        pmf: PmfSpec,
    ) -> Result<Self, SpectralError> {
        pump.validate()?;
        pmf.validate()?;
        Ok(Self {
            grid1,
            grid2,
            pump,
            pmf,
        })
    }

    fn amplitude(&self, w1: f64, w2: f64) -> f64 {
        // pmf validated at construction
        let phi = pmf_hermite_gauss(&self.pmf, 0.5 * (w1 - w2)).unwrap_or(0.0);
        phi * pump_envelope(&self.pump, w1 + w2)
    }

    fn evaluate_on(&self, axis1: &[f64], axis2: &[f64]) -> DMatrix<f64> {
        // column-major; each column is independent so the result does not
        // depend on scheduling
        let columns: Vec<Vec<f64>> = axis2
            .par_iter()
            .map(|&w2| axis1.iter().map(|&w1| self.amplitude(w1, w2)).collect())
            .collect();
        DMatrix::from_vec(axis1.len(), axis2.len(), columns.concat())
    }

    /// Unnormalized real amplitudes on the model grids.
    pub fn evaluate(&self) -> DMatrix<f64> {
        self.evaluate_on(self.grid1.axis(), self.grid2.axis())
    }

    /// Samples and normalizes the JSA.
    pub fn compose(&self) -> Result<JsaMatrix, SpectralError> {
        let real = self.evaluate();
        // pump and PMF both peak at order unity; a peak this far down means
        // the grids miss the phase-matched region entirely
        if real.iter().all(|v| v.abs() < SUPPORT_FLOOR) {
            return Err(SpectralError::GridMismatch);
        }
        let amps = real.map(|v| Complex64::new(v, 0.0));
        Ok(JsaMatrix::new_normalized(
            self.grid1.clone(),
            self.grid2.clone(),
            amps,
        )?)
    }

    /// Degenerate wavelength `2·λ_pump`, the λ₀ about which lobes move.
    pub fn degenerate_wavelength(&self) -> f64 {
        2.0 * self.pump.center_wavelength
    }

    /// Model with photon 1 moved to `λ₀ − shift/2` and photon 2 to
    /// `λ₀ + shift/2`. Only the PMF center moves; the energy-sum support is
    /// untouched.
    pub fn displaced(&self, shift_nm: f64) -> Result<Self, SpectralError> {
        if !(shift_nm >= 0.0) || !shift_nm.is_finite() {
            return Err(SpectralError::InvalidParameter {
                field: "shift",
                value: shift_nm,
                reason: "must be non-negative",
            });
        }
        let mut out = self.clone();
        if shift_nm > 0.0 {
            let l0 = self.degenerate_wavelength();
            let half_diff = 0.5
                * (wavelength_to_omega(l0 - shift_nm / 2.0)
                    - wavelength_to_omega(l0 + shift_nm / 2.0));
            out.pmf.mismatch_offset += half_diff;
            let mass = out.mass_fraction_in_grid()?;
            if mass < MIN_MASS_IN_GRID {
                return Err(SpectralError::ShiftOutOfGrid {
                    mass_fraction: mass,
                });
            }
        }
        Ok(out)
    }

    /// Fraction of the model intensity that falls inside the grid window,
    /// estimated on a grid three times as wide.
    pub fn mass_fraction_in_grid(&self) -> Result<f64, SpectralError> {
        let wide = |g: &FrequencyGrid| -> Result<FrequencyGrid, SpectralError> {
            let span = 3.0 * g.span();
            let center = g.center_wavelength().max(span / 2.0 + 1.0);
            Ok(make_grid(center, span, (3 * g.len()).clamp(64, 1536))?)
        };
        let (w1, w2) = (wide(&self.grid1)?, wide(&self.grid2)?);
        let vals = self.evaluate_on(w1.axis(), w2.axis());
        let range = |g: &FrequencyGrid| {
            let a = g.axis();
            (a[0] - g.step() / 2.0, a[a.len() - 1] + g.step() / 2.0)
        };
        let (r1, r2) = (range(&self.grid1), range(&self.grid2));
        let mut inside = 0.0;
        let mut total = 0.0;
        for (j, &y) in w2.axis().iter().enumerate() {
            for (i, &x) in w1.axis().iter().enumerate() {
                let p = vals[(i, j)] * vals[(i, j)];
                total += p;
                if x >= r1.0 && x <= r1.1 && y >= r2.0 && y <= r2.1 {
                    inside += p;
                }
            }
        }
        if total > 0.0 {
            Ok(inside / total)
        } else {
            Err(SpectralError::GridMismatch)
        }
    }
}

/// `f[i,j] = φ(ω₁ᵢ, ω₂ⱼ)·α(ω₁ᵢ, ω₂ⱼ)`, normalized.
pub fn compose_jsa(
    grid1: &FrequencyGrid,
    grid2: &FrequencyGrid,
    pump: &PumpSpec,
    pmf: &PmfSpec,
) -> Result<JsaMatrix, SpectralError> {
    JsaModel::new(grid1.clone(), grid2.clone(), pump.clone(), pmf.clone())?.compose()
}

/// Re-evaluates the model with the lobes displaced along the anti-diagonal.
pub fn displace_antidiagonal(model: &JsaModel, shift_nm: f64) -> Result<JsaMatrix, SpectralError> {
    model.displaced(shift_nm)?.compose()
}

/// `(f − e^{iφ}·fᵀ)/𝒩`: superposes the state with its mirror across the
/// diagonal.
pub fn apply_bin_map(jsa: &JsaMatrix, phase_phi_p: f64) -> Result<JsaMatrix, SpectralError> {
    if !jsa.is_square() {
        return Err(SpectralError::NonSquareGrid);
    }
    let f = jsa.amplitudes();
    let p = Complex64::from_polar(1.0, phase_phi_p);
    let out = DMatrix::from_fn(f.nrows(), f.ncols(), |i, j| f[(i, j)] - p * f[(j, i)]);
    let out = JsaMatrix::new(jsa.grid1().clone(), jsa.grid2().clone(), out)?;
    if out.norm_squared() < 1e-24 * jsa.norm_squared().max(f64::MIN_POSITIVE) {
        return Err(SpectralError::VanishingState);
    }
    Ok(out.normalize()?)
}

/// Analytic HG0/HG1 ⊗ two-bin state on a square grid:
/// `ψ⁻(ω₁−a, ω₂−b) + e^{iφ}·ψ⁻(ω₁−b, ω₂−a)` with `ψ⁻(x,y) = g(x)h(y) − h(x)g(y)`,
/// `g(x) = e^{−x²/σ²}`, `h(x) = (x/σ)e^{−x²/σ²}` and bins at `a,b = ω_c ± δ/2`.
///
/// This is `apply_bin_map` of the displaced Bell state, with Gaussian bins
/// whose HOM interferogram is exactly the analytic coincidence model.
pub fn ideal_hyperentangled(
    grid: &FrequencyGrid,
    delta: f64,
    sigma: f64,
    phi: f64,
) -> Result<JsaMatrix, SpectralError> {
    positive("sigma", sigma)?;
    if !(delta >= 0.0) {
        return Err(SpectralError::InvalidParameter {
            field: "delta",
            value: delta,
            reason: "must be non-negative",
        });
    }
    let wc = grid.center_omega();
    let (a, b) = (wc + delta / 2.0, wc - delta / 2.0);
    let g = |x: f64| (-(x * x) / (sigma * sigma)).exp();
    let h = |x: f64| x / sigma * (-(x * x) / (sigma * sigma)).exp();
    let bell = |x: f64, y: f64| g(x) * h(y) - h(x) * g(y);
    let p = Complex64::from_polar(1.0, phi);
    let axis = grid.axis();
    let amps = DMatrix::from_fn(axis.len(), axis.len(), |i, j| {
        let (w1, w2) = (axis[i], axis[j]);
        Complex64::new(bell(w1 - a, w2 - b), 0.0) + p * bell(w1 - b, w2 - a)
    });
    Ok(JsaMatrix::new_normalized(grid.clone(), grid.clone(), amps)?)
}

/// Nominal state description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateConfig {
    /// nm
    #[serde(default = "StateConfig::default_separation")]
    pub bin_separation: f64,
    /// nm
    #[serde(default = "StateConfig::default_width")]
    pub bin_width: f64,
    /// rad
    #[serde(default)]
    pub phase_phi_p: f64,
    #[serde(default)]
    pub pump: PumpSpec,
    #[serde(default)]
    pub pmf: PmfSpec,
}

impl StateConfig {
    fn default_separation() -> f64 {
        11.0
    }
    fn default_width() -> f64 {
        3.0
    }

    pub fn validate(&self) -> Result<(), SpectralError> {
        positive("state.bin_width", self.bin_width)?;
        if !(self.bin_separation > self.bin_width) {
            return Err(SpectralError::InvalidParameter {
                field: "state.bin_separation",
                value: self.bin_separation,
                reason: "must exceed bin_width",
            });
        }
        if !self.phase_phi_p.is_finite() {
            return Err(SpectralError::InvalidParameter {
                field: "state.phase_phi_p",
                value: self.phase_phi_p,
                reason: "must be finite",
            });
        }
        self.pump.validate()?;
        self.pmf.validate()
    }

    pub fn with_phase(&self, phi: f64) -> Self {
        Self {
            phase_phi_p: phi,
            ..self.clone()
        }
    }

    pub fn model(&self, grid: &FrequencyGrid) -> Result<JsaModel, SpectralError> {
        self.validate()?;
        JsaModel::new(
            grid.clone(),
            grid.clone(),
            self.pump.clone(),
            self.pmf.clone(),
        )
    }

    /// Compose → displace by `bin_separation` → bin map with `phase_phi_p`.
    pub fn synthesize(&self, grid: &FrequencyGrid) -> Result<JsaMatrix, SpectralError> {
        let displaced = displace_antidiagonal(&self.model(grid)?, self.bin_separation)?;
        apply_bin_map(&displaced, self.phase_phi_p)
    }

    /// `(δ, σ)` in rad/ps: angular bin separation and half bin width at the
    /// degenerate wavelength.
    pub fn nominal_bins(&self) -> (f64, f64) {
        let l0 = 2.0 * self.pump.center_wavelength;
        let delta = wavelength_to_omega(l0 - self.bin_separation / 2.0)
            - wavelength_to_omega(l0 + self.bin_separation / 2.0);
        let sigma = 0.5 * wavelength_width_to_omega(l0, self.bin_width);
        (delta, sigma)
    }
}

impl Default for StateConfig {
    fn default() -> Self {
        Self {
            bin_separation: Self::default_separation(),
            bin_width: Self::default_width(),
            phase_phi_p: 0.0,
            pump: PumpSpec::default(),
            pmf: PmfSpec::default(),
        }
    }
}
