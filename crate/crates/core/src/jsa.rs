//! The joint spectral amplitude on a pair of frequency grids.

use crate::grid::FrequencyGrid;
use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

/// Absolute tolerance on the grid-measure norm of a normalized state.
pub const NORM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JsaError {
    #[error("amplitude matrix is {rows}x{cols} but grids are {n1}x{n2}")]
    ShapeMismatch {
        rows: usize,
        cols: usize,
        n1: usize,
        n2: usize,
    },
    #[error("amplitude matrix contains non-finite entries")]
    NonFinite,
    #[error("state has zero norm on the grid")]
    ZeroNorm,
    #[error("intensity at ({row}, {col}) is negative ({value})")]
    NegativeIntensity { row: usize, col: usize, value: f64 },
}

/// Complex amplitude `f(ω₁, ω₂)` sampled on `grid1 × grid2`.
///
/// Rows index photon 1, columns photon 2.
#[derive(Debug, Clone, PartialEq)]
pub struct JsaMatrix {
    grid1: FrequencyGrid,
    grid2: FrequencyGrid,
    amplitudes: DMatrix<Complex64>,
    normalized: bool,
}

impl JsaMatrix {
    /// Wraps raw amplitudes. The `normalized` flag is derived from the data.
    pub fn new(
        grid1: FrequencyGrid,
        grid2: FrequencyGrid,
        amplitudes: DMatrix<Complex64>,
    ) -> Result<Self, JsaError> {
        if amplitudes.nrows() != grid1.len() || amplitudes.ncols() != grid2.len() {
            return Err(JsaError::ShapeMismatch {
                rows: amplitudes.nrows(),
                cols: amplitudes.ncols(),
                n1: grid1.len(),
                n2: grid2.len(),
            });
        }
        if amplitudes
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(JsaError::NonFinite);
        }
        let mut jsa = Self {
            grid1,
            grid2,
            amplitudes,
            normalized: false,
        };
        jsa.normalized = (jsa.norm_squared() - 1.0).abs() <= NORM_TOLERANCE;
        Ok(jsa)
    }

    /// Wraps and normalizes in one go.
    pub fn new_normalized(
        grid1: FrequencyGrid,
        grid2: FrequencyGrid,
        amplitudes: DMatrix<Complex64>,
    ) -> Result<Self, JsaError> {
        Self::new(grid1, grid2, amplitudes)?.normalize()
    }

    pub fn grid1(&self) -> &FrequencyGrid {
        &self.grid1
    }

    pub fn grid2(&self) -> &FrequencyGrid {
        &self.grid2
    }

    pub fn amplitudes(&self) -> &DMatrix<Complex64> {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> DMatrix<Complex64> {
        self.amplitudes
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn shape(&self) -> (usize, usize) {
        self.amplitudes.shape()
    }

    /// Grid measure `step1 · step2`.
    pub fn cell_area(&self) -> f64 {
        self.grid1.step() * self.grid2.step()
    }

    /// `Σ |f|² · step1 · step2`.
    pub fn norm_squared(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.cell_area()
    }

    pub fn normalize(mut self) -> Result<Self, JsaError> {
        let n2 = self.norm_squared();
        if !(n2 > 0.0) || !n2.is_finite() {
            return Err(JsaError::ZeroNorm);
        }
        let scale = 1.0 / n2.sqrt();
        self.amplitudes.iter_mut().for_each(|z| *z *= scale);
        self.normalized = true;
        Ok(self)
    }

    /// Both photons share one axis.
    pub fn is_square(&self) -> bool {
        self.grid1.same_axis(&self.grid2)
    }

    /// Joint spectral intensity `|f|²`.
    pub fn jsi(&self) -> DMatrix<f64> {
        self.amplitudes.map(|z| z.norm_sqr())
    }

    /// Multiplies every amplitude by `e^{iθ}`.
    pub fn with_global_phase(&self, theta: f64) -> Self {
        let p = Complex64::from_polar(1.0, theta);
        Self {
            amplitudes: self.amplitudes.map(|z| z * p),
            ..self.clone()
        }
    }

    /// `‖f − g‖²` under the grid measure. Panics if shapes differ.
    pub fn distance_squared(&self, other: &Self) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.amplitudes
            .iter()
            .zip(other.amplitudes.iter())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            * self.cell_area()
    }

    /// Fraction of the squared norm carried by the imaginary part.
    pub fn imaginary_norm_fraction(&self) -> f64 {
        let total: f64 = self.amplitudes.iter().map(|z| z.norm_sqr()).sum();
        let imag: f64 = self.amplitudes.iter().map(|z| z.im * z.im).sum();
        if total > 0.0 {
            imag / total
        } else {
            0.0
        }
    }
}

/// Joint spectral intensity on a pair of frequency grids. Values are a
/// density in `(ω₁, ω₂)`; no normalization is implied.
#[derive(Debug, Clone, PartialEq)]
pub struct JsiMatrix {
    grid1: FrequencyGrid,
    grid2: FrequencyGrid,
    values: DMatrix<f64>,
}

impl JsiMatrix {
    pub fn new(
        grid1: FrequencyGrid,
        grid2: FrequencyGrid,
        values: DMatrix<f64>,
    ) -> Result<Self, JsaError> {
        if values.nrows() != grid1.len() || values.ncols() != grid2.len() {
            return Err(JsaError::ShapeMismatch {
                rows: values.nrows(),
                cols: values.ncols(),
                n1: grid1.len(),
                n2: grid2.len(),
            });
        }
        for j in 0..values.ncols() {
            for i in 0..values.nrows() {
                let v = values[(i, j)];
                if !v.is_finite() {
                    return Err(JsaError::NonFinite);
                }
                if v < 0.0 {
                    return Err(JsaError::NegativeIntensity {
                        row: i,
                        col: j,
                        value: v,
                    });
                }
            }
        }
        Ok(Self {
            grid1,
            grid2,
            values,
        })
    }

    pub fn from_jsa(jsa: &JsaMatrix) -> Self {
        Self {
            grid1: jsa.grid1.clone(),
            grid2: jsa.grid2.clone(),
            values: jsa.jsi(),
        }
    }

    pub fn grid1(&self) -> &FrequencyGrid {
        &self.grid1
    }

    pub fn grid2(&self) -> &FrequencyGrid {
        &self.grid2
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.shape()
    }

    /// `Σ values · step1 · step2`.
    pub fn total(&self) -> f64 {
        self.values.sum() * self.grid1.step() * self.grid2.step()
    }
}

/// Elementwise `|f|²`; see [`JsaMatrix::jsi`].
pub fn jsi_of(jsa: &JsaMatrix) -> DMatrix<f64> {
    jsa.jsi()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    fn grid() -> FrequencyGrid {
        make_grid(1550.0, 20.0, 16).unwrap()
    }

    #[test]
    fn rejects_wrong_shape_and_nan() {
        let m = DMatrix::from_element(3, 4, Complex64::new(1.0, 0.0));
        assert!(matches!(
            JsaMatrix::new(grid(), grid(), m),
            Err(JsaError::ShapeMismatch { .. })
        ));
        let mut m = DMatrix::from_element(16, 16, Complex64::new(1.0, 0.0));
        m[(2, 3)] = Complex64::new(f64::NAN, 0.0);
        assert_eq!(JsaMatrix::new(grid(), grid(), m), Err(JsaError::NonFinite));
    }

    #[test]
    fn normalization_and_jsi_sum() {
        let m = DMatrix::from_fn(16, 16, |i, j| Complex64::new(i as f64, j as f64 - 3.0));
        let jsa = JsaMatrix::new_normalized(grid(), grid(), m).unwrap();
        assert!(jsa.is_normalized());
        let s: f64 = jsi_of(&jsa).sum() * jsa.cell_area();
        assert!((s - 1.0).abs() < 1e-9);
        let phased = jsa.with_global_phase(0.7);
        let d = (jsi_of(&phased) - jsi_of(&jsa)).abs().max();
        assert!(d < 1e-15);
    }

    #[test]
    fn jsi_rejects_negative_values() {
        let mut m = DMatrix::from_element(16, 16, 1.0);
        m[(4, 5)] = -0.1;
        assert!(matches!(
            JsiMatrix::new(grid(), grid(), m),
            Err(JsaError::NegativeIntensity { row: 4, col: 5, .. })
        ));
    }

    #[test]
    fn zero_state_cannot_normalize() {
        let m = DMatrix::from_element(16, 16, Complex64::new(0.0, 0.0));
        assert_eq!(
            JsaMatrix::new_normalized(grid(), grid(), m),
            Err(JsaError::ZeroNorm)
        );
    }
}
