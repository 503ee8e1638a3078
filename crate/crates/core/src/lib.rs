//! Simulation and analysis of pulse-mode / frequency-bin hyper-entangled
//! photon pairs: joint spectra, Schmidt analysis, HOM interferometry,
//! time-of-flight spectroscopy and phase inference.

// `!(x > 0.0)` style checks reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod grid;
pub mod hom;
pub mod io;
pub mod jsa;
pub mod lobes;
pub mod phase;
pub mod schmidt;
pub mod seed;
pub mod spectral;
pub mod tofs;

pub use grid::{make_grid, FrequencyGrid, GridError};
pub use hom::{
    fit_interferogram, hom_from_jsa, initial_guess, pcc_analytic, CurveKind, FitBounds, FitResult,
    HomCurve, HomError, HomFitParams,
};
pub use jsa::{JsaError, JsaMatrix, JsiMatrix};
pub use lobes::{detect_lobes, Lobe, LobeDetection};
pub use phase::{
    build_phase_mask, disambiguate_phase, jsa_from_jsi, monte_carlo_schmidt, DisambiguationReport,
    ExchangeSymmetry, KEstimate, PhaseError, PhaseInterval, PhaseMask,
};
pub use schmidt::{decompose, reconstruct, schmidt_number, SchmidtDecomposition, SchmidtError};
pub use spectral::{
    apply_bin_map, compose_jsa, displace_antidiagonal, PmfSpec, PulseShape, PumpSpec,
    SpectralError, StateConfig,
};
pub use tofs::{
    reconstruct_jsi, simulate_histogram, simulate_timetags, Histogram2D, TimetagEvent, TofsConfig,
    TofsError, WavelengthJsi,
};
