//! Phase inference from intensity data: a sign mask turns a measured JSI into
//! a JSA, Poisson resampling puts an error bar on its Schmidt number, and
//! candidate state phases are told apart by the HOM phase they predict.

use crate::grid::FrequencyGrid;
use crate::hom::{
    fit_interferogram, hom_from_jsa, FitBounds, FitResult, HomCurve, HomError, HomFitParams,
};
use crate::jsa::{JsaError, JsaMatrix, JsiMatrix};
use crate::lobes::{detect_lobes, LobeDetection};
use crate::schmidt::schmidt_number_gram;
use crate::seed::{chunk_rng, streams};
use crate::spectral::{SpectralError, StateConfig};
use crate::tofs::normalized_cross_correlation;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use thiserror::Error;

/// Confidence half-width, in fit standard errors, used to accept a
/// candidate phase.
pub const DEFAULT_PHASE_K_SIGMA: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PhaseError {
    #[error("lobe centers do not form two pairs across the diagonal: {0}")]
    DegenerateCenters(String),
    #[error("intensity at ({row}, {col}) is negative ({value})")]
    NegativeInput { row: usize, col: usize, value: f64 },
    #[error("mask is {mask:?} but data are {data:?}")]
    ShapeMismatch {
        mask: (usize, usize),
        data: (usize, usize),
    },
    #[error("count matrix is empty")]
    EmptyCounts,
    #[error("need at least {min} {what} (got {got})")]
    TooFew {
        what: &'static str,
        min: usize,
        got: usize,
    },
    #[error("phase candidates {phis:?} all lie inside the measured interval")]
    Ambiguous {
        phis: Vec<f64>,
        report: Box<DisambiguationReport>,
    },
    #[error("no phase candidate is consistent with the measured interval")]
    NoCandidate { report: Box<DisambiguationReport> },
    #[error(transparent)]
    Jsa(#[from] JsaError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Hom(#[from] HomError),
}

/// Which exchange symmetry the mask imposes on the inferred JSA.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ExchangeSymmetry {
    /// `f(ω₂, ω₁) = −f(ω₁, ω₂)`: anti-bunching.
    #[default]
    Antisymmetric,
    /// `f(ω₂, ω₁) = f(ω₁, ω₂)`: bunching.
    Symmetric,
}

/// Sign pattern applied to `√JSI`.
///
/// Signs are constant on stripes of the difference coordinate
/// `d = λ₂ − λ₁`. The two lobes of a pulse-mode pair sit at different `d`
/// and get opposite signs; the mirrored pair across the diagonal gets the
/// signs the exchange symmetry dictates.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMask {
    signs: DMatrix<i8>,
    lobe_centers: [(f64, f64); 4],
    /// Stripe edges in `d`, nm, ascending.
    boundaries: [f64; 3],
    symmetry: ExchangeSymmetry,
}

impl PhaseMask {
    pub fn signs(&self) -> &DMatrix<i8> {
        &self.signs
    }

    pub fn lobe_centers(&self) -> &[(f64, f64); 4] {
        &self.lobe_centers
    }

    pub fn boundaries(&self) -> [f64; 3] {
        self.boundaries
    }

    pub fn symmetry(&self) -> ExchangeSymmetry {
        self.symmetry
    }

    pub fn shape(&self) -> (usize, usize) {
        self.signs.shape()
    }

    /// A mask of `+1` everywhere (no phase information).
    pub fn uniform(rows: usize, cols: usize) -> Self {
        Self {
            signs: DMatrix::from_element(rows, cols, 1),
            lobe_centers: [(0.0, 0.0); 4],
            boundaries: [0.0; 3],
            symmetry: ExchangeSymmetry::Symmetric,
        }
    }

    /// Elementwise product; `m.compose(&m)` is all `+1`.
    pub fn compose(&self, other: &Self) -> DMatrix<i8> {
        self.signs.component_mul(&other.signs)
    }

    /// `−mask`; leaves every Schmidt number unchanged.
    pub fn negated(&self) -> Self {
        Self {
            signs: self.signs.map(|s| -s),
            ..self.clone()
        }
    }

    fn check_shape(&self, shape: (usize, usize)) -> Result<(), PhaseError> {
        if self.signs.shape() != shape {
            return Err(PhaseError::ShapeMismatch {
                mask: self.signs.shape(),
                data: shape,
            });
        }
        Ok(())
    }
}

/// Builds the stripe mask for four lobe centers `(λ₁, λ₂)` in nm.
///
/// The centers must split two and two across the diagonal. Stripe edges are
/// placed midway between the inner and outer lobes, symmetrized about the
/// diagonal so that on a square grid `mask(j,i) = ∓mask(i,j)` exactly.
pub fn build_phase_mask(
    lambda1: &[f64],
    lambda2: &[f64],
    lobe_centers: [(f64, f64); 4],
    symmetry: ExchangeSymmetry,
) -> Result<PhaseMask, PhaseError> {
    let mut d: Vec<f64> = lobe_centers.iter().map(|&(l1, l2)| l2 - l1).collect();
    d.sort_by(f64::total_cmp);
    if !(d[1] < 0.0 && d[2] > 0.0) {
        return Err(PhaseError::DegenerateCenters(format!(
            "need two centers on each side of the diagonal, differences {d:?}"
        )));
    }
    let inner = 0.5 * (d[2] - d[1]);
    let outer = 0.5 * (d[3] - d[0]);
    if !(outer - inner > 1e-9 * outer.max(1.0)) {
        return Err(PhaseError::DegenerateCenters(format!(
            "lobes of a pair coincide, differences {d:?}"
        )));
    }
    let edge = 0.5 * (inner + outer);
    let boundaries = [-edge, 0.0, edge];
    let pattern: [i8; 4] = match symmetry {
        ExchangeSymmetry::Antisymmetric => [-1, 1, -1, 1],
        ExchangeSymmetry::Symmetric => [1, -1, -1, 1],
    };
    let stripe = |x: f64| boundaries.iter().filter(|&&b| x >= b).count();
    let signs = DMatrix::from_fn(lambda1.len(), lambda2.len(), |i, j| {
        let x = lambda2[j] - lambda1[i];
        let s = stripe(x);
        // exactly on the diagonal of the antisymmetric pattern the amplitude
        // vanishes anyway; keep the mirror relation exact there too
        if x == 0.0 && symmetry == ExchangeSymmetry::Antisymmetric {
            pattern[1]
        } else {
            pattern[s]
        }
    });
    Ok(PhaseMask {
        signs,
        lobe_centers,
        boundaries,
        symmetry,
    })
}

/// The four strongest lobes of an intensity map, as `(λ₁, λ₂)` nm.
pub fn detect_lobe_centers(
    values: &DMatrix<f64>,
    lambda1: &[f64],
    lambda2: &[f64],
    opts: LobeDetection,
) -> Result<[(f64, f64); 4], PhaseError> {
    let lobes = detect_lobes(
        values,
        lambda1,
        lambda2,
        LobeDetection {
            max_lobes: Some(4),
            ..opts
        },
    );
    if lobes.len() < 4 {
        return Err(PhaseError::DegenerateCenters(format!(
            "found {} lobes, need 4",
            lobes.len()
        )));
    }
    Ok(std::array::from_fn(|k| {
        (lobes[k].lambda1, lobes[k].lambda2)
    }))
}

/// Detects lobes on a frequency-grid JSI and builds its mask.
pub fn mask_for_jsi(
    jsi: &JsiMatrix,
    symmetry: ExchangeSymmetry,
    opts: LobeDetection,
) -> Result<PhaseMask, PhaseError> {
    let (l1, l2) = (jsi.grid1().wavelengths(), jsi.grid2().wavelengths());
    let centers = detect_lobe_centers(jsi.values(), &l1, &l2, opts)?;
    build_phase_mask(&l1, &l2, centers, symmetry)
}

/// `√values ⊙ mask`, unnormalized.
pub fn masked_amplitudes(
    values: &DMatrix<f64>,
    mask: &PhaseMask,
) -> Result<DMatrix<f64>, PhaseError> {
    mask.check_shape(values.shape())?;
    for j in 0..values.ncols() {
        for i in 0..values.nrows() {
            let v = values[(i, j)];
            if !(v >= 0.0) {
                return Err(PhaseError::NegativeInput {
                    row: i,
                    col: j,
                    value: v,
                });
            }
        }
    }
    Ok(values.zip_map(&mask.signs, |v, s| v.sqrt() * s as f64))
}

/// Infers a real JSA as `√JSI ⊙ mask`, normalized.
pub fn jsa_from_jsi(jsi: &JsiMatrix, mask: &PhaseMask) -> Result<JsaMatrix, PhaseError> {
    let amps = masked_amplitudes(jsi.values(), mask)?.map(|a| Complex64::new(a, 0.0));
    Ok(JsaMatrix::new_normalized(
        jsi.grid1().clone(),
        jsi.grid2().clone(),
        amps,
    )?)
}

/// Monte Carlo estimate of the Schmidt number of the masked JSA.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KEstimate {
    /// Mean over rounds.
    pub mean: f64,
    /// Sample standard deviation over rounds.
    pub std_dev: f64,
    /// `3·std_dev`.
    pub bound: f64,
    /// K of the unresampled counts.
    pub nominal: f64,
    pub rounds: usize,
    pub seed: u64,
    pub total_counts: u64,
}

/// Resamples every bin as `Poisson(count)` for `rounds` rounds, infers the
/// JSA through `mask` and records its Schmidt number.
///
/// Rounds use independent seeds derived from `seed`, so the estimate does
/// not depend on the thread count.
pub fn monte_carlo_schmidt(
    counts: &DMatrix<u64>,
    mask: &PhaseMask,
    rounds: usize,
    seed: u64,
) -> Result<KEstimate, PhaseError> {
    if rounds < 2 {
        return Err(PhaseError::TooFew {
            what: "rounds",
            min: 2,
            got: rounds,
        });
    }
    mask.check_shape(counts.shape())?;
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(PhaseError::EmptyCounts);
    }
    // zero bins stay zero under resampling, so work on the occupied box
    let (n1, n2) = counts.shape();
    let rows: Vec<usize> = (0..n1)
        .filter(|&i| counts.row(i).iter().any(|&c| c > 0))
        .collect();
    let cols: Vec<usize> = (0..n2)
        .filter(|&j| counts.column(j).iter().any(|&c| c > 0))
        .collect();
    let (r0, r1) = (rows[0], *rows.last().unwrap());
    let (c0, c1) = (cols[0], *cols.last().unwrap());
    let (h, w) = (r1 - r0 + 1, c1 - c0 + 1);
    let sub = counts.view((r0, c0), (h, w)).into_owned();
    let sign = mask.signs.view((r0, c0), (h, w)).map(|s| s as f64);

    // column-major list of occupied cells with their resampling law
    let cells: Vec<(usize, f64, Poisson<f64>)> = sub
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(k, &c)| (k, sign[k], Poisson::new(c as f64).expect("positive rate")))
        .collect();

    let k_of = |m: &DMatrix<f64>| schmidt_number_gram(m);
    let nominal = k_of(&sub.zip_map(&sign, |c, s| (c as f64).sqrt() * s));
    let ks: Vec<f64> = (0..rounds)
        .into_par_iter()
        .map(|r| {
            let mut rng = chunk_rng(seed, streams::MONTE_CARLO, r as u64);
            let mut m = DMatrix::<f64>::zeros(h, w);
            let slice = m.as_mut_slice();
            for (k, s, law) in &cells {
                slice[*k] = law.sample(&mut rng).sqrt() * s;
            }
            k_of(&m)
        })
        .collect();
    let mean = ks.iter().sum::<f64>() / rounds as f64;
    let var = ks.iter().map(|k| (k - mean).powi(2)).sum::<f64>() / (rounds - 1) as f64;
    let std_dev = var.sqrt();
    Ok(KEstimate {
        mean,
        std_dev,
        bound: 3.0 * std_dev,
        nominal,
        rounds,
        seed,
        total_counts: total,
    })
}

/// Wraps an angle difference to `(−π, π]`.
pub fn wrap_phase_difference(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(TAU) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

/// A measured phase with the half-width of its acceptance interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseInterval {
    pub phi: f64,
    pub half_width: f64,
}

impl PhaseInterval {
    /// `φ ± k·SE(φ)` from a HOM fit.
    pub fn from_fit(fit: &FitResult, k_sigma: f64) -> Self {
        Self {
            phi: fit.params.phi,
            half_width: k_sigma * fit.standard_errors.phi,
        }
    }
}

/// Metrics of one candidate phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateReport {
    pub phi: f64,
    /// Share of the synthesized JSA's squared norm in its imaginary part.
    pub imag_norm_fraction: f64,
    /// Phase recovered by fitting the candidate's predicted interferogram.
    pub predicted_hom_phi: f64,
    /// `|wrap(predicted − measured)|`; absent before a measurement is
    /// supplied.
    pub hom_phase_residual: Option<f64>,
    /// Agreement of the candidate's JSI with the measured one.
    pub jsi_ncc: Option<f64>,
    pub selected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisambiguationReport {
    pub measured: Option<PhaseInterval>,
    pub candidates: Vec<CandidateReport>,
    pub selected_phi: Option<f64>,
}

/// Candidate states synthesized once, then matched against any number of
/// measured phases.
#[derive(Debug, Clone)]
pub struct Disambiguator {
    candidates: Vec<CandidateReport>,
    jsas: Vec<JsaMatrix>,
}

impl Disambiguator {
    /// Synthesizes `state` at each candidate phase on `grid` and predicts
    /// its HOM phase over `delays`. A measured JSI on the same grid, if
    /// given, is compared against every candidate's.
    pub fn new(
        grid: &FrequencyGrid,
        measured_jsi: Option<&DMatrix<f64>>,
        state: &StateConfig,
        candidate_phis: &[f64],
        delays: &[f64],
    ) -> Result<Self, PhaseError> {
        if candidate_phis.len() < 2 {
            return Err(PhaseError::TooFew {
                what: "candidate phases",
                min: 2,
                got: candidate_phis.len(),
            });
        }
        let (delta, sigma) = state.nominal_bins();
        let results: Vec<Result<(CandidateReport, JsaMatrix), PhaseError>> = candidate_phis
            .par_iter()
            .map(|&phi| {
                let jsa = state.with_phase(phi).synthesize(grid)?;
                let curve = hom_from_jsa(&jsa, delays)?;
                let init = HomFitParams::new(1.0, 1.0, delta, sigma, phi.rem_euclid(TAU));
                let fit = fit_interferogram(&curve, init, &FitBounds::default())?;
                let ncc = measured_jsi
                    .filter(|m| m.shape() == jsa.shape())
                    .map(|m| normalized_cross_correlation(&jsa.jsi(), m));
                Ok((
                    CandidateReport {
                        phi,
                        imag_norm_fraction: jsa.imaginary_norm_fraction(),
                        predicted_hom_phi: fit.params.phi,
                        hom_phase_residual: None,
                        jsi_ncc: ncc,
                        selected: false,
                    },
                    jsa,
                ))
            })
            .collect();
        let mut candidates = Vec::with_capacity(results.len());
        let mut jsas = Vec::with_capacity(results.len());
        for r in results {
            let (c, j) = r?;
            candidates.push(c);
            jsas.push(j);
        }
        Ok(Self { candidates, jsas })
    }

    pub fn candidates(&self) -> &[CandidateReport] {
        &self.candidates
    }

    /// The synthesized JSA of candidate `k`.
    pub fn jsa(&self, k: usize) -> &JsaMatrix {
        &self.jsas[k]
    }

    /// Keeps the candidates whose predicted phase lies within `measured`.
    /// Exactly one must remain.
    pub fn select(&self, measured: PhaseInterval) -> Result<DisambiguationReport, PhaseError> {
        let mut candidates = self.candidates.clone();
        for c in &mut candidates {
            let res = wrap_phase_difference(c.predicted_hom_phi - measured.phi).abs();
            c.hom_phase_residual = Some(res);
            c.selected = res <= measured.half_width;
        }
        let inside: Vec<f64> = candidates
            .iter()
            .filter(|c| c.selected)
            .map(|c| c.phi)
            .collect();
        let mut report = DisambiguationReport {
            measured: Some(measured),
            candidates,
            selected_phi: None,
        };
        match inside.len() {
            1 => {
                report.selected_phi = Some(inside[0]);
                Ok(report)
            }
            0 => Err(PhaseError::NoCandidate {
                report: Box::new(report),
            }),
            _ => {
                // nothing is selected when the data cannot decide
                for c in &mut report.candidates {
                    c.selected = false;
                }
                Err(PhaseError::Ambiguous {
                    phis: inside,
                    report: Box::new(report),
                })
            }
        }
    }
}

/// One-shot [`Disambiguator::new`] followed by [`Disambiguator::select`].
pub fn disambiguate_phase(
    jsi: &JsiMatrix,
    state: &StateConfig,
    candidate_phis: &[f64],
    measured: PhaseInterval,
    delays: &[f64],
) -> Result<DisambiguationReport, PhaseError> {
    Disambiguator::new(
        jsi.grid1(),
        Some(jsi.values()),
        state,
        candidate_phis,
        delays,
    )?
    .select(measured)
}

/// Fits a measured interferogram and returns `φ ± k·SE`.
pub fn measured_phase(
    data: &HomCurve,
    k_sigma: f64,
) -> Result<(FitResult, PhaseInterval), PhaseError> {
    let init = crate::hom::initial_guess(data)?;
    let fit = fit_interferogram(data, init, &FitBounds::default())?;
    let iv = PhaseInterval::from_fit(&fit, k_sigma);
    Ok((fit, iv))
}
