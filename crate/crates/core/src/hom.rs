//! Hong-Ou-Mandel interferometry: the analytic coincidence model for the
//! four-lobe state, the overlap integral of an arbitrary JSA, a bounded
//! Levenberg-Marquardt fit and Poissonian confidence bands.

use crate::grid::SPEED_OF_LIGHT_MM_PER_PS;
use crate::jsa::JsaMatrix;
use nalgebra::{DMatrix, DVector, Matrix5, Vector5};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Tolerated imaginary part of the analytic model, relative to `N`.
pub const RESIDUE_TOLERANCE: f64 = 1e-9;

pub const MAX_ITERATIONS: usize = 500;

const MIN_FIT_POINTS: usize = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HomError {
    #[error("invalid {field} = {value}: {reason}")]
    InvalidParameter {
        field: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("model has imaginary residue {residue:e} at tau = {tau} ps")]
    NonRealResult { tau: f64, residue: f64 },
    #[error("HOM overlap needs both photons on the same grid")]
    NonSquareGrid,
    #[error("invalid curve: {0}")]
    InvalidCurve(&'static str),
    #[error("fit needs at least {MIN_FIT_POINTS} points (got {0})")]
    TooFewPoints(usize),
    #[error("initial {name} = {value} lies outside [{lo}, {hi}]")]
    InitOutOfBounds {
        name: ParamName,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("fit did not converge after {} iterations", .0.iterations)]
    NoConvergence(Box<FitResult>),
    #[error("Jacobian is singular; parameters are not identifiable from the data")]
    SingularJacobian,
}

/// Parameters of the coincidence model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomFitParams {
    /// Normalization; the baseline is `N/2`.
    #[serde(rename = "N")]
    pub n: f64,
    /// Visibility in `[0, 1]`.
    #[serde(rename = "V")]
    pub v: f64,
    /// Bin separation, rad/ps.
    pub delta: f64,
    /// Bin half-width, rad/ps.
    pub sigma: f64,
    /// Global phase, rad.
    pub phi: f64,
}

/// Names used for per-parameter overrides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ParamName {
    N,
    V,
    Delta,
    Sigma,
    Phi,
}

impl ParamName {
    pub const ALL: [ParamName; 5] = [Self::N, Self::V, Self::Delta, Self::Sigma, Self::Phi];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::N => "N",
            Self::V => "V",
            Self::Delta => "delta",
            Self::Sigma => "sigma",
            Self::Phi => "phi",
        }
    }
}

impl fmt::Display for ParamName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ParamName {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown parameter '{s}' (expected N, V, delta, sigma or phi)"))
    }
}

impl HomFitParams {
    pub fn new(n: f64, v: f64, delta: f64, sigma: f64, phi: f64) -> Self {
        Self {
            n,
            v,
            delta,
            sigma,
            phi,
        }
    }

    pub fn validate(&self) -> Result<(), HomError> {
        let bad = |field, value, reason| {
            Err(HomError::InvalidParameter {
                field,
                value,
                reason,
            })
        };
        if !(self.n > 0.0) || !self.n.is_finite() {
            return bad("N", self.n, "must be positive");
        }
        if !(0.0..=1.0).contains(&self.v) {
            return bad("V", self.v, "must lie in [0, 1]");
        }
        if !(self.delta >= 0.0) || !self.delta.is_finite() {
            return bad("delta", self.delta, "must be non-negative");
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return bad("sigma", self.sigma, "must be positive");
        }
        if !self.phi.is_finite() {
            return bad("phi", self.phi, "must be finite");
        }
        Ok(())
    }

    pub fn get(&self, name: ParamName) -> f64 {
        self.to_array()[name.index()]
    }

    pub fn set(&mut self, name: ParamName, value: f64) {
        let mut a = self.to_array();
        a[name.index()] = value;
        *self = Self::from_array(a);
    }

    pub fn to_array(&self) -> [f64; 5] {
        [self.n, self.v, self.delta, self.sigma, self.phi]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        Self::new(a[0], a[1], a[2], a[3], a[4])
    }

    /// `δ/2π` in THz.
    pub fn delta_thz(&self) -> f64 {
        self.delta / TAU
    }

    /// Bin width `2σ/2π` in THz.
    pub fn bin_width_thz(&self) -> f64 {
        2.0 * self.sigma / TAU
    }
}

/// How the normalization term of the analytic model is written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum DenominatorForm {
    /// `e^{δ²/σ²}σ² − 2δ²cos φ + σ²cos²φ`.
    #[default]
    Printed,
    /// `e^{δ²/σ²}σ² − 2δ²cos φ + σ²cos φ`, the exact squared norm of the
    /// Gaussian-bin state. Differs from `Printed` only when `cos φ ∉ {0, 1}`
    /// and then by a relative `O(e^{−δ²/σ²})`.
    Overlap,
}

/// Unvalidated complex model value.
fn pcc_complex(p: &HomFitParams, tau: f64, form: DenominatorForm) -> Complex64 {
    let (d, s, ph) = (p.delta, p.sigma, p.phi);
    let (s2, d2) = (s * s, d * d);
    // numerator and denominator divided by e^{δ²/σ²}
    let inv_e = (-d2 / s2).exp();
    let theta = d * tau + ph;
    let e1 = Complex64::from_polar(1.0, theta);
    let e2 = Complex64::from_polar(1.0, 2.0 * theta);
    let num = (1.0 + e2) * (s2 * (s2 * tau * tau - 2.0))
        + 2.0 * e1 * (4.0 * d2 - 2.0 * s2 + s2 * s2 * tau * tau) * inv_e;
    let c = ph.cos();
    let last = match form {
        DenominatorForm::Printed => s2 * c * c,
        DenominatorForm::Overlap => s2 * c,
    };
    let den = s2 + (last - 2.0 * d2 * c) * inv_e;
    let pre = Complex64::from_polar((-s2 * tau * tau / 4.0).exp(), -theta);
    p.n * (0.5 - p.v / 8.0 * pre * num / den)
}

/// Coincidence probability (or counts, scaled by `N`) at delay `tau` ps.
pub fn pcc_analytic(p: &HomFitParams, tau: f64) -> Result<f64, HomError> {
    pcc_analytic_with(p, tau, DenominatorForm::default())
}

pub fn pcc_analytic_with(
    p: &HomFitParams,
    tau: f64,
    form: DenominatorForm,
) -> Result<f64, HomError> {
    p.validate()?;
    let z = pcc_complex(p, tau, form);
    if !(z.im.abs() < RESIDUE_TOLERANCE * p.n) || !z.re.is_finite() {
        return Err(HomError::NonRealResult {
            tau,
            residue: z.im.abs(),
        });
    }
    Ok(z.re)
}

/// [`pcc_analytic`] over a delay sweep.
pub fn pcc_curve(p: &HomFitParams, delays: &[f64]) -> Result<Vec<f64>, HomError> {
    delays.iter().map(|&t| pcc_analytic(p, t)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CurveKind {
    Counts,
    Probability,
}

/// Coincidences against delay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomCurve {
    /// ps, strictly increasing.
    pub delays: Vec<f64>,
    pub values: Vec<f64>,
    pub kind: CurveKind,
}

impl HomCurve {
    pub fn new(delays: Vec<f64>, values: Vec<f64>, kind: CurveKind) -> Result<Self, HomError> {
        if delays.len() != values.len() {
            return Err(HomError::InvalidCurve("delays and values differ in length"));
        }
        if delays.iter().any(|t| !t.is_finite()) || delays.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(HomCurve::bad(
                "delays must be finite and strictly increasing",
            ));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(HomCurve::bad("values must be finite and non-negative"));
        }
        Ok(Self {
            delays,
            values,
            kind,
        })
    }

    fn bad(msg: &'static str) -> HomError {
        HomError::InvalidCurve(msg)
    }

    pub fn len(&self) -> usize {
        self.delays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delays.is_empty()
    }
}

/// `p(τ) = ½(1 − Re ∬ f(ω₁,ω₂) f*(ω₂,ω₁) e^{−i(ω₁−ω₂)τ})` on the JSA grid.
pub fn hom_from_jsa(jsa: &JsaMatrix, delays: &[f64]) -> Result<HomCurve, HomError> {
    if !jsa.is_square() {
        return Err(HomError::NonSquareGrid);
    }
    let f = jsa.amplitudes();
    let n = f.nrows();
    // g_ij = f_ij · conj(f_ji); the phase factorizes as u_i · conj(u_j)
    let g = DMatrix::from_fn(n, n, |i, j| f[(i, j)] * f[(j, i)].conj());
    let scale = jsa.cell_area() / jsa.norm_squared();
    let wc = jsa.grid1().center_omega();
    let axis = jsa.grid1().axis();
    let values = delays
        .par_iter()
        .map(|&tau| {
            let u = DVector::from_iterator(
                n,
                axis.iter()
                    .map(|&w| Complex64::from_polar(1.0, -(w - wc) * tau)),
            );
            let ov = (u.transpose() * (&g * u.conjugate()))[(0, 0)] * scale;
            (0.5 * (1.0 - ov.re)).clamp(0.0, 1.0)
        })
        .collect();
    HomCurve::new(delays.to_vec(), values, CurveKind::Probability)
}

/// Stage displacement (mm) to optical delay (ps), double pass.
pub fn stage_position_to_delay(position_mm: f64) -> f64 {
    2.0 * position_mm / SPEED_OF_LIGHT_MM_PER_PS
}

pub fn delay_to_stage_position(delay_ps: f64) -> f64 {
    delay_ps * SPEED_OF_LIGHT_MM_PER_PS / 2.0
}

/// Closed interval; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

/// Per-parameter bounds for [`fit_interferogram`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitBounds {
    #[serde(rename = "N")]
    pub n: Interval,
    #[serde(rename = "V")]
    pub v: Interval,
    pub delta: Interval,
    pub sigma: Interval,
    pub phi: Interval,
}

impl Default for FitBounds {
    fn default() -> Self {
        Self {
            n: Interval::new(0.0, f64::INFINITY),
            v: Interval::new(0.0, 1.0),
            delta: Interval::new(0.0, f64::INFINITY),
            sigma: Interval::new(0.0, f64::INFINITY),
            phi: Interval::new(f64::NEG_INFINITY, f64::INFINITY),
        }
    }
}

impl FitBounds {
    pub fn get(&self, name: ParamName) -> Interval {
        match name {
            ParamName::N => self.n,
            ParamName::V => self.v,
            ParamName::Delta => self.delta,
            ParamName::Sigma => self.sigma,
            ParamName::Phi => self.phi,
        }
    }

    pub fn set(&mut self, name: ParamName, iv: Interval) {
        match name {
            ParamName::N => self.n = iv,
            ParamName::V => self.v = iv,
            ParamName::Delta => self.delta = iv,
            ParamName::Sigma => self.sigma = iv,
            ParamName::Phi => self.phi = iv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: HomFitParams,
    pub standard_errors: HomFitParams,
    /// 5×5, row-major, in the order N, V, delta, sigma, phi.
    pub covariance: Vec<f64>,
    /// Sum of squared residuals.
    pub residual_sum: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl FitResult {
    pub fn covariance_matrix(&self) -> Matrix5<f64> {
        Matrix5::from_row_slice(&self.covariance)
    }
}

/// Maps an unconstrained variable onto one bounded parameter.
#[derive(Debug, Clone, Copy)]
enum Transform {
    Free,
    Lower(f64),
    Upper(f64),
    Both(f64, f64),
}

impl Transform {
    fn of(iv: Interval) -> Self {
        match (iv.lo.is_finite(), iv.hi.is_finite()) {
            (false, false) => Self::Free,
            (true, false) => Self::Lower(iv.lo),
            (false, true) => Self::Upper(iv.hi),
            (true, true) => Self::Both(iv.lo, iv.hi),
        }
    }

    fn to_natural(self, u: f64) -> f64 {
        match self {
            Self::Free => u,
            Self::Lower(lo) => lo + u.exp(),
            Self::Upper(hi) => hi - u.exp(),
            Self::Both(lo, hi) => lo + (hi - lo) * (1.0 + u.sin()) / 2.0,
        }
    }

    /// `dx/du`.
    fn slope(self, u: f64) -> f64 {
        match self {
            Self::Free => 1.0,
            Self::Lower(_) => u.exp(),
            Self::Upper(_) => -u.exp(),
            Self::Both(lo, hi) => (hi - lo) * u.cos() / 2.0,
        }
    }

    /// Inverse map; points on a bound are pulled slightly inside so the
    /// slope does not start at zero.
    fn to_internal(self, x: f64) -> f64 {
        match self {
            Self::Free => x,
            Self::Lower(lo) => {
                let gap = x - lo;
                gap.max(1e-8 * x.abs().max(1.0)).ln()
            }
            Self::Upper(hi) => {
                let gap = hi - x;
                gap.max(1e-8 * x.abs().max(1.0)).ln()
            }
            Self::Both(lo, hi) => {
                let t = (2.0 * (x - lo) / (hi - lo) - 1.0).clamp(-1.0 + 1e-6, 1.0 - 1e-6);
                t.asin()
            }
        }
    }
}

/// Per-point weights of the least-squares cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Weighting {
    /// Poisson weights for count data, uniform for probabilities.
    #[default]
    Auto,
    Uniform,
    /// Weights `1/model`, refreshed between rounds until the parameters
    /// settle. This is the Poisson maximum-likelihood estimate.
    Poisson,
}

/// Controls for [`fit_interferogram_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Budget shared by all reweighting rounds.
    pub max_iterations: usize,
    pub form: DenominatorForm,
    pub weighting: Weighting,
    /// Converged once an accepted step changes no internal variable by more
    /// than this, relative.
    pub step_tolerance: f64,
    /// Converged once an accepted step lowers the residual sum by less than
    /// this fraction. Matters when a parameter sits on a bound, where the
    /// internal variable keeps creeping.
    pub cost_tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: MAX_ITERATIONS,
            form: DenominatorForm::default(),
            weighting: Weighting::default(),
            step_tolerance: 1e-10,
            cost_tolerance: 1e-10,
        }
    }
}

const MAX_REWEIGHT_ROUNDS: usize = 10;

struct Problem<'a> {
    tau: &'a [f64],
    y: &'a [f64],
    /// √weight per point.
    sqrt_w: DVector<f64>,
    form: DenominatorForm,
    transforms: [Transform; 5],
}

impl Problem<'_> {
    fn natural(&self, u: &Vector5<f64>) -> [f64; 5] {
        std::array::from_fn(|k| self.transforms[k].to_natural(u[k]))
    }

    fn model(&self, x: &[f64; 5]) -> DVector<f64> {
        let p = HomFitParams::from_array(*x);
        DVector::from_iterator(
            self.tau.len(),
            self.tau.iter().map(|&t| pcc_complex(&p, t, self.form).re),
        )
    }

    /// Weighted residuals.
    fn residuals(&self, x: &[f64; 5]) -> DVector<f64> {
        (DVector::from_column_slice(self.y) - self.model(x)).component_mul(&self.sqrt_w)
    }

    /// Central-difference Jacobian of the weighted model in natural
    /// parameters.
    fn jacobian(&self, x: &[f64; 5]) -> DMatrix<f64> {
        let m = self.tau.len();
        let mut j = DMatrix::zeros(m, 5);
        for k in 0..5 {
            let h = 1e-6 * x[k].abs().max(1.0);
            let (mut xp, mut xm) = (*x, *x);
            xp[k] += h;
            xm[k] -= h;
            let col = (self.model(&xp) - self.model(&xm)).component_mul(&self.sqrt_w) / (2.0 * h);
            j.set_column(k, &col);
        }
        j
    }

    fn reweight(&mut self, x: &[f64; 5]) {
        let floor = 1e-3
            * self
                .y
                .iter()
                .cloned()
                .fold(0.0, f64::max)
                .max(f64::MIN_POSITIVE);
        self.sqrt_w = self.model(x).map(|m| 1.0 / m.max(floor).sqrt());
    }
}

fn sse(r: &DVector<f64>) -> f64 {
    r.norm_squared()
}

struct LmOutcome {
    u: Vector5<f64>,
    cost: f64,
    iterations: usize,
    converged: bool,
}

/// Damped Gauss-Newton in the internal variables with the weights held
/// fixed.
fn levenberg_marquardt(
    prob: &Problem,
    mut u: Vector5<f64>,
    opts: &FitOptions,
    budget: usize,
) -> Result<LmOutcome, HomError> {
    let transforms = prob.transforms;
    let mut x = prob.natural(&u);
    let mut r = prob.residuals(&x);
    let mut cost = sse(&r);
    let scale_y = prob
        .y
        .iter()
        .zip(prob.sqrt_w.iter())
        .map(|(v, w)| (v * w).powi(2))
        .sum::<f64>()
        .max(f64::MIN_POSITIVE);

    let mut mu = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    // two-sided parameters that reached a bound; held there while the
    // gradient points outward; a parameter that keeps returning to its bound
    // stays there
    let mut pinned = [false; 5];
    let mut releases = [0u32; 5];
    while iterations < budget {
        iterations += 1;
        let mut jn = prob.jacobian(&x);
        let gn = jn.transpose() * &r;
        let mut released = false;
        for k in 0..5 {
            if pinned[k] && releases[k] < 3 && gn[k] * u[k].signum() < 0.0 {
                pinned[k] = false;
                releases[k] += 1;
                released = true;
                u[k] = u[k].signum() * (FRAC_PI_2 - 1e-3);
            }
        }
        if released {
            x = prob.natural(&u);
            r = prob.residuals(&x);
            cost = sse(&r);
            jn = prob.jacobian(&x);
        }
        let slopes = Vector5::from_fn(|k, _| transforms[k].slope(u[k]));
        let ju = &jn * Matrix5::from_diagonal(&slopes);
        let mut a: Matrix5<f64> = (ju.transpose() * &ju).fixed_view::<5, 5>(0, 0).into_owned();
        let mut g: Vector5<f64> = (ju.transpose() * &r).fixed_rows::<5>(0).into_owned();
        if (0..5).any(|k| !pinned[k] && a[(k, k)] == 0.0) {
            return Err(HomError::SingularJacobian);
        }
        for k in (0..5).filter(|&k| pinned[k]) {
            a.row_mut(k).fill(0.0);
            a.column_mut(k).fill(0.0);
            a[(k, k)] = 1.0;
            g[k] = 0.0;
        }
        let diag_max = (0..5).map(|k| a[(k, k)]).fold(0.0, f64::max);
        let floor = 1e-12 * diag_max.max(f64::MIN_POSITIVE);

        let mut accepted = false;
        while mu < 1e16 {
            let mut lhs = a;
            for k in 0..5 {
                lhs[(k, k)] += mu * a[(k, k)].max(floor);
            }
            let Some(chol) = lhs.cholesky() else {
                mu *= 4.0;
                continue;
            };
            let step = chol.solve(&g);
            let u_new = u + step;
            let cost_new = sse(&prob.residuals(&prob.natural(&u_new)));
            if cost_new.is_finite() && cost_new <= cost {
                let small = (0..5).all(|k| {
                    step[k].abs() <= opts.step_tolerance * (u[k].abs() + opts.step_tolerance)
                });
                let gain = cost - cost_new;
                u = u_new;
                for k in 0..5 {
                    if matches!(transforms[k], Transform::Both(..))
                        && 1.0 - u[k].sin().abs() < 1e-12
                    {
                        u[k] = FRAC_PI_2.copysign(u[k].sin());
                        pinned[k] = true;
                    }
                }
                x = prob.natural(&u);
                r = prob.residuals(&x);
                cost = sse(&r);
                mu = (mu / 3.0).max(1e-15);
                accepted = true;
                if small || gain <= opts.cost_tolerance * cost || cost <= 1e-30 * scale_y {
                    converged = true;
                }
                break;
            }
            mu *= 4.0;
        }
        if !accepted {
            // no descent direction left at working precision
            converged = true;
        }
        if converged {
            break;
        }
    }
    Ok(LmOutcome {
        u,
        cost,
        iterations,
        converged,
    })
}

/// Fits the analytic model to `data` by bounded Levenberg-Marquardt.
pub fn fit_interferogram(
    data: &HomCurve,
    init: HomFitParams,
    bounds: &FitBounds,
) -> Result<FitResult, HomError> {
    fit_interferogram_with(data, init, bounds, FitOptions::default())
}

pub fn fit_interferogram_with(
    data: &HomCurve,
    init: HomFitParams,
    bounds: &FitBounds,
    opts: FitOptions,
) -> Result<FitResult, HomError> {
    let m = data.len();
    if m < MIN_FIT_POINTS {
        return Err(HomError::TooFewPoints(m));
    }
    for name in ParamName::ALL {
        let iv = bounds.get(name);
        let value = init.get(name);
        if !value.is_finite() || !iv.contains(value) {
            return Err(HomError::InitOutOfBounds {
                name,
                value,
                lo: iv.lo,
                hi: iv.hi,
            });
        }
    }
    let transforms: [Transform; 5] =
        std::array::from_fn(|k| Transform::of(bounds.get(ParamName::ALL[k])));
    let poisson = match opts.weighting {
        Weighting::Auto => data.kind == CurveKind::Counts,
        Weighting::Uniform => false,
        Weighting::Poisson => true,
    };
    let mut prob = Problem {
        tau: &data.delays,
        y: &data.values,
        sqrt_w: DVector::from_element(m, 1.0),
        form: opts.form,
        transforms,
    };
    let x0 = init.to_array();
    let mut u = Vector5::from_fn(|k, _| transforms[k].to_internal(x0[k]));
    let mut iterations = 0;
    let mut converged = false;
    let mut cost = 0.0;
    let rounds = if poisson { MAX_REWEIGHT_ROUNDS } else { 1 };
    for round in 0..rounds {
        if poisson {
            // first round weights from the starting point
            prob.reweight(&prob.natural(&u));
        }
        let before = prob.natural(&u);
        let out = levenberg_marquardt(&prob, u, &opts, opts.max_iterations - iterations)?;
        iterations += out.iterations;
        u = out.u;
        cost = out.cost;
        converged = out.converged;
        if !converged || iterations >= opts.max_iterations {
            break;
        }
        let after = prob.natural(&u);
        let settled =
            (0..5).all(|k| (after[k] - before[k]).abs() <= 1e-8 * after[k].abs().max(1.0));
        if round > 0 && settled {
            break;
        }
    }

    let x = prob.natural(&u);
    let jn = prob.jacobian(&x);
    let jtj: Matrix5<f64> = (jn.transpose() * &jn).fixed_view::<5, 5>(0, 0).into_owned();
    let inv = jtj.try_inverse().ok_or(HomError::SingularJacobian)?;
    if (0..5).any(|k| !(inv[(k, k)] >= 0.0) || !inv[(k, k)].is_finite()) {
        return Err(HomError::SingularJacobian);
    }
    let dof = m.saturating_sub(5).max(1) as f64;
    let cov = inv * (cost / dof);
    let cov = (cov + cov.transpose()) * 0.5;
    let mut params = HomFitParams::from_array(x);
    if matches!(transforms[ParamName::Phi.index()], Transform::Free) {
        params.phi = params.phi.rem_euclid(TAU);
    }
    let standard_errors =
        HomFitParams::from_array(std::array::from_fn(|k| cov[(k, k)].max(0.0).sqrt()));
    let covariance = cov.transpose().iter().copied().collect();
    // residual sum reported unweighted
    let raw = DVector::from_column_slice(&data.values) - prob.model(&x);
    let result = FitResult {
        params,
        standard_errors,
        covariance,
        residual_sum: if poisson { raw.norm_squared() } else { cost },
        converged,
        iterations,
    };
    if converged {
        Ok(result)
    } else {
        Err(HomError::NoConvergence(Box::new(result)))
    }
}

/// Data-driven starting point for [`fit_interferogram`].
///
/// `N` is twice the mean of the outer 20% of delays. `σ` comes from the rms
/// delay of the squared fringe signal, `δ` from the centroid of the fringe
/// power spectrum around its peak, and `φ` from a coarse scan.
pub fn initial_guess(data: &HomCurve) -> Result<HomFitParams, HomError> {
    let m = data.len();
    if m < MIN_FIT_POINTS {
        return Err(HomError::TooFewPoints(m));
    }
    let (tau, y) = (&data.delays, &data.values);
    let center = 0.5 * (tau[0] + tau[m - 1]);
    let mut by_dist: Vec<usize> = (0..m).collect();
    by_dist.sort_by(|&a, &b| (tau[b] - center).abs().total_cmp(&(tau[a] - center).abs()));
    let outer = &by_dist[..(m / 5).max(2)];
    let base = outer.iter().map(|&k| y[k]).sum::<f64>() / outer.len() as f64;
    let n0 = (2.0 * base).max(f64::MIN_POSITIVE);
    let noise = outer.iter().map(|&k| (y[k] - base).powi(2)).sum::<f64>() / outer.len() as f64;

    // envelope (σ²τ²−2)e^{−σ²τ²/4}: its square has ⟨σ²τ²⟩ = 7/3
    let dev: Vec<f64> = y.iter().map(|v| v - base).collect();
    let w: Vec<f64> = dev.iter().map(|d| (d * d - noise).max(0.0)).collect();
    let wsum: f64 = w.iter().sum();
    let sigma0 = if wsum > 0.0 {
        let t0 = tau.iter().zip(&w).map(|(t, w)| t * w).sum::<f64>() / wsum;
        let var = tau
            .iter()
            .zip(&w)
            .map(|(t, w)| (t - t0).powi(2) * w)
            .sum::<f64>()
            / wsum;
        (7.0 / 3.0 / var.max(f64::MIN_POSITIVE)).sqrt()
    } else {
        1.0
    };

    // fringe power spectrum; the envelope has zero mean, so the spectrum is
    // split around δ and the centroid rather than the peak estimates it
    let min_dt = tau
        .windows(2)
        .map(|p| p[1] - p[0])
        .fold(f64::INFINITY, f64::min);
    let w_max = PI / min_dt;
    let n_freq = 4096;
    let freqs: Vec<f64> = (1..=n_freq)
        .map(|k| w_max * k as f64 / n_freq as f64)
        .collect();
    let power: Vec<f64> = freqs
        .iter()
        .map(|&om| {
            let z: Complex64 = tau
                .iter()
                .zip(&dev)
                .map(|(&t, &d)| d * Complex64::from_polar(1.0, -om * t))
                .sum();
            z.norm_sqr()
        })
        .collect();
    let peak = power
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| freqs[k])
        .unwrap_or(1.0);
    let mut delta0 = peak;
    for _ in 0..4 {
        let half = 3.0 * sigma0;
        let (mut s0, mut s1) = (0.0, 0.0);
        for (&om, &p) in freqs.iter().zip(&power) {
            if (om - delta0).abs() <= half {
                s0 += p;
                s1 += p * om;
            }
        }
        if s0 > 0.0 {
            delta0 = s1 / s0;
        }
    }

    let mut best = HomFitParams::new(n0, 0.9, delta0, sigma0, 0.0);
    let mut best_cost = f64::INFINITY;
    for k in 0..16 {
        let cand = HomFitParams {
            phi: TAU * k as f64 / 16.0,
            ..best
        };
        let cost: f64 = tau
            .iter()
            .zip(y)
            .map(|(&t, &v)| (v - pcc_complex(&cand, t, DenominatorForm::Printed).re).powi(2))
            .sum();
        if cost < best_cost {
            best_cost = cost;
            best = cand;
        }
    }
    Ok(best)
}

/// Poisson draws around `expected` counts, seeded per `(seed, index)`.
pub fn sample_counts(expected: &[f64], seed: u64, index: u64) -> Result<Vec<f64>, HomError> {
    let mut rng = crate::seed::chunk_rng(seed, crate::seed::streams::SYNTHETIC_HOM, index);
    expected
        .iter()
        .map(|&m| {
            if m == 0.0 {
                return Ok(0.0);
            }
            rand_distr::Poisson::new(m)
                .map(|d| rand_distr::Distribution::sample(&d, &mut rng))
                .map_err(|_| HomError::InvalidParameter {
                    field: "expected counts",
                    value: m,
                    reason: "must be finite and non-negative",
                })
        })
        .collect()
}

/// Lower and upper curves of a Poissonian confidence band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceBand {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// `model ± k·√(expected counts)`, where `total_counts` is shared across the
/// delays in proportion to the model; returned in model units.
pub fn confidence_band(
    model: &HomFitParams,
    delays: &[f64],
    total_counts: u64,
    k_sigma: f64,
) -> Result<ConfidenceBand, HomError> {
    if total_counts == 0 {
        return Err(HomError::InvalidParameter {
            field: "total_counts",
            value: 0.0,
            reason: "must be positive",
        });
    }
    if !(k_sigma >= 0.0) || !k_sigma.is_finite() {
        return Err(HomError::InvalidParameter {
            field: "k_sigma",
            value: k_sigma,
            reason: "must be non-negative",
        });
    }
    let curve = pcc_curve(model, delays)?;
    let sum: f64 = curve.iter().sum();
    let to_counts = total_counts as f64 / sum;
    let (lower, upper) = curve
        .iter()
        .map(|&mv| {
            let half = k_sigma * (mv * to_counts).max(0.0).sqrt() / to_counts;
            (mv - half, mv + half)
        })
        .unzip();
    Ok(ConfidenceBand { lower, upper })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::spectral::{ideal_hyperentangled, StateConfig};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Poisson};

    fn nominal(phi: f64) -> HomFitParams {
        let (delta, sigma) = StateConfig::default().nominal_bins();
        HomFitParams::new(1.0, 1.0, delta, sigma, phi)
    }

    fn sweep(n: usize, lim: f64) -> Vec<f64> {
        (0..n)
            .map(|k| -lim + 2.0 * lim * k as f64 / (n - 1) as f64)
            .collect()
    }

    /// Brute-force double sum of the overlap integral, no factorization.
    fn overlap_direct(jsa: &JsaMatrix, tau: f64) -> f64 {
        let f = jsa.amplitudes();
        let ax = jsa.grid1().axis();
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..ax.len() {
            for j in 0..ax.len() {
                acc += f[(i, j)]
                    * f[(j, i)].conj()
                    * Complex64::from_polar(1.0, -(ax[i] - ax[j]) * tau);
            }
        }
        0.5 * (1.0 - (acc * jsa.cell_area()).re)
    }

    #[test]
    fn baseline_far_from_zero_delay() {
        for phi in [0.0, 1.0, PI] {
            let p = HomFitParams {
                n: 7.0,
                ..nominal(phi)
            };
            let tau = 11.0 / p.sigma;
            assert!((pcc_analytic(&p, tau).unwrap() - 3.5).abs() < 1e-6 * 7.0);
            assert!((pcc_analytic(&p, -tau).unwrap() - 3.5).abs() < 1e-6 * 7.0);
        }
    }

    #[test]
    fn zero_and_pi_give_antibunching_and_bunching() {
        let p0 = pcc_analytic(&nominal(0.0), 0.0).unwrap();
        let ppi = pcc_analytic(&nominal(PI), 0.0).unwrap();
        assert!((p0 - 1.0).abs() < 1e-9, "{p0}");
        assert!(ppi.abs() < 1e-9, "{ppi}");
    }

    #[test]
    fn even_only_for_real_states() {
        let taus = sweep(161, 8.0);
        for phi in [0.0, PI] {
            for &t in &taus {
                let a = pcc_analytic(&nominal(phi), t).unwrap();
                let b = pcc_analytic(&nominal(phi), -t).unwrap();
                assert!((a - b).abs() < 1e-9);
            }
        }
        // otherwise reversing the delay is the same as conjugating the phase
        let mut asym: f64 = 0.0;
        for phi in [0.4, PI / 2.0, 1.5 * PI] {
            for &t in &taus {
                let a = pcc_analytic(&nominal(phi), t).unwrap();
                let b = pcc_analytic(&nominal(-phi), -t).unwrap();
                assert!((a - b).abs() < 1e-9);
                asym = asym.max((a - pcc_analytic(&nominal(phi), -t).unwrap()).abs());
            }
        }
        assert!(asym > 0.1);
    }

    #[test]
    fn denominator_forms_agree_at_nominal_parameters() {
        for phi in [0.3, 1.0, 2.0, 4.0] {
            for t in sweep(41, 8.0) {
                let a = pcc_analytic_with(&nominal(phi), t, DenominatorForm::Printed).unwrap();
                let b = pcc_analytic_with(&nominal(phi), t, DenominatorForm::Overlap).unwrap();
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn overlap_form_is_exact_for_gaussian_bins_at_any_separation() {
        // small δ/σ, where the two forms separate
        let g = make_grid(1550.0, 60.0, 384).unwrap();
        for phi in [0.0, 0.7, PI / 2.0, 2.2] {
            let (delta, sigma) = (2.0, 1.0);
            let jsa = ideal_hyperentangled(&g, delta, sigma, phi).unwrap();
            let taus = sweep(33, 8.0);
            let curve = hom_from_jsa(&jsa, &taus).unwrap();
            let p = HomFitParams::new(1.0, 1.0, delta, sigma, phi);
            for (t, v) in taus.iter().zip(&curve.values) {
                let want = pcc_analytic_with(&p, *t, DenominatorForm::Overlap).unwrap();
                assert!((v - want).abs() < 1e-6, "phi {phi} tau {t}: {v} vs {want}");
            }
        }
    }

    #[test]
    fn oracle_agreement_on_ideal_state() {
        let g = make_grid(1550.0, 36.0, 256).unwrap();
        let taus = sweep(81, 8.0);
        for phi in [0.0, PI / 2.0, PI, 1.5 * PI] {
            let p = nominal(phi);
            let jsa = ideal_hyperentangled(&g, p.delta, p.sigma, phi).unwrap();
            let curve = hom_from_jsa(&jsa, &taus).unwrap();
            let err = taus
                .iter()
                .zip(&curve.values)
                .map(|(t, v)| (v - pcc_analytic(&p, *t).unwrap()).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-6, "{phi}: {err}");
        }
    }

    #[test]
    fn factorized_overlap_matches_direct_sum() {
        let g = make_grid(1550.0, 36.0, 64).unwrap();
        let jsa = StateConfig::default()
            .with_phase(0.8)
            .synthesize(&g)
            .unwrap();
        let taus = [-3.1, -0.4, 0.0, 0.9, 5.5];
        let curve = hom_from_jsa(&jsa, &taus).unwrap();
        for (t, v) in taus.iter().zip(&curve.values) {
            assert!((v - overlap_direct(&jsa, *t)).abs() < 1e-12);
        }
    }

    #[test]
    fn exchange_symmetry_sets_zero_delay_value() {
        let g = make_grid(1550.0, 36.0, 128).unwrap();
        let anti = StateConfig::default().synthesize(&g).unwrap();
        let sym = StateConfig::default()
            .with_phase(PI)
            .synthesize(&g)
            .unwrap();
        // the grid step aliases delays beyond 2π/step ≈ 28 ps
        let a = hom_from_jsa(&anti, &[0.0, 12.0]).unwrap();
        let s = hom_from_jsa(&sym, &[0.0, 12.0]).unwrap();
        assert!((a.values[0] - 1.0).abs() < 1e-6);
        assert!(s.values[0].abs() < 1e-6);
        assert!((a.values[1] - 0.5).abs() < 1e-6 && (s.values[1] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn separable_gaussian_gives_standard_dip() {
        // f = G(ω₁)G(ω₂) with G ∝ e^{−(ω−ω_c)²/(2s²)}: p(τ) = ½(1 − e^{−s²τ²/2})
        let g = make_grid(1550.0, 36.0, 200).unwrap();
        let s = 1.3;
        let wc = g.center_omega();
        let amp: Vec<f64> = g
            .axis()
            .iter()
            .map(|w| (-(w - wc).powi(2) / (2.0 * s * s)).exp())
            .collect();
        let m = DMatrix::from_fn(200, 200, |i, j| Complex64::new(amp[i] * amp[j], 0.0));
        let jsa = JsaMatrix::new_normalized(g.clone(), g.clone(), m).unwrap();
        let taus = sweep(41, 4.0);
        let curve = hom_from_jsa(&jsa, &taus).unwrap();
        for (t, v) in taus.iter().zip(&curve.values) {
            let want = 0.5 * (1.0 - (-(s * t).powi(2) / 2.0).exp());
            assert!((v - want).abs() < 1e-9);
        }
    }

    #[test]
    fn non_square_grid_rejected() {
        let g1 = make_grid(1550.0, 20.0, 16).unwrap();
        let g2 = make_grid(1550.0, 20.0, 17).unwrap();
        let m = DMatrix::from_element(16, 17, Complex64::new(1.0, 0.0));
        let jsa = JsaMatrix::new_normalized(g1, g2, m).unwrap();
        assert_eq!(hom_from_jsa(&jsa, &[0.0]), Err(HomError::NonSquareGrid));
    }

    #[test]
    fn invalid_params_and_curves() {
        let mut p = nominal(0.0);
        p.v = 1.2;
        assert!(matches!(
            pcc_analytic(&p, 0.0),
            Err(HomError::InvalidParameter { field: "V", .. })
        ));
        assert!(HomCurve::new(vec![0.0, 0.0], vec![1.0, 1.0], CurveKind::Counts).is_err());
        assert!(HomCurve::new(vec![0.0, 1.0], vec![1.0, -1.0], CurveKind::Counts).is_err());
    }

    #[test]
    fn stage_conversion_round_trip() {
        assert!((stage_position_to_delay(0.15) - 1.000692285).abs() < 1e-8);
        assert!((delay_to_stage_position(stage_position_to_delay(0.37)) - 0.37).abs() < 1e-15);
    }

    fn synthetic(truth: &HomFitParams, taus: &[f64], rng: Option<&mut ChaCha8Rng>) -> HomCurve {
        let clean = pcc_curve(truth, taus).unwrap();
        let values = match rng {
            None => clean,
            Some(rng) => clean
                .iter()
                .map(|&m| Poisson::new(m.max(1e-9)).unwrap().sample(rng))
                .collect(),
        };
        HomCurve::new(taus.to_vec(), values, CurveKind::Counts).unwrap()
    }

    #[test]
    fn noiseless_round_trip_from_perturbed_start() {
        let taus = sweep(100, 8.0);
        for phi in [0.3, PI / 2.0, 2.9, 4.6] {
            let truth = HomFitParams {
                n: 1000.0,
                v: 0.84,
                ..nominal(phi)
            };
            let data = synthetic(&truth, &taus, None);
            let init = HomFitParams::from_array(truth.to_array().map(|x| x * 1.1));
            let fit = fit_interferogram(&data, init, &FitBounds::default()).unwrap();
            assert!(fit.converged);
            for (a, b) in fit.params.to_array().iter().zip(truth.to_array()) {
                assert!(
                    (a - b).abs() <= 1e-6 * b.abs(),
                    "{:?} vs {:?}",
                    fit.params,
                    truth
                );
            }
        }
    }

    #[test]
    fn noisy_fit_from_data_driven_start() {
        let taus = sweep(100, 8.0);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for phi in [0.0, PI / 2.0, PI, 1.5 * PI] {
            let truth = HomFitParams {
                n: 1000.0,
                ..nominal(phi)
            };
            let data = synthetic(&truth, &taus, Some(&mut rng));
            let init = initial_guess(&data).unwrap();
            let fit = fit_interferogram(&data, init, &FitBounds::default()).unwrap();
            let p = fit.params;
            assert!((p.delta - truth.delta).abs() < 0.05 * truth.delta, "{p:?}");
            assert!((p.sigma - truth.sigma).abs() < 0.15 * truth.sigma, "{p:?}");
            let dphi = (p.phi - phi + PI).rem_euclid(TAU) - PI;
            assert!(
                dphi.abs() < 3.0 * fit.standard_errors.phi,
                "{p:?} {:?}",
                fit.standard_errors
            );
            let cov = fit.covariance_matrix();
            assert!((cov - cov.transpose()).abs().max() < 1e-12 * cov.abs().max());
            assert!(cov
                .symmetric_eigenvalues()
                .iter()
                .all(|&e| e >= -1e-12 * cov.abs().max()));
        }
    }

    #[test]
    fn standard_errors_scale_with_counts() {
        let taus = sweep(100, 8.0);
        let mut mean_rel = [0.0; 2];
        for (slot, n) in [(0, 1000.0), (1, 4000.0)] {
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let reps = 20;
            for _ in 0..reps {
                let truth = HomFitParams { n, ..nominal(1.0) };
                let data = synthetic(&truth, &taus, Some(&mut rng));
                let fit = fit_interferogram(&data, truth, &FitBounds::default()).unwrap();
                mean_rel[slot] += fit.standard_errors.delta / reps as f64;
            }
        }
        let ratio = mean_rel[0] / mean_rel[1];
        assert!((ratio - 2.0).abs() < 0.4, "{ratio}");
    }

    #[test]
    fn rejects_bad_fit_inputs() {
        let taus = sweep(8, 8.0);
        let data = synthetic(&nominal(0.0), &taus, None);
        assert_eq!(
            fit_interferogram(&data, nominal(0.0), &FitBounds::default()),
            Err(HomError::TooFewPoints(8))
        );
        let data = synthetic(&nominal(0.0), &sweep(40, 8.0), None);
        let mut init = nominal(0.0);
        init.v = 1.5;
        assert!(matches!(
            fit_interferogram(&data, init, &FitBounds::default()),
            Err(HomError::InitOutOfBounds {
                name: ParamName::V,
                ..
            })
        ));
        // a flat curve cannot determine the fringe parameters
        let flat = HomCurve::new(sweep(40, 8.0), vec![5.0; 40], CurveKind::Counts).unwrap();
        let init = HomFitParams {
            v: 0.0,
            ..nominal(0.0)
        };
        assert_eq!(
            fit_interferogram(&flat, init, &FitBounds::default()),
            Err(HomError::SingularJacobian)
        );
    }

    #[test]
    fn iteration_cap_reports_partial_result() {
        let taus = sweep(60, 8.0);
        let truth = HomFitParams {
            n: 100.0,
            ..nominal(1.0)
        };
        let data = synthetic(&truth, &taus, None);
        let init = HomFitParams {
            delta: truth.delta * 1.2,
            ..truth
        };
        let opts = FitOptions {
            max_iterations: 1,
            ..FitOptions::default()
        };
        match fit_interferogram_with(&data, init, &FitBounds::default(), opts) {
            Err(HomError::NoConvergence(r)) => assert_eq!(r.iterations, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn confidence_band_basics() {
        let p = HomFitParams {
            n: 200.0,
            ..nominal(0.0)
        };
        let taus = sweep(50, 8.0);
        let curve = pcc_curve(&p, &taus).unwrap();
        let b0 = confidence_band(&p, &taus, 10_000, 0.0).unwrap();
        assert_eq!(b0.lower, curve);
        assert_eq!(b0.upper, curve);
        // total equal to the curve sum: model already in counts
        let total: f64 = curve.iter().sum();
        let b3 = confidence_band(&p, &taus, total.round() as u64, 3.0).unwrap();
        for (k, &c) in curve.iter().enumerate() {
            let scale = total / total.round();
            let want = 3.0 * (c / scale).sqrt() * scale;
            assert!((b3.upper[k] - c - want).abs() < 1e-9);
        }
        assert!(confidence_band(&p, &taus, 0, 3.0).is_err());
    }

    #[test]
    fn hundred_expected_counts_give_thirty_count_band() {
        // y is flat at 100 counts far from zero delay
        let p = HomFitParams {
            n: 200.0,
            ..nominal(0.0)
        };
        let taus = [-60.0, -50.0, 50.0, 60.0];
        let b = confidence_band(&p, &taus, 400, 3.0).unwrap();
        for k in 0..4 {
            assert!((b.upper[k] - 100.0 - 30.0).abs() < 1e-6);
            assert!((100.0 - b.lower[k] - 30.0).abs() < 1e-6);
        }
    }

    #[test]
    fn poisson_coverage_of_three_sigma_band() {
        let p = HomFitParams {
            n: 1000.0,
            ..nominal(PI / 2.0)
        };
        let taus = sweep(100, 8.0);
        let curve = pcc_curve(&p, &taus).unwrap();
        let total: f64 = curve.iter().sum();
        let band = confidence_band(&p, &taus, total.round() as u64, 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (mut inside, mut all) = (0usize, 0usize);
        for _ in 0..200 {
            for (k, &c) in curve.iter().enumerate() {
                let x: f64 = Poisson::new(c).unwrap().sample(&mut rng);
                inside += (x >= band.lower[k] && x <= band.upper[k]) as usize;
                all += 1;
            }
        }
        assert!(inside as f64 >= 0.99 * all as f64, "{inside}/{all}");
    }

    #[test]
    fn param_names_parse() {
        for name in ParamName::ALL {
            assert_eq!(name.as_str().parse::<ParamName>().unwrap(), name);
        }
        assert!("gamma".parse::<ParamName>().is_err());
        let json = serde_json::to_string(&nominal(0.0)).unwrap();
        assert!(json.contains("\"N\"") && json.contains("\"V\""));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn model_is_a_probability(
            phi in 0.0f64..TAU,
            v in 0.0f64..=1.0,
            tau in -10.0f64..10.0,
            ratio in 0.5f64..12.0,
        ) {
            let sigma = 1.2;
            let p = HomFitParams::new(1.0, v, ratio * sigma, sigma, phi);
            let x = pcc_analytic_with(&p, tau, DenominatorForm::Overlap).unwrap();
            prop_assert!((-1e-9..=1.0 + 1e-9).contains(&x));
            let x = pcc_analytic(&p, tau).unwrap();
            let y = pcc_analytic(&HomFitParams { phi: -phi, ..p }, -tau).unwrap();
            prop_assert!((x - y).abs() < 1e-9);
        }
    }
}
