//! Time-of-flight spectrometer: photon pairs drawn from a JSI are delayed in
//! proportion to wavelength by dispersive fiber, time-tagged with detector
//! jitter within each pump period, paired into coincidences and histogrammed
//! back into a wavelength-resolved JSI.
//!
//! Pair `k` is emitted by pump pulse `k`. Randomness is drawn in fixed chunks
//! of pairs (see [`crate::seed`]), so every result is a function of the seed
//! and configuration only.

use crate::jsa::JsiMatrix;
use crate::seed::{chunk_rng, streams, CHUNK_SIZE};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// FWHM of a Gaussian divided by its standard deviation.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TofsError {
    #[error("invalid {field} = {value}: {reason}")]
    InvalidConfig {
        field: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("intensity distribution has no mass")]
    EmptyDistribution,
    #[error("histogram holds no coincidences")]
    EmptyHistogram,
    #[error("malformed event stream: {0}")]
    InvalidEvents(&'static str),
}

/// Spectrometer and detection settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TofsConfig {
    /// ps/nm/km
    #[serde(default = "defaults::dispersion")]
    pub dispersion: f64,
    /// km
    #[serde(default = "defaults::fiber_length")]
    pub fiber_length: f64,
    /// ps, per detector; zero disables jitter.
    #[serde(default = "defaults::jitter_fwhm")]
    pub jitter_fwhm: f64,
    /// ns
    #[serde(default = "defaults::repetition_period")]
    pub repetition_period: f64,
    /// nm; maps to zero delay.
    #[serde(default = "defaults::reference_wavelength")]
    pub reference_wavelength: f64,
    /// ps
    #[serde(default = "defaults::timing_resolution")]
    pub timing_resolution: f64,
    #[serde(default = "defaults::histogram_bins")]
    pub histogram_bins: usize,
    /// ps
    #[serde(default = "defaults::histogram_bin_width")]
    pub histogram_bin_width: f64,
    /// dB per arm, applied as independent survival per photon.
    #[serde(default)]
    pub loss_db: f64,
}

mod defaults {
    pub fn dispersion() -> f64 {
        20.0
    }
    pub fn fiber_length() -> f64 {
        20.0
    }
    pub fn jitter_fwhm() -> f64 {
        50.0
    }
    pub fn repetition_period() -> f64 {
        12.5
    }
    pub fn reference_wavelength() -> f64 {
        1540.0
    }
    pub fn timing_resolution() -> f64 {
        1.0
    }
    pub fn histogram_bins() -> usize {
        320
    }
    pub fn histogram_bin_width() -> f64 {
        25.0
    }
}

impl Default for TofsConfig {
    fn default() -> Self {
        Self {
            dispersion: defaults::dispersion(),
            fiber_length: defaults::fiber_length(),
            jitter_fwhm: defaults::jitter_fwhm(),
            repetition_period: defaults::repetition_period(),
            reference_wavelength: defaults::reference_wavelength(),
            timing_resolution: defaults::timing_resolution(),
            histogram_bins: defaults::histogram_bins(),
            histogram_bin_width: defaults::histogram_bin_width(),
            loss_db: 0.0,
        }
    }
}

impl TofsConfig {
    pub fn validate(&self) -> Result<(), TofsError> {
        let bad = |field, value, reason| {
            Err(TofsError::InvalidConfig {
                field,
                value,
                reason,
            })
        };
        for (field, v) in [
            ("tofs.dispersion", self.dispersion),
            ("tofs.fiber_length", self.fiber_length),
            ("tofs.repetition_period", self.repetition_period),
            ("tofs.reference_wavelength", self.reference_wavelength),
            ("tofs.timing_resolution", self.timing_resolution),
            ("tofs.histogram_bin_width", self.histogram_bin_width),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return bad(field, v, "must be positive");
            }
        }
        if !(self.jitter_fwhm >= 0.0) || !self.jitter_fwhm.is_finite() {
            return bad("tofs.jitter_fwhm", self.jitter_fwhm, "must be non-negative");
        }
        if !(self.loss_db >= 0.0) || !self.loss_db.is_finite() {
            return bad("tofs.loss_db", self.loss_db, "must be non-negative");
        }
        if self.histogram_bins == 0 {
            return bad("tofs.histogram_bins", 0.0, "must be positive");
        }
        let ticks = self.period_ps() / self.timing_resolution;
        if (ticks - ticks.round()).abs() > 1e-9 * ticks || ticks.round() < 1.0 {
            return bad(
                "tofs.timing_resolution",
                self.timing_resolution,
                "must divide the repetition period",
            );
        }
        Ok(())
    }

    /// Total dispersion `D·L`, ps/nm.
    pub fn ps_per_nm(&self) -> f64 {
        self.dispersion * self.fiber_length
    }

    pub fn period_ps(&self) -> f64 {
        self.repetition_period * 1000.0
    }

    /// Repetition period in timing-resolution ticks.
    pub fn period_ticks(&self) -> u64 {
        (self.period_ps() / self.timing_resolution).round() as u64
    }

    /// Wavelength range that fits into one repetition period.
    pub fn implied_range_nm(&self) -> f64 {
        self.period_ps() / self.ps_per_nm()
    }

    pub fn survival_probability(&self) -> f64 {
        10f64.powf(-self.loss_db / 10.0)
    }

    /// `Some(message)` when a spectrum spanning `span_nm` is longer in time
    /// than one period, so that delays fold onto each other.
    pub fn aliasing_warning(&self, span_nm: f64) -> Option<String> {
        let spread = self.ps_per_nm() * span_nm;
        (spread >= self.period_ps()).then(|| {
            format!(
                "spectral span {span_nm} nm disperses to {spread} ps, beyond the {} ps \
                 repetition period; only {:.3} nm fit without wrapping",
                self.period_ps(),
                self.implied_range_nm()
            )
        })
    }

    pub fn histogram_spec(&self) -> HistogramSpec {
        HistogramSpec {
            bins: self.histogram_bins,
            bin_width: self.histogram_bin_width,
            origin: [0.0; 2],
        }
    }
}

/// Linear dispersion: `Δt = D·L·(λ − λ_ref)`, ps.
pub fn wavelength_to_delay(lambda_nm: f64, cfg: &TofsConfig) -> f64 {
    cfg.ps_per_nm() * (lambda_nm - cfg.reference_wavelength)
}

/// Inverse of [`wavelength_to_delay`].
pub fn delay_to_wavelength(delay_ps: f64, cfg: &TofsConfig) -> f64 {
    cfg.reference_wavelength + delay_ps / cfg.ps_per_nm()
}

/// One detection. `tick` counts timing-resolution units since the first
/// pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TimetagEvent {
    pub tick: u64,
    /// 1 or 2.
    pub channel: u8,
}

impl TimetagEvent {
    pub fn time_ps(&self, cfg: &TofsConfig) -> f64 {
        self.tick as f64 * cfg.timing_resolution
    }
}

/// Cell-index sampler over a JSI, with uniform jitter inside each cell's
/// wavelength interval.
pub struct PairSampler {
    alias: WeightedAliasIndex<f64>,
    cols: usize,
    bounds1: Vec<(f64, f64)>,
    bounds2: Vec<(f64, f64)>,
}

impl PairSampler {
    pub fn new(jsi: &JsiMatrix) -> Result<Self, TofsError> {
        let (n1, n2) = jsi.shape();
        let v = jsi.values();
        // row-major order so the index splits as (row, col)
        let weights: Vec<f64> = (0..n1)
            .flat_map(|i| (0..n2).map(move |j| v[(i, j)]))
            .collect();
        if !weights.iter().any(|&w| w > 0.0) {
            return Err(TofsError::EmptyDistribution);
        }
        let alias = WeightedAliasIndex::new(weights).map_err(|_| TofsError::EmptyDistribution)?;
        Ok(Self {
            alias,
            cols: n2,
            bounds1: (0..n1)
                .map(|k| jsi.grid1().cell_wavelength_bounds(k))
                .collect(),
            bounds2: (0..n2)
                .map(|k| jsi.grid2().cell_wavelength_bounds(k))
                .collect(),
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let k = self.alias.sample(rng);
        let (i, j) = (k / self.cols, k % self.cols);
        let (a1, b1) = self.bounds1[i];
        let (a2, b2) = self.bounds2[j];
        let u1: f64 = rng.random();
        let u2: f64 = rng.random();
        (a1 + (b1 - a1) * u1, a2 + (b2 - a2) * u2)
    }

    fn fill(&self, out: &mut [(f64, f64)], seed: u64, chunk: u64) {
        let mut rng = chunk_rng(seed, streams::PAIR_SAMPLING, chunk);
        for slot in out {
            *slot = self.sample(&mut rng);
        }
    }
}

/// `n` independent `(λ₁, λ₂)` draws in nm from the intensity distribution.
pub fn sample_pairs(jsi: &JsiMatrix, n: usize, seed: u64) -> Result<Vec<(f64, f64)>, TofsError> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let sampler = PairSampler::new(jsi)?;
    let mut out = vec![(0.0, 0.0); n];
    out.par_chunks_mut(CHUNK_SIZE)
        .enumerate()
        .for_each(|(c, chunk)| sampler.fill(chunk, seed, c as u64));
    Ok(out)
}

/// Per-photon detection model shared by the list and streaming paths.
struct Detector {
    ps_per_nm: f64,
    reference: f64,
    period_ps: f64,
    period_ticks: u64,
    resolution: f64,
    jitter: Option<Normal<f64>>,
    survival: f64,
}

impl Detector {
    fn new(cfg: &TofsConfig) -> Result<Self, TofsError> {
        cfg.validate()?;
        let sigma = cfg.jitter_fwhm / FWHM_PER_SIGMA;
        Ok(Self {
            ps_per_nm: cfg.ps_per_nm(),
            reference: cfg.reference_wavelength,
            period_ps: cfg.period_ps(),
            period_ticks: cfg.period_ticks(),
            resolution: cfg.timing_resolution,
            jitter: (sigma > 0.0).then(|| Normal::new(0.0, sigma).expect("finite sigma")),
            survival: cfg.survival_probability(),
        })
    }

    /// Tick of a photon of wavelength `lambda` from pulse `pulse`.
    fn detect<R: Rng + ?Sized>(&self, lambda: f64, pulse: u64, rng: &mut R) -> Option<u64> {
        let survives = self.survival >= 1.0 || rng.random::<f64>() < self.survival;
        let noise = self.jitter.map_or(0.0, |j| j.sample(rng));
        if !survives {
            return None;
        }
        let t = self.ps_per_nm * (lambda - self.reference) + noise;
        let offset = t.rem_euclid(self.period_ps);
        let mut tick = (offset / self.resolution).round() as u64;
        if tick >= self.period_ticks {
            tick -= self.period_ticks;
        }
        Some(pulse * self.period_ticks + tick)
    }

    fn chunk_events(
        &self,
        pairs: &[(f64, f64)],
        first_pulse: u64,
        seed: u64,
        chunk: u64,
    ) -> Vec<TimetagEvent> {
        let mut rng = chunk_rng(seed, streams::TIMETAGS, chunk);
        let mut out = Vec::with_capacity(2 * pairs.len());
        for (k, &(l1, l2)) in pairs.iter().enumerate() {
            let pulse = first_pulse + k as u64;
            if let Some(tick) = self.detect(l1, pulse, &mut rng) {
                out.push(TimetagEvent { tick, channel: 1 });
            }
            if let Some(tick) = self.detect(l2, pulse, &mut rng) {
                out.push(TimetagEvent { tick, channel: 2 });
            }
        }
        out.sort_unstable();
        out
    }
}

/// Time-sorted detections for `pairs`, pair `k` emitted by pulse `k`.
pub fn simulate_timetags(
    pairs: &[(f64, f64)],
    cfg: &TofsConfig,
    seed: u64,
) -> Result<Vec<TimetagEvent>, TofsError> {
    let det = Detector::new(cfg)?;
    let parts: Vec<Vec<TimetagEvent>> = pairs
        .par_chunks(CHUNK_SIZE)
        .enumerate()
        .map(|(c, chunk)| det.chunk_events(chunk, (c * CHUNK_SIZE) as u64, seed, c as u64))
        .collect();
    // chunks cover increasing pulse ranges, so concatenation stays sorted
    Ok(parts.concat())
}

/// Simulates `n_pairs` pairs chunk by chunk and hands each chunk's sorted
/// events to `sink` in pulse order. Produces the same events as
/// `simulate_timetags(sample_pairs(jsi, n, seed), cfg, seed)` without holding
/// them all.
pub fn for_each_event_chunk<E, F>(
    jsi: &JsiMatrix,
    n_pairs: usize,
    cfg: &TofsConfig,
    seed: u64,
    mut sink: F,
) -> Result<(), E>
where
    E: From<TofsError>,
    F: FnMut(&[TimetagEvent]) -> Result<(), E>,
{
    let det = Detector::new(cfg)?;
    if n_pairs == 0 {
        return Ok(());
    }
    let sampler = PairSampler::new(jsi)?;
    let n_chunks = n_pairs.div_ceil(CHUNK_SIZE);
    let batch = 4 * rayon::current_num_threads();
    for start in (0..n_chunks).step_by(batch) {
        let parts: Vec<Vec<TimetagEvent>> = (start..n_chunks.min(start + batch))
            .into_par_iter()
            .map(|c| {
                let len = CHUNK_SIZE.min(n_pairs - c * CHUNK_SIZE);
                let mut pairs = vec![(0.0, 0.0); len];
                sampler.fill(&mut pairs, seed, c as u64);
                det.chunk_events(&pairs, (c * CHUNK_SIZE) as u64, seed, c as u64)
            })
            .collect();
        for p in &parts {
            sink(p)?;
        }
    }
    Ok(())
}

/// Histogram geometry: `bins × bins` cells of `bin_width` ps starting at
/// `origin` ps (per axis) within the pulse window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramSpec {
    pub bins: usize,
    pub bin_width: f64,
    pub origin: [f64; 2],
}

/// Event bookkeeping of [`bin_coincidences`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoincidenceStats {
    /// Coincidences that landed inside the histogram.
    pub in_range: u64,
    /// Coincidences outside the histogram window.
    pub out_of_range: u64,
    /// Events without a partner in their pulse window.
    pub dropped_singles: u64,
}

impl CoincidenceStats {
    pub fn coincidences(&self) -> u64 {
        self.in_range + self.out_of_range
    }

    fn merge(self, o: Self) -> Self {
        Self {
            in_range: self.in_range + o.in_range,
            out_of_range: self.out_of_range + o.out_of_range,
            dropped_singles: self.dropped_singles + o.dropped_singles,
        }
    }
}

/// Coincidence counts over `(t₁, t₂)` within the pulse window. Rows are
/// channel 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram2D {
    pub spec: HistogramSpec,
    pub counts: DMatrix<u64>,
    pub stats: CoincidenceStats,
}

impl Histogram2D {
    pub fn empty(spec: HistogramSpec) -> Self {
        Self {
            spec,
            counts: DMatrix::zeros(spec.bins, spec.bins),
            stats: CoincidenceStats::default(),
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn merge(mut self, other: Self) -> Self {
        self.counts += other.counts;
        self.stats = self.stats.merge(other.stats);
        self
    }

    /// Adds one coincidence given the detection offsets (ps) within the
    /// window.
    fn record(&mut self, t1: f64, t2: f64) {
        let s = &self.spec;
        let a = ((t1 - s.origin[0]) / s.bin_width).floor();
        let b = ((t2 - s.origin[1]) / s.bin_width).floor();
        let n = s.bins as f64;
        if a >= 0.0 && a < n && b >= 0.0 && b < n {
            self.counts[(a as usize, b as usize)] += 1;
            self.stats.in_range += 1;
        } else {
            self.stats.out_of_range += 1;
        }
    }

    /// Pairs one channel-1 with one channel-2 event per pulse window; any
    /// further events in the window are singles. `events` must be sorted.
    /// Adds time-sorted events covering whole pulses.
    pub fn add_events(&mut self, events: &[TimetagEvent], cfg: &TofsConfig) {
        self.accumulate(events, cfg.period_ticks(), cfg.timing_resolution);
    }

    fn accumulate(&mut self, events: &[TimetagEvent], period_ticks: u64, resolution: f64) {
        let mut k = 0;
        while k < events.len() {
            let pulse = events[k].tick / period_ticks;
            let mut end = k;
            while end < events.len() && events[end].tick / period_ticks == pulse {
                end += 1;
            }
            let window = &events[k..end];
            let first = |ch: u8| window.iter().find(|e| e.channel == ch);
            match (first(1), first(2)) {
                (Some(e1), Some(e2)) => {
                    let off =
                        |e: &TimetagEvent| (e.tick - pulse * period_ticks) as f64 * resolution;
                    self.record(off(e1), off(e2));
                    self.stats.dropped_singles += window.len() as u64 - 2;
                }
                _ => self.stats.dropped_singles += window.len() as u64,
            }
            k = end;
        }
    }
}

/// Histogram of per-pulse coincidences. Unsorted input is sorted first.
pub fn bin_coincidences(
    events: &[TimetagEvent],
    cfg: &TofsConfig,
    spec: HistogramSpec,
) -> Result<Histogram2D, TofsError> {
    cfg.validate()?;
    validate_spec(&spec)?;
    if events.iter().any(|e| e.channel != 1 && e.channel != 2) {
        return Err(TofsError::InvalidEvents("channel must be 1 or 2"));
    }
    let mut h = Histogram2D::empty(spec);
    if events.windows(2).all(|w| w[0] <= w[1]) {
        h.accumulate(events, cfg.period_ticks(), cfg.timing_resolution);
    } else {
        let mut sorted = events.to_vec();
        sorted.par_sort_unstable();
        h.accumulate(&sorted, cfg.period_ticks(), cfg.timing_resolution);
    }
    Ok(h)
}

fn validate_spec(spec: &HistogramSpec) -> Result<(), TofsError> {
    if spec.bins == 0 {
        return Err(TofsError::InvalidConfig {
            field: "histogram.bins",
            value: 0.0,
            reason: "must be positive",
        });
    }
    if !(spec.bin_width > 0.0) || !spec.bin_width.is_finite() {
        return Err(TofsError::InvalidConfig {
            field: "histogram.bin_width",
            value: spec.bin_width,
            reason: "must be positive",
        });
    }
    Ok(())
}

/// Sampling, detection and histogramming fused per chunk, without holding
/// the event list. Identical to
/// `bin_coincidences(simulate_timetags(sample_pairs(jsi, n, seed), cfg, seed))`.
pub fn simulate_histogram(
    jsi: &JsiMatrix,
    n_pairs: usize,
    cfg: &TofsConfig,
    spec: HistogramSpec,
    seed: u64,
) -> Result<Histogram2D, TofsError> {
    validate_spec(&spec)?;
    let det = Detector::new(cfg)?;
    if n_pairs == 0 {
        return Ok(Histogram2D::empty(spec));
    }
    let sampler = PairSampler::new(jsi)?;
    let n_chunks = n_pairs.div_ceil(CHUNK_SIZE);
    let h = (0..n_chunks)
        .into_par_iter()
        .fold(
            || Histogram2D::empty(spec),
            |mut h, c| {
                let len = CHUNK_SIZE.min(n_pairs - c * CHUNK_SIZE);
                let mut pairs = vec![(0.0, 0.0); len];
                sampler.fill(&mut pairs, seed, c as u64);
                let events = det.chunk_events(&pairs, (c * CHUNK_SIZE) as u64, seed, c as u64);
                h.accumulate(&events, det.period_ticks, det.resolution);
                h
            },
        )
        .reduce(|| Histogram2D::empty(spec), Histogram2D::merge);
    Ok(h)
}

/// Uniform wavelength axis: bin `k` covers `[start + k·width, start + (k+1)·width)` nm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WavelengthAxis {
    pub start: f64,
    pub width: f64,
    pub bins: usize,
}

impl WavelengthAxis {
    pub fn centers(&self) -> Vec<f64> {
        (0..self.bins)
            .map(|k| self.start + (k as f64 + 0.5) * self.width)
            .collect()
    }

    pub fn edge(&self, k: usize) -> f64 {
        self.start + k as f64 * self.width
    }

    pub fn end(&self) -> f64 {
        self.edge(self.bins)
    }
}

/// Wavelength-resolved JSI: a probability density in nm⁻², rows photon 1.
#[derive(Debug, Clone, PartialEq)]
pub struct WavelengthJsi {
    pub axis1: WavelengthAxis,
    pub axis2: WavelengthAxis,
    pub density: DMatrix<f64>,
}

impl WavelengthJsi {
    pub fn cell_area(&self) -> f64 {
        self.axis1.width * self.axis2.width
    }
}

/// Relabels histogram axes as wavelengths and normalizes to a density.
pub fn reconstruct_jsi(h: &Histogram2D, cfg: &TofsConfig) -> Result<WavelengthJsi, TofsError> {
    cfg.validate()?;
    let total = h.total();
    if total == 0 {
        return Err(TofsError::EmptyHistogram);
    }
    let axis = |origin: f64| WavelengthAxis {
        start: delay_to_wavelength(origin, cfg),
        width: h.spec.bin_width / cfg.ps_per_nm(),
        bins: h.spec.bins,
    };
    let (axis1, axis2) = (axis(h.spec.origin[0]), axis(h.spec.origin[1]));
    let scale = 1.0 / (total as f64 * axis1.width * axis2.width);
    let density = h.counts.map(|c| c as f64 * scale);
    Ok(WavelengthJsi {
        axis1,
        axis2,
        density,
    })
}

/// Fraction of each frequency cell's wavelength interval that falls in each
/// wavelength bin; `out[(cell, bin)]`.
fn overlap_fractions(bounds: &[(f64, f64)], axis: &WavelengthAxis) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(bounds.len(), axis.bins);
    for (i, &(lo, hi)) in bounds.iter().enumerate() {
        let first = ((lo - axis.start) / axis.width).floor().max(0.0) as usize;
        for b in first..axis.bins {
            let (a0, a1) = (axis.edge(b), axis.edge(b + 1));
            if a0 >= hi {
                break;
            }
            let overlap = hi.min(a1) - lo.max(a0);
            if overlap > 0.0 {
                out[(i, b)] = overlap / (hi - lo);
            }
        }
    }
    out
}

/// Probability mass of `jsi` in each wavelength cell, with each frequency
/// cell's mass spread uniformly over its wavelength interval (the sampler's
/// model). The result sums to the fraction of mass inside the axes.
pub fn rebin_to_wavelength(
    jsi: &JsiMatrix,
    axis1: &WavelengthAxis,
    axis2: &WavelengthAxis,
) -> DMatrix<f64> {
    let b1: Vec<_> = (0..jsi.shape().0)
        .map(|k| jsi.grid1().cell_wavelength_bounds(k))
        .collect();
    let b2: Vec<_> = (0..jsi.shape().1)
        .map(|k| jsi.grid2().cell_wavelength_bounds(k))
        .collect();
    let f1 = overlap_fractions(&b1, axis1);
    let f2 = overlap_fractions(&b2, axis2);
    let mass = jsi.values() / jsi.values().sum();
    f1.transpose() * mass * f2
}

/// Zero-mean normalized cross-correlation (Pearson coefficient) of two
/// equally shaped maps.
pub fn normalized_cross_correlation(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    let n = a.len() as f64;
    let (ma, mb) = (a.sum() / n, b.sum() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b.iter()) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    sab / (saa * sbb).sqrt()
}
