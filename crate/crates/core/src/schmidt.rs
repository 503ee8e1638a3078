//! Schmidt decomposition of a joint spectral amplitude.
//!
//! The amplitude matrix is scaled by `√(step₁·step₂)` before the SVD so the
//! coefficients do not depend on the discretization. Mode functions are the
//! singular vectors rescaled to be orthonormal under the grid measure.

use crate::grid::FrequencyGrid;
use crate::jsa::{JsaMatrix, NORM_TOLERANCE};
use nalgebra::{ComplexField, DMatrix};
use num_complex::Complex64;
use thiserror::Error;

/// Coefficients below this fraction of the largest are set to zero.
pub const COEFFICIENT_FLOOR: f64 = 1e-12;

const SVD_EPS: f64 = 1e-14;
const SVD_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SchmidtError {
    #[error("state is not normalized (norm² = {0})")]
    NotNormalized(f64),
    #[error("singular value decomposition did not converge")]
    DecompositionFailure,
    #[error("rank {rank} out of range 1..={available}")]
    RankOutOfRange { rank: usize, available: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchmidtDecomposition {
    coefficients: Vec<f64>,
    modes1: DMatrix<Complex64>,
    modes2: DMatrix<Complex64>,
    grid1: FrequencyGrid,
    grid2: FrequencyGrid,
}

impl SchmidtDecomposition {
    /// λᵢ, descending, all strictly positive.
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// Column `i` is `gᵢ(ω₁)`.
    pub fn modes1(&self) -> &DMatrix<Complex64> {
        &self.modes1
    }

    /// Column `i` is `hᵢ(ω₂)`.
    pub fn modes2(&self) -> &DMatrix<Complex64> {
        &self.modes2
    }

    pub fn grid1(&self) -> &FrequencyGrid {
        &self.grid1
    }

    pub fn grid2(&self) -> &FrequencyGrid {
        &self.grid2
    }

    pub fn mode_count(&self) -> usize {
        self.coefficients.len()
    }

    /// Rebuilds a decomposition from stored parts (used by the file readers).
    pub fn from_parts(
        coefficients: Vec<f64>,
        modes1: DMatrix<Complex64>,
        modes2: DMatrix<Complex64>,
        grid1: FrequencyGrid,
        grid2: FrequencyGrid,
    ) -> Self {
        Self {
            coefficients,
            modes1,
            modes2,
            grid1,
            grid2,
        }
    }

    /// `1/Σλᵢ²`.
    pub fn schmidt_number(&self) -> f64 {
        schmidt_number_of(&self.coefficients)
    }
}

fn schmidt_number_of(lambdas: &[f64]) -> f64 {
    1.0 / lambdas.iter().map(|l| l * l).sum::<f64>()
}

/// Schmidt decomposition of a normalized JSA.
pub fn decompose(jsa: &JsaMatrix) -> Result<SchmidtDecomposition, SchmidtError> {
    let norm2 = jsa.norm_squared();
    if !jsa.is_normalized() || (norm2 - 1.0).abs() > NORM_TOLERANCE {
        return Err(SchmidtError::NotNormalized(norm2));
    }
    let (s1, s2) = (jsa.grid1().step(), jsa.grid2().step());
    let scaled = jsa.amplitudes() * Complex64::new((s1 * s2).sqrt(), 0.0);
    let svd = scaled
        .try_svd(true, true, SVD_EPS, SVD_MAX_ITER)
        .ok_or(SchmidtError::DecompositionFailure)?;
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(SchmidtError::DecompositionFailure),
    };
    let sv = svd.singular_values;

    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]).then(a.cmp(&b)));
    let total: f64 = sv.iter().map(|s| s * s).sum();
    if !(total > 0.0) {
        return Err(SchmidtError::DecompositionFailure);
    }
    let lead = sv[order[0]] * sv[order[0]] / total;
    let kept: Vec<usize> = order
        .into_iter()
        .filter(|&k| sv[k] * sv[k] / total >= COEFFICIENT_FLOOR * lead)
        .collect();

    let (n1, n2) = jsa.shape();
    let r = kept.len();
    let mut modes1 = DMatrix::zeros(n1, r);
    let mut modes2 = DMatrix::zeros(n2, r);
    let mut coefficients = Vec::with_capacity(r);
    let (inv1, inv2) = (1.0 / s1.sqrt(), 1.0 / s2.sqrt());
    for (c, &k) in kept.iter().enumerate() {
        let col = u.column(k);
        let scale = col.iter().map(|z| z.norm()).fold(0.0, f64::max);
        // phase convention: first non-negligible entry of gᵢ is real positive
        let phase = col
            .iter()
            .find(|z| z.norm() > 1e-8 * scale)
            .map(|z| z / z.norm())
            .unwrap_or(Complex64::new(1.0, 0.0));
        let undo = phase.conj();
        for i in 0..n1 {
            modes1[(i, c)] = u[(i, k)] * undo * inv1;
        }
        for j in 0..n2 {
            modes2[(j, c)] = v_t[(k, j)] * phase * inv2;
        }
        coefficients.push(sv[k] * sv[k] / total);
    }
    Ok(SchmidtDecomposition {
        coefficients,
        modes1,
        modes2,
        grid1: jsa.grid1().clone(),
        grid2: jsa.grid2().clone(),
    })
}

/// `K = 1/Σλᵢ²`.
pub fn schmidt_number(d: &SchmidtDecomposition) -> f64 {
    d.schmidt_number()
}

/// `f̂ = Σᵢ₌₁^rank √λᵢ·gᵢ·hᵢ`, optionally renormalized.
pub fn reconstruct(
    d: &SchmidtDecomposition,
    rank: usize,
    renormalize: bool,
) -> Result<JsaMatrix, SchmidtError> {
    if rank == 0 || rank > d.mode_count() {
        return Err(SchmidtError::RankOutOfRange {
            rank,
            available: d.mode_count(),
        });
    }
    let weights = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        rank,
        d.coefficients[..rank]
            .iter()
            .map(|l| Complex64::new(l.sqrt(), 0.0)),
    ));
    let g = d.modes1.columns(0, rank);
    let h = d.modes2.columns(0, rank);
    let amps = g * weights * h.transpose();
    let jsa = JsaMatrix::new(d.grid1.clone(), d.grid2.clone(), amps)
        .map_err(|_| SchmidtError::DecompositionFailure)?;
    if renormalize {
        jsa.normalize()
            .map_err(|_| SchmidtError::DecompositionFailure)
    } else {
        Ok(jsa)
    }
}

/// Schmidt number from the Gram matrix, without an SVD:
/// `K = (Σ sᵢ²)² / Σ sᵢ⁴ = ‖M‖⁴_F / ‖M·Mᴴ‖²_F`.
///
/// Scale-free, so neither normalization nor the grid measure matter. Works on
/// real or complex matrices.
pub fn schmidt_number_gram<T>(m: &DMatrix<T>) -> f64
where
    T: ComplexField<RealField = f64>,
{
    let gram = if m.nrows() <= m.ncols() {
        m * m.adjoint()
    } else {
        m.adjoint() * m
    };
    let tr: f64 = (0..gram.nrows()).map(|k| gram[(k, k)].clone().real()).sum();
    let frob2: f64 = gram.iter().map(|z| z.clone().modulus_squared()).sum();
    tr * tr / frob2
}

/// Squared overlap of the two leading photon-1 modes with the span of
/// Hermite-Gauss HG0/HG1 functions fitted to the photon-1 marginal (mean and
/// width from its first two moments). Returned per mode.
pub fn hermite_gauss_overlap(d: &SchmidtDecomposition) -> [f64; 2] {
    let axis = d.grid1.axis();
    let step = d.grid1.step();
    let n = axis.len();
    let take = d.mode_count().min(2);
    // marginal of the two leading modes
    let weight: Vec<f64> = (0..n)
        .map(|i| (0..take).map(|k| d.modes1[(i, k)].norm_sqr()).sum())
        .collect();
    let total: f64 = weight.iter().sum();
    let mean = axis.iter().zip(&weight).map(|(w, p)| w * p).sum::<f64>() / total;
    let var = axis
        .iter()
        .zip(&weight)
        .map(|(w, p)| (w - mean) * (w - mean) * p)
        .sum::<f64>()
        / total;
    // (|HG0|² + |HG1|²)/2 has variance w²
    let width = var.sqrt();
    let hg = |order: usize| -> Vec<f64> {
        let v: Vec<f64> = axis
            .iter()
            .map(|&w| {
                let x = (w - mean) / width;
                let p = if order == 0 { 1.0 } else { x };
                p * (-0.5 * x * x).exp()
            })
            .collect();
        let norm = (v.iter().map(|a| a * a).sum::<f64>() * step).sqrt();
        v.into_iter().map(|a| a / norm).collect()
    };
    let (h0, h1) = (hg(0), hg(1));
    let mut out = [0.0; 2];
    for (k, slot) in out.iter_mut().enumerate().take(take) {
        let proj = |basis: &[f64]| -> f64 {
            let c: Complex64 = (0..n)
                .map(|i| d.modes1[(i, k)] * basis[i])
                .sum::<Complex64>()
                * step;
            c.norm_sqr()
        };
        *slot = proj(&h0) + proj(&h1);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::spectral::{ideal_hyperentangled, StateConfig};
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn grid(n: usize) -> FrequencyGrid {
        make_grid(1550.0, 20.0, n).unwrap()
    }

    fn gaussian(g: &FrequencyGrid, c: f64, w: f64) -> Vec<f64> {
        g.axis()
            .iter()
            .map(|&x| (-(x - c).powi(2) / (2.0 * w * w)).exp())
            .collect()
    }

    fn hg1(g: &FrequencyGrid, c: f64, w: f64) -> Vec<f64> {
        g.axis()
            .iter()
            .map(|&x| (x - c) / w * (-(x - c).powi(2) / (2.0 * w * w)).exp())
            .collect()
    }

    fn product_state(g: &FrequencyGrid) -> JsaMatrix {
        let c = g.center_omega();
        let a = gaussian(g, c, 1.0);
        let b = gaussian(g, c + 0.3, 0.7);
        let m = DMatrix::from_fn(g.len(), g.len(), |i, j| Complex64::new(a[i] * b[j], 0.0));
        JsaMatrix::new_normalized(g.clone(), g.clone(), m).unwrap()
    }

    fn bell_state(g: &FrequencyGrid) -> JsaMatrix {
        let c = g.center_omega();
        let (g0, g1) = (gaussian(g, c, 1.0), hg1(g, c, 1.0));
        let m = DMatrix::from_fn(g.len(), g.len(), |i, j| {
            Complex64::new(g0[i] * g1[j] - g1[i] * g0[j], 0.0)
        });
        JsaMatrix::new_normalized(g.clone(), g.clone(), m).unwrap()
    }

    #[test]
    fn separable_state_has_single_mode() {
        let d = decompose(&product_state(&grid(96))).unwrap();
        assert!(d.coefficients()[0] > 0.999);
        assert!((schmidt_number(&d) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn bell_state_has_two_equal_modes() {
        let jsa = bell_state(&grid(128));
        let d = decompose(&jsa).unwrap();
        let l = d.coefficients();
        assert!(
            (l[0] - 0.5).abs() < 1e-9 && (l[1] - 0.5).abs() < 1e-9,
            "{l:?}"
        );
        assert!(l.get(2).is_none_or(|&x| x < 1e-9));
        assert!((schmidt_number(&d) - 2.0).abs() < 1e-8);
        let r1 = reconstruct(&d, 1, false).unwrap();
        assert!((r1.distance_squared(&jsa) - 0.5).abs() < 1e-8);
    }

    #[test]
    fn number_from_coefficient_lists() {
        assert_eq!(schmidt_number_of(&[1.0]), 1.0);
        assert!((schmidt_number_of(&[0.25; 4]) - 4.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_unnormalized_and_bad_rank() {
        let g = grid(32);
        let m = DMatrix::from_element(32, 32, Complex64::new(1.0, 0.0));
        let raw = JsaMatrix::new(g.clone(), g.clone(), m).unwrap();
        assert!(matches!(
            decompose(&raw),
            Err(SchmidtError::NotNormalized(_))
        ));
        let d = decompose(&product_state(&g)).unwrap();
        assert!(matches!(
            reconstruct(&d, 0, false),
            Err(SchmidtError::RankOutOfRange { .. })
        ));
        assert!(matches!(
            reconstruct(&d, d.mode_count() + 1, false),
            Err(SchmidtError::RankOutOfRange { .. })
        ));
    }

    #[test]
    fn modes_are_orthonormal_and_phase_fixed() {
        let g = make_grid(1550.0, 36.0, 160).unwrap();
        let jsa = StateConfig::default()
            .with_phase(0.9)
            .synthesize(&g)
            .unwrap();
        let d = decompose(&jsa).unwrap();
        let step = g.step();
        let k = d.mode_count().min(6);
        for a in 0..k {
            for b in 0..k {
                let ip: Complex64 = (0..g.len())
                    .map(|i| d.modes1()[(i, a)].conj() * d.modes1()[(i, b)])
                    .sum::<Complex64>()
                    * step;
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((ip - want).norm() < 1e-8, "{a},{b}: {ip}");
            }
            let col = d.modes1().column(a);
            let peak = col.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let first = col
                .iter()
                .find(|z| z.norm() > 1e-8 * peak)
                .copied()
                .unwrap();
            assert!(first.im.abs() < 1e-12 && first.re > 0.0);
        }
        let sum: f64 = d.coefficients().iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
        assert!(d.coefficients().windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn full_rank_reconstruction_recovers_state() {
        for jsa in [bell_state(&grid(96)), product_state(&grid(96))] {
            let d = decompose(&jsa).unwrap();
            let back = reconstruct(&d, d.mode_count(), false).unwrap();
            let err = jsa
                .amplitudes()
                .iter()
                .zip(back.amplitudes().iter())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(err < 1e-8, "{err}");
        }
    }

    #[test]
    fn truncation_residual_matches_tail() {
        let g = make_grid(1550.0, 36.0, 200).unwrap();
        let jsa = StateConfig::default().synthesize(&g).unwrap();
        let d = decompose(&jsa).unwrap();
        for rank in [1, 2, 4, 6] {
            let approx = reconstruct(&d, rank, false).unwrap();
            let tail: f64 = d.coefficients()[rank..].iter().sum();
            assert!((approx.distance_squared(&jsa) - tail).abs() < 1e-8);
        }
        let r4 = reconstruct(&d, 4, false).unwrap();
        assert!(r4.distance_squared(&jsa) < 0.02);
        let r4n = reconstruct(&d, 4, true).unwrap();
        assert!(r4n.is_normalized());
    }

    #[test]
    fn gram_route_matches_svd_route() {
        let g = make_grid(1550.0, 36.0, 180).unwrap();
        for phi in [0.0, 1.0, 3.0] {
            let jsa = StateConfig::default()
                .with_phase(phi)
                .synthesize(&g)
                .unwrap();
            let k_svd = schmidt_number(&decompose(&jsa).unwrap());
            let k_gram = schmidt_number_gram(jsa.amplitudes());
            assert!((k_svd - k_gram).abs() < 1e-9, "{k_svd} {k_gram}");
        }
        let real = DMatrix::from_fn(7, 11, |i, j| ((i * 3 + j * 5) % 7) as f64 - 2.0);
        let k_real = schmidt_number_gram(&real);
        let k_t = schmidt_number_gram(&real.transpose());
        assert!((k_real - k_t).abs() < 1e-12);
    }

    #[test]
    fn ideal_state_modes_are_hermite_gauss_like() {
        let g = make_grid(1550.0, 36.0, 256).unwrap();
        let jsa = crate::spectral::displace_antidiagonal(
            &StateConfig::default().model(&g).unwrap(),
            11.0,
        )
        .unwrap();
        let ov = hermite_gauss_overlap(&decompose(&jsa).unwrap());
        assert!(ov[0] > 0.95 && ov[1] > 0.95, "{ov:?}");
        let (dl, s) = StateConfig::default().nominal_bins();
        let ideal = ideal_hyperentangled(&g, dl, s, 0.0).unwrap();
        assert!((schmidt_number(&decompose(&ideal).unwrap()) - 4.0).abs() < 1e-6);
    }

    #[test]
    fn global_phase_leaves_k_unchanged() {
        let g = make_grid(1550.0, 36.0, 128).unwrap();
        let jsa = StateConfig::default().synthesize(&g).unwrap();
        let k0 = schmidt_number(&decompose(&jsa).unwrap());
        for theta in [0.4, 2.0, -1.3] {
            let k = schmidt_number(&decompose(&jsa.with_global_phase(theta)).unwrap());
            assert!((k - k0).abs() < 1e-10);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn k_invariant_under_local_unitary(seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let g = make_grid(1550.0, 36.0, 64).unwrap();
            let jsa = StateConfig::default().with_phase(0.5).synthesize(&g).unwrap();
            let k0 = schmidt_number(&decompose(&jsa).unwrap());
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = g.len();
            let raw = DMatrix::from_fn(n, n, |_, _| {
                Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
            });
            let q = raw.qr().q();
            let mixed = &q * jsa.amplitudes();
            let jsa2 = JsaMatrix::new_normalized(g.clone(), g.clone(), mixed).unwrap();
            let k = schmidt_number(&decompose(&jsa2).unwrap());
            prop_assert!((k - k0).abs() < 1e-8);
        }
    }
}
