//! Lobe counting and localization on intensity maps.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Strict 3×3 local maxima above `threshold_frac` of the global peak.
///
/// Plateaus are counted once: a cell must beat neighbours that precede it in
/// raster order and at least tie the ones after it.
pub fn local_maxima(values: &DMatrix<f64>, threshold_frac: f64) -> Vec<(usize, usize)> {
    let (n1, n2) = values.shape();
    let peak = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(peak > 0.0) {
        return Vec::new();
    }
    let floor = threshold_frac * peak;
    let mut out = Vec::new();
    for i in 0..n1 {
        for j in 0..n2 {
            let v = values[(i, j)];
            if v < floor || v <= 0.0 {
                continue;
            }
            let mut is_max = true;
            'nb: for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let (a, b) = (i as i64 + di, j as i64 + dj);
                    if a < 0 || b < 0 || a >= n1 as i64 || b >= n2 as i64 {
                        continue;
                    }
                    let u = values[(a as usize, b as usize)];
                    let earlier = (di, dj) < (0, 0);
                    if u > v || (earlier && u == v) {
                        is_max = false;
                        break 'nb;
                    }
                }
            }
            if is_max {
                out.push((i, j));
            }
        }
    }
    out
}

/// Detection parameters for [`detect_lobes`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LobeDetection {
    /// Fraction of the global peak a maximum must reach.
    pub threshold_frac: f64,
    /// Maxima closer than this (Euclidean, in nm) to a stronger one are
    /// suppressed.
    pub suppression_radius_nm: f64,
    /// Keep at most this many, strongest first.
    pub max_lobes: Option<usize>,
}

impl Default for LobeDetection {
    fn default() -> Self {
        Self {
            threshold_frac: 0.1,
            suppression_radius_nm: 1.0,
            max_lobes: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lobe {
    pub row: usize,
    pub col: usize,
    /// nm
    pub lambda1: f64,
    /// nm
    pub lambda2: f64,
    pub value: f64,
}

/// Local maxima with non-maximum suppression, strongest first.
/// `lambda1`/`lambda2` give the wavelength of each row/column.
pub fn detect_lobes(
    values: &DMatrix<f64>,
    lambda1: &[f64],
    lambda2: &[f64],
    opts: LobeDetection,
) -> Vec<Lobe> {
    assert_eq!(values.nrows(), lambda1.len());
    assert_eq!(values.ncols(), lambda2.len());
    let mut candidates: Vec<Lobe> = local_maxima(values, opts.threshold_frac)
        .into_iter()
        .map(|(row, col)| Lobe {
            row,
            col,
            lambda1: lambda1[row],
            lambda2: lambda2[col],
            value: values[(row, col)],
        })
        .collect();
    candidates.sort_by(|a, b| {
        b.value
            .total_cmp(&a.value)
            .then(a.row.cmp(&b.row))
            .then(a.col.cmp(&b.col))
    });
    let r2 = opts.suppression_radius_nm * opts.suppression_radius_nm;
    let mut kept: Vec<Lobe> = Vec::new();
    for c in candidates {
        let close = kept.iter().any(|k| {
            let (d1, d2) = (k.lambda1 - c.lambda1, k.lambda2 - c.lambda2);
            d1 * d1 + d2 * d2 < r2
        });
        if !close {
            kept.push(c);
            if opts.max_lobes.is_some_and(|m| kept.len() >= m) {
                break;
            }
        }
    }
    kept
}
