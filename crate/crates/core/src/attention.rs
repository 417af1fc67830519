//! Attention-weighted interface analysis.
//!
//! Three pieces live here:
//!
//! * a per-pixel attention map that combines normalized gradient strength
//!   with exponential decay in distance from the interface edges,
//!   `A = floor + (1 - floor) * grad * exp(-dist / decay)`;
//! * parameter-free patch self-attention: each patch is described by three
//!   statistics, attention weights are the row softmax of the scaled Gram
//!   matrix of those features, and per-patch saliency is the mean attention
//!   a patch receives;
//! * scalar interface-quality metrics (transition sharpness, defect density).
//!
//! The attention formula and its default constants are a reconstruction
//! chosen so that bulk material sits near 0.25 and interface pixels reach
//! the 0.6–1.0 range.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{band_from_distance, find_holes, DistanceField};
use crate::imaging::{ensure_same_dims, normalize, BinaryMask, FloatMap, GrayImage};

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    /// Attention assigned to featureless bulk material.
    pub floor: f64,
    /// Distance (pixels) over which interface attention decays by 1/e.
    pub decay: f64,
    /// Side length of the square patches used for self-attention.
    pub patch_size: usize,
}

impl Default for AttentionParams {
    fn default() -> Self {
        Self {
            floor: 0.25,
            decay: 15.0,
            patch_size: 8,
        }
    }
}

impl AttentionParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.floor) {
            return Err(Error::invalid(format!("attention floor must be in [0,1), got {}", self.floor)));
        }
        if !(self.decay > 0.0 && self.decay.is_finite()) {
            return Err(Error::invalid(format!("attention decay must be > 0, got {}", self.decay)));
        }
        if self.patch_size < 2 {
            return Err(Error::invalid(format!("patch size must be >= 2, got {}", self.patch_size)));
        }
        Ok(())
    }
}

pub fn attention_map(grad_norm: &FloatMap, dist: &DistanceField, params: &AttentionParams) -> Result<FloatMap> {
    params.validate()?;
    ensure_same_dims(grad_norm.dims(), dist.dims())?;
    let (w, h) = grad_norm.dims();
    let beta = params.floor;
    let data = grad_norm
        .data()
        .iter()
        .zip(dist.map().data())
        .map(|(&g, &d)| {
            let g = g.clamp(0.0, 1.0);
            (beta + (1.0 - beta) * g * (-d / params.decay).exp()).clamp(beta, 1.0)
        })
        .collect();
    Ok(FloatMap::from_parts_unchecked(w, h, data))
}

/// Layout of the patch grid over an image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchGrid {
    pub rows: usize,
    pub cols: usize,
    pub patch_size: usize,
}

impl PatchGrid {
    pub fn new(width: usize, height: usize, patch_size: usize) -> Self {
        Self {
            rows: height.div_ceil(patch_size),
            cols: width.div_ceil(patch_size),
            patch_size,
        }
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub const FEATURE_DIM: usize = 3;

/// Per-patch features: mean intensity / 255, intensity standard deviation /
/// 128, mean normalized gradient magnitude.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchFeatures {
    pub grid: PatchGrid,
    pub features: Vec<[f64; FEATURE_DIM]>,
}

impl PatchFeatures {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

pub fn patch_features(image: &GrayImage, grad_norm: &FloatMap, patch_size: usize) -> Result<PatchFeatures> {
    if patch_size < 2 {
        return Err(Error::invalid(format!("patch size must be >= 2, got {patch_size}")));
    }
    ensure_same_dims(image.dims(), grad_norm.dims())?;
    let (w, h) = image.dims();
    let grid = PatchGrid::new(w, h, patch_size);
    let mut features = Vec::with_capacity(grid.len());
    for pr in 0..grid.rows {
        for pc in 0..grid.cols {
            let (y0, y1) = (pr * patch_size, ((pr + 1) * patch_size).min(h));
            let (x0, x1) = (pc * patch_size, ((pc + 1) * patch_size).min(w));
            let n = ((y1 - y0) * (x1 - x0)) as f64;
            let (mut sum, mut grad) = (0.0, 0.0);
            for y in y0..y1 {
                for x in x0..x1 {
                    sum += f64::from(image.get(x, y));
                    grad += grad_norm.get(x, y);
                }
            }
            let mean = sum / n;
            let mut var = 0.0;
            for y in y0..y1 {
                for x in x0..x1 {
                    var += (f64::from(image.get(x, y)) - mean).powi(2);
                }
            }
            let std = (var / n).sqrt();
            features.push([mean / 255.0, std / 128.0, grad / n]);
        }
    }
    Ok(PatchFeatures { grid, features })
}

/// Row-stochastic patch-to-patch attention weights, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMatrix {
    n: usize,
    weights: Vec<f64>,
}

impl AttentionMatrix {
    pub fn from_rows(n: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != n * n {
            return Err(Error::invalid(format!("attention matrix needs {} entries, got {}", n * n, weights.len())));
        }
        Ok(Self { n, weights })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.n..(i + 1) * self.n]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n + j]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Default softmax scale, `1 / sqrt(d)` for the feature dimension `d`.
pub fn default_scale() -> f64 {
    1.0 / (FEATURE_DIM as f64).sqrt()
}

/// `softmax(F Fᵀ · scale)` row by row, with identity query/key projections.
pub fn self_attention(f: &PatchFeatures, scale: f64) -> Result<AttentionMatrix> {
    let n = f.len();
    if n == 0 {
        return Err(Error::invalid("self-attention needs at least one patch"));
    }
    if !scale.is_finite() {
        return Err(Error::NonFinite(format!("softmax scale {scale}")));
    }
    if let Some(i) = f.features.iter().position(|v| v.iter().any(|x| !x.is_finite())) {
        return Err(Error::NonFinite(format!("patch {i} has a non-finite feature")));
    }
    let feats = &f.features;
    let mut weights = vec![0.0; n * n];
    weights.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let q = feats[i];
        for (j, slot) in row.iter_mut().enumerate() {
            let k = feats[j];
            *slot = (q[0] * k[0] + q[1] * k[1] + q[2] * k[2]) * scale;
        }
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    });
    Ok(AttentionMatrix { n, weights })
}

/// Mean incoming attention per patch, normalized to [0, 1] and painted back
/// onto a `width × height` raster.
pub fn saliency_map(s: &AttentionMatrix, grid: PatchGrid, width: usize, height: usize) -> Result<FloatMap> {
    if s.n != grid.len() {
        return Err(Error::DimensionMismatch {
            expected: (grid.cols, grid.rows),
            actual: (s.n, 1),
        });
    }
    let expected = PatchGrid::new(width, height, grid.patch_size);
    if expected != grid {
        return Err(Error::DimensionMismatch {
            expected: (expected.cols, expected.rows),
            actual: (grid.cols, grid.rows),
        });
    }
    let n = s.n;
    let mut incoming = vec![0.0; n];
    for i in 0..n {
        for (acc, w) in incoming.iter_mut().zip(s.row(i)) {
            *acc += w;
        }
    }
    incoming.iter_mut().for_each(|v| *v /= n as f64);
    let per_patch = normalize(&FloatMap::new(n, 1, incoming)?);
    let p = grid.patch_size;
    FloatMap::from_fn(width, height, |x, y| per_patch.data()[(y / p) * grid.cols + x / p])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterfaceMetrics {
    pub transition_sharpness: f64,
    pub defect_density: f64,
    pub edge_density: f64,
    pub white_fraction: f64,
    pub threshold: f64,
}

/// Interface-quality metrics for one segmentation pass.
///
/// `gradient` is the raw gradient magnitude of the image and `dist` the
/// distance field of `edges`. Zero denominators yield zero.
pub fn interface_metrics(
    gradient: &FloatMap,
    deposit: &BinaryMask,
    edges: &BinaryMask,
    dist: &DistanceField,
    threshold: f64,
    band_width: f64,
) -> Result<InterfaceMetrics> {
    let dims = gradient.dims();
    ensure_same_dims(dims, deposit.dims())?;
    ensure_same_dims(dims, edges.dims())?;
    ensure_same_dims(dims, dist.dims())?;

    let band = band_from_distance(dist, band_width);
    let (mut band_sum, mut band_n) = (0.0, 0usize);
    for (i, &g) in gradient.data().iter().enumerate() {
        if band.is_set_index(i) {
            band_sum += g;
            band_n += 1;
        }
    }
    let global = gradient.mean();
    let transition_sharpness = if global > 0.0 && band_n > 0 {
        (band_sum / band_n as f64) / global
    } else {
        0.0
    };

    let deposit_px = deposit.count();
    let defect_density = if deposit_px > 0 {
        (find_holes(deposit).count() as f64 / deposit_px as f64).min(1.0)
    } else {
        0.0
    };

    Ok(InterfaceMetrics {
        transition_sharpness,
        defect_density,
        edge_density: edges.count() as f64 / edges.len() as f64,
        white_fraction: deposit_px as f64 / deposit.len() as f64,
        threshold,
    })
}
