use std::collections::HashMap;
use std::sync::Mutex;

use super::{pso_optimize, PsoConfig, PsoResult};
use crate::edges::{canny, edge_sum, CannyParams};
use crate::error::{Error, Result};
use crate::imaging::{binarize, foreground_fraction, BinaryMask, GrayImage};

#[derive(Debug, Clone, PartialEq)]
pub struct FitnessParams {
    pub canny: CannyParams,
    /// Foreground fractions below this are penalized.
    pub penalty_low: f64,
    /// Foreground fractions above this are penalized.
    pub penalty_high: f64,
    /// Added to the edge count of a degenerate segmentation. `None` means
    /// the image's pixel count, which exceeds any achievable edge count.
    pub penalty_value: Option<f64>,
}

impl Default for FitnessParams {
    fn default() -> Self {
        Self {
            canny: CannyParams::default(),
            penalty_low: 0.05,
            penalty_high: 0.95,
            penalty_value: None,
        }
    }
}

impl FitnessParams {
    pub fn validate(&self) -> Result<()> {
        self.canny.validate()?;
        if !(0.0 < self.penalty_low && self.penalty_low < self.penalty_high && self.penalty_high < 1.0) {
            return Err(Error::invalid(format!(
                "penalty bounds need 0 < low < high < 1, got {} and {}",
                self.penalty_low, self.penalty_high
            )));
        }
        if let Some(p) = self.penalty_value {
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::invalid(format!("penalty_value must be > 0, got {p}")));
            }
        }
        Ok(())
    }

    pub fn penalty_for(&self, image: &GrayImage) -> f64 {
        self.penalty_value.unwrap_or(image.len() as f64)
    }

    pub fn is_degenerate(&self, white_fraction: f64) -> bool {
        white_fraction < self.penalty_low || white_fraction > self.penalty_high
    }
}

/// Binarizes at `round(t)`; thresholds above 255 select nothing.
pub(crate) fn binarize_rounded(image: &GrayImage, t: f64) -> BinaryMask {
    let r = t.round();
    if r > 255.0 {
        let (w, h) = image.dims();
        BinaryMask::empty(w, h).expect("dimensions come from a valid image")
    } else {
        binarize(image, r.max(0.0) as u8)
    }
}

/// Canny edge count of the mask thresholded at `round(t)`, plus the penalty
/// when the mask is predominantly black or white.
pub fn fitness_edges(image: &GrayImage, t: f64, params: &FitnessParams) -> Result<f64> {
    if !t.is_finite() {
        return Err(Error::NonFinite(format!("threshold {t}")));
    }
    let mask = binarize_rounded(image, t);
    let white = foreground_fraction(&mask);
    let base = edge_sum(&canny(&mask.to_gray(), &params.canny)?) as f64;
    Ok(if params.is_degenerate(white) {
        base + params.penalty_for(image)
    } else {
        base
    })
}

/// Evaluates the fitness at every integer threshold in `bounds` and returns
/// the first minimizer with its value.
pub fn exhaustive_minimum(image: &GrayImage, bounds: (f64, f64), params: &FitnessParams) -> Result<(i64, f64)> {
    let (lo, hi) = (bounds.0.ceil() as i64, bounds.1.floor() as i64);
    if lo > hi {
        return Err(Error::invalid("bounds contain no integer threshold"));
    }
    let mut best = (lo, f64::INFINITY);
    for t in lo..=hi {
        let f = fitness_edges(image, t as f64, params)?;
        if f < best.1 {
            best = (t, f);
        }
    }
    Ok(best)
}

/// Runs the swarm on `fitness_edges` for this image. The returned threshold
/// is rounded to the integer the segmentation actually uses.
pub fn optimize_threshold(image: &GrayImage, config: &PsoConfig, params: &FitnessParams) -> Result<PsoResult> {
    config.validate()?;
    params.validate()?;
    let (w, h) = image.dims();
    if w < 3 || h < 3 {
        return Err(Error::TooSmall {
            width: w,
            height: h,
            min: 3,
        });
    }
    // The fitness only depends on round(t); memoize per integer threshold.
    let cache: Mutex<HashMap<i64, f64>> = Mutex::new(HashMap::new());
    let fitness = |t: f64| {
        let key = t.round() as i64;
        if let Some(&v) = cache.lock().expect("cache lock").get(&key) {
            return v;
        }
        let v = fitness_edges(image, t, params).unwrap_or(f64::NAN);
        cache.lock().expect("cache lock").insert(key, v);
        v
    };
    let mut result = pso_optimize(fitness, config)?;
    result.best_threshold = result.best_threshold.round();
    Ok(result)
}
