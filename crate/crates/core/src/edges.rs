//! Gaussian smoothing, Sobel gradients and the Canny edge detector.
//!
//! Every convolution uses clamp-to-edge border replication. Gradients are in
//! intensity units per pixel on the 0–255 scale, so Canny thresholds refer to
//! that scale as well (a hard 0→255 step yields a raw Sobel response of 1020).

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::imaging::{BinaryMask, FloatMap, GrayImage};

#[derive(Debug, Clone, PartialEq)]
pub struct GradientPair {
    pub gx: FloatMap,
    pub gy: FloatMap,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CannyParams {
    pub sigma: f64,
    pub low: f64,
    pub high: f64,
}

impl Default for CannyParams {
    fn default() -> Self {
        Self {
            sigma: 1.4,
            low: 50.0,
            high: 100.0,
        }
    }
}

impl CannyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::invalid(format!("canny sigma must be > 0, got {}", self.sigma)));
        }
        if !(self.low.is_finite() && self.high.is_finite() && self.low >= 0.0 && self.high >= self.low) {
            return Err(Error::invalid(format!(
                "canny thresholds need 0 <= low <= high, got low={} high={}",
                self.low, self.high
            )));
        }
        Ok(())
    }
}

/// Normalized discrete Gaussian of radius `ceil(3 * sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Result<Vec<f64>> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::invalid(format!("sigma must be > 0, got {sigma}")));
    }
    let radius = (3.0 * sigma).ceil() as i64;
    let weights: Vec<f64> = (-radius..=radius)
        .map(|x| (-((x * x) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

#[inline]
fn clamp_index(i: i64, len: usize) -> usize {
    i.clamp(0, len as i64 - 1) as usize
}

/// Separable Gaussian blur of a real-valued map.
pub fn blur_map(map: &FloatMap, sigma: f64) -> Result<FloatMap> {
    let kernel = gaussian_kernel(sigma)?;
    let radius = (kernel.len() / 2) as i64;
    let (w, h) = map.dims();
    let src = map.data();

    let mut horizontal = vec![0.0; w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (k, weight) in kernel.iter().enumerate() {
                acc += weight * row[clamp_index(x as i64 + k as i64 - radius, w)];
            }
            horizontal[y * w + x] = acc;
        }
    }

    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, weight) in kernel.iter().enumerate() {
                acc += weight * horizontal[clamp_index(y as i64 + k as i64 - radius, h) * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    Ok(FloatMap::from_parts_unchecked(w, h, out))
}

pub fn gaussian_blur(image: &GrayImage, sigma: f64) -> Result<FloatMap> {
    blur_map(&image.to_float(), sigma)
}

/// 3×3 Sobel derivatives. `gx` grows to the right, `gy` grows downwards.
pub fn sobel_gradients(map: &FloatMap) -> Result<GradientPair> {
    let (w, h) = map.dims();
    if w < 3 || h < 3 {
        return Err(Error::TooSmall {
            width: w,
            height: h,
            min: 3,
        });
    }
    let src = map.data();
    let at = |x: i64, y: i64| src[clamp_index(y, h) * w + clamp_index(x, w)];
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let i = y as usize * w + x as usize;
            gx[i] = (at(x + 1, y - 1) - at(x - 1, y - 1))
                + 2.0 * (at(x + 1, y) - at(x - 1, y))
                + (at(x + 1, y + 1) - at(x - 1, y + 1));
            gy[i] = (at(x - 1, y + 1) - at(x - 1, y - 1))
                + 2.0 * (at(x, y + 1) - at(x, y - 1))
                + (at(x + 1, y + 1) - at(x + 1, y - 1));
        }
    }
    Ok(GradientPair {
        gx: FloatMap::from_parts_unchecked(w, h, gx),
        gy: FloatMap::from_parts_unchecked(w, h, gy),
    })
}

pub fn gradient_magnitude(g: &GradientPair) -> FloatMap {
    let (w, h) = g.gx.dims();
    let data = g
        .gx
        .data()
        .iter()
        .zip(g.gy.data())
        .map(|(x, y)| (x * x + y * y).sqrt())
        .collect();
    FloatMap::from_parts_unchecked(w, h, data)
}

/// Gradient direction quantized to the four NMS bins, expressed as the pixel
/// step along the gradient (x right, y down).
fn direction_step(gx: f64, gy: f64) -> (i64, i64) {
    // tan(22.5°) and tan(67.5°)
    const TAN_22_5: f64 = 0.414_213_562_373_095_1;
    const TAN_67_5: f64 = 2.414_213_562_373_095;
    let (ax, ay) = (gx.abs(), gy.abs());
    if ay <= ax * TAN_22_5 {
        (1, 0)
    } else if ay >= ax * TAN_67_5 {
        (0, 1)
    } else if (gx > 0.0) == (gy > 0.0) {
        (1, 1)
    } else {
        (-1, 1)
    }
}

/// Thin ridges of `magnitude` along the quantized gradient direction.
///
/// A pixel survives when it is strictly greater than its neighbor on the
/// backward side and greater than or equal to the one on the forward side, so
/// a two-pixel plateau straddling a step keeps exactly one pixel. Neighbors
/// outside the image count as zero.
pub fn non_maximum_suppression(magnitude: &FloatMap, gradients: &GradientPair) -> BinaryMask {
    let (w, h) = magnitude.dims();
    let mag = magnitude.data();
    let sample = |x: i64, y: i64| {
        if x < 0 || y < 0 || x >= w as i64 || y >= h as i64 {
            0.0
        } else {
            mag[y as usize * w + x as usize]
        }
    };
    let mut keep = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let m = mag[i];
            if m <= 0.0 {
                continue;
            }
            let (dx, dy) = direction_step(gradients.gx.data()[i], gradients.gy.data()[i]);
            let (xi, yi) = (x as i64, y as i64);
            let back = sample(xi - dx, yi - dy);
            let fwd = sample(xi + dx, yi + dy);
            keep[i] = m > back && m >= fwd;
        }
    }
    BinaryMask::from_flags(w, h, &keep).expect("dimensions come from a valid map")
}

/// Double-threshold hysteresis over NMS survivors: pixels `>= high` seed the
/// edge set, which then grows through 8-connected survivors `>= low`.
pub fn hysteresis(magnitude: &FloatMap, suppressed: &BinaryMask, low: f64, high: f64) -> BinaryMask {
    let (w, h) = magnitude.dims();
    let mag = magnitude.data();
    let candidate = |i: usize| suppressed.is_set_index(i) && mag[i] >= low;
    let mut edge = vec![false; w * h];
    let mut queue = VecDeque::new();
    for i in 0..w * h {
        if candidate(i) && mag[i] >= high {
            edge[i] = true;
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        let (x, y) = ((i % w) as i64, (i / w) as i64);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if !edge[j] && candidate(j) {
                    edge[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }
    BinaryMask::from_flags(w, h, &edge).expect("dimensions come from a valid map")
}

/// Intermediate products of one Canny run.
#[derive(Debug, Clone)]
pub struct CannyStages {
    pub magnitude: FloatMap,
    pub suppressed: BinaryMask,
    pub edges: BinaryMask,
}

pub fn canny_stages(image: &GrayImage, params: &CannyParams) -> Result<CannyStages> {
    params.validate()?;
    let (w, h) = image.dims();
    if w < 3 || h < 3 {
        return Err(Error::TooSmall {
            width: w,
            height: h,
            min: 3,
        });
    }
    let blurred = gaussian_blur(image, params.sigma)?;
    let gradients = sobel_gradients(&blurred)?;
    let magnitude = gradient_magnitude(&gradients);
    let suppressed = non_maximum_suppression(&magnitude, &gradients);
    let edges = hysteresis(&magnitude, &suppressed, params.low, params.high);
    Ok(CannyStages {
        magnitude,
        suppressed,
        edges,
    })
}

pub fn canny(image: &GrayImage, params: &CannyParams) -> Result<BinaryMask> {
    canny_stages(image, params).map(|s| s.edges)
}

pub fn edge_sum(mask: &BinaryMask) -> usize {
    mask.count()
}
