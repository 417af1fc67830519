//! False-color rendering: colormaps, attention overlays and the three-channel
//! interface composite.
//!
//! All float→byte conversions round half away from zero, so rendered bytes
//! are reproducible bit for bit.

use crate::error::{Error, Result};
use crate::geometry::DistanceField;
use crate::imaging::{ensure_same_dims, normalize, FloatMap, GrayImage, RgbImage};

#[derive(Debug, Clone, PartialEq)]
pub struct Colormap {
    anchors: Vec<(f64, [u8; 3])>,
}

impl Colormap {
    /// Anchors must start at 0, end at 1 and be strictly increasing.
    pub fn new(anchors: Vec<(f64, [u8; 3])>) -> Result<Self> {
        if anchors.len() < 2 {
            return Err(Error::invalid("colormap needs at least two anchors"));
        }
        if anchors[0].0 != 0.0 || anchors[anchors.len() - 1].0 != 1.0 {
            return Err(Error::invalid("colormap anchors must start at 0 and end at 1"));
        }
        if anchors.windows(2).any(|w| !(w[0].0 < w[1].0)) {
            return Err(Error::invalid("colormap anchor positions must be strictly increasing"));
        }
        Ok(Self { anchors })
    }

    pub fn anchors(&self) -> &[(f64, [u8; 3])] {
        &self.anchors
    }

    /// Color for a value already clamped to [0, 1], before rounding.
    fn interpolate(&self, v: f64) -> [f64; 3] {
        let a = &self.anchors;
        let seg = a
            .windows(2)
            .position(|w| v < w[1].0)
            .unwrap_or(a.len() - 2);
        let ((p0, c0), (p1, c1)) = (a[seg], a[seg + 1]);
        let t = (v - p0) / (p1 - p0);
        std::array::from_fn(|k| {
            let (lo, hi) = (f64::from(c0[k]), f64::from(c1[k]));
            lo + t * (hi - lo)
        })
    }

    pub fn color(&self, v: f64) -> [u8; 3] {
        self.interpolate(v.clamp(0.0, 1.0)).map(to_byte)
    }
}

impl Default for Colormap {
    /// dark blue → cyan → green-yellow → yellow
    fn default() -> Self {
        Self::new(vec![
            (0.0, [20, 20, 120]),
            (0.35, [0, 180, 200]),
            (0.70, [150, 220, 80]),
            (1.0, [255, 235, 40]),
        ])
        .expect("default anchors are valid")
    }
}

/// Rounds half away from zero and saturates to a byte.
pub fn to_byte(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Colors a [0, 1] map. Out-of-range inputs are clamped; the second return
/// value counts how many were.
pub fn apply_colormap(map: &FloatMap, cmap: &Colormap) -> (RgbImage, usize) {
    let (w, h) = map.dims();
    let mut clamped = 0;
    let mut data = Vec::with_capacity(3 * map.len());
    for &v in map.data() {
        if !(0.0..=1.0).contains(&v) {
            clamped += 1;
        }
        data.extend_from_slice(&cmap.color(v));
    }
    (RgbImage::new(w, h, data).expect("dims come from a valid map"), clamped)
}

/// Alpha-blends the colormapped attention over the grayscale base.
pub fn overlay(base: &GrayImage, attn: &FloatMap, cmap: &Colormap, alpha: f64) -> Result<RgbImage> {
    ensure_same_dims(base.dims(), attn.dims())?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!("overlay alpha must be in [0,1], got {alpha}")));
    }
    let (w, h) = base.dims();
    let mut data = Vec::with_capacity(3 * base.len());
    for (&g, &a) in base.data().iter().zip(attn.data()) {
        let color = cmap.interpolate(a.clamp(0.0, 1.0)).map(to_byte);
        for c in color {
            data.push(to_byte((1.0 - alpha) * f64::from(g) + alpha * f64::from(c)));
        }
    }
    RgbImage::new(w, h, data)
}

/// Interface proximity in [0, 1]: `normalize(exp(-dist / decay))`.
pub fn spatial_channel(dist: &DistanceField, decay: f64) -> Result<FloatMap> {
    if !(decay > 0.0 && decay.is_finite()) {
        return Err(Error::invalid(format!("decay must be > 0, got {decay}")));
    }
    Ok(normalize(&dist.map().map(|d| (-d / decay).exp())?))
}

/// R = boundary strength, G = interface proximity, B = raw intensity.
pub fn multichannel_composite(boundary: &FloatMap, spatial: &FloatMap, density: &GrayImage) -> Result<RgbImage> {
    ensure_same_dims(density.dims(), boundary.dims())?;
    ensure_same_dims(density.dims(), spatial.dims())?;
    let (w, h) = density.dims();
    let mut data = Vec::with_capacity(3 * density.len());
    for ((&r, &g), &b) in boundary.data().iter().zip(spatial.data()).zip(density.data()) {
        data.push(to_byte(255.0 * r.clamp(0.0, 1.0)));
        data.push(to_byte(255.0 * g.clamp(0.0, 1.0)));
        data.push(b);
    }
    RgbImage::new(w, h, data)
}
