//! Synthetic layered-deposition micrographs with exact ground truth.
//!
//! A bright deposit occupies the top of the frame and meets a darker
//! substrate along a U-shaped interface: a flat line at `interface_row` with a
//! semi-elliptical dip of `interface_depth` rows and `interface_width` columns
//! centered horizontally. Elliptical voids inside the deposit are rendered
//! with substrate intensity. Every pixel gets independent Gaussian noise drawn
//! in row-major order from a seeded splitmix64 stream.

use std::path::Path;

use crate::error::{Error, Result};
use crate::imaging::{BinaryMask, GrayImage};
use crate::pipeline::config::{parse_key_values, parse_reals};
use crate::pso::Prng;
use crate::render::to_byte;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Void {
    pub cx: f64,
    pub cy: f64,
    pub rx: f64,
    pub ry: f64,
}

impl Void {
    fn contains(&self, x: f64, y: f64, grow: f64) -> bool {
        let dx = (x - self.cx) / (self.rx + grow);
        let dy = (y - self.cy) / (self.ry + grow);
        dx * dx + dy * dy <= 1.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSpec {
    pub width: usize,
    pub height: usize,
    pub background_mean: f64,
    pub background_std: f64,
    pub deposit_mean: f64,
    pub deposit_std: f64,
    /// Row of the flat part of the interface; deposit lies above it.
    pub interface_row: f64,
    pub interface_depth: f64,
    pub interface_width: f64,
    pub voids: Vec<Void>,
    pub seed: u64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            width: 256,
            height: 256,
            background_mean: 130.0,
            background_std: 12.0,
            deposit_mean: 202.0,
            deposit_std: 12.0,
            interface_row: 100.0,
            interface_depth: 60.0,
            interface_width: 160.0,
            voids: Vec::new(),
            seed: 1,
        }
    }
}

/// Exact ground truth of a rendered phantom.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// Deposit material, voids excluded.
    pub deposit: BinaryMask,
    /// Union of all voids.
    pub voids: BinaryMask,
    /// One mask per void, in spec order.
    pub void_masks: Vec<BinaryMask>,
    /// Interface row per column.
    pub interface: Vec<f64>,
}

impl PhantomSpec {
    pub fn interface_y(&self, x: f64) -> f64 {
        let cx = (self.width as f64 - 1.0) / 2.0;
        let u = 2.0 * (x - cx) / self.interface_width;
        if u.abs() < 1.0 {
            self.interface_row + self.interface_depth * (1.0 - u * u).sqrt()
        } else {
            self.interface_row
        }
    }

    fn in_deposit(&self, x: f64, y: f64) -> bool {
        y < self.interface_y(x)
    }

    /// Midpoint between the two class means.
    pub fn class_midpoint(&self) -> f64 {
        (self.background_mean + self.deposit_mean) / 2.0
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::invalid(format!("phantom: {m}")));
        if self.width < 8 || self.height < 8 {
            return bad(format!("size {}x{} is below 8x8", self.width, self.height));
        }
        if self.width.saturating_mul(self.height) > 1 << 26 {
            return bad(format!("size {}x{} is too large", self.width, self.height));
        }
        for (name, m) in [("background", self.background_mean), ("deposit", self.deposit_mean)] {
            if !(0.0..=255.0).contains(&m) {
                return bad(format!("{name} mean {m} outside [0,255]"));
            }
        }
        for (name, s) in [("background", self.background_std), ("deposit", self.deposit_std)] {
            if !(s >= 0.0 && s.is_finite()) {
                return bad(format!("{name} std {s} must be >= 0"));
            }
        }
        if self.deposit_mean <= self.background_mean {
            return bad("deposit mean must exceed background mean".into());
        }
        let h = self.height as f64;
        if !(self.interface_row >= 1.0 && self.interface_row < h - 1.0) {
            return bad(format!("interface row {} outside the frame", self.interface_row));
        }
        if !(self.interface_depth >= 0.0 && self.interface_row + self.interface_depth < h - 1.0) {
            return bad(format!("interface depth {} leaves the frame", self.interface_depth));
        }
        if !(self.interface_width > 0.0 && self.interface_width.is_finite()) {
            return bad(format!("interface width {} must be > 0", self.interface_width));
        }
        for (i, v) in self.voids.iter().enumerate() {
            if !(v.rx > 0.0 && v.ry > 0.0 && v.cx.is_finite() && v.cy.is_finite()) {
                return bad(format!("void {i} has non-positive radii"));
            }
            // the void plus a one-pixel rim must sit strictly inside the deposit
            let (x0, x1) = ((v.cx - v.rx - 2.0).floor(), (v.cx + v.rx + 2.0).ceil());
            let (y0, y1) = ((v.cy - v.ry - 2.0).floor(), (v.cy + v.ry + 2.0).ceil());
            let mut any = false;
            let mut y = y0;
            while y <= y1 {
                let mut x = x0;
                while x <= x1 {
                    if v.contains(x, y, 1.0) {
                        let inside_frame = x >= 1.0 && y >= 1.0 && x < self.width as f64 - 1.0 && y < h - 1.0;
                        if !inside_frame || !self.in_deposit(x, y) {
                            return bad(format!("void {i} is not enclosed by deposit"));
                        }
                    }
                    any |= v.contains(x, y, 0.0);
                    x += 1.0;
                }
                y += 1.0;
            }
            if !any {
                return bad(format!("void {i} covers no pixel center"));
            }
        }
        Ok(())
    }

    /// Reads a spec in the same `key = value` format as analysis configs.
    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = PhantomSpec::default();
        for e in parse_key_values(text, &["void"])? {
            match e.key.as_str() {
                "width" => spec.width = e.parse()?,
                "height" => spec.height = e.parse()?,
                "background.mean" => spec.background_mean = e.parse()?,
                "background.std" => spec.background_std = e.parse()?,
                "deposit.mean" => spec.deposit_mean = e.parse()?,
                "deposit.std" => spec.deposit_std = e.parse()?,
                "interface.row" => spec.interface_row = e.parse()?,
                "interface.depth" => spec.interface_depth = e.parse()?,
                "interface.width" => spec.interface_width = e.parse()?,
                "void" => {
                    let [cx, cy, rx, ry] = parse_reals::<4>(&e.value).map_err(|m| e.error(m))?;
                    spec.voids.push(Void { cx, cy, rx, ry });
                }
                "seed" => spec.seed = e.parse()?,
                other => {
                    return Err(Error::Config {
                        line: e.line,
                        message: format!("unknown phantom key `{other}`"),
                    })
                }
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "width = {}\nheight = {}\nbackground.mean = {}\nbackground.std = {}\ndeposit.mean = {}\ndeposit.std = {}\ninterface.row = {}\ninterface.depth = {}\ninterface.width = {}\n",
            self.width,
            self.height,
            self.background_mean,
            self.background_std,
            self.deposit_mean,
            self.deposit_std,
            self.interface_row,
            self.interface_depth,
            self.interface_width
        );
        for v in &self.voids {
            s.push_str(&format!("void = {},{},{},{}\n", v.cx, v.cy, v.rx, v.ry));
        }
        s.push_str(&format!("seed = {}\n", self.seed));
        s
    }

    /// Five samples standing in for a series of deposits processed under
    /// different conditions. Class-mean midpoints are 156, 166, 167, 170, 173.
    pub fn mld_series() -> Vec<(String, PhantomSpec)> {
        let make = |mid: f64, depth: f64, width: f64, voids: Vec<Void>, seed: u64| PhantomSpec {
            background_mean: mid - 36.0,
            deposit_mean: mid + 36.0,
            interface_depth: depth,
            interface_width: width,
            voids,
            seed,
            ..PhantomSpec::default()
        };
        let v = |cx, cy, rx, ry| Void { cx, cy, rx, ry };
        vec![
            ("mld-m1".into(), make(156.0, 70.0, 170.0, vec![v(60.0, 50.0, 6.0, 4.0)], 11)),
            ("mld-m2".into(), make(166.0, 45.0, 190.0, vec![], 12)),
            ("mld-m3".into(), make(167.0, 60.0, 150.0, vec![v(40.0, 40.0, 4.0, 4.0), v(200.0, 60.0, 5.0, 3.0)], 13)),
            ("mld-m4".into(), make(170.0, 55.0, 160.0, vec![v(180.0, 70.0, 7.0, 5.0)], 14)),
            (
                "mld-m5".into(),
                make(173.0, 80.0, 140.0, vec![v(50.0, 30.0, 4.0, 3.0), v(128.0, 80.0, 6.0, 6.0), v(210.0, 45.0, 5.0, 4.0)], 15),
            ),
        ]
    }
}

/// Renders the phantom image and its ground truth.
pub fn synth_sample(spec: &PhantomSpec) -> Result<(GrayImage, GroundTruth)> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let mut rng = Prng::new(spec.seed);
    let mut pixels = Vec::with_capacity(w * h);
    let mut deposit = Vec::with_capacity(w * h);
    let mut in_void = Vec::with_capacity(w * h);
    let mut per_void = vec![vec![false; w * h]; spec.voids.len()];
    for y in 0..h {
        for x in 0..w {
            let (fx, fy) = (x as f64, y as f64);
            let mut void_hit = false;
            for (k, v) in spec.voids.iter().enumerate() {
                if v.contains(fx, fy, 0.0) {
                    per_void[k][y * w + x] = true;
                    void_hit = true;
                }
            }
            let material = spec.in_deposit(fx, fy) && !void_hit;
            let (mean, std) = if material {
                (spec.deposit_mean, spec.deposit_std)
            } else {
                (spec.background_mean, spec.background_std)
            };
            let z = rng.next_gaussian();
            pixels.push(to_byte(mean + std * z));
            deposit.push(material);
            in_void.push(void_hit);
        }
    }
    let truth = GroundTruth {
        deposit: BinaryMask::from_flags(w, h, &deposit)?,
        voids: BinaryMask::from_flags(w, h, &in_void)?,
        void_masks: per_void
            .iter()
            .map(|f| BinaryMask::from_flags(w, h, f))
            .collect::<Result<_>>()?,
        interface: (0..w).map(|x| spec.interface_y(x as f64)).collect(),
    };
    Ok((GrayImage::new(w, h, pixels)?, truth))
}
