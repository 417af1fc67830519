//! Flat `key = value` configuration files.
//!
//! One setting per line, `#` starts a comment, keys use dotted section
//! prefixes (`pso.swarm_size = 30`). List-valued keys (`input`, `void`) may
//! repeat; any other key may appear once.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::attention::AttentionParams;
use crate::error::{Error, Result};
use crate::pso::{FitnessParams, PsoConfig};
use crate::render::Colormap;

/// One parsed `key = value` line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

pub fn parse_key_values(text: &str, repeatable: &[&str]) -> Result<Vec<Entry>> {
    let mut seen = HashSet::new();
    let mut entries = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
            line,
            message: format!("expected `key = value`, got `{content}`"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        let valid_key = !key.is_empty()
            && key
                .chars()
                .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_' || c == '.');
        if !valid_key {
            return Err(Error::Config {
                line,
                message: format!("invalid key `{key}`"),
            });
        }
        if !repeatable.contains(&key) && !seen.insert(key.to_string()) {
            return Err(Error::Config {
                line,
                message: format!("duplicate key `{key}`"),
            });
        }
        entries.push(Entry {
            line,
            key: key.to_string(),
            value: value.to_string(),
        });
    }
    Ok(entries)
}

impl Entry {
    pub fn parse<T: FromStr>(&self) -> Result<T> {
        self.value.parse().map_err(|_| self.error(format!("cannot parse `{}`", self.value)))
    }

    pub fn reals<const N: usize>(&self) -> Result<[f64; N]> {
        parse_reals(&self.value).map_err(|m| self.error(m))
    }

    pub fn error(&self, message: impl std::fmt::Display) -> Error {
        Error::Config {
            line: self.line,
            message: format!("{}: {message}", self.key),
        }
    }
}

/// Parses exactly `N` comma-separated reals.
pub fn parse_reals<const N: usize>(s: &str) -> std::result::Result<[f64; N], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != N {
        return Err(format!("expected {N} comma-separated numbers, got `{s}`"));
    }
    let mut out = [0.0; N];
    for (slot, p) in out.iter_mut().zip(parts) {
        let v: f64 = p.parse().map_err(|_| format!("`{p}` is not a number"))?;
        if !v.is_finite() {
            return Err(format!("`{p}` is not finite"));
        }
        *slot = v;
    }
    Ok(out)
}

/// Which rendered images a run writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Emit {
    pub mask: bool,
    pub overlay: bool,
    pub composite: bool,
    pub saliency: bool,
}

impl Emit {
    pub const ALL: Emit = Emit {
        mask: true,
        overlay: true,
        composite: true,
        saliency: true,
    };
    pub const NONE: Emit = Emit {
        mask: false,
        overlay: false,
        composite: false,
        saliency: false,
    };
}

impl Default for Emit {
    fn default() -> Self {
        Emit::ALL
    }
}

impl FromStr for Emit {
    type Err = String;

    /// `all`, `none`, or a comma list of `mask`, `overlay`, `composite`, `saliency`.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let mut emit = Emit::NONE;
        for item in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match item {
                "all" => emit = Emit::ALL,
                "none" => {}
                "mask" => emit.mask = true,
                "overlay" => emit.overlay = true,
                "composite" => emit.composite = true,
                "saliency" => emit.saliency = true,
                other => return Err(format!("unknown emit target `{other}`")),
            }
        }
        Ok(emit)
    }
}

impl std::fmt::Display for Emit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let names: Vec<&str> = [
            (self.mask, "mask"),
            (self.overlay, "overlay"),
            (self.composite, "composite"),
            (self.saliency, "saliency"),
        ]
        .iter()
        .filter(|(on, _)| *on)
        .map(|(_, n)| *n)
        .collect();
        if names.is_empty() {
            write!(f, "none")
        } else {
            write!(f, "{}", names.join(","))
        }
    }
}

/// `pos:r,g,b;pos:r,g,b;...`
pub fn parse_colormap(s: &str) -> std::result::Result<Colormap, String> {
    let mut anchors = Vec::new();
    for part in s.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (pos, rgb) = part
            .split_once(':')
            .ok_or_else(|| format!("colormap anchor `{part}` must look like pos:r,g,b"))?;
        let pos: f64 = pos.trim().parse().map_err(|_| format!("bad anchor position `{pos}`"))?;
        let [r, g, b] = parse_reals::<3>(rgb)?;
        let byte = |v: f64| {
            if (0.0..=255.0).contains(&v) && v.fract() == 0.0 {
                Ok(v as u8)
            } else {
                Err(format!("color component {v} is not an integer in 0..=255"))
            }
        };
        anchors.push((pos, [byte(r)?, byte(g)?, byte(b)?]));
    }
    Colormap::new(anchors).map_err(|e| e.to_string())
}

pub fn format_colormap(cmap: &Colormap) -> String {
    cmap.anchors()
        .iter()
        .map(|(p, [r, g, b])| format!("{p}:{r},{g},{b}"))
        .collect::<Vec<_>>()
        .join(";")
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisConfig {
    pub inputs: Vec<PathBuf>,
    pub output_dir: PathBuf,
    pub pso: PsoConfig,
    /// Segmentation fitness; its Canny parameters are also used to extract
    /// the interface edges for visualization.
    pub fitness: FitnessParams,
    pub attention: AttentionParams,
    /// Half-width (pixels) of the interface band used for sharpness.
    pub band_width: f64,
    /// Enclosed holes smaller than this are treated as noise when counting voids.
    pub min_hole_area: usize,
    pub colormap: Colormap,
    pub overlay_alpha: f64,
    pub emit: Emit,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            inputs: Vec::new(),
            output_dir: PathBuf::from("out"),
            pso: PsoConfig::default(),
            fitness: FitnessParams::default(),
            attention: AttentionParams::default(),
            band_width: 10.0,
            min_hole_area: 9,
            colormap: Colormap::default(),
            overlay_alpha: 0.6,
            emit: Emit::ALL,
        }
    }
}

impl AnalysisConfig {
    /// Parses a config file's text. Relative `input` and `output` paths are
    /// resolved against `base_dir`.
    pub fn from_str_with_base(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg = AnalysisConfig::default();
        for e in parse_key_values(text, &["input"])? {
            match e.key.as_str() {
                "input" => cfg.inputs.extend(
                    e.value
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(|s| base_dir.join(s)),
                ),
                "output" => cfg.output_dir = base_dir.join(&e.value),
                "seed" | "pso.seed" => cfg.pso.seed = e.parse()?,
                "pso.swarm_size" => cfg.pso.swarm_size = e.parse()?,
                "pso.max_iterations" | "pso.iterations" => cfg.pso.max_iterations = e.parse()?,
                "pso.bounds" => {
                    let [lo, hi] = e.reals()?;
                    cfg.pso.bounds = (lo, hi);
                }
                "pso.inertia" => cfg.pso.inertia = e.parse()?,
                "pso.cognitive" => cfg.pso.cognitive = e.parse()?,
                "pso.social" => cfg.pso.social = e.parse()?,
                "pso.velocity_clamp" => cfg.pso.velocity_clamp_fraction = e.parse()?,
                "fitness.penalty_low" => cfg.fitness.penalty_low = e.parse()?,
                "fitness.penalty_high" => cfg.fitness.penalty_high = e.parse()?,
                "fitness.penalty_value" => {
                    cfg.fitness.penalty_value = match e.value.as_str() {
                        "auto" => None,
                        _ => Some(e.parse()?),
                    }
                }
                "canny.sigma" => cfg.fitness.canny.sigma = e.parse()?,
                "canny.low" => cfg.fitness.canny.low = e.parse()?,
                "canny.high" => cfg.fitness.canny.high = e.parse()?,
                "attention.floor" => cfg.attention.floor = e.parse()?,
                "attention.decay" => cfg.attention.decay = e.parse()?,
                "attention.patch_size" => cfg.attention.patch_size = e.parse()?,
                "band_width" | "geometry.band_width" => cfg.band_width = e.parse()?,
                "geometry.min_hole_area" => cfg.min_hole_area = e.parse()?,
                "render.alpha" => cfg.overlay_alpha = e.parse()?,
                "render.colormap" => cfg.colormap = parse_colormap(&e.value).map_err(|m| e.error(m))?,
                "emit" | "render.emit" => cfg.emit = e.value.parse().map_err(|m: String| e.error(m))?,
                other => {
                    return Err(Error::Config {
                        line: e.line,
                        message: format!("unknown key `{other}`"),
                    })
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_str_with_base(&text, base)
    }

    pub fn validate(&self) -> Result<()> {
        self.pso.validate()?;
        self.fitness.validate()?;
        self.attention.validate()?;
        if !(self.band_width > 0.0 && self.band_width.is_finite()) {
            return Err(Error::invalid(format!("band_width must be > 0, got {}", self.band_width)));
        }
        if !(0.0..=1.0).contains(&self.overlay_alpha) {
            return Err(Error::invalid(format!("render.alpha must be in [0,1], got {}", self.overlay_alpha)));
        }
        Ok(())
    }

    /// Every analysis setting in a fixed order, one `key = value` per line.
    /// Paths are left out so that relocating inputs or outputs does not
    /// change the digest.
    pub fn canonical_settings(&self) -> String {
        let mut s = String::new();
        let p = &self.pso;
        let f = &self.fitness;
        let a = &self.attention;
        let _ = writeln!(s, "seed = {}", p.seed);
        let _ = writeln!(s, "pso.swarm_size = {}", p.swarm_size);
        let _ = writeln!(s, "pso.max_iterations = {}", p.max_iterations);
        let _ = writeln!(s, "pso.bounds = {:?},{:?}", p.bounds.0, p.bounds.1);
        let _ = writeln!(s, "pso.inertia = {:?}", p.inertia);
        let _ = writeln!(s, "pso.cognitive = {:?}", p.cognitive);
        let _ = writeln!(s, "pso.social = {:?}", p.social);
        let _ = writeln!(s, "pso.velocity_clamp = {:?}", p.velocity_clamp_fraction);
        let _ = writeln!(s, "fitness.penalty_low = {:?}", f.penalty_low);
        let _ = writeln!(s, "fitness.penalty_high = {:?}", f.penalty_high);
        match f.penalty_value {
            Some(v) => {
                let _ = writeln!(s, "fitness.penalty_value = {v:?}");
            }
            None => {
                let _ = writeln!(s, "fitness.penalty_value = auto");
            }
        }
        let _ = writeln!(s, "canny.sigma = {:?}", f.canny.sigma);
        let _ = writeln!(s, "canny.low = {:?}", f.canny.low);
        let _ = writeln!(s, "canny.high = {:?}", f.canny.high);
        let _ = writeln!(s, "attention.floor = {:?}", a.floor);
        let _ = writeln!(s, "attention.decay = {:?}", a.decay);
        let _ = writeln!(s, "attention.patch_size = {}", a.patch_size);
        let _ = writeln!(s, "geometry.band_width = {:?}", self.band_width);
        let _ = writeln!(s, "geometry.min_hole_area = {}", self.min_hole_area);
        let _ = writeln!(s, "render.alpha = {:?}", self.overlay_alpha);
        let _ = writeln!(s, "render.colormap = {}", format_colormap(&self.colormap));
        let _ = writeln!(s, "emit = {}", self.emit);
        s
    }

    /// Hex SHA-256 of [`canonical_settings`](Self::canonical_settings).
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.canonical_settings().as_bytes());
        hash.iter().fold(String::with_capacity(64), |mut acc, b| {
            let _ = write!(acc, "{b:02x}");
            acc
        })
    }
}
