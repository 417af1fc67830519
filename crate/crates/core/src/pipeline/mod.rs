//! Batch orchestration: per-sample analysis, rendering and reporting.

pub mod config;
pub mod phantom;
pub mod report;

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::attention::{
    attention_map, default_scale, interface_metrics, patch_features, saliency_map, self_attention,
    InterfaceMetrics,
};
use crate::edges::{blur_map, canny, edge_sum, gradient_magnitude, sobel_gradients};
use crate::error::{Error, Result};
use crate::geometry::{count_holes, distance_transform, DistanceField};
use crate::imaging::{binarize, foreground_fraction, load_image, normalize, save_image, BinaryMask, FloatMap, GrayImage};
use crate::pso::{optimize_threshold, PsoResult};
use crate::render::{apply_colormap, multichannel_composite, overlay, spatial_channel};

pub use config::{AnalysisConfig, Emit};
pub use phantom::{synth_sample, GroundTruth, PhantomSpec, Void};
pub use report::{read_report, write_report, AnalysisReport, OutputFiles, SampleRecord};

use report::{round_metrics, sig6, DEGENERATE_WARNING, TOOL_NAME, TOOL_VERSION};

/// Every intermediate product of segmenting one image at a fixed threshold.
#[derive(Debug, Clone)]
pub struct Segmentation {
    pub threshold: u8,
    pub deposit: BinaryMask,
    pub white_fraction: f64,
    pub edges: BinaryMask,
    pub distance: DistanceField,
    /// Gradient magnitude of the smoothed grayscale image.
    pub gradient: FloatMap,
    pub gradient_norm: FloatMap,
    pub attention: FloatMap,
    pub saliency: FloatMap,
    pub metrics: InterfaceMetrics,
    pub hole_count: usize,
}

/// Runs every stage after threshold selection.
pub fn segment(image: &GrayImage, threshold: u8, config: &AnalysisConfig) -> Result<Segmentation> {
    let canny_params = &config.fitness.canny;
    let deposit = binarize(image, threshold);
    let white_fraction = foreground_fraction(&deposit);
    let edges = canny(&deposit.to_gray(), canny_params)?;
    let distance = distance_transform(&edges)?;

    let smoothed = blur_map(&image.to_float(), canny_params.sigma)?;
    let gradient = gradient_magnitude(&sobel_gradients(&smoothed)?);
    let gradient_norm = normalize(&gradient);
    let attention = attention_map(&gradient_norm, &distance, &config.attention)?;

    let features = patch_features(image, &gradient_norm, config.attention.patch_size)?;
    let matrix = self_attention(&features, default_scale())?;
    let saliency = saliency_map(&matrix, features.grid, image.width(), image.height())?;

    let metrics = interface_metrics(
        &gradient,
        &deposit,
        &edges,
        &distance,
        f64::from(threshold),
        config.band_width,
    )?;
    let hole_count = count_holes(&deposit, config.min_hole_area);
    Ok(Segmentation {
        threshold,
        deposit,
        white_fraction,
        edges,
        distance,
        gradient,
        gradient_norm,
        attention,
        saliency,
        metrics,
        hole_count,
    })
}

/// Writes the requested visualizations as `<sample_id>_<kind>.p?m` under
/// `out_dir` and returns the file names.
pub fn render_outputs(
    sample_id: &str,
    image: &GrayImage,
    seg: &Segmentation,
    config: &AnalysisConfig,
    out_dir: &Path,
) -> Result<OutputFiles> {
    let mut files = OutputFiles::default();
    let emit = config.emit;
    if emit.mask {
        let name = format!("{sample_id}_segmented.pgm");
        save_image(&seg.deposit, out_dir.join(&name))?;
        files.segmented = Some(name);
    }
    if emit.overlay {
        let name = format!("{sample_id}_overlay.ppm");
        let img = overlay(image, &seg.attention, &config.colormap, config.overlay_alpha)?;
        save_image(&img, out_dir.join(&name))?;
        files.overlay = Some(name);
    }
    if emit.composite {
        let name = format!("{sample_id}_composite.ppm");
        let spatial = spatial_channel(&seg.distance, config.attention.decay)?;
        let img = multichannel_composite(&seg.gradient_norm, &spatial, image)?;
        save_image(&img, out_dir.join(&name))?;
        files.composite = Some(name);
    }
    if emit.saliency {
        let name = format!("{sample_id}_saliency.ppm");
        let (img, _) = apply_colormap(&seg.saliency, &config.colormap);
        save_image(&img, out_dir.join(&name))?;
        files.saliency = Some(name);
    }
    Ok(files)
}

fn build_record(
    sample_id: &str,
    input: &str,
    pso: Option<&PsoResult>,
    seg: &Segmentation,
    outputs: OutputFiles,
    config: &AnalysisConfig,
) -> SampleRecord {
    let mut warnings = Vec::new();
    if config.fitness.is_degenerate(seg.white_fraction) {
        warnings.push(DEGENERATE_WARNING.to_string());
    }
    SampleRecord {
        sample_id: sample_id.to_string(),
        input: input.to_string(),
        threshold: Some(f64::from(seg.threshold)),
        best_fitness: pso.map(|p| sig6(p.best_fitness)),
        iterations_used: pso.map(|p| p.history.len()),
        evaluations: pso.map(|p| p.evaluations),
        white_fraction: Some(sig6(seg.white_fraction)),
        edge_count: Some(edge_sum(&seg.edges)),
        hole_count: Some(seg.hole_count),
        metrics: Some(round_metrics(seg.metrics.clone())),
        outputs: Some(outputs),
        warnings,
        error: None,
    }
}

/// Optimizes, segments and renders one image.
pub fn analyze_image(
    sample_id: &str,
    input: &str,
    image: &GrayImage,
    config: &AnalysisConfig,
    out_dir: &Path,
) -> Result<SampleRecord> {
    let pso = optimize_threshold(image, &config.pso, &config.fitness)?;
    let threshold = pso.best_threshold.clamp(0.0, 255.0) as u8;
    let seg = segment(image, threshold, config)?;
    let outputs = render_outputs(sample_id, image, &seg, config, out_dir)?;
    Ok(build_record(sample_id, input, Some(&pso), &seg, outputs, config))
}

/// Segments and renders at a caller-chosen threshold, skipping optimization.
pub fn render_at_threshold(
    sample_id: &str,
    input: &str,
    image: &GrayImage,
    threshold: u8,
    config: &AnalysisConfig,
    out_dir: &Path,
) -> Result<SampleRecord> {
    let seg = segment(image, threshold, config)?;
    let outputs = render_outputs(sample_id, image, &seg, config, out_dir)?;
    Ok(build_record(sample_id, input, None, &seg, outputs, config))
}

fn is_image_file(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| matches!(e.to_ascii_lowercase().as_str(), "pgm" | "png"))
        .unwrap_or(false)
}

/// Expands directories to their `.pgm`/`.png` files and returns the sorted,
/// de-duplicated list. Paths that cannot be listed are kept as-is so the
/// failure is reported per sample.
pub fn collect_inputs(inputs: &[PathBuf]) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            match std::fs::read_dir(p) {
                Ok(entries) => out.extend(
                    entries
                        .filter_map(|e| e.ok().map(|e| e.path()))
                        .filter(|q| q.is_file() && is_image_file(q)),
                ),
                Err(_) => out.push(p.clone()),
            }
        } else {
            out.push(p.clone());
        }
    }
    out.sort();
    out.dedup();
    out
}

/// Stable, unique sample ids derived from file stems.
fn sample_ids(paths: &[PathBuf]) -> Vec<String> {
    let mut seen: HashMap<String, usize> = HashMap::new();
    paths
        .iter()
        .map(|p| {
            let stem = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .filter(|s| !s.is_empty())
                .unwrap_or_else(|| "sample".to_string());
            let n = seen.entry(stem.clone()).or_insert(0);
            *n += 1;
            if *n == 1 {
                stem
            } else {
                format!("{stem}-{n}")
            }
        })
        .collect()
}

/// Analyzes every input. A failing sample is recorded with its error and the
/// batch carries on; only an unusable output directory aborts the run.
pub fn run_analysis(config: &AnalysisConfig) -> Result<AnalysisReport> {
    config.validate()?;
    std::fs::create_dir_all(&config.output_dir).map_err(|e| Error::io(&config.output_dir, e))?;
    let paths = collect_inputs(&config.inputs);
    let ids = sample_ids(&paths);
    let samples: Vec<SampleRecord> = paths
        .par_iter()
        .zip(ids.par_iter())
        .map(|(path, id)| {
            let input = path.display().to_string();
            load_image(path)
                .and_then(|image| analyze_image(id, &input, &image, config, &config.output_dir))
                .unwrap_or_else(|e| SampleRecord::failed(id.as_str(), input.as_str(), e.to_string()))
        })
        .collect();
    Ok(AnalysisReport {
        tool: TOOL_NAME.to_string(),
        tool_version: TOOL_VERSION.to_string(),
        seed: config.pso.seed,
        config_digest: config.digest(),
        samples,
    })
}
