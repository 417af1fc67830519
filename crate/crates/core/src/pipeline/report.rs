//! JSON analysis reports.
//!
//! Field order is fixed by the struct declarations below, reals are rounded
//! to six significant digits when records are built, and nothing
//! time-dependent is recorded, so identical runs produce identical bytes.
//! The schema is described in `docs/report-schema.md`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::attention::InterfaceMetrics;
use crate::error::{Error, Result};

pub const TOOL_NAME: &str = "interlayer";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Warning attached when the chosen threshold leaves the mask predominantly
/// black or white.
pub const DEGENERATE_WARNING: &str = "degenerate_segmentation";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub tool: String,
    pub tool_version: String,
    pub seed: u64,
    pub config_digest: String,
    pub samples: Vec<SampleRecord>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputFiles {
    pub segmented: Option<String>,
    pub overlay: Option<String>,
    pub composite: Option<String>,
    pub saliency: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub sample_id: String,
    pub input: String,
    pub threshold: Option<f64>,
    pub best_fitness: Option<f64>,
    pub iterations_used: Option<usize>,
    pub evaluations: Option<usize>,
    pub white_fraction: Option<f64>,
    pub edge_count: Option<usize>,
    pub hole_count: Option<usize>,
    pub metrics: Option<InterfaceMetrics>,
    pub outputs: Option<OutputFiles>,
    pub warnings: Vec<String>,
    pub error: Option<String>,
}

impl SampleRecord {
    pub fn failed(sample_id: impl Into<String>, input: impl Into<String>, error: impl Into<String>) -> Self {
        Self {
            sample_id: sample_id.into(),
            input: input.into(),
            threshold: None,
            best_fitness: None,
            iterations_used: None,
            evaluations: None,
            white_fraction: None,
            edge_count: None,
            hole_count: None,
            metrics: None,
            outputs: None,
            warnings: Vec::new(),
            error: Some(error.into()),
        }
    }

    pub fn is_failed(&self) -> bool {
        self.error.is_some()
    }
}

impl AnalysisReport {
    pub fn any_failed(&self) -> bool {
        self.samples.iter().any(SampleRecord::is_failed)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Rounds to six significant digits.
pub fn sig6(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    format!("{v:.5e}").parse().unwrap_or(v)
}

pub(crate) fn round_metrics(m: InterfaceMetrics) -> InterfaceMetrics {
    InterfaceMetrics {
        transition_sharpness: sig6(m.transition_sharpness),
        defect_density: sig6(m.defect_density),
        edge_density: sig6(m.edge_density),
        white_fraction: sig6(m.white_fraction),
        threshold: sig6(m.threshold),
    }
}

pub fn write_report(report: &AnalysisReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, report.to_json()?).map_err(|e| Error::io(path, e))
}

pub fn read_report(path: impl AsRef<Path>) -> Result<AnalysisReport> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    AnalysisReport::from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_report() -> AnalysisReport {
        let ok = SampleRecord {
            sample_id: "a".into(),
            input: "in/a.pgm".into(),
            threshold: Some(166.0),
            best_fitness: Some(512.0),
            iterations_used: Some(100),
            evaluations: Some(3030),
            white_fraction: Some(sig6(0.4123456789)),
            edge_count: Some(512),
            hole_count: Some(0),
            metrics: Some(round_metrics(InterfaceMetrics {
                transition_sharpness: 7.123456789,
                defect_density: 0.0,
                edge_density: 0.0078125,
                white_fraction: 0.4123456789,
                threshold: 166.0,
            })),
            outputs: Some(OutputFiles {
                segmented: Some("a_segmented.pgm".into()),
                ..Default::default()
            }),
            warnings: vec![],
            error: None,
        };
        AnalysisReport {
            tool: TOOL_NAME.into(),
            tool_version: TOOL_VERSION.into(),
            seed: 42,
            config_digest: "00".repeat(32),
            samples: vec![ok, SampleRecord::failed("b", "in/b.pgm", "unexpected end of data")],
        }
    }

    #[test]
    fn sig6_rounds() {
        assert_eq!(sig6(0.4123456789), 0.412346);
        assert_eq!(sig6(123456789.0), 123457000.0);
        assert_eq!(sig6(0.0), 0.0);
        assert_eq!(sig6(-1.23456789e-7), -1.23457e-7);
    }

    #[test]
    fn write_read_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.json");
        let report = sample_report();
        write_report(&report, &path).unwrap();
        assert_eq!(read_report(&path).unwrap(), report);
        let first = std::fs::read(&path).unwrap();
        write_report(&report, &path).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), first);
    }

    #[test]
    fn failed_record_has_error_and_null_metrics() {
        let json = sample_report().to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        let failed = &v["samples"][1];
        assert_eq!(failed["error"], "unexpected end of data");
        assert!(failed["metrics"].is_null());
        assert!(v["samples"][0]["error"].is_null());
    }

    #[test]
    fn key_order_is_fixed() {
        let json = sample_report().to_json().unwrap();
        let pos = |k: &str| json.find(&format!("\"{k}\"")).unwrap();
        assert!(pos("tool") < pos("tool_version"));
        assert!(pos("config_digest") < pos("samples"));
        assert!(pos("sample_id") < pos("threshold"));
        assert!(pos("threshold") < pos("best_fitness"));
        assert!(pos("hole_count") < pos("metrics"));
        assert!(!json.contains("time"));
    }

    #[test]
    fn malformed_json_errors() {
        assert!(AnalysisReport::from_json("{").is_err());
        assert!(AnalysisReport::from_json("{\"tool\": 3}").is_err());
    }
}
