#![no_main]

use interlayer::pipeline::AnalysisReport;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(report) = AnalysisReport::from_json(text) {
            let _ = report.to_json();
        }
    }
});
